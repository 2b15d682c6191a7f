//! Structured meshes: uniform intervals and rectangles split into right
//! triangles, with the boundary exposed as an ordered chain of nodes.
//!
//! In 1D the boundary is the two endpoints and carries counting measure: each
//! endpoint has unit arc weight and there are no boundary segments. In 2D the
//! boundary nodes run counter-clockwise around the perimeter starting at the
//! origin corner, and consecutive nodes (including last → first) form the
//! boundary segments.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Mesh-independent description of a domain and its resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSpec {
    Interval { n_cells: usize, length: f64 },
    Rectangle { nx: usize, ny: usize, lx: f64, ly: f64 },
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            MeshSpec::Interval { n_cells, length } => build_interval_mesh(n_cells, length),
            MeshSpec::Rectangle { nx, ny, lx, ly } => build_rectangle_mesh(nx, ny, lx, ly),
        }
    }

    /// Same domain with every cell split in two along each axis.
    pub fn refined(&self) -> MeshSpec {
        match *self {
            MeshSpec::Interval { n_cells, length } => MeshSpec::Interval { n_cells: 2 * n_cells, length },
            MeshSpec::Rectangle { nx, ny, lx, ly } => MeshSpec::Rectangle { nx: 2 * nx, ny: 2 * ny, lx, ly },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeshSpec::Interval { .. } => 1,
            MeshSpec::Rectangle { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub nodes: [usize; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    spec: MeshSpec,
    nodes: Vec<Point>,
    elements: Vec<Vec<usize>>,
    boundary_nodes: Vec<usize>,
    boundary_segments: Vec<BoundarySegment>,
    /// node index → position in `boundary_nodes`
    boundary_slot: Vec<Option<usize>>,
    h: f64,
}

fn check_length(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {value}")))
    }
}

pub fn build_interval_mesh(n_cells: usize, length: f64) -> Result<Mesh> {
    if n_cells == 0 {
        return Err(Error::invalid("interval mesh needs at least one cell"));
    }
    check_length("length", length)?;
    let nodes: Vec<Point> = (0..=n_cells).map(|i| [i as f64 * length / n_cells as f64, 0.0]).collect();
    let elements = (0..n_cells).map(|e| vec![e, e + 1]).collect();
    Ok(Mesh::new(
        MeshSpec::Interval { n_cells, length },
        nodes,
        elements,
        vec![0, n_cells],
        Vec::new(),
        length / n_cells as f64,
    ))
}

pub fn build_rectangle_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!("rectangle mesh needs nx, ny ≥ 1, got ({nx}, {ny})")));
    }
    check_length("lx", lx)?;
    check_length("ly", ly)?;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 * lx / nx as f64, j as f64 * ly / ny as f64]);
        }
    }
    // each cell split along its (i,j)–(i+1,j+1) diagonal; right angles sit at
    // the two off-diagonal corners
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            elements.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }

    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    boundary.extend((0..nx).map(|i| id(i, 0)));
    boundary.extend((0..ny).map(|j| id(nx, j)));
    boundary.extend((1..=nx).rev().map(|i| id(i, ny)));
    boundary.extend((1..=ny).rev().map(|j| id(0, j)));

    let segments = (0..boundary.len())
        .map(|k| {
            let a = boundary[k];
            let b = boundary[(k + 1) % boundary.len()];
            BoundarySegment { nodes: [a, b], length: distance(&nodes[a], &nodes[b]) }
        })
        .collect();

    let dx = lx / nx as f64;
    let dy = ly / ny as f64;
    Ok(Mesh::new(
        MeshSpec::Rectangle { nx, ny, lx, ly },
        nodes,
        elements,
        boundary,
        segments,
        dx.hypot(dy),
    ))
}

/// Uniform refinement: every cell is split in two along each axis.
pub fn refine(mesh: &Mesh) -> Mesh {
    mesh.spec.refined().build().expect("refining a valid mesh")
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    fn new(
        spec: MeshSpec,
        nodes: Vec<Point>,
        elements: Vec<Vec<usize>>,
        boundary_nodes: Vec<usize>,
        boundary_segments: Vec<BoundarySegment>,
        h: f64,
    ) -> Self {
        let mut boundary_slot = vec![None; nodes.len()];
        for (k, &n) in boundary_nodes.iter().enumerate() {
            boundary_slot[n] = Some(k);
        }
        Mesh { spec, nodes, elements, boundary_nodes, boundary_segments, boundary_slot, h }
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_segments(&self) -> &[BoundarySegment] {
        &self.boundary_segments
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Position of `node` in the boundary chain, if it is a boundary node.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot.get(node).copied().flatten()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_slot(node).is_some()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&n| !self.is_boundary(n)).collect()
    }

    /// Length (1D) or area (2D) of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        match self.dim() {
            1 => (self.nodes[el[1]][0] - self.nodes[el[0]][0]).abs(),
            _ => {
                let [a, b, c] = [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]];
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
            }
        }
    }

    /// |Ω|
    pub fn domain_measure(&self) -> f64 {
        match self.spec {
            MeshSpec::Interval { length, .. } => length,
            MeshSpec::Rectangle { lx, ly, .. } => lx * ly,
        }
    }

    /// Nodal arc weight of each boundary node, in boundary-chain order: half
    /// the length of the adjacent segments in 2D, 1 (counting measure) in 1D.
    pub fn arc_weights(&self) -> Vec<f64> {
        if self.dim() == 1 {
            return vec![1.0; self.boundary_nodes.len()];
        }
        let mut w = vec![0.0; self.boundary_nodes.len()];
        for seg in &self.boundary_segments {
            for &n in &seg.nodes {
                w[self.boundary_slot(n).unwrap()] += 0.5 * seg.length;
            }
        }
        w
    }

    /// Total boundary measure: the perimeter in 2D, the number of endpoints in 1D.
    pub fn boundary_mass(&self) -> f64 {
        match self.dim() {
            1 => self.boundary_nodes.len() as f64,
            _ => self.boundary_segments.iter().map(|s| s.length).sum(),
        }
    }

    /// Arc-length coordinate of each boundary node. In 1D this is the
    /// x-coordinate; in 2D the counter-clockwise distance from the origin
    /// corner, computed from the coordinates so that it is exact at every
    /// refinement level.
    pub fn arc_positions(&self) -> Vec<f64> {
        self.boundary_nodes.iter().map(|&n| self.arc_position_of(n)).collect()
    }

    fn arc_position_of(&self, node: usize) -> f64 {
        let [x, y] = self.nodes[node];
        match self.spec {
            MeshSpec::Interval { .. } => x,
            MeshSpec::Rectangle { lx, ly, .. } => {
                if y == 0.0 {
                    x
                } else if x == lx {
                    lx + y
                } else if y == ly {
                    lx + ly + (lx - x)
                } else {
                    2.0 * lx + ly + (ly - y)
                }
            }
        }
    }

    /// Boundary node closest to arc-length coordinate `arc`; ties go to the
    /// lowest node index. In 2D the coordinate wraps around the perimeter.
    pub fn nearest_boundary_node(&self, arc: f64) -> usize {
        let (wrap, arc) = match self.spec {
            MeshSpec::Interval { .. } => (None, arc),
            MeshSpec::Rectangle { lx, ly, .. } => {
                let p = 2.0 * (lx + ly);
                (Some(p), arc.rem_euclid(p))
            }
        };
        self.pick_nearest(|n| {
            let d = (self.arc_position_of(n) - arc).abs();
            wrap.map_or(d, |p| d.min(p - d))
        })
    }

    /// Boundary node closest (Euclidean) to `point`; ties go to the lowest
    /// node index.
    pub fn nearest_boundary_node_to(&self, point: &Point) -> usize {
        self.pick_nearest(|n| distance(&self.nodes[n], point))
    }

    fn pick_nearest(&self, dist: impl Fn(usize) -> f64) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for &n in &self.boundary_nodes {
            let cand = (dist(n), n);
            if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                best = cand;
            }
        }
        best.1
    }

    pub fn refine(&self) -> Mesh {
        refine(self)
    }
}
