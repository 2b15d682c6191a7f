//! Boundary measures `κ`, jump measures `θ`, the marginal `θ̂(dx) = θ(dx × ∂Ω)`
//! and the admissibility rules for a pair `(κ, θ)`.
//!
//! All integrals use nodal quadrature: boundary node `i` carries the arc
//! weight `Δs_i` from [`Mesh::arc_weights`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mesh::{distance, Mesh};
use crate::{Error, Result};

fn check_weight(what: &str, w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be finite and nonnegative, got {w}")))
    }
}

/// A finite nonnegative measure on the boundary: piecewise-constant densities
/// plus atoms at boundary nodes.
///
/// Densities come in two flavours. `segment_density` is constant on each
/// boundary segment (2D only); `nodal_density` is a density sampled at each
/// boundary node and integrated against that node's arc weight. The latter is
/// how kernel marginals and 1D densities are represented.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeasure {
    n_nodes: usize,
    boundary_nodes: Vec<usize>,
    segment_density: Vec<f64>,
    nodal_density: Vec<f64>,
    atoms: BTreeMap<usize, f64>,
}

impl BoundaryMeasure {
    pub fn zero(mesh: &Mesh) -> Self {
        BoundaryMeasure {
            n_nodes: mesh.n_nodes(),
            boundary_nodes: mesh.boundary_nodes().to_vec(),
            segment_density: vec![0.0; mesh.boundary_segments().len()],
            nodal_density: vec![0.0; mesh.boundary_nodes().len()],
            atoms: BTreeMap::new(),
        }
    }

    /// Constant density `rho` with respect to surface measure (counting
    /// measure in 1D).
    pub fn uniform_density(mesh: &Mesh, rho: f64) -> Result<Self> {
        check_weight("density", rho)?;
        let mut m = Self::zero(mesh);
        if mesh.dim() == 1 {
            m.nodal_density.fill(rho);
        } else {
            m.segment_density.fill(rho);
        }
        Ok(m)
    }

    pub fn from_parts(
        mesh: &Mesh,
        segment_density: Vec<f64>,
        nodal_density: Vec<f64>,
        atoms: &[(usize, f64)],
    ) -> Result<Self> {
        let mut m = Self::zero(mesh);
        if segment_density.len() != m.segment_density.len() || nodal_density.len() != m.nodal_density.len() {
            return Err(Error::invalid("density vector length does not match the mesh boundary"));
        }
        for &d in segment_density.iter().chain(&nodal_density) {
            check_weight("density", d)?;
        }
        m.segment_density = segment_density;
        m.nodal_density = nodal_density;
        for &(node, w) in atoms {
            m.add_atom(node, w)?;
        }
        Ok(m)
    }

    /// Adds `weight·δ_node`, merging with an existing atom at the same node.
    pub fn add_atom(&mut self, node: usize, weight: f64) -> Result<()> {
        check_weight("atom weight", weight)?;
        if !self.boundary_nodes.contains(&node) {
            return Err(Error::invalid(format!("atom at node {node}, which is not a boundary node")));
        }
        *self.atoms.entry(node).or_insert(0.0) += weight;
        Ok(())
    }

    pub fn with_atom(mut self, node: usize, weight: f64) -> Result<Self> {
        self.add_atom(node, weight)?;
        Ok(self)
    }

    pub fn segment_density(&self) -> &[f64] {
        &self.segment_density
    }

    pub fn nodal_density(&self) -> &[f64] {
        &self.nodal_density
    }

    /// Atoms as `(node, weight)`, sorted by node.
    pub fn atoms(&self) -> Vec<(usize, f64)> {
        self.atoms.iter().map(|(&n, &w)| (n, w)).collect()
    }

    pub fn atom_weight(&self, node: usize) -> f64 {
        self.atoms.get(&node).copied().unwrap_or(0.0)
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.values().any(|&w| w > 0.0)
    }

    pub fn has_density(&self) -> bool {
        self.segment_density.iter().chain(&self.nodal_density).any(|&d| d > 0.0)
    }

    pub fn is_zero(&self) -> bool {
        !self.has_atoms() && !self.has_density()
    }

    fn same_layout(&self, other: &BoundaryMeasure) -> bool {
        self.n_nodes == other.n_nodes
            && self.boundary_nodes == other.boundary_nodes
            && self.segment_density.len() == other.segment_density.len()
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.n_nodes != mesh.n_nodes()
            || self.boundary_nodes != mesh.boundary_nodes()
            || self.segment_density.len() != mesh.boundary_segments().len()
        {
            return Err(Error::invalid("boundary measure was built on a different mesh"));
        }
        Ok(())
    }

    /// Lumped mass at each boundary node, in boundary-chain order.
    pub fn nodal_masses(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        self.check_mesh(mesh)?;
        let arc = mesh.arc_weights();
        let mut mass: Vec<f64> = self.nodal_density.iter().zip(&arc).map(|(d, w)| d * w).collect();
        for (seg, &rho) in mesh.boundary_segments().iter().zip(&self.segment_density) {
            for &n in &seg.nodes {
                mass[mesh.boundary_slot(n).unwrap()] += 0.5 * rho * seg.length;
            }
        }
        for (&node, &w) in &self.atoms {
            mass[mesh.boundary_slot(node).unwrap()] += w;
        }
        Ok(mass)
    }

    pub fn total_mass(&self, mesh: &Mesh) -> Result<f64> {
        Ok(self.nodal_masses(mesh)?.iter().sum())
    }

    /// `self + factor·other`
    pub fn add_scaled(&self, other: &BoundaryMeasure, factor: f64) -> Result<BoundaryMeasure> {
        check_weight("factor", factor)?;
        if !self.same_layout(other) {
            return Err(Error::invalid("boundary measures live on different meshes"));
        }
        let mut out = self.clone();
        for (a, b) in out.segment_density.iter_mut().zip(&other.segment_density) {
            *a += factor * b;
        }
        for (a, b) in out.nodal_density.iter_mut().zip(&other.nodal_density) {
            *a += factor * b;
        }
        for (&node, &w) in &other.atoms {
            *out.atoms.entry(node).or_insert(0.0) += factor * w;
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Result<BoundaryMeasure> {
        check_weight("scaling", c)?;
        let mut out = self.clone();
        out.segment_density.iter_mut().for_each(|d| *d *= c);
        out.nodal_density.iter_mut().for_each(|d| *d *= c);
        out.atoms.values_mut().for_each(|w| *w *= c);
        Ok(out)
    }
}

/// Interaction kernel `w(x, y)` of the absolutely continuous part of `θ`,
/// taken against surface measure on both factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Zero,
    Constant {
        c: f64,
    },
    /// `scale · max(|x − y|, ε)^{−(d − 1 + 2s)}`: the fractional kernel with
    /// its singularity flattened below distance `ε`.
    TruncatedFractional {
        s: f64,
        epsilon: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Zero => Ok(()),
            Kernel::Constant { c } => check_weight("kernel constant", c),
            Kernel::TruncatedFractional { s, epsilon, scale } => {
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::invalid(format!("fractional order must lie in (0, 1), got {s}")));
                }
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::invalid(format!("truncation radius must be positive, got {epsilon}")));
                }
                check_weight("kernel scale", scale)
            }
        }
    }

    /// Kernel value at separation `r > 0` for a domain of dimension `dim`.
    pub fn eval(&self, r: f64, dim: usize) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Constant { c } => c,
            Kernel::TruncatedFractional { s, epsilon, scale } => {
                scale * r.max(epsilon).powf(-((dim as f64 - 1.0) + 2.0 * s))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Kernel::Zero => true,
            Kernel::Constant { c } => c == 0.0,
            Kernel::TruncatedFractional { scale, .. } => scale == 0.0,
        }
    }

    fn scaled(&self, factor: f64) -> Kernel {
        match *self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Constant { c } => Kernel::Constant { c: c * factor },
            Kernel::TruncatedFractional { s, epsilon, scale } => {
                Kernel::TruncatedFractional { s, epsilon, scale: scale * factor }
            }
        }
    }
}

/// `weight · ½(δ_p ⊗ δ_q + δ_q ⊗ δ_p)`, stored with `p < q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomPair {
    p: usize,
    q: usize,
    weight: f64,
}

impl AtomPair {
    pub fn new(p: usize, q: usize, weight: f64) -> Result<Self> {
        if p == q {
            return Err(Error::invalid(format!("atom pair ({p}, {q}) lies on the diagonal")));
        }
        check_weight("pair weight", weight)?;
        Ok(AtomPair { p: p.min(q), q: p.max(q), weight })
    }

    pub fn nodes(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Symmetric measure on `∂Ω × ∂Ω` minus the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    kernel: Kernel,
    pairs: Vec<AtomPair>,
}

impl JumpMeasure {
    pub fn zero() -> Self {
        JumpMeasure { kernel: Kernel::Zero, pairs: Vec::new() }
    }

    pub fn new(kernel: Kernel, pairs: Vec<AtomPair>) -> Result<Self> {
        kernel.validate()?;
        Ok(JumpMeasure { kernel, pairs })
    }

    pub fn from_kernel(kernel: Kernel) -> Result<Self> {
        Self::new(kernel, Vec::new())
    }

    pub fn pair(p: usize, q: usize, weight: f64) -> Result<Self> {
        Self::new(Kernel::Zero, vec![AtomPair::new(p, q, weight)?])
    }

    pub fn with_pair(mut self, p: usize, q: usize, weight: f64) -> Result<Self> {
        self.pairs.push(AtomPair::new(p, q, weight)?);
        Ok(self)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn pairs(&self) -> &[AtomPair] {
        &self.pairs
    }

    pub fn is_zero(&self) -> bool {
        self.kernel.is_zero() && self.pairs.iter().all(|p| p.weight == 0.0)
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        for pair in &self.pairs {
            for n in [pair.p, pair.q] {
                if !mesh.is_boundary(n) {
                    return Err(Error::invalid(format!("atom pair touches node {n}, which is not a boundary node")));
                }
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Result<JumpMeasure> {
        check_weight("scaling", c)?;
        Ok(JumpMeasure {
            kernel: self.kernel.scaled(c),
            pairs: self.pairs.iter().map(|p| AtomPair { weight: p.weight * c, ..*p }).collect(),
        })
    }
}

/// `θ̂(dx) = θ(dx × ∂Ω)`. Each pair contributes `w/2` at both of its nodes;
/// the kernel part becomes a nodal density `Σ_{j≠i} w(x_i, x_j) Δs_j`.
pub fn marginal_measure(theta: &JumpMeasure, mesh: &Mesh) -> Result<BoundaryMeasure> {
    theta.check_mesh(mesh)?;
    let mut hat = BoundaryMeasure::zero(mesh);
    if !theta.kernel.is_zero() {
        let arc = mesh.arc_weights();
        let bnodes = mesh.boundary_nodes();
        for (i, &ni) in bnodes.iter().enumerate() {
            hat.nodal_density[i] = bnodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &nj)| theta.kernel.eval(distance(&mesh.nodes()[ni], &mesh.nodes()[nj]), mesh.dim()) * arc[j])
                .sum();
        }
    }
    for pair in &theta.pairs {
        hat.add_atom(pair.p, 0.5 * pair.weight)?;
        hat.add_atom(pair.q, 0.5 * pair.weight)?;
    }
    Ok(hat)
}

/// `κ + 2θ̂`, the local measure whose Robin semigroup sits below the nonlocal one.
pub fn effective_local_measure(kappa: &BoundaryMeasure, theta_hat: &BoundaryMeasure) -> Result<BoundaryMeasure> {
    kappa.add_scaled(theta_hat, 2.0)
}

pub fn scale_pair(kappa: &BoundaryMeasure, theta: &JumpMeasure, c: f64) -> Result<(BoundaryMeasure, JumpMeasure)> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("scaling factor must be finite and nonnegative, got {c}")));
    }
    Ok((kappa.scaled(c)?, theta.scaled(c)?))
}

/// Capacities of one boundary node over a sequence of refinement levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEvidence {
    /// Node index on the mesh the verdict is issued for.
    pub node: usize,
    pub mesh_sizes: Vec<f64>,
    pub capacities: Vec<f64>,
}

impl CapacityEvidence {
    pub fn strictly_decreasing(&self) -> bool {
        self.capacities.windows(2).all(|w| w[1] < w[0])
    }

    /// last / first
    pub fn decay_ratio(&self) -> f64 {
        match (self.capacities.first(), self.capacities.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub blocking: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityVerdict {
    pub admissible: bool,
    pub reasons: Vec<Finding>,
    pub capacity_evidence: Vec<CapacityEvidence>,
}

/// Rule-based admissibility of `(κ, θ)` through the measure `κ + θ̂`.
///
/// Densities never charge a capacity-null set. Atoms are fine in 1D, where a
/// boundary point has positive relative capacity, and disqualifying in 2D,
/// where single points are relatively polar.
pub fn admissibility_verdict(
    kappa: &BoundaryMeasure,
    theta: &JumpMeasure,
    mesh: &Mesh,
    evidence: Option<&[CapacityEvidence]>,
) -> Result<AdmissibilityVerdict> {
    let hat = marginal_measure(theta, mesh)?;
    let local = kappa.add_scaled(&hat, 1.0)?;
    let mut reasons = Vec::new();

    if local.has_density() {
        reasons.push(Finding {
            blocking: false,
            message: "density part of κ + θ̂ is absolutely continuous w.r.t. surface measure".into(),
        });
    }
    let atoms: Vec<(usize, f64)> = local.atoms().into_iter().filter(|&(_, w)| w > 0.0).collect();
    for &(node, w) in &atoms {
        let blocking = mesh.dim() >= 2;
        let message = if blocking {
            format!("atom of mass {w} at node {node}: single boundary points are relatively polar in dimension {}", mesh.dim())
        } else {
            format!("atom of mass {w} at node {node}: boundary points of an interval have positive relative capacity")
        };
        reasons.push(Finding { blocking, message });
    }
    if atoms.is_empty() && !local.has_density() {
        reasons.push(Finding { blocking: false, message: "κ + θ̂ is the zero measure".into() });
    }

    let mut capacity_evidence = Vec::new();
    for ev in evidence.unwrap_or(&[]) {
        if !atoms.iter().any(|&(n, _)| n == ev.node) {
            continue;
        }
        let (first, last) = (ev.capacities.first().copied().unwrap_or(f64::NAN), ev.capacities.last().copied().unwrap_or(f64::NAN));
        reasons.push(Finding {
            blocking: false,
            message: format!(
                "capacity of node {} over {} levels: {first:.6} → {last:.6} (ratio {:.3}, strictly decreasing: {})",
                ev.node,
                ev.capacities.len(),
                ev.decay_ratio(),
                if ev.strictly_decreasing() { "yes" } else { "no" }
            ),
        });
        capacity_evidence.push(ev.clone());
    }

    Ok(AdmissibilityVerdict {
        admissible: reasons.iter().all(|r| !r.blocking),
        reasons,
        capacity_evidence,
    })
}

/// An atom placed by arc-length position along the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionedAtom {
    pub position: f64,
    pub weight: f64,
}

/// An atom pair placed by arc-length positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionedPair {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
}

/// Mesh-independent description of a pair `(κ, θ)`; positions snap to the
/// nearest boundary node of whatever mesh the pair is realized on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurePairSpec {
    #[serde(default)]
    pub kappa_density: f64,
    #[serde(default)]
    pub kappa_atoms: Vec<PositionedAtom>,
    #[serde(default = "zero_kernel")]
    pub kernel: Kernel,
    #[serde(default)]
    pub pairs: Vec<PositionedPair>,
}

fn zero_kernel() -> Kernel {
    Kernel::Zero
}

impl Default for MeasurePairSpec {
    fn default() -> Self {
        MeasurePairSpec { kappa_density: 0.0, kappa_atoms: Vec::new(), kernel: Kernel::Zero, pairs: Vec::new() }
    }
}

impl MeasurePairSpec {
    pub fn realize(&self, mesh: &Mesh) -> Result<(BoundaryMeasure, JumpMeasure)> {
        let mut kappa = BoundaryMeasure::uniform_density(mesh, self.kappa_density)?;
        for atom in &self.kappa_atoms {
            kappa.add_atom(mesh.nearest_boundary_node(atom.position), atom.weight)?;
        }
        let pairs = self
            .pairs
            .iter()
            .map(|p| AtomPair::new(mesh.nearest_boundary_node(p.a), mesh.nearest_boundary_node(p.b), p.weight))
            .collect::<Result<Vec<_>>>()?;
        Ok((kappa, JumpMeasure::new(self.kernel, pairs)?))
    }

    pub fn scaled(&self, c: f64) -> MeasurePairSpec {
        MeasurePairSpec {
            kappa_density: self.kappa_density * c,
            kappa_atoms: self.kappa_atoms.iter().map(|a| PositionedAtom { weight: a.weight * c, ..*a }).collect(),
            kernel: self.kernel.scaled(c),
            pairs: self.pairs.iter().map(|p| PositionedPair { weight: p.weight * c, ..*p }).collect(),
        }
    }
}
