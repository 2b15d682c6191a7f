//! Galerkin matrices for the form
//! `E(u) = ∫|∇u|² + ∫u² dκ + ∬(u(x) − u(y))² dθ`
//! and its special cases (Neumann, local Robin, Dirichlet).
//!
//! Piecewise-linear elements, lumped mass, and nodal quadrature on the
//! boundary. With `W_ij = ∬ φ_i(x) φ_j(y) dθ` and `θ̂_i = Σ_j W_ij` the jump
//! matrix is `J = 2 diag(θ̂) − 2W`, which is the discrete form of
//! `∬(u(x) − u(y))² dθ = 2∫u² dθ̂ − 2∬u(x)u(y) dθ`.
//!
//! The jump and coupling matrices are stored as dense boundary × boundary
//! blocks; everything else is sparse or diagonal.

use nalgebra::{DMatrix, DVector};

use crate::linalg::CsrMatrix;
use crate::measures::{BoundaryMeasure, JumpMeasure};
use crate::mesh::{distance, Mesh};
use crate::{Error, Result};

/// Jump-related matrices, indexed by boundary-chain position.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMatrices {
    /// `W`: symmetric, zero diagonal, nonnegative.
    pub coupling: DMatrix<f64>,
    /// Nodal masses of `θ̂`: row sums of `W`.
    pub theta_hat: DVector<f64>,
    /// `J = 2 diag(θ̂) − 2W`
    pub jump: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FormMatrices {
    boundary: Vec<usize>,
    pub stiffness: CsrMatrix,
    /// Lumped mass, diagonal.
    pub mass: DVector<f64>,
    /// `∫uv dκ` with nodal quadrature, diagonal, zero at interior nodes.
    pub boundary_mass: DVector<f64>,
    pub jump: JumpMatrices,
}

/// Standard P1 stiffness matrix. Elements are visited in mesh order so the
/// result is reproducible.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    let nodes = mesh.nodes();
    let mut triplets = Vec::with_capacity(mesh.elements().len() * (mesh.dim() + 1).pow(2));
    for (e, el) in mesh.elements().iter().enumerate() {
        match mesh.dim() {
            1 => {
                let k = 1.0 / mesh.element_measure(e);
                triplets.extend([(el[0], el[0], k), (el[0], el[1], -k), (el[1], el[0], -k), (el[1], el[1], k)]);
            }
            _ => {
                let p = [nodes[el[0]], nodes[el[1]], nodes[el[2]]];
                // ∇φ_a = (b_a, c_a) / (2·area)
                let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
                let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
                let area = mesh.element_measure(e);
                for a in 0..3 {
                    for d in 0..3 {
                        triplets.push((el[a], el[d], (b[a] * b[d] + c[a] * c[d]) / (4.0 * area)));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_nodes(), mesh.n_nodes(), triplets)
}

/// `M_ii = Σ_{e ∋ i} |e| / (dim + 1)`
pub fn assemble_lumped_mass(mesh: &Mesh) -> DVector<f64> {
    let mut m = DVector::zeros(mesh.n_nodes());
    let share = 1.0 / (mesh.dim() + 1) as f64;
    for (e, el) in mesh.elements().iter().enumerate() {
        let w = mesh.element_measure(e) * share;
        for &n in el {
            m[n] += w;
        }
    }
    m
}

pub fn assemble_boundary_mass(kappa: &BoundaryMeasure, mesh: &Mesh) -> Result<DVector<f64>> {
    let masses = kappa.nodal_masses(mesh)?;
    let mut b = DVector::zeros(mesh.n_nodes());
    for (&node, m) in mesh.boundary_nodes().iter().zip(masses) {
        b[node] = m;
    }
    Ok(b)
}

pub fn assemble_jump(theta: &JumpMeasure, mesh: &Mesh) -> Result<JumpMatrices> {
    theta.check_mesh(mesh)?;
    let bnodes = mesh.boundary_nodes();
    let nb = bnodes.len();
    let mut w = DMatrix::zeros(nb, nb);

    if !theta.kernel().is_zero() {
        let arc = mesh.arc_weights();
        for i in 0..nb {
            for j in (i + 1)..nb {
                let r = distance(&mesh.nodes()[bnodes[i]], &mesh.nodes()[bnodes[j]]);
                let v = theta.kernel().eval(r, mesh.dim()) * arc[i] * arc[j];
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    for pair in theta.pairs() {
        let (p, q) = pair.nodes();
        let (i, j) = (mesh.boundary_slot(p).unwrap(), mesh.boundary_slot(q).unwrap());
        w[(i, j)] += 0.5 * pair.weight();
        w[(j, i)] += 0.5 * pair.weight();
    }

    let theta_hat = DVector::from_iterator(nb, w.row_iter().map(|r| r.sum()));
    let mut jump = &w * -2.0;
    for i in 0..nb {
        jump[(i, i)] += 2.0 * theta_hat[i];
    }
    Ok(JumpMatrices { coupling: w, theta_hat, jump })
}

pub fn assemble_operator(kappa: &BoundaryMeasure, theta: &JumpMeasure, mesh: &Mesh) -> Result<FormMatrices> {
    Ok(FormMatrices {
        boundary: mesh.boundary_nodes().to_vec(),
        stiffness: assemble_stiffness(mesh),
        mass: assemble_lumped_mass(mesh),
        boundary_mass: assemble_boundary_mass(kappa, mesh)?,
        jump: assemble_jump(theta, mesh)?,
    })
}

impl FormMatrices {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Embeds a boundary × boundary block into an `n × n` matrix.
    pub fn embed_boundary_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut full = DMatrix::zeros(self.n(), self.n());
        for (a, &i) in self.boundary.iter().enumerate() {
            for (b, &j) in self.boundary.iter().enumerate() {
                full[(i, j)] = block[(a, b)];
            }
        }
        full
    }

    pub fn coupling_full(&self) -> DMatrix<f64> {
        self.embed_boundary_block(&self.jump.coupling)
    }

    pub fn jump_full(&self) -> DMatrix<f64> {
        self.embed_boundary_block(&self.jump.jump)
    }

    /// `θ̂` nodal masses on the full node set.
    pub fn theta_hat_full(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n());
        for (a, &i) in self.boundary.iter().enumerate() {
            v[i] = self.jump.theta_hat[a];
        }
        v
    }

    /// `A = K + B + J`, dense.
    pub fn operator_dense(&self) -> DMatrix<f64> {
        let mut a = self.stiffness.to_dense();
        for i in 0..self.n() {
            a[(i, i)] += self.boundary_mass[i];
        }
        for (a_idx, &i) in self.boundary.iter().enumerate() {
            for (b_idx, &j) in self.boundary.iter().enumerate() {
                a[(i, j)] += self.jump.jump[(a_idx, b_idx)];
            }
        }
        a
    }

    /// `A = K + B + J`, sparse; the jump block contributes only its nonzeros.
    pub fn operator_sparse(&self) -> CsrMatrix {
        let mut t: Vec<_> = self.stiffness.triplets().collect();
        t.extend((0..self.n()).filter(|&i| self.boundary_mass[i] != 0.0).map(|i| (i, i, self.boundary_mass[i])));
        for (a, &i) in self.boundary.iter().enumerate() {
            for (b, &j) in self.boundary.iter().enumerate() {
                let v = self.jump.jump[(a, b)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(self.n(), self.n(), t)
    }

    /// `uᵀ (B + J) u`: the boundary part of the form.
    pub fn boundary_energy(&self, u: &DVector<f64>) -> f64 {
        let local: f64 = (0..self.n()).map(|i| self.boundary_mass[i] * u[i] * u[i]).sum();
        let ub = DVector::from_iterator(self.boundary.len(), self.boundary.iter().map(|&i| u[i]));
        local + ub.dot(&(&self.jump.jump * &ub))
    }
}

/// Stiffness and mass restricted to interior nodes: the discrete `H¹₀`
/// realization, plus the embedding back into the full node set.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    pub stiffness: CsrMatrix,
    pub mass: DVector<f64>,
    /// `interior[k]` is the full-mesh index of restricted unknown `k`.
    pub interior: Vec<usize>,
    n_full: usize,
}

pub fn dirichlet_operator(mesh: &Mesh) -> Result<DirichletOperator> {
    let interior = mesh.interior_nodes();
    if interior.is_empty() {
        return Err(Error::invalid("mesh has no interior nodes"));
    }
    let k = assemble_stiffness(mesh).submatrix(&interior, &interior);
    let m_full = assemble_lumped_mass(mesh);
    let mass = DVector::from_iterator(interior.len(), interior.iter().map(|&i| m_full[i]));
    Ok(DirichletOperator { stiffness: k, mass, interior, n_full: mesh.n_nodes() })
}

impl DirichletOperator {
    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn zero_extend(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.n_full);
        for (k, &i) in self.interior.iter().enumerate() {
            full[i] = u[k];
        }
        full
    }

    pub fn zero_extend_matrix(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let mut full = DMatrix::zeros(self.n_full, self.n_full);
        for (a, &i) in self.interior.iter().enumerate() {
            for (b, &j) in self.interior.iter().enumerate() {
                full[(i, j)] = p[(a, b)];
            }
        }
        full
    }

    pub fn restrict(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.interior.len(), self.interior.iter().map(|&i| u[i]))
    }
}
