//! Resolvent convergence under scaling of the boundary measures, the monotone
//! quadratic diagnostic, and a consistency check between the variational and
//! direct resolvent solvers.
//!
//! Measure sequences are realized on a fixed mesh as scalings `c·(κ, θ)`. As
//! `c → ∞` the boundary terms act as a penalty and the resolvent tends to the
//! one of the operator pinned to zero on every charged boundary node.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::CheckReport;
use crate::forms::{assemble_lumped_mass, assemble_operator, assemble_stiffness, dirichlet_operator};
use crate::linalg::weighted_norm;
use crate::measures::{marginal_measure, scale_pair, BoundaryMeasure, JumpMeasure};
use crate::mesh::Mesh;
use crate::spectral::{dirichlet_principle_solve, quadratic_functional, resolvent_apply};
use crate::{Error, Result};

/// Tolerance of the monotonicity and lower-bound comparisons in
/// [`monotone_form_diagnostic`], relative to the largest quadratic value.
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

const PERTURBATION_SEED: u64 = 20_240_601;
const PERTURBATION_COUNT: usize = 100;

/// Operator the scaled resolvents are compared against.
#[derive(Debug, Clone)]
pub enum LimitOperator {
    /// Zero on every boundary node.
    Dirichlet,
    /// Zero on the listed nodes, no boundary term elsewhere. The natural limit
    /// when the measures charge only part of the boundary.
    Pinned(Vec<usize>),
    /// An operator `A` on the full node set, used with the lumped mass.
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub scalings: Vec<f64>,
    /// `‖u_c − u_limit‖_M`
    pub distances: Vec<f64>,
    /// `(f, R_c f)_M = fᵀM u_c / λ`
    pub quadratic_values: Vec<f64>,
    pub limit_value: f64,
    /// Same quadratic value for the operator without boundary terms.
    pub neumann_value: f64,
    pub scalings_increasing: bool,
    pub distances_strictly_decreasing: bool,
    pub quadratic_nonincreasing: bool,
}

/// Boundary nodes carrying positive mass of `κ + θ̂`.
pub fn charged_nodes(kappa: &BoundaryMeasure, theta: &JumpMeasure, mesh: &Mesh) -> Result<Vec<usize>> {
    let k = kappa.nodal_masses(mesh)?;
    let t = marginal_measure(theta, mesh)?.nodal_masses(mesh)?;
    Ok(mesh
        .boundary_nodes()
        .iter()
        .zip(k.iter().zip(&t))
        .filter(|(_, (a, b))| **a + **b > 0.0)
        .map(|(&n, _)| n)
        .collect())
}

fn pinned_resolvent(mesh: &Mesh, pinned: &[usize], lam: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    let n = mesh.n_nodes();
    let mut is_pinned = vec![false; n];
    for &p in pinned {
        if p >= n {
            return Err(Error::invalid(format!("pinned node {p} out of range")));
        }
        is_pinned[p] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_pinned[i]).collect();
    let mut u = DVector::zeros(n);
    if free.is_empty() {
        return Ok(u);
    }
    let k = assemble_stiffness(mesh).submatrix(&free, &free).to_dense();
    let m_full = assemble_lumped_mass(mesh);
    let m = DVector::from_iterator(free.len(), free.iter().map(|&i| m_full[i]));
    let fr = DVector::from_iterator(free.len(), free.iter().map(|&i| f[i]));
    let ur = resolvent_apply(&k, &m, lam, &fr)?;
    for (a, &i) in free.iter().enumerate() {
        u[i] = ur[a];
    }
    Ok(u)
}

fn limit_resolvent(limit: &LimitOperator, mesh: &Mesh, lam: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    match limit {
        LimitOperator::Dirichlet => {
            let d = dirichlet_operator(mesh)?;
            let u = resolvent_apply(&d.stiffness.to_dense(), &d.mass, lam, &d.restrict(f))?;
            Ok(d.zero_extend(&u))
        }
        LimitOperator::Pinned(nodes) => pinned_resolvent(mesh, nodes, lam, f),
        LimitOperator::Explicit(a) => {
            if a.nrows() != mesh.n_nodes() || a.ncols() != mesh.n_nodes() {
                return Err(Error::invalid("explicit limit operator does not match the mesh"));
            }
            resolvent_apply(a, &assemble_lumped_mass(mesh), lam, f)
        }
    }
}

/// Resolvents `u_c = λ(A_{cκ,cθ} + λM)⁻¹ M f` for each scaling `c`, compared
/// against the limit operator in the `M`-norm.
///
/// Without an explicit `limit` the measures must charge every boundary node,
/// so that the fixed-mesh limit is the Dirichlet operator. Scalings may come
/// in any order (the flags record whether they increase); negative ones are
/// rejected.
pub fn resolvent_convergence_study(
    kappa: &BoundaryMeasure,
    theta: &JumpMeasure,
    scalings: &[f64],
    lam: f64,
    f: &DVector<f64>,
    mesh: &Mesh,
    limit: Option<&LimitOperator>,
) -> Result<ConvergenceTable> {
    if scalings.is_empty() {
        return Err(Error::invalid("no scalings given"));
    }
    if let Some(c) = scalings.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::invalid(format!("scalings must be finite and nonnegative, got {c}")));
    }
    if f.len() != mesh.n_nodes() {
        return Err(Error::invalid(format!("forcing has length {}, expected {}", f.len(), mesh.n_nodes())));
    }
    let limit = match limit {
        Some(l) => l.clone(),
        None => {
            let charged = charged_nodes(kappa, theta, mesh)?;
            let missing: Vec<usize> =
                mesh.boundary_nodes().iter().copied().filter(|n| !charged.contains(n)).collect();
            if !missing.is_empty() {
                return Err(Error::invalid(format!(
                    "the measures leave boundary nodes {missing:?} uncharged, so the scaled resolvents do not \
                     tend to the Dirichlet resolvent on this mesh; pass the expected limit explicitly"
                )));
            }
            LimitOperator::Dirichlet
        }
    };
    let mass = assemble_lumped_mass(mesh);
    let quad = |u: &DVector<f64>| f.component_mul(&mass).dot(u) / lam;

    let u_limit = limit_resolvent(&limit, mesh, lam, f)?;
    let neumann = assemble_operator(&BoundaryMeasure::zero(mesh), &JumpMeasure::zero(), mesh)?;
    let u_neumann = resolvent_apply(&neumann.operator_dense(), &mass, lam, f)?;

    let per_scaling: Vec<(f64, f64)> = scalings
        .par_iter()
        .map(|&c| {
            let (k, t) = scale_pair(kappa, theta, c)?;
            let a = assemble_operator(&k, &t, mesh)?.operator_dense();
            let u = resolvent_apply(&a, &mass, lam, f)?;
            Ok((weighted_norm(&(&u - &u_limit), &mass), quad(&u)))
        })
        .collect::<Result<_>>()?;
    let (distances, quadratic_values): (Vec<f64>, Vec<f64>) = per_scaling.into_iter().unzip();

    Ok(ConvergenceTable {
        scalings_increasing: scalings.windows(2).all(|w| w[1] > w[0]),
        distances_strictly_decreasing: distances.windows(2).all(|w| w[1] < w[0]),
        quadratic_nonincreasing: quadratic_values.windows(2).all(|w| w[1] <= w[0]),
        scalings: scalings.to_vec(),
        distances,
        quadratic_values,
        limit_value: quad(&u_limit),
        neumann_value: quad(&u_neumann),
    })
}

/// Passes when the quadratic values never increase along the table and never
/// drop below the limit value, both up to [`MONOTONE_TOLERANCE`].
pub fn monotone_form_diagnostic(table: &ConvergenceTable) -> CheckReport {
    let q = &table.quadratic_values;
    let scale = q.iter().chain([&table.limit_value]).fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    let mut at = None;
    for (i, w) in q.windows(2).enumerate() {
        let rise = (w[1] - w[0]) / scale;
        if rise > worst {
            worst = rise;
            at = Some(i + 1);
        }
    }
    for (i, &v) in q.iter().enumerate() {
        let dip = (table.limit_value - v) / scale;
        if dip > worst {
            worst = dip;
            at = Some(i);
        }
    }
    let witness = at.map(|i| crate::checks::Witness { t: table.scalings[i], row: i, col: None });
    CheckReport::new("monotone_quadratic_values", worst, witness, MONOTONE_TOLERANCE)
}

/// Solves the resolvent problem twice, by minimizing the quadratic functional
/// with conjugate gradients and by Cholesky, and compares in the `M`-norm. The
/// variational solution must also beat 100 seeded random perturbations of
/// itself. The reported violation is the larger of the relative disagreement
/// and the relative amount by which any perturbation lowers the functional.
pub fn gamma_consistency_check(
    kappa: &BoundaryMeasure,
    theta: &JumpMeasure,
    lam: f64,
    f: &DVector<f64>,
    mesh: &Mesh,
    tol: f64,
) -> Result<CheckReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let forms = assemble_operator(kappa, theta, mesh)?;
    let sparse = forms.operator_sparse();
    let dense = forms.operator_dense();
    let mass = &forms.mass;
    let direct = resolvent_apply(&dense, mass, lam, f)?;
    let cg_tol = (tol * 1e-5).clamp(1e-14, 1e-6);
    let variational = dirichlet_principle_solve(&sparse, mass, lam, f, cg_tol)?.u;

    let norm = weighted_norm(&direct, mass);
    let diff = weighted_norm(&(&variational - &direct), mass);
    let disagreement = if norm > 0.0 { diff / norm } else { diff };

    let q0 = quadratic_functional(&sparse, mass, lam, f, &variational);
    let base = variational.amax().max(1.0);
    let mut rng = StdRng::seed_from_u64(PERTURBATION_SEED);
    let mut worst_drop = 0.0_f64;
    for _ in 0..PERTURBATION_COUNT {
        let size = base * 10f64.powf(-rng.random_range(0.0..3.0));
        let delta = DVector::from_fn(variational.len(), |_, _| size * rng.random_range(-1.0..1.0));
        let q = quadratic_functional(&sparse, mass, lam, f, &(&variational + delta));
        worst_drop = worst_drop.max((q0 - q) / q0.abs().max(1.0));
    }
    Ok(CheckReport::new("gamma_consistency", disagreement.max(worst_drop), None, tol))
}
