//! Entrywise certification of propagator matrices: positivity, sub-Markov
//! contractivity, and domination between semigroups.
//!
//! With a diagonal mass matrix, `S(t) ≥ 0` on nodal coefficients is positivity
//! of the discrete semigroup, and `S(t) ≤ T(t)` entrywise is domination in the
//! positive-operator sense.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::forms::{assemble_operator, dirichlet_operator};
use crate::measures::{effective_local_measure, marginal_measure, BoundaryMeasure, JumpMeasure};
use crate::mesh::Mesh;
use crate::spectral::{decompose, Propagator, SpectralDecomposition};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

pub fn default_t_grid() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0, 10.0]
}

/// Matrix entry (or row, for row-sum checks) where a check is tightest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub row: usize,
    pub col: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub witness: Option<Witness>,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, worst_violation: f64, witness: Option<Witness>, tolerance: f64) -> Self {
        CheckReport {
            name: name.into(),
            passed: worst_violation <= tolerance,
            worst_violation,
            witness,
            tolerance,
        }
    }
}

/// Position and value of the largest entry of `m`; ties keep the first in
/// row-major order.
fn argmax(m: &DMatrix<f64>) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if best.is_none_or(|b| v > b.2) {
                best = Some((i, j, v));
            }
        }
    }
    best
}

pub fn positivity_check(p: &Propagator, tol: f64) -> CheckReport {
    let neg = -&p.matrix;
    let (i, j, v) = argmax(&neg).unwrap_or((0, 0, 0.0));
    CheckReport::new("positivity", v.max(0.0), Some(Witness { t: p.t, row: i, col: Some(j) }), tol)
}

/// `0 ≤ P·1 ≤ 1` row by row.
pub fn submarkov_check(p: &Propagator, tol: f64) -> CheckReport {
    let sums = &p.matrix * DVector::from_element(p.matrix.ncols(), 1.0);
    let mut worst = (0, f64::NEG_INFINITY);
    for (i, s) in sums.iter().enumerate() {
        let v = (s - 1.0).max(-s);
        if v > worst.1 {
            worst = (i, v);
        }
    }
    CheckReport::new("sub_markov", worst.1.max(0.0), Some(Witness { t: p.t, row: worst.0, col: None }), tol)
}

/// `low ≤ high` entrywise.
pub fn domination_check(low: &Propagator, high: &Propagator, tol: f64) -> Result<CheckReport> {
    if low.matrix.shape() != high.matrix.shape() {
        return Err(Error::invalid(format!(
            "cannot compare propagators of shapes {:?} and {:?}",
            low.matrix.shape(),
            high.matrix.shape()
        )));
    }
    if low.t != high.t {
        return Err(Error::invalid(format!("propagators at different times ({} vs {})", low.t, high.t)));
    }
    let gap = &low.matrix - &high.matrix;
    let (i, j, v) = argmax(&gap).unwrap_or((0, 0, 0.0));
    Ok(CheckReport::new("domination", v.max(0.0), Some(Witness { t: low.t, row: i, col: Some(j) }), tol))
}

/// The four semigroups involved in the domination chain for one `(κ, θ)`,
/// decomposed once and evaluated at any time.
pub struct SemigroupFamily {
    nonlocal: SpectralDecomposition,
    local: SpectralDecomposition,
    neumann: SpectralDecomposition,
    dirichlet: Option<(SpectralDecomposition, crate::forms::DirichletOperator)>,
}

impl SemigroupFamily {
    /// Builds the nonlocal, local (`κ + 2θ̂`), Neumann and, when the mesh has
    /// interior nodes, Dirichlet decompositions.
    pub fn new(kappa: &BoundaryMeasure, theta: &JumpMeasure, mesh: &Mesh) -> Result<Self> {
        let forms = assemble_operator(kappa, theta, mesh)?;
        let eff = effective_local_measure(kappa, &marginal_measure(theta, mesh)?)?;
        let local = assemble_operator(&eff, &JumpMeasure::zero(), mesh)?;
        let zero = BoundaryMeasure::zero(mesh);
        let neumann = assemble_operator(&zero, &JumpMeasure::zero(), mesh)?;
        let dirichlet = match dirichlet_operator(mesh) {
            Ok(d) => Some((decompose(&d.stiffness.to_dense(), &d.mass)?, d)),
            Err(_) => None,
        };
        Ok(SemigroupFamily {
            nonlocal: decompose(&forms.operator_dense(), &forms.mass)?,
            local: decompose(&local.operator_dense(), &local.mass)?,
            neumann: decompose(&neumann.operator_dense(), &neumann.mass)?,
            dirichlet,
        })
    }

    pub fn nonlocal(&self, t: f64) -> Result<Propagator> {
        self.nonlocal.propagator(t)
    }

    pub fn local(&self, t: f64) -> Result<Propagator> {
        self.local.propagator(t)
    }

    pub fn neumann(&self, t: f64) -> Result<Propagator> {
        self.neumann.propagator(t)
    }

    /// Dirichlet propagator zero-extended to the full node set.
    pub fn dirichlet(&self, t: f64) -> Result<Propagator> {
        let (dec, op) = self.dirichlet.as_ref().ok_or_else(|| Error::invalid("mesh has no interior nodes"))?;
        let p = dec.propagator(t)?;
        Ok(Propagator { t, matrix: op.zero_extend_matrix(&p.matrix) })
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid(format!("time grid entries must be positive, got {t}")));
    }
    Ok(())
}

/// Searches for entries where the nonlocal semigroup exceeds the Neumann one.
///
/// `passed` means Neumann domination holds on the grid. For a nonzero jump
/// measure the expected outcome is a failure with a witness: for short times
/// `P − P_N ≈ t M⁻¹(2W − B − 2 diag θ̂)`, whose entry at an atom pair `(p, q)`
/// is `t·w/M_pp > 0`.
pub fn neumann_violation_probe(
    kappa: &BoundaryMeasure,
    theta: &JumpMeasure,
    mesh: &Mesh,
    t_grid: &[f64],
    tol: f64,
) -> Result<CheckReport> {
    check_grid(t_grid)?;
    let family = SemigroupFamily::new(kappa, theta, mesh)?;
    let mut worst = CheckReport::new("neumann_domination", 0.0, None, tol);
    for &t in t_grid {
        let r = domination_check(&family.nonlocal(t)?, &family.neumann(t)?, tol)?;
        if worst.witness.is_none() || r.worst_violation > worst.worst_violation {
            worst = CheckReport { name: worst.name.clone(), ..r };
        }
    }
    Ok(worst)
}

fn tagged(mut r: CheckReport, name: &str, t: f64) -> CheckReport {
    r.name = format!("{name}[t={t:e}]");
    r
}

/// Runs, at each time: positivity and sub-Markov checks of the nonlocal
/// semigroup, `P_D ≤ P`, `P_{κ+2θ̂} ≤ P`, and `P ≤ P_N`.
pub fn sandwich_report(
    kappa: &BoundaryMeasure,
    theta: &JumpMeasure,
    mesh: &Mesh,
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<CheckReport>> {
    check_grid(t_grid)?;
    let family = SemigroupFamily::new(kappa, theta, mesh)?;
    let per_time: Vec<Result<Vec<CheckReport>>> = t_grid
        .par_iter()
        .map(|&t| {
            let p = family.nonlocal(t)?;
            Ok(vec![
                tagged(positivity_check(&p, tol), "positivity", t),
                tagged(submarkov_check(&p, tol), "sub_markov", t),
                tagged(domination_check(&family.dirichlet(t)?, &p, tol)?, "dirichlet_le_nonlocal", t),
                tagged(domination_check(&family.local(t)?, &p, tol)?, "local_le_nonlocal", t),
                tagged(domination_check(&p, &family.neumann(t)?, tol)?, "neumann_domination", t),
            ])
        })
        .collect();
    let mut out = Vec::new();
    for r in per_time {
        out.extend(r?);
    }
    Ok(out)
}
