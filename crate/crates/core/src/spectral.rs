//! Dense symmetric generalized eigenproblems `A v = λ M v`, heat propagators
//! `e^{−t M⁻¹A}`, and two independent routes to the resolvent
//! `(A + λM)⁻¹ λMf`: a Cholesky solve and a conjugate-gradient minimization of
//! the associated quadratic energy.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{conjugate_gradient, max_abs, ShiftedOperator, SymmetricOperator};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending, clamped at zero.
    pub eigenvalues: DVector<f64>,
    /// Columns are M-orthonormal: `VᵀMV = I`.
    pub eigenvectors: DMatrix<f64>,
    mass: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Propagator {
    pub t: f64,
    /// Maps nodal values at time 0 to nodal values at time `t`.
    pub matrix: DMatrix<f64>,
}

fn check_mass(mass: &DVector<f64>, n: usize) -> Result<()> {
    if mass.len() != n {
        return Err(Error::invalid(format!("mass has length {}, operator has dimension {n}", mass.len())));
    }
    if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
        return Err(Error::invalid(format!("mass entry {i} is not positive ({m})")));
    }
    Ok(())
}

/// Solves `A v = λ M v` through the similarity `M^{-1/2} A M^{-1/2}`.
pub fn decompose(a: &DMatrix<f64>, mass: &DVector<f64>) -> Result<SpectralDecomposition> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("operator matrix is not square"));
    }
    check_mass(mass, n)?;
    let scale = max_abs(a).max(1.0);
    let asym = max_abs(&(a - a.transpose()));
    if asym > 1e-12 * scale {
        return Err(Error::invalid(format!("operator matrix is not symmetric (max |A − Aᵀ| = {asym:e})")));
    }

    let inv_sqrt = mass.map(|m| 1.0 / m.sqrt());
    let mut s = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // A is positive semidefinite; anything below zero is roundoff
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k].max(0.0)));
    let eigenvectors = DMatrix::from_fn(n, n, |i, c| inv_sqrt[i] * eig.eigenvectors[(i, order[c])]);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors, mass: mass.clone() })
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    /// `P(t) = V diag(e^{−tλ}) Vᵀ M`
    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("time must be finite and nonnegative, got {t}")));
        }
        let n = self.dim();
        if t == 0.0 {
            return Ok(Propagator { t, matrix: DMatrix::identity(n, n) });
        }
        let decay = self.eigenvalues.map(|l| (-t * l).exp());
        let scaled = DMatrix::from_fn(n, n, |i, k| self.eigenvectors[(i, k)] * decay[k]);
        let vm = DMatrix::from_fn(n, n, |k, j| self.eigenvectors[(j, k)] * self.mass[j]);
        Ok(Propagator { t, matrix: scaled * vm })
    }

    /// Largest columnwise residual `‖A v_k − λ_k M v_k‖∞`.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        let av = a * &self.eigenvectors;
        let n = self.dim();
        let mut worst = 0.0_f64;
        for k in 0..n {
            for i in 0..n {
                let r = av[(i, k)] - self.eigenvalues[k] * self.mass[i] * self.eigenvectors[(i, k)];
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

/// `P(t)` straight from an operator pair.
pub fn propagator(decomp: &SpectralDecomposition, t: f64) -> Result<Propagator> {
    decomp.propagator(t)
}

fn check_resolvent_args(n: usize, mass: &DVector<f64>, lam: f64, f: &DVector<f64>) -> Result<()> {
    check_mass(mass, n)?;
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::invalid(format!("resolvent parameter must be positive, got {lam}")));
    }
    if f.len() != n {
        return Err(Error::invalid(format!("right-hand side has length {}, expected {n}", f.len())));
    }
    Ok(())
}

/// Solves `(A + λM) u = λ M f` by Cholesky factorization.
pub fn resolvent_apply(a: &DMatrix<f64>, mass: &DVector<f64>, lam: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    check_resolvent_args(a.nrows(), mass, lam, f)?;
    let mut shifted = a.clone();
    for i in 0..a.nrows() {
        shifted[(i, i)] += lam * mass[i];
    }
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Numerical("A + λM is not positive definite".into()))?;
    Ok(chol.solve(&(f.component_mul(mass) * lam)))
}

/// `q(u) = ½ uᵀ(A + λM)u − λ uᵀMf`, the energy minimized by the resolvent.
pub fn quadratic_functional<A: SymmetricOperator>(
    a: &A,
    mass: &DVector<f64>,
    lam: f64,
    f: &DVector<f64>,
    u: &DVector<f64>,
) -> f64 {
    let mut au = DVector::zeros(u.len());
    a.apply(u, &mut au);
    let mu = u.component_mul(mass);
    0.5 * (u.dot(&au) + lam * u.dot(&mu)) - lam * mu.dot(f)
}

#[derive(Debug, Clone)]
pub struct VariationalSolution {
    pub u: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimizes [`quadratic_functional`] by conjugate gradients, stopping when
/// the residual falls below `tol·‖λMf‖`.
pub fn dirichlet_principle_solve<A: SymmetricOperator>(
    a: &A,
    mass: &DVector<f64>,
    lam: f64,
    f: &DVector<f64>,
    tol: f64,
) -> Result<VariationalSolution> {
    check_resolvent_args(a.dim(), mass, lam, f)?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let op = ShiftedOperator { base: a, shift: lam, diag: mass };
    let rhs = f.component_mul(mass) * lam;
    let n = a.dim();
    let sol = conjugate_gradient(&op, &rhs, tol, 20 * n + 200)?;
    Ok(VariationalSolution { u: sol.x, iterations: sol.iterations, residual: sol.residual })
}
