//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use robinlab::capacity::{capacity_evidence, capacity_refinement_study, closability_probe, relative_capacity};
use robinlab::checks::{default_t_grid, neumann_violation_probe, sandwich_report, SemigroupFamily};
use robinlab::convergence::{gamma_consistency_check, monotone_form_diagnostic, resolvent_convergence_study};
use robinlab::forms::assemble_operator;
use robinlab::linalg::max_abs;
use robinlab::measures::{
    admissibility_verdict, effective_local_measure, marginal_measure, BoundaryMeasure, JumpMeasure, Kernel,
    MeasurePairSpec, PositionedAtom, PositionedPair,
};
use robinlab::mesh::{build_interval_mesh, build_rectangle_mesh, Mesh, MeshSpec};
use robinlab::spectral::{decompose, SpectralDecomposition};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const BETA: f64 = 1.0;
const W0: f64 = 1.0;

fn robin_interval(n: usize, beta: f64, w0: f64) -> (Mesh, BoundaryMeasure, JumpMeasure) {
    let mesh = build_interval_mesh(n, 1.0).unwrap();
    let kappa = BoundaryMeasure::zero(&mesh).with_atom(0, beta).unwrap().with_atom(n, beta).unwrap();
    let theta = if w0 > 0.0 { JumpMeasure::pair(0, n, w0).unwrap() } else { JumpMeasure::zero() };
    (mesh, kappa, theta)
}

fn spectrum(n: usize, beta: f64, w0: f64) -> SpectralDecomposition {
    let (mesh, kappa, theta) = robin_interval(n, beta, w0);
    let f = assemble_operator(&kappa, &theta, &mesh).unwrap();
    decompose(&f.operator_dense(), &f.mass).unwrap()
}

// Eigenfunctions u = a cos(kx) + b sin(kx), λ = k². The two boundary
// conditions are linear in (a, b); eigenvalues are the zeros of the 2×2
// determinant.
fn bc_determinant(k: f64, beta: f64, w0: f64) -> f64 {
    let (c, s) = (k.cos(), k.sin());
    let r00 = beta + w0 - w0 * c;
    let r01 = -k - w0 * s;
    let r10 = -k * s + beta * c + w0 * c - w0;
    let r11 = k * c + beta * s + w0 * s;
    r00 * r11 - r01 * r10
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_eigenvalues(count: usize, beta: f64, w0: f64) -> Vec<f64> {
    let f = |k: f64| bc_determinant(k, beta, w0);
    let step = 1e-3;
    let mut roots = Vec::new();
    let mut k = 1e-6;
    while roots.len() < count {
        let next = k + step;
        if f(k).signum() != f(next).signum() {
            let r = bisect(f, k, next);
            roots.push(r * r);
        }
        k = next;
    }
    roots
}

// The pair decouples symmetric and antisymmetric modes:
// k tan(k/2) = β and k cot(k/2) = −(β + 2w₀).
fn parity_oracle(count: usize, beta: f64, w0: f64) -> Vec<f64> {
    let sym = |k: f64| k * (k / 2.0).sin() - beta * (k / 2.0).cos();
    let anti = |k: f64| k * (k / 2.0).cos() + (beta + 2.0 * w0) * (k / 2.0).sin();
    let mut roots = Vec::new();
    let step = 1e-3;
    let mut k = 1e-6;
    while roots.len() < count {
        let next = k + step;
        for g in [&sym as &dyn Fn(f64) -> f64, &anti] {
            if g(k).signum() != g(next).signum() {
                let r = bisect(g, k, next);
                roots.push(r * r);
            }
        }
        k = next;
    }
    roots.sort_by(f64::total_cmp);
    roots.truncate(count);
    roots
}

fn criterion_1() -> Outcome {
    let exact = oracle_eigenvalues(3, BETA, W0);
    let cross = parity_oracle(3, BETA, W0);
    for (a, b) in exact.iter().zip(&cross) {
        ensure((a - b).abs() <= 1e-10 * b, || format!("oracles disagree: {a} vs {b}"))?;
    }
    let sizes = [64usize, 128, 256, 512];
    let errors: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| {
            let d = spectrum(n, BETA, W0);
            (0..3).map(|k| (d.eigenvalues[k] - exact[k]).abs() / exact[k]).collect()
        })
        .collect();
    let mut min_order = f64::INFINITY;
    for k in 0..3 {
        for w in errors.windows(2) {
            min_order = min_order.min((w[0][k] / w[1][k]).log2());
        }
    }
    let finest = errors[3].iter().cloned().fold(0.0, f64::max);
    ensure(finest <= 1e-3, || format!("relative error {finest:.3e} at n=512"))?;
    ensure(min_order >= 1.9, || format!("observed order {min_order:.3}"))?;
    Ok(format!(
        "λ = {:.6}, {:.6}, {:.6}; max rel err at n=512 {finest:.2e}; min observed order {min_order:.3}",
        exact[0], exact[1], exact[2]
    ))
}

fn criterion_2() -> Outcome {
    let n = 64;
    let with = spectrum(n, BETA, W0);
    let without = spectrum(n, BETA, 0.0);
    let symmetric = |d: &SpectralDecomposition, k: usize| {
        let v = d.eigenvectors.column(k);
        (0..=n).all(|i| (v[i] - v[n - i]).abs() < 1e-6 * v.amax())
    };
    let pick = |d: &SpectralDecomposition| -> Vec<f64> {
        (0..=n).filter(|&k| symmetric(d, k)).map(|k| d.eigenvalues[k]).collect()
    };
    let (a, b) = (pick(&with), pick(&without));
    ensure(a.len() == n / 2 + 1 && a.len() == b.len(), || {
        format!("found {} and {} symmetric modes", a.len(), b.len())
    })?;
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs() / y.max(1.0)).fold(0.0, f64::max);
    ensure(worst <= 1e-8, || format!("symmetric eigenvalues differ by {worst:.3e}"))?;
    Ok(format!("{} symmetric modes, max difference {worst:.2e}", a.len()))
}

struct Config {
    label: String,
    mesh: Mesh,
    kappa: BoundaryMeasure,
    theta: JumpMeasure,
}

fn config_matrix() -> Vec<Config> {
    let mut out = Vec::new();
    let interval = build_interval_mesh(64, 1.0).unwrap();
    let square = build_rectangle_mesh(8, 8, 1.0, 1.0).unwrap();
    for (name, mesh) in [("1d-n64", interval), ("2d-8x8", square)] {
        let kappa = if mesh.dim() == 1 {
            BoundaryMeasure::zero(&mesh).with_atom(0, BETA).unwrap().with_atom(64, BETA).unwrap()
        } else {
            BoundaryMeasure::uniform_density(&mesh, 1.0).unwrap()
        };
        let far = if mesh.dim() == 1 { 64 } else { mesh.nearest_boundary_node(2.0) };
        let thetas = [
            ("zero", JumpMeasure::zero()),
            ("pair", JumpMeasure::pair(0, far, W0).unwrap()),
            ("constant", JumpMeasure::from_kernel(Kernel::Constant { c: 1.0 }).unwrap()),
        ];
        for (tname, theta) in thetas {
            out.push(Config { label: format!("{name}/{tname}"), mesh: mesh.clone(), kappa: kappa.clone(), theta });
        }
    }
    out
}

fn criterion_3_and_4() -> (Outcome, Outcome) {
    let grid = default_t_grid();
    let mut worst_pos = 0.0_f64;
    let mut worst_markov = 0.0_f64;
    let mut worst_dom = 0.0_f64;
    let mut worst_identity = 0.0_f64;
    let mut fail3 = Vec::new();
    let mut fail4 = Vec::new();
    for c in config_matrix() {
        let reports = sandwich_report(&c.kappa, &c.theta, &c.mesh, &grid, 1e-10).unwrap();
        for r in &reports {
            let v = r.worst_violation;
            if r.name.starts_with("positivity") {
                worst_pos = worst_pos.max(v);
            } else if r.name.starts_with("sub_markov") {
                worst_markov = worst_markov.max(v);
            } else if r.name.starts_with("dirichlet_le") || r.name.starts_with("local_le") {
                worst_dom = worst_dom.max(v);
            } else {
                continue;
            }
            if !r.passed {
                let target = if r.name.starts_with("positivity") || r.name.starts_with("sub_markov") {
                    &mut fail3
                } else {
                    &mut fail4
                };
                target.push(format!("{} {} ({:.2e})", c.label, r.name, v));
            }
        }

        let forms = assemble_operator(&c.kappa, &c.theta, &c.mesh).unwrap();
        let a = forms.operator_dense();
        let hat = marginal_measure(&c.theta, &c.mesh).unwrap();
        let local = effective_local_measure(&c.kappa, &hat).unwrap();
        let shifted = assemble_operator(&local, &JumpMeasure::zero(), &c.mesh).unwrap().operator_dense();
        let rebuilt: DMatrix<f64> = shifted - forms.coupling_full() * 2.0;
        let gap = max_abs(&(&a - rebuilt)) / max_abs(&a);
        worst_identity = worst_identity.max(gap);
        if gap > 1e-13 {
            fail4.push(format!("{} identity off by {gap:.2e}·‖A‖", c.label));
        }
    }
    let c3 = if fail3.is_empty() {
        Ok(format!("6 configs × 5 times; worst negativity {worst_pos:.2e}, worst row-sum excess {worst_markov:.2e}"))
    } else {
        Err(fail3.join("; "))
    };
    let c4 = if fail4.is_empty() {
        Ok(format!("worst domination violation {worst_dom:.2e}; identity residual {worst_identity:.2e}·‖A‖"))
    } else {
        Err(fail4.join("; "))
    };
    (c3, c4)
}

fn criterion_5() -> Outcome {
    let n = 4;
    let t = 1e-3;
    let (mesh, kappa, theta) = robin_interval(n, BETA, W0);
    let probe = neumann_violation_probe(&kappa, &theta, &mesh, &[t], 1e-10).unwrap();
    ensure(!probe.passed && probe.worst_violation >= 1e-8, || {
        format!("no Neumann violation found (worst {:.2e})", probe.worst_violation)
    })?;
    let family = SemigroupFamily::new(&kappa, &theta, &mesh).unwrap();
    let gap = family.nonlocal(t).unwrap().matrix[(0, n)] - family.neumann(t).unwrap().matrix[(0, n)];
    let m00 = mesh.h() / 2.0;
    let predicted = t * W0 / m00;
    let rel = (gap - predicted).abs() / predicted;
    ensure(rel <= 0.2, || format!("pair entry gap {gap:.4e} vs first-order {predicted:.4e}"))?;

    for n0 in [4usize, 64] {
        let (mesh, kappa, _) = robin_interval(n0, BETA, 0.0);
        let r = neumann_violation_probe(&kappa, &JumpMeasure::zero(), &mesh, &default_t_grid(), 1e-10).unwrap();
        ensure(r.passed, || format!("θ = 0, n = {n0}: spurious violation {:.2e}", r.worst_violation))?;
    }
    Ok(format!(
        "n={n}, t={t:e}: witness {:?}, gap {gap:.4e} vs t·w₀/M_pp = {predicted:.4e} ({:.1}% off); θ = 0 dominated",
        probe.witness.map(|w| (w.row, w.col)),
        100.0 * rel
    ))
}

fn criterion_6() -> Outcome {
    let mesh = build_interval_mesh(512, 1.0).unwrap();
    let both = relative_capacity(&mesh, &[0, 512]).unwrap().value;
    let left = relative_capacity(&mesh, &[0]).unwrap().value;
    let both_exact = 2.0 * 0.5_f64.tanh();
    let left_exact = 1.0_f64.tanh();
    let e_both = (both - both_exact).abs() / both_exact;
    let e_left = (left - left_exact).abs() / left_exact;
    ensure(e_both <= 1e-3, || format!("Cap{{0,1}} = {both} vs {both_exact}"))?;
    ensure(e_left <= 1e-3, || format!("Cap{{0}} = {left} vs {left_exact}"))?;

    let spec = MeshSpec::Rectangle { nx: 8, ny: 8, lx: 1.0, ly: 1.0 };
    let study = capacity_refinement_study(&spec, &[0.0], 5).unwrap();
    let caps: Vec<f64> = study.iter().map(|r| r.value).collect();
    ensure(caps.windows(2).all(|w| w[1] < w[0]), || format!("not strictly decreasing: {caps:?}"))?;
    let ratio = caps[4] / caps[0];
    ensure(ratio <= 0.7, || format!("final/initial = {ratio:.3}"))?;
    Ok(format!(
        "1D rel errors {e_both:.2e}, {e_left:.2e}; 2D corner {:.4} → {:.4} (ratio {ratio:.3})",
        caps[0], caps[4]
    ))
}

fn dirac_pair() -> MeasurePairSpec {
    MeasurePairSpec {
        kappa_atoms: vec![PositionedAtom { position: 0.0, weight: 1.0 }],
        pairs: vec![PositionedPair { a: 0.0, b: 1.0, weight: 1.0 }],
        ..Default::default()
    }
}

fn criterion_7() -> Outcome {
    let pair = dirac_pair();
    let square = MeshSpec::Rectangle { nx: 8, ny: 8, lx: 1.0, ly: 1.0 };
    let probe2 = closability_probe(&pair, &square, 5).unwrap();
    let values: Vec<f64> = probe2.levels.iter().map(|l| l.form_boundary_value).collect();
    ensure(values.iter().all(|v| (1.9..=2.1).contains(v)), || format!("boundary values {values:?}"))?;
    ensure(probe2.h1_strictly_decreasing, || "2D H¹ energy not strictly decreasing".into())?;

    let interval = MeshSpec::Interval { n_cells: 16, length: 1.0 };
    let probe1 = closability_probe(&pair, &interval, 5).unwrap();
    let min1 = probe1.levels.iter().map(|l| l.h1_energy).fold(f64::INFINITY, f64::min);
    ensure(min1 >= 0.5, || format!("1D H¹ energy dropped to {min1}"))?;

    let mesh2 = square.build().unwrap();
    let (k2, t2) = pair.realize(&mesh2).unwrap();
    let evidence = capacity_evidence(&mesh2, 0, 5).unwrap();
    let v2 = admissibility_verdict(&k2, &t2, &mesh2, Some(std::slice::from_ref(&evidence))).unwrap();
    ensure(!v2.admissible, || "2D Dirac pair classified admissible".into())?;

    let mesh1 = interval.build().unwrap();
    let (k1, t1) = pair.realize(&mesh1).unwrap();
    let v1 = admissibility_verdict(&k1, &t1, &mesh1, None).unwrap();
    ensure(v1.admissible, || "1D Dirac pair classified non-admissible".into())?;
    Ok(format!(
        "2D H¹ {:.4} → {:.4} with boundary value {:.3}; 1D min H¹ {min1:.4}; verdicts 2D non-admissible, 1D admissible",
        probe2.levels[0].h1_energy,
        probe2.levels[4].h1_energy,
        values[4]
    ))
}

fn criterion_8() -> Outcome {
    let (mesh, kappa, theta) = robin_interval(64, 1.0, 1.0);
    let f = DVector::from_element(mesh.n_nodes(), 1.0);
    let table = resolvent_convergence_study(&kappa, &theta, &[1.0, 10.0, 100.0, 1000.0], 1.0, &f, &mesh, None).unwrap();
    let d = &table.distances;
    ensure(table.distances_strictly_decreasing, || format!("distances {d:?}"))?;
    ensure(d[3] <= 0.02 * d[0], || format!("final/initial = {:.4}", d[3] / d[0]))?;
    let diag = monotone_form_diagnostic(&table);
    ensure(diag.passed, || format!("quadratic values {:?} vs limit {}", table.quadratic_values, table.limit_value))?;
    ensure(table.quadratic_values.iter().all(|&q| q >= table.limit_value), || "below the Dirichlet value".into())?;
    Ok(format!(
        "distances {:.3e} → {:.3e} (ratio {:.4}); (f,R_c f) {:.6} → {:.6} ≥ {:.6}",
        d[0],
        d[3],
        d[3] / d[0],
        table.quadratic_values[0],
        table.quadratic_values[3],
        table.limit_value
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for c in config_matrix() {
        let n = c.mesh.n_nodes();
        let forcings = [DVector::from_element(n, 1.0), DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))];
        for f in &forcings {
            for lam in [1.0, 1e3] {
                let r = gamma_consistency_check(&c.kappa, &c.theta, lam, f, &c.mesh, 1e-8).unwrap();
                worst = worst.max(r.worst_violation);
                ensure(r.passed, || format!("{} λ={lam}: {:.2e}", c.label, r.worst_violation))?;
            }
        }
    }
    Ok(format!("6 configs × 2 forcings × λ ∈ {{1, 1e3}}; worst relative disagreement {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut worst_law = 0.0_f64;
    let mut worst_sym = 0.0_f64;
    for c in config_matrix() {
        let forms = assemble_operator(&c.kappa, &c.theta, &c.mesh).unwrap();
        let d = decompose(&forms.operator_dense(), &forms.mass).unwrap();
        let m = DMatrix::from_diagonal(&forms.mass);
        for (s, t) in [(0.1, 0.2), (0.5, 0.5)] {
            let ps = d.propagator(s).unwrap().matrix;
            let pt = d.propagator(t).unwrap().matrix;
            let pst = d.propagator(s + t).unwrap().matrix;
            let law = max_abs(&(&pst - &pt * &ps));
            worst_law = worst_law.max(law);
            for p in [&ps, &pt] {
                worst_sym = worst_sym.max(max_abs(&(&m * p - p.transpose() * &m)));
            }
            ensure(law <= 1e-10 && worst_sym <= 1e-10, || {
                format!("{} (s,t)=({s},{t}): law {law:.2e}, symmetry {worst_sym:.2e}", c.label)
            })?;
        }
    }
    Ok(format!("worst ‖P(s+t) − P(t)P(s)‖ {worst_law:.2e}, worst ‖MP − PᵀM‖ {worst_sym:.2e}"))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() -> ExitCode {
    let (c3, c4) = catch_unwind(criterion_3_and_4).unwrap_or_else(|_| {
        let e = String::from("panicked");
        (Err(e.clone()), Err(e))
    });
    let results: Vec<(&str, Outcome)> = vec![
        ("1D eigenvalues vs transcendental oracle", guarded(criterion_1)),
        ("symmetric modes ignore the jump term", guarded(criterion_2)),
        ("positivity and sub-Markov over the config matrix", c3),
        ("domination chain and decomposition identity", c4),
        ("Neumann domination fails with a jump pair, holds without", guarded(criterion_5)),
        ("capacity oracles and 2D point-capacity decay", guarded(criterion_6)),
        ("closability probe and admissibility verdicts", guarded(criterion_7)),
        ("resolvent convergence under scaling", guarded(criterion_8)),
        ("variational and direct resolvents agree", guarded(criterion_9)),
        ("semigroup law and M-symmetry", guarded(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
