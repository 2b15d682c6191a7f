//! Dispatches a validated configuration to the library and fills a report.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use robinlab::capacity::{capacity_evidence, capacity_refinement_study, closability_probe};
use robinlab::checks::{sandwich_report, CheckReport};
use robinlab::convergence::{
    charged_nodes, gamma_consistency_check, monotone_form_diagnostic, resolvent_convergence_study, LimitOperator,
};
use robinlab::forms::assemble_operator;
use robinlab::linalg::max_abs;
use robinlab::measures::{admissibility_verdict, BoundaryMeasure, JumpMeasure};
use robinlab::mesh::Mesh;
use robinlab::spectral::decompose;
use robinlab::{Error, Result};

use crate::config::{Experiment, ExperimentConfig, Forcing, LimitChoice};
use crate::report::{Report, Table};

struct Clock {
    start: Instant,
    last: Instant,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Clock { start: now, last: now }
    }

    fn lap(&mut self, report: &mut Report, phase: &str) {
        let now = Instant::now();
        report.timings.phases.insert(phase.to_string(), (now - self.last).as_secs_f64());
        self.last = now;
    }
}

fn forcing(config: &ExperimentConfig, n: usize) -> DVector<f64> {
    match config.forcing {
        Forcing::Ones => DVector::from_element(n, 1.0),
        Forcing::Zero => DVector::zeros(n),
        Forcing::Random { seed } => {
            let mut rng = StdRng::seed_from_u64(seed);
            DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
        }
    }
}

/// Runs the experiment. Argument errors raised by the library come back as
/// `Err` so the caller can treat them as configuration errors; everything else
/// ends up in the report.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config.clone());
    let mut clock = Clock::new();
    let outcome = match config.experiment {
        Experiment::Sandwich => sandwich(config, &mut report, &mut clock),
        Experiment::Eigen => eigen(config, &mut report, &mut clock),
        Experiment::Capacity => capacity(config, &mut report, &mut clock),
        Experiment::Closability => closability(config, &mut report, &mut clock),
        Experiment::Convergence => convergence(config, &mut report, &mut clock),
        Experiment::Gamma => gamma(config, &mut report, &mut clock),
    };
    match outcome {
        Err(e @ Error::InvalidArgument(_)) => return Err(e),
        Err(e) => report.error = Some(e.to_string()),
        Ok(()) => {}
    }
    report.passed = report.error.is_none() && report.checks.iter().all(|c| c.passed);
    report.timings.total = clock.start.elapsed().as_secs_f64();
    Ok(report)
}

fn build(config: &ExperimentConfig) -> Result<(Mesh, BoundaryMeasure, JumpMeasure)> {
    let mesh = config.domain.build()?;
    let (kappa, theta) = config.measures().realize(&mesh)?;
    Ok((mesh, kappa, theta))
}

fn sandwich(config: &ExperimentConfig, report: &mut Report, clock: &mut Clock) -> Result<()> {
    let (mesh, kappa, theta) = build(config)?;
    clock.lap(report, "assemble");
    let all = sandwich_report(&kappa, &theta, &mesh, &config.t_grid, config.tolerance)?;
    clock.lap(report, "checks");
    let (neumann, rest): (Vec<CheckReport>, Vec<CheckReport>) =
        all.into_iter().partition(|r| r.name.starts_with("neumann_domination"));
    report.checks.extend(rest);

    // With θ ≠ 0 domination by the Neumann semigroup is expected to fail; the
    // check becomes "a violation was found at some time".
    let worst = neumann
        .iter()
        .max_by(|a, b| a.worst_violation.total_cmp(&b.worst_violation))
        .cloned()
        .expect("t_grid is nonempty");
    let summary = if config.theta_is_zero() {
        CheckReport::new("neumann_domination", worst.worst_violation, worst.witness, config.tolerance)
    } else {
        let found = neumann.iter().any(|r| !r.passed);
        CheckReport {
            name: "neumann_violation_found".into(),
            passed: found,
            worst_violation: worst.worst_violation,
            witness: worst.witness,
            tolerance: config.tolerance,
        }
    };
    report.checks.push(summary);
    report.observations = neumann;
    report.note("theta_is_zero", config.theta_is_zero());
    report.note("n_nodes", mesh.n_nodes());
    Ok(())
}

fn eigen(config: &ExperimentConfig, report: &mut Report, clock: &mut Clock) -> Result<()> {
    let (mesh, kappa, theta) = build(config)?;
    let forms = assemble_operator(&kappa, &theta, &mesh)?;
    let a = forms.operator_dense();
    clock.lap(report, "assemble");
    let d = decompose(&a, &forms.mass)?;
    clock.lap(report, "decompose");

    let scale = max_abs(&a).max(1.0);
    let residual = d.residual(&a) / scale;
    report.checks.push(CheckReport::new("eigen_residual", residual, None, config.tolerance.max(1e-12)));

    let m = DMatrix::from_diagonal(&forms.mass);
    let mut law = 0.0_f64;
    let mut sym = 0.0_f64;
    for (s, t) in [(0.1, 0.2), (0.5, 0.5)] {
        let ps = d.propagator(s)?.matrix;
        let pt = d.propagator(t)?.matrix;
        let pst = d.propagator(s + t)?.matrix;
        law = law.max(max_abs(&(&pst - &pt * &ps)));
        for p in [&ps, &pt, &pst] {
            sym = sym.max(max_abs(&(&m * p - p.transpose() * &m)));
        }
    }
    report.checks.push(CheckReport::new("semigroup_law", law, None, config.tolerance));
    report.checks.push(CheckReport::new("mass_symmetry", sym, None, config.tolerance));

    let mut table = Table::new(&["index", "eigenvalue"]);
    for (k, &lam) in d.eigenvalues.iter().take(config.eigen_count).enumerate() {
        table.push(vec![k as f64, lam]);
    }
    report.tables.insert("eigenvalues".into(), table);
    report.note("n_nodes", mesh.n_nodes());
    Ok(())
}

fn capacity(config: &ExperimentConfig, report: &mut Report, clock: &mut Clock) -> Result<()> {
    let study = capacity_refinement_study(&config.domain, &config.points, config.levels)?;
    clock.lap(report, "study");
    let mut table = Table::new(&["level", "h", "n_nodes", "set_size", "capacity"]);
    let mut worst_bound = 0.0_f64;
    let mut worst_sign = 0.0_f64;
    for (level, r) in study.iter().enumerate() {
        table.push(vec![level as f64, r.h, r.potential.len() as f64, r.node_set.len() as f64, r.value]);
        for &u in r.potential.iter() {
            worst_bound = worst_bound.max(-u).max(u - 1.0);
        }
        worst_sign = worst_sign.max(-r.value);
    }
    report.checks.push(CheckReport::new("potential_in_unit_interval", worst_bound, None, config.tolerance));
    report.checks.push(CheckReport::new("capacity_nonnegative", worst_sign, None, 0.0));
    let values: Vec<f64> = study.iter().map(|r| r.value).collect();
    report.note("strictly_decreasing", values.windows(2).all(|w| w[1] < w[0]));
    report.note("decay_ratio", values[values.len() - 1] / values[0]);
    report.tables.insert("capacity".into(), table);
    Ok(())
}

fn closability(config: &ExperimentConfig, report: &mut Report, clock: &mut Clock) -> Result<()> {
    let probe = closability_probe(&config.measures(), &config.domain, config.levels)?;
    clock.lap(report, "probe");
    let mut table = Table::new(&["level", "h", "n_nodes", "gradient_energy", "h1_energy", "form_boundary_value"]);
    for (k, l) in probe.levels.iter().enumerate() {
        table.push(vec![k as f64, l.h, l.n_nodes as f64, l.gradient_energy, l.h1_energy, l.form_boundary_value]);
    }
    report.tables.insert("closability".into(), table);

    let (mesh, kappa, theta) = build(config)?;
    let charged = charged_nodes(&kappa, &theta, &mesh)?;
    let mut nodes: Vec<usize> = kappa.atoms().iter().map(|a| a.0).collect();
    for p in theta.pairs() {
        let (a, b) = p.nodes();
        nodes.extend([a, b]);
    }
    nodes.sort_unstable();
    nodes.dedup();
    let evidence = nodes
        .into_iter()
        .filter(|n| charged.contains(n))
        .map(|n| capacity_evidence(&mesh, n, config.levels))
        .collect::<Result<Vec<_>>>()?;
    let verdict = admissibility_verdict(&kappa, &theta, &mesh, Some(&evidence))?;
    clock.lap(report, "verdict");

    // The rule-based verdict and the measured probe must tell the same story.
    let agree = verdict.admissible != probe.non_closable_signature;
    report.checks.push(CheckReport::new("verdict_matches_probe", if agree { 0.0 } else { 1.0 }, None, 0.0));
    report.note("admissible", verdict.admissible);
    report.note("reasons", verdict.reasons.iter().map(|r| r.message.clone()).collect::<Vec<_>>());
    report.note("non_closable_signature", probe.non_closable_signature);
    report.note("h1_strictly_decreasing", probe.h1_strictly_decreasing);
    report.note("h1_decay_ratio", probe.h1_decay_ratio);
    Ok(())
}

fn convergence(config: &ExperimentConfig, report: &mut Report, clock: &mut Clock) -> Result<()> {
    let (mesh, kappa, theta) = build(config)?;
    let f = forcing(config, mesh.n_nodes());
    let limit = match config.limit {
        LimitChoice::Dirichlet => None,
        LimitChoice::ChargedNodes => Some(LimitOperator::Pinned(charged_nodes(&kappa, &theta, &mesh)?)),
    };
    let table = resolvent_convergence_study(&kappa, &theta, &config.scalings, config.lam, &f, &mesh, limit.as_ref())?;
    clock.lap(report, "study");

    report.checks.push(monotone_form_diagnostic(&table));
    let scale = table.neumann_value.abs().max(1.0);
    let above = table.quadratic_values.iter().map(|q| (q - table.neumann_value) / scale).fold(0.0, f64::max);
    report.checks.push(CheckReport::new("below_neumann_value", above, None, 1e-12));
    if table.scalings_increasing && !kappa.has_density() && theta.kernel().is_zero() {
        // strict decrease is only guaranteed for strictly increasing scalings of atom measures
        let worst = table.distances.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let mut r = CheckReport::new("distances_strictly_decreasing", worst.max(0.0), None, 0.0);
        r.passed = table.distances_strictly_decreasing;
        report.checks.push(r);
    }

    let mut out = Table::new(&["scaling", "distance", "quadratic_value"]);
    for ((&c, &d), &q) in table.scalings.iter().zip(&table.distances).zip(&table.quadratic_values) {
        out.push(vec![c, d, q]);
    }
    report.tables.insert("convergence".into(), out);
    report.note("limit_value", table.limit_value);
    report.note("neumann_value", table.neumann_value);
    report.note("scalings_increasing", table.scalings_increasing);
    Ok(())
}

fn gamma(config: &ExperimentConfig, report: &mut Report, clock: &mut Clock) -> Result<()> {
    let (mesh, kappa, theta) = build(config)?;
    let f = forcing(config, mesh.n_nodes());
    report.checks.push(gamma_consistency_check(&kappa, &theta, config.lam, &f, &mesh, config.tolerance)?);
    clock.lap(report, "solve");
    Ok(())
}
