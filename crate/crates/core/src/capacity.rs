//! Discrete relative capacity of boundary node sets and the closability probe.
//!
//! `Cap(A) = min { uᵀ(K + M)u : u = 1 on A }`, the squared `H¹` norm of the
//! equilibrium potential. Constrained rows are eliminated and the remaining
//! system is solved by conjugate gradients, so fine 2D meshes stay cheap.

use nalgebra::DVector;
use serde::Serialize;

use crate::forms::{assemble_lumped_mass, assemble_operator, assemble_stiffness};
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::measures::{CapacityEvidence, MeasurePairSpec};
use crate::mesh::{Mesh, MeshSpec};
use crate::{Error, Result};

/// Relative residual target for the eliminated systems.
const SOLVE_TOL: f64 = 1e-13;

/// A capacity that drops below this fraction of its coarsest-level value over
/// a refinement study is read as decaying toward zero.
pub const DECAY_RATIO_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub value: f64,
    pub potential: DVector<f64>,
    pub node_set: Vec<usize>,
    pub h: f64,
}

/// `K + M` with lumped mass.
pub fn h1_operator(mesh: &Mesh) -> CsrMatrix {
    assemble_stiffness(mesh).add_diagonal(&assemble_lumped_mass(mesh))
}

/// Minimizes `uᵀ H u` subject to `u_i = v_i` for each `(i, v_i)` in
/// `constraints`, where `H` is symmetric positive definite.
pub fn constrained_minimizer(h: &CsrMatrix, constraints: &[(usize, f64)]) -> Result<DVector<f64>> {
    let n = h.nrows();
    let mut fixed = vec![None; n];
    for &(i, v) in constraints {
        if i >= n {
            return Err(Error::invalid(format!("constrained node {i} out of range")));
        }
        match fixed[i] {
            Some(old) if old != v => {
                return Err(Error::invalid(format!("node {i} constrained to both {old} and {v}")));
            }
            _ => fixed[i] = Some(v),
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut u = DVector::from_iterator(n, fixed.iter().map(|v| v.unwrap_or(0.0)));
    if free.is_empty() {
        return Ok(u);
    }
    let hu = h.mul_vec(&u);
    let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -hu[i]));
    let sub = h.submatrix(&free, &free);
    let sol = conjugate_gradient(&sub, &rhs, SOLVE_TOL, 20 * free.len() + 200)?;
    for (k, &i) in free.iter().enumerate() {
        u[i] = sol.x[k];
    }
    Ok(u)
}

fn energy(h: &CsrMatrix, u: &DVector<f64>) -> f64 {
    u.dot(&h.mul_vec(u))
}

pub fn relative_capacity(mesh: &Mesh, node_set: &[usize]) -> Result<CapacityResult> {
    if node_set.is_empty() {
        return Err(Error::invalid("capacity of the empty set requested"));
    }
    if let Some(&n) = node_set.iter().find(|&&n| !mesh.is_boundary(n)) {
        return Err(Error::invalid(format!("node {n} is not a boundary node")));
    }
    let mut set = node_set.to_vec();
    set.sort_unstable();
    set.dedup();
    let h = h1_operator(mesh);
    let constraints: Vec<_> = set.iter().map(|&i| (i, 1.0)).collect();
    let potential = constrained_minimizer(&h, &constraints)?;
    Ok(CapacityResult { value: energy(&h, &potential), potential, node_set: set, h: mesh.h() })
}

/// Capacity of the nodes nearest to `positions` (arc-length coordinates) on
/// `levels` successively refined meshes.
pub fn capacity_refinement_study(domain: &MeshSpec, positions: &[f64], levels: usize) -> Result<Vec<CapacityResult>> {
    if levels < 2 {
        return Err(Error::invalid(format!("a refinement study needs at least 2 levels, got {levels}")));
    }
    if positions.is_empty() {
        return Err(Error::invalid("no boundary positions given"));
    }
    let mut spec = *domain;
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let mesh = spec.build()?;
        let nodes: Vec<usize> = positions.iter().map(|&p| mesh.nearest_boundary_node(p)).collect();
        out.push(relative_capacity(&mesh, &nodes)?);
        spec = spec.refined();
    }
    Ok(out)
}

/// Refinement study for a single node of `mesh`, packaged for
/// [`crate::measures::admissibility_verdict`].
pub fn capacity_evidence(mesh: &Mesh, node: usize, levels: usize) -> Result<CapacityEvidence> {
    let slot = mesh
        .boundary_slot(node)
        .ok_or_else(|| Error::invalid(format!("node {node} is not a boundary node")))?;
    let arc = mesh.arc_positions()[slot];
    let study = capacity_refinement_study(mesh.spec(), &[arc], levels)?;
    Ok(CapacityEvidence {
        node,
        mesh_sizes: study.iter().map(|r| r.h).collect(),
        capacities: study.iter().map(|r| r.value).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeLevel {
    pub h: f64,
    pub n_nodes: usize,
    /// `uᵀKu`
    pub gradient_energy: f64,
    /// `uᵀ(K + M)u`
    pub h1_energy: f64,
    /// `uᵀ(B + J)u`
    pub form_boundary_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosabilityProbe {
    pub levels: Vec<ProbeLevel>,
    pub h1_strictly_decreasing: bool,
    /// Last over first `H¹` energy.
    pub h1_decay_ratio: f64,
    /// `H¹` energy strictly decreasing and below [`DECAY_RATIO_THRESHOLD`] of
    /// its initial value: a sequence going to zero in `H¹` while the boundary
    /// part of the form stays put.
    pub non_closable_signature: bool,
}

/// Nodal constraints for the probe: `u = 1` on every atom of `κ`; for each
/// atom pair, the endpoint not already pinned to 1 is pinned to 0 (if neither
/// is, the first is set to 1 and the second to 0).
fn probe_constraints(kappa_atoms: &[(usize, f64)], pairs: &[(usize, usize)]) -> Result<Vec<(usize, f64)>> {
    let mut c: Vec<(usize, f64)> = kappa_atoms.iter().filter(|a| a.1 > 0.0).map(|a| (a.0, 1.0)).collect();
    let value_of = |c: &[(usize, f64)], n: usize| c.iter().find(|x| x.0 == n).map(|x| x.1);
    for &(p, q) in pairs {
        match (value_of(&c, p), value_of(&c, q)) {
            (Some(1.0), None) => c.push((q, 0.0)),
            (None, Some(1.0)) => c.push((p, 0.0)),
            (None, None) => {
                c.push((p, 1.0));
                c.push((q, 0.0));
            }
            (Some(a), Some(b)) if a != b => {}
            _ => {
                return Err(Error::invalid(format!(
                    "atom pair ({p}, {q}) cannot be separated: both endpoints carry the same constraint"
                )))
            }
        }
    }
    Ok(c)
}

/// At each refinement level, builds the minimal-`H¹` function equal to 1 at
/// the atoms of `κ` and 0 at their jump partners, and reports its gradient
/// energy, `H¹` energy and the boundary part `uᵀ(B + J)u` of the form.
pub fn closability_probe(pair: &MeasurePairSpec, domain: &MeshSpec, levels: usize) -> Result<ClosabilityProbe> {
    if levels == 0 {
        return Err(Error::invalid("closability probe needs at least one level"));
    }
    let mut spec = *domain;
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let mesh = spec.build()?;
        let (kappa, theta) = pair.realize(&mesh)?;
        let pairs: Vec<(usize, usize)> = theta.pairs().iter().filter(|p| p.weight() > 0.0).map(|p| p.nodes()).collect();
        // keep the orientation given by the caller: first position is z, second z′
        let oriented: Vec<(usize, usize)> = pair
            .pairs
            .iter()
            .filter(|p| p.weight > 0.0)
            .map(|p| (mesh.nearest_boundary_node(p.a), mesh.nearest_boundary_node(p.b)))
            .collect();
        debug_assert_eq!(pairs.len(), oriented.len());
        let constraints = probe_constraints(&kappa.atoms(), &oriented)?;

        let k = assemble_stiffness(&mesh);
        let h1 = k.add_diagonal(&assemble_lumped_mass(&mesh));
        let u = constrained_minimizer(&h1, &constraints)?;
        let forms = assemble_operator(&kappa, &theta, &mesh)?;
        out.push(ProbeLevel {
            h: mesh.h(),
            n_nodes: mesh.n_nodes(),
            gradient_energy: energy(&k, &u),
            h1_energy: energy(&h1, &u),
            form_boundary_value: forms.boundary_energy(&u),
        });
        spec = spec.refined();
    }
    let h1_strictly_decreasing = out.windows(2).all(|w| w[1].h1_energy < w[0].h1_energy);
    let first = out[0].h1_energy;
    let h1_decay_ratio = if first > 0.0 { out[out.len() - 1].h1_energy / first } else { f64::NAN };
    Ok(ClosabilityProbe {
        non_closable_signature: out.len() > 1 && h1_strictly_decreasing && h1_decay_ratio <= DECAY_RATIO_THRESHOLD,
        levels: out,
        h1_strictly_decreasing,
        h1_decay_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{PositionedAtom, PositionedPair};
    use crate::mesh::{build_interval_mesh, build_rectangle_mesh};

    // −u″ + u = 0 on (0,1)
    fn cap_both_ends() -> f64 {
        2.0 * 0.5_f64.tanh()
    }

    fn cap_left_end() -> f64 {
        1.0_f64.tanh()
    }

    #[test]
    fn interval_capacities_match_ode() {
        let mesh = build_interval_mesh(512, 1.0).unwrap();
        let both = relative_capacity(&mesh, &[0, 512]).unwrap();
        assert!((both.value - cap_both_ends()).abs() / cap_both_ends() < 1e-3);
        let left = relative_capacity(&mesh, &[0]).unwrap();
        assert!((left.value - cap_left_end()).abs() / cap_left_end() < 1e-3);
        assert!(left.value <= both.value);
    }

    #[test]
    fn capacity_result_invariants() {
        let mesh = build_rectangle_mesh(16, 16, 1.0, 1.0).unwrap();
        let set = [0, 1, 2, 33];
        let r = relative_capacity(&mesh, &set).unwrap();
        let h = h1_operator(&mesh);
        for &i in &r.node_set {
            assert_eq!(r.potential[i], 1.0);
        }
        assert!((r.value - r.potential.dot(&h.mul_vec(&r.potential))).abs() <= 1e-12 * r.value);
        assert!(r.potential.iter().all(|&x| (-1e-10..=1.0 + 1e-10).contains(&x)));
        let hu = h.mul_vec(&r.potential);
        let scale = h.norm_inf();
        for i in 0..mesh.n_nodes() {
            if !r.node_set.contains(&i) {
                assert!(hu[i].abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn rejects_bad_sets() {
        let mesh = build_rectangle_mesh(4, 4, 1.0, 1.0).unwrap();
        assert!(matches!(relative_capacity(&mesh, &[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(relative_capacity(&mesh, &[6]), Err(Error::InvalidArgument(_))));
        assert!(capacity_refinement_study(mesh.spec(), &[0.0], 1).is_err());
    }

    #[test]
    fn subadditive_on_endpoints() {
        let mesh = build_interval_mesh(64, 1.0).unwrap();
        let a = relative_capacity(&mesh, &[0]).unwrap().value;
        let b = relative_capacity(&mesh, &[64]).unwrap().value;
        let ab = relative_capacity(&mesh, &[0, 64]).unwrap().value;
        assert!(ab <= a + b);
    }

    #[test]
    fn corner_capacity_decays_in_2d() {
        let spec = MeshSpec::Rectangle { nx: 8, ny: 8, lx: 1.0, ly: 1.0 };
        let study = capacity_refinement_study(&spec, &[0.0], 4).unwrap();
        assert!(study.windows(2).all(|w| w[1].value < w[0].value));
        let again = capacity_refinement_study(&spec, &[0.0], 4).unwrap();
        for (a, b) in study.iter().zip(&again) {
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn endpoint_capacity_converges_in_1d() {
        let spec = MeshSpec::Interval { n_cells: 16, length: 1.0 };
        let study = capacity_refinement_study(&spec, &[0.0], 5).unwrap();
        for r in &study[2..] {
            assert!((r.value - cap_left_end()).abs() < 1e-3, "{}", r.value);
        }
        assert!(study.windows(2).all(|w| w[1].value <= w[0].value + 1e-12));
    }

    fn example_pair(z: f64, z2: f64) -> MeasurePairSpec {
        MeasurePairSpec {
            kappa_atoms: vec![PositionedAtom { position: z, weight: 1.0 }],
            pairs: vec![PositionedPair { a: z, b: z2, weight: 1.0 }],
            ..Default::default()
        }
    }

    #[test]
    fn probe_2d_keeps_boundary_value_while_energy_drops() {
        let spec = MeshSpec::Rectangle { nx: 8, ny: 8, lx: 1.0, ly: 1.0 };
        let probe = closability_probe(&example_pair(0.0, 1.0), &spec, 3).unwrap();
        for l in &probe.levels {
            assert!((1.9..=2.1).contains(&l.form_boundary_value), "{l:?}");
            assert!(l.gradient_energy <= l.h1_energy);
        }
        assert!(probe.h1_strictly_decreasing);
    }

    #[test]
    fn probe_1d_energy_stays_bounded() {
        let spec = MeshSpec::Interval { n_cells: 16, length: 1.0 };
        let probe = closability_probe(&example_pair(0.0, 1.0), &spec, 4).unwrap();
        assert!(probe.levels.iter().all(|l| l.h1_energy >= 0.5));
        assert!(!probe.non_closable_signature);
        // u(0) = 1, u(1) = 0 for −u″ + u = 0 has energy coth(1)
        let last = probe.levels.last().unwrap().h1_energy;
        assert!((last - 1.0 / 1.0_f64.tanh()).abs() < 1e-2);
    }

    #[test]
    fn probe_of_zero_pair_is_zero() {
        let spec = MeshSpec::Rectangle { nx: 4, ny: 4, lx: 1.0, ly: 1.0 };
        let probe = closability_probe(&MeasurePairSpec::default(), &spec, 3).unwrap();
        assert!(probe.levels.iter().all(|l| l.form_boundary_value == 0.0 && l.h1_energy == 0.0));
    }

    #[test]
    fn probe_rejects_coincident_pair() {
        let spec = MeshSpec::Rectangle { nx: 4, ny: 4, lx: 1.0, ly: 1.0 };
        assert!(matches!(closability_probe(&example_pair(0.0, 0.01), &spec, 2), Err(Error::InvalidArgument(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn capacity_is_monotone_in_the_set(picks in proptest::collection::vec(0usize..32, 1..8), extra in proptest::collection::vec(0usize..32, 1..8)) {
                let mesh = build_rectangle_mesh(8, 8, 1.0, 1.0).unwrap();
                let b = mesh.boundary_nodes();
                let small: Vec<usize> = picks.iter().map(|&k| b[k]).collect();
                let mut large = small.clone();
                large.extend(extra.iter().map(|&k| b[k]));
                let cs = relative_capacity(&mesh, &small).unwrap().value;
                let cl = relative_capacity(&mesh, &large).unwrap().value;
                prop_assert!(cs <= cl * (1.0 + 1e-12));
            }
        }
    }
}
