mod common;

use common::*;
use junction_hj_core::analysis::continuous_bounds;
use junction_hj_core::density_scheme::{verify_equivalence, DensitySolver, GammaPolicy};
use junction_hj_core::hj_scheme::{run_hj, HjProblem, HjSolver, SnapshotPlan};
use junction_hj_core::{Branch, GridSpec, InitialData, JunctionSpec, Segment, TimeStep};
use proptest::prelude::*;

#[test]
fn estimates_hold_over_the_full_run() {
    let j = table1_junction();
    let g = grid(5.0, 350.0);
    let run = run_hj(HjProblem::new(&j, &g, &table1_initial()).unwrap(), &g, &SnapshotPlan::default(), true).unwrap();
    assert!((run.cfl.m0 - 687.5).abs() < 1e-9);
    for a in 0..2 {
        assert!((run.cfl.p_lo[a] - 10.0).abs() < 1e-9 && (run.cfl.p_hi[a] - 250.0).abs() < 1e-9);
    }
    for a in 2..4 {
        assert!((run.cfl.p_lo[a] + 250.0).abs() < 1e-9 && (run.cfl.p_hi[a] + 10.0).abs() < 1e-9);
    }
    assert_eq!(run.estimates.len(), run.n_steps + 1);
    for w in run.estimates.windows(2) {
        assert!(w[1].m >= w[0].m - 1e-9);
        assert!(w[1].big_m <= w[0].big_m + 1e-9);
    }
    for row in &run.estimates {
        assert!(row.lower_margin.iter().all(|&m| m >= -1e-9));
        assert!(row.upper_margin.iter().all(|&m| m >= -1e-9));
    }
}

#[test]
fn shift_by_a_constant_commutes() {
    let j = table1_junction();
    let g = grid(5.0, 30.0);
    let p = HjProblem::new(&j, &g, &table1_initial()).unwrap();
    let shifted = p.initial().shifted(7.0);
    let q = p.clone().with_initial_labels(shifted).unwrap();
    let mut a = HjSolver::new(p, TimeStep::Auto, true).unwrap();
    let mut b = HjSolver::new(q, TimeStep::Auto, true).unwrap();
    for _ in 0..100 {
        a.step().unwrap();
        b.step().unwrap();
    }
    for (x, y) in a.state().values().iter().flatten().zip(b.state().values().iter().flatten()) {
        assert!((x + 7.0 - y).abs() < 1e-12 * (1.0 + y.abs()));
    }
}

#[test]
fn density_run_conserves_vehicles() {
    let j = table1_junction();
    let g = grid(5.0, 350.0);
    let mut s = DensitySolver::new(&j, &g, &table1_initial(), GammaPolicy::Fixed).unwrap();
    let dx_km = 0.005;
    let dt_h = s.dt_s() / 3600.0;
    let n = g.n_steps(s.dt_s());
    let mut mass = s.state().total_vehicles(dx_km);
    for _ in 0..n {
        let f = s.step().unwrap();
        let next = s.state().total_vehicles(dx_km);
        let residual = (next - mass) - dt_h * (f.inflow - f.outflow);
        assert!(residual.abs() <= 1e-10 * next, "{residual}");
        mass = next;
    }
}

fn equivalence_gap(j: &JunctionSpec, init: &InitialData, dx_m: f64, steps: usize) -> f64 {
    let g = grid(dx_m, 0.0);
    // the outgoing free-outflow closure can break the time-derivative tripwire
    // on congested exits, which is irrelevant here
    let mut hj = HjSolver::new(HjProblem::new(j, &g, init).unwrap(), TimeStep::Auto, false).unwrap();
    let g = GridSpec { dt: TimeStep::Seconds(hj.dt_s()), ..g };
    let mut ds = DensitySolver::new(j, &g, init, GammaPolicy::Fixed).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        hj.step().unwrap();
        ds.step().unwrap();
        let gap = verify_equivalence(j, dx_m, &[hj.state().clone()], &[ds.state().clone()]).unwrap();
        worst = worst.max(gap);
    }
    worst
}

#[test]
fn reference_equivalence() {
    let gap = equivalence_gap(&table1_junction(), &table1_initial(), 5.0, 500);
    assert!(gap <= 1e-8, "{gap}");
}

#[test]
fn reference_continuous_bounds_bracket() {
    let j = table1_junction();
    let init = table1_initial();
    let b = continuous_bounds(&j, &init).unwrap();
    let g = grid(5.0, 350.0);
    let run = run_hj(HjProblem::new(&j, &g, &init).unwrap(), &g, &SnapshotPlan::default(), true).unwrap();
    assert!(b.m0_0 <= run.cfl.m0 + 1e-9);
    assert!(run.cfl.big_m0 <= b.big_m0_0 + 1e-9);
    for a in 0..4 {
        assert!(b.p_lo0[a] <= run.cfl.p_lo[a] + 1e-9);
        assert!(run.cfl.p_hi[a] <= b.p_hi0[a] + 1e-9);
    }
}

fn scenario() -> impl Strategy<Value = (JunctionSpec, InitialData)> {
    let profile = prop::collection::vec((1.0..10.0f64, 0.0..160.0f64), 1..4);
    (
        1usize..3,
        1usize..3,
        prop::collection::vec(0.05..1.0f64, 4),
        prop::collection::vec(profile, 4),
        -10.0..10.0f64,
    )
        .prop_map(|(n_in, n_out, weights, profiles, u0)| {
            let n = n_in + n_out;
            let s_in: f64 = weights[..n_in].iter().sum();
            let s_out: f64 = weights[n_in..n].iter().sum();
            let mut gammas: Vec<f64> = weights[..n_in].iter().map(|w| w / s_in).collect();
            gammas.extend(weights[n_in..n].iter().map(|w| w / s_out));
            // make each group sum to one exactly
            let fix = |g: &mut [f64]| {
                let rest: f64 = g[1..].iter().sum();
                g[0] = 1.0 - rest;
            };
            fix(&mut gammas[..n_in]);
            fix(&mut gammas[n_in..]);
            let mut branches = Vec::new();
            let mut segs = Vec::new();
            for a in 0..n {
                let total: f64 = profiles[a].iter().map(|p| p.0).sum();
                let mut from = 0.0;
                let mut list = Vec::new();
                for (w, rho) in &profiles[a] {
                    let to = (from + w / total * 100.0).min(100.0);
                    list.push(Segment { from_m: from, to_m: to, rho: *rho });
                    from = to;
                }
                list.last_mut().unwrap().to_m = 100.0;
                segs.push(list);
                branches.push(Branch { diagram: bi_parabolic(), gamma: gammas[a], length_m: 100.0 });
            }
            let j = JunctionSpec::new(n_in, branches).unwrap();
            let init = InitialData { profiles: segs, junction_label: u0, inflow_density: vec![None; n] };
            (j, init)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn random_equivalence((j, init) in scenario()) {
        let gap = equivalence_gap(&j, &init, 5.0, 500);
        prop_assert!(gap <= 1e-8, "{}", gap);
    }

    #[test]
    fn random_continuous_bounds_bracket((j, init) in scenario()) {
        let b = continuous_bounds(&j, &init).unwrap();
        let g = grid(5.0, 0.0);
        let s = HjSolver::new(HjProblem::new(&j, &g, &init).unwrap(), TimeStep::Auto, true).unwrap();
        let c = s.cfl();
        prop_assert!(b.m0_0 <= c.m0 + 1e-9 * c.m0.abs().max(1.0));
        prop_assert!(c.big_m0 <= b.big_m0_0 + 1e-9 * c.big_m0.abs().max(1.0));
        for a in 0..j.len() {
            prop_assert!(b.p_lo0[a] <= c.p_lo[a] + 1e-9 * c.p_lo[a].abs().max(1.0));
            prop_assert!(c.p_hi[a] <= b.p_hi0[a] + 1e-9 * c.p_hi[a].abs().max(1.0));
        }
    }
}
