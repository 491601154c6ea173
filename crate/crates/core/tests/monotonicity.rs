mod common;

use common::bi_parabolic;
use junction_hj_core::hj_scheme::{HjProblem, HjSolver, LabelField};
use junction_hj_core::{Branch, GridSpec, InitialData, JunctionSpec, TimeStep};
use proptest::prelude::*;

// long enough that the outgoing free-outflow closure, which is not monotone
// on congested cells, cannot reach the compared points within STEPS steps
const CELLS: usize = 130;
const STEPS: usize = 100;
const DX_M: f64 = 5.0;

fn junction(g1: f64, g3: f64) -> JunctionSpec {
    let b = |gamma| Branch { diagram: bi_parabolic(), gamma, length_m: CELLS as f64 * DX_M };
    JunctionSpec::new(2, vec![b(g1), b(1.0 - g1), b(g3), b(1.0 - g3)]).unwrap()
}

fn labels(j: &JunctionSpec, u0: f64, rho: &[Vec<f64>]) -> LabelField {
    let values = (0..4)
        .map(|a| {
            let s = j.orientation(a).sign() * DX_M / 1000.0 / j.branch(a).gamma;
            let mut col = vec![u0];
            for r in &rho[a] {
                let last = *col.last().unwrap();
                col.push(last + s * r);
            }
            col
        })
        .collect();
    LabelField::new(values, 0, 0.0)
}

fn pointwise_max(a: &LabelField, b: &LabelField) -> LabelField {
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.max(*q)).collect())
        .collect();
    LabelField::new(values, 0, 0.0)
}

fn solver(j: &JunctionSpec, u: LabelField, dt: TimeStep) -> HjSolver {
    let grid = GridSpec { dx_m: DX_M, dt: TimeStep::Auto, horizon_s: 0.0 };
    let init = InitialData::uniform(j, &[0.0; 4]);
    let p = HjProblem::new(j, &grid, &init).unwrap().with_initial_labels(u).unwrap();
    HjSolver::new(p, dt, false).unwrap()
}

fn densities() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..160.0f64, CELLS), 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn order_is_preserved(
        g1 in 0.1..0.9f64,
        g3 in 0.1..0.9f64,
        u0 in -5.0..5.0f64,
        w0 in -5.0..5.0f64,
        rho_u in densities(),
        rho_w in densities(),
    ) {
        let j = junction(g1, g3);
        let u = labels(&j, u0, &rho_u);
        let v = pointwise_max(&u, &labels(&j, w0, &rho_w));
        let dt = solver(&j, u.clone(), TimeStep::Auto).cfl().dt_max_s
            .min(solver(&j, v.clone(), TimeStep::Auto).cfl().dt_max_s) * 0.95;
        let mut su = solver(&j, u, TimeStep::Seconds(dt));
        let mut sv = solver(&j, v, TimeStep::Seconds(dt));
        for n in 1..=STEPS {
            su.step().unwrap();
            sv.step().unwrap();
            for (a, (x, y)) in su.state().values().iter().zip(sv.state().values()).enumerate() {
                let reach = if j.orientation(a).sign() < 0.0 { CELLS - n } else { CELLS };
                for (i, (p, q)) in x.iter().zip(y).enumerate().take(reach + 1) {
                    prop_assert!(*p <= *q + 1e-12, "step {} branch {} point {}: {} > {}", n, a, i, p, q);
                }
            }
        }
    }
}
