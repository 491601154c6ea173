#![allow(dead_code)]

use junction_hj_core::{Branch, FundamentalDiagram, GridSpec, InitialData, JunctionSpec, Segment, TimeStep};

pub fn bi_parabolic() -> FundamentalDiagram {
    FundamentalDiagram::bi_parabolic(20.0, 160.0, 1000.0, 1.5).unwrap()
}

pub fn table1_junction() -> JunctionSpec {
    let b = Branch { diagram: bi_parabolic(), gamma: 0.5, length_m: 200.0 };
    JunctionSpec::new(2, vec![b.clone(), b.clone(), b.clone(), b]).unwrap()
}

pub fn table1_initial() -> InitialData {
    let whole = |rho| vec![Segment { from_m: 0.0, to_m: 200.0, rho }];
    InitialData {
        profiles: vec![
            whole(15.0),
            whole(15.0),
            vec![
                Segment { from_m: 0.0, to_m: 100.0, rho: 30.0 },
                Segment { from_m: 100.0, to_m: 200.0, rho: 90.0 },
            ],
            whole(5.0),
        ],
        junction_label: 0.0,
        inflow_density: vec![None; 4],
    }
}

pub fn grid(dx_m: f64, horizon_s: f64) -> GridSpec {
    GridSpec { dx_m, dt: TimeStep::Auto, horizon_s }
}
