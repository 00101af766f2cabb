//! Fixtures shared by the benchmarks: the moderate simulation-study survey
//! on a square grid of configurable side.

use ppfusion_core::rng::derive_seed;
use ppfusion_core::scenario::{hydrophone_layout, simulate_truth, transect_layout, SweepSpec};
use ppfusion_core::{
    simulate_aerial, simulate_pam, simulate_pattern, AerialDetectionParams, FitData, ModelSpec, PamDetectionParams,
    Sources,
};

pub struct Fixture {
    pub data: FitData,
    pub spec: ModelSpec,
}

/// Eight transects and a 3 x 3 hydrophone array over a `side_km` square at
/// 1 km resolution, with surfacing and call rate fixed at their true values.
pub fn moderate_survey(side_km: f64, seed: u64) -> Fixture {
    let sweep = SweepSpec {
        side_km,
        ..SweepSpec::default()
    };
    let truth = simulate_truth(&sweep, derive_seed(seed, 1)).expect("valid sweep spec");
    let pattern = simulate_pattern(&truth.moderate_intensity, derive_seed(seed, 2)).expect("finite intensity");
    let mut data = FitData::new(sweep.grid().expect("valid grid"));
    data.transects = transect_layout(8, side_km).expect("lines inside the grid");
    data.hydrophones = hydrophone_layout(3, side_km);
    data.aerial_params = AerialDetectionParams::with_pi(0.4).expect("valid surfacing");
    data.pam_params = PamDetectionParams::with_noise(104.0);
    data.aerial = simulate_aerial(&pattern, &data.transects, &data.aerial_params, derive_seed(seed, 3))
        .expect("valid survey");
    data.pam = simulate_pam(&pattern, &data.hydrophones, 6.0, &data.pam_params, derive_seed(seed, 4))
        .expect("valid survey");
    let mut spec = ModelSpec::intercept_only(Sources::Both);
    spec.fixed_pi = Some(0.4);
    spec.fixed_c = Some(6.0);
    Fixture { data, spec }
}
