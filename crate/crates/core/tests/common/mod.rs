//! Problem instances shared by the integration tests.
#![allow(dead_code)]

use broadwell::{gate_report, ModelParams, ProblemData, Profile, SpaceTimeBox};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `base·(1 + amp·sin(kx·x + φ)·cos(ky·y + ψ))`, nonnegative for `amp ≤ 1`.
pub fn wave_profile(base: f64, amp: f64, kx: f64, ky: f64, phi: f64, psi: f64) -> Profile {
    Profile::new(
        move |x, y| base * (1.0 + amp * (kx * x + phi).sin() * (ky * y + psi).cos()),
        move |x, y| {
            (
                base * amp * kx * (kx * x + phi).cos() * (ky * y + psi).cos(),
                -base * amp * ky * (kx * x + phi).sin() * (ky * y + psi).sin(),
            )
        },
    )
}

/// Smooth compatible data with random shape, rescaled so that `pq = target_pq`.
pub fn random_instance(rng: &mut ChaCha8Rng, bx: SpaceTimeBox, params: ModelParams, target_pq: f64) -> ProblemData {
    let profiles = std::array::from_fn(|_| {
        wave_profile(
            1.0,
            rng.gen_range(0.1..0.9),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
        )
    });
    let raw = ProblemData::from_profiles(bx, params, profiles).expect("valid profiles");
    rescale(&raw, target_pq)
}

/// Uniform rescaling to the requested `pq` (`q` is homogeneous of degree one).
pub fn rescale(data: &ProblemData, target_pq: f64) -> ProblemData {
    let pq = gate_report(data).expect("gate").pq;
    data.scaled(target_pq / pq).expect("scaled data")
}

/// Fixed-seed generator for reproducible instances.
pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
