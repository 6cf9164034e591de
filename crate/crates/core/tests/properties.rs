//! Cross-module properties: operator bounds, branch continuity on the
//! classification planes, and the discrete balance of the upwind scheme.

mod common;

use broadwell::{
    apply_t, apply_t_sigma, barred_data, derivative_bound_check, gate_report, to_eta, upwind_solve, EtaField, EtaGrid,
    FDGrid, FootKind, IterationTrace, ModelParams, ProblemData, QuadratureConfig, Solution, SpaceTimeBox, Species,
    Status,
};
use common::{random_instance, rng, wave_profile};
use proptest::prelude::*;

fn instance(seed: u64, c: f64, s: f64, pq: f64) -> ProblemData {
    let bx = SpaceTimeBox::new(0.0, 1.0, 0.0, 0.8, 0.6).unwrap();
    random_instance(&mut rng(seed), bx, ModelParams::axis_aligned(c, s).unwrap(), pq)
}

/// `amp·(1 + ½ sin(k·(t,x,y) + φ))` per species with its analytic C¹ norm.
fn smooth_field(grid: &std::sync::Arc<EtaGrid>, amp: f64, k: [f64; 3], phi: f64) -> (EtaField, f64) {
    let field = EtaField::from_fn(grid, move |t, x, y| {
        std::array::from_fn(|s| {
            let shift = phi + s as f64;
            amp * (1.0 + 0.5 * (k[0] * t + k[1] * x + k[2] * y + shift).sin())
        })
    });
    let slope = 0.5 * amp * k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (field, (1.5 * amp).max(slope))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operator_maps_balls_into_quadratic_bound(
        seed in 0u64..1000,
        c in 0.5f64..2.0,
        amp_scale in 0.1f64..1.0,
        kt in 0.2f64..2.0,
        kx in 0.2f64..2.0,
        ky in 0.2f64..2.0,
        phi in 0.0f64..6.0,
    ) {
        let data = instance(seed, c, 1.0, 0.2);
        let gate = gate_report(&data).unwrap();
        let grid = EtaGrid::new(data.bx, data.params, 20).unwrap();
        let (m, norm) = smooth_field(&grid, amp_scale * gate.r_hi / 1.5, [kt, kx, ky], phi);
        let out = apply_t(&m, &data, &QuadratureConfig::default()).unwrap();
        let limit = gate.p * norm * norm + gate.q;
        prop_assert!(out.sup_norm() <= limit, "{} > {limit}", out.sup_norm());
        let trace = IterationTrace { records: Vec::new(), status: Status::MaxIters };
        let wrapped = Solution::new(out, gate, trace);
        let d = derivative_bound_check(&wrapped, &gate);
        for k in 0..3 {
            prop_assert!(d.measured[k] <= limit * 1.05, "derivative {k}: {} > {limit}", d.measured[k]);
        }
    }

    #[test]
    fn shifted_operator_output_is_nonnegative(
        seed in 0u64..1000,
        amp in 0.0f64..0.3,
        kx in 0.2f64..4.0,
        sigma_factor in 1.0f64..3.0,
    ) {
        let data = instance(seed, 1.0, 1.0, 0.2);
        let grid = EtaGrid::new(data.bx, data.params, 12).unwrap();
        // nonnegative and large compared with the data: plain 𝒯 may go negative
        let m = EtaField::from_fn(&grid, move |t, x, y| {
            std::array::from_fn(|s| amp * (1.0 + (kx * x + 0.7 * y - t + s as f64).sin()))
        });
        let sigma = sigma_factor * data.params.collision_rate();
        let out = apply_t_sigma(&m, sigma, &data, &QuadratureConfig::default()).unwrap();
        let scale = out.sup_norm().max(m.sup_norm());
        prop_assert!(out.min_value() >= -1e-12 * scale, "{}", out.min_value());
    }

    #[test]
    fn branches_agree_on_classification_planes(
        seed in 0u64..1000,
        c in 0.4f64..2.5,
        u in 0.0f64..1.0,
        v in 0.0f64..1.0,
    ) {
        let bx = SpaceTimeBox::new(-0.3, 0.9, 0.1, 1.1, 0.7).unwrap();
        let params = ModelParams::axis_aligned(c, 1.0).unwrap();
        let data = random_instance(&mut rng(seed), bx, params, 0.2);
        for s in Species::ALL {
            // physical point on the plane separating the two foot kinds
            let span = match s {
                Species::N1 | Species::N4 => bx.width(),
                Species::N2 | Species::N3 => bx.height(),
            };
            let t = u * bx.t.min(span / c);
            let (x, y) = match s {
                Species::N1 => (bx.a1 + c * t, bx.a2 + v * bx.height()),
                Species::N4 => (bx.b1 - c * t, bx.a2 + v * bx.height()),
                Species::N2 => (bx.a1 + v * bx.width(), bx.a2 + c * t),
                Species::N3 => (bx.a1 + v * bx.width(), bx.b2 - c * t),
            };
            let eta = to_eta(t, x, y, &params);
            let initial = barred_data(s, FootKind::Initial, &data, eta).unwrap();
            let inflow = barred_data(s, FootKind::Inflow, &data, eta).unwrap();
            prop_assert!((initial - inflow).abs() <= 1e-9 * initial.abs().max(1e-12), "{s:?}: {initial} vs {inflow}");
        }
    }
}

/// Largest `|ΔM/Δt − flux|` of total mass for the upwind scheme at CFL ½,
/// scaled by the mass; the flux is averaged over the step.
fn upwind_mass_defect(data: &ProblemData, n: usize) -> f64 {
    let c = data.params.c;
    let fd = upwind_solve(data, FDGrid::new(&data.bx, c, n, n, 2 * (n - 1) + 1).unwrap()).unwrap();
    let g = fd.grid;
    let weight = |i: usize, n: usize, h: f64| if i == 0 || i + 1 == n { 0.5 * h } else { h };
    let mass = |k: usize| {
        let mut m = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                let v = fd.node(k, i, j);
                m += weight(i, g.nx, g.dx) * weight(j, g.ny, g.dy) * v.iter().sum::<f64>();
            }
        }
        m
    };
    let flux = |k: usize| {
        let mut f = 0.0;
        for j in 0..g.ny {
            let (l, r) = (fd.node(k, 0, j), fd.node(k, g.nx - 1, j));
            f += weight(j, g.ny, g.dy) * c * ((l[0] - l[3]) - (r[0] - r[3]));
        }
        for i in 0..g.nx {
            let (b, t) = (fd.node(k, i, 0), fd.node(k, i, g.ny - 1));
            f += weight(i, g.nx, g.dx) * c * ((b[1] - b[2]) - (t[1] - t[2]));
        }
        f
    };
    let scale = (0..g.nt).map(mass).fold(0.0f64, f64::max);
    (0..g.nt - 1)
        .map(|k| ((mass(k + 1) - mass(k)) / g.dt - 0.5 * (flux(k) + flux(k + 1))).abs() / scale)
        .fold(0.0, f64::max)
}

#[test]
fn upwind_mass_balance_is_first_order() {
    let bx = SpaceTimeBox::unit();
    let data = ProblemData::from_profiles(
        bx,
        ModelParams::axis_aligned(1.0, 1.0).unwrap(),
        [
            wave_profile(0.002, 0.5, 2.0, 1.0, 0.3, 0.0),
            wave_profile(0.001, 0.5, 1.0, 2.0, 0.0, 0.8),
            wave_profile(0.0015, 0.5, 1.5, 1.5, 1.0, 0.2),
            wave_profile(0.002, 0.4, 1.0, 2.5, 2.0, 1.0),
        ],
    )
    .unwrap();
    let coarse = upwind_mass_defect(&data, 33);
    let fine = upwind_mass_defect(&data, 65);
    let ratio = coarse / fine;
    assert!((1.6..=2.4).contains(&ratio), "{coarse} {fine} ratio {ratio}");
}
