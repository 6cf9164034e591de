//! Picard iteration on travelling-wave data with the iteration trace and
//! the a-posteriori error estimate.

use broadwell::{gate_report, solve, ModelParams, ProblemData, Profile, SolverConfig, SpaceTimeBox};

fn profile(base: f64, k: f64) -> Profile {
    Profile::new(
        move |x, y| base * (1.0 + 0.4 * (k * x).sin() * y.cos()),
        move |x, y| {
            (
                base * 0.4 * k * (k * x).cos() * y.cos(),
                -base * 0.4 * (k * x).sin() * y.sin(),
            )
        },
    )
}

fn main() -> broadwell::Result<()> {
    let params = ModelParams::axis_aligned(1.0, 1.0)?;
    let data = ProblemData::from_profiles(
        SpaceTimeBox::unit(),
        params,
        [
            profile(1.0, 1.0),
            profile(0.8, 2.0),
            profile(1.2, 1.5),
            profile(0.9, 0.5),
        ],
    )?;
    // rescale so that pq = 0.2
    let data = data.scaled(0.2 / gate_report(&data)?.pq)?;
    let sol = solve(&data, &SolverConfig::default().with_grid(24))?;
    for r in &sol.trace.records {
        println!("iter {:>2}  delta {:.3e}  ratio {:?}", r.k, r.delta, r.ratio);
    }
    println!(
        "kappa {:.4}  error estimate {:?}",
        sol.kappa.unwrap_or(0.0),
        sol.error_bound()
    );
    println!("N(0.5, 0.5, 0.5) = {:?}", sol.density(0.5, 0.5, 0.5));
    println!("sup {:.4e} <= bound_B {:.4e}", sol.field.sup_norm(), sol.gate.bound_b);
    Ok(())
}
