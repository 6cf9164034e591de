//! Maxwellian densities have no collision term and stay uniform in time.

use broadwell::{
    collision_term, maxwellian, moments, solve, ModelParams, Moments, ProblemData, SolverConfig, SpaceTimeBox,
};

fn main() -> broadwell::Result<()> {
    let params = ModelParams::axis_aligned(1.0, 1.0)?;
    let m = Moments {
        rho: 0.008,
        u: 0.3,
        v: -0.2,
    };
    let n = maxwellian(&m, &params);
    println!("Maxwellian {n:?}");
    println!(
        "Q = {:e}, moments back {:?}",
        collision_term(&n, &params),
        moments(&n, &params)?
    );
    let data = ProblemData::constant_states(SpaceTimeBox::unit(), params, n.to_array())?;
    let sol = solve(&data, &SolverConfig::default().with_grid(12))?;
    println!(
        "after {} iteration(s): N(1, 0.3, 0.7) = {:?}",
        sol.trace.iterations(),
        sol.density(1.0, 0.3, 0.7)
    );
    Ok(())
}
