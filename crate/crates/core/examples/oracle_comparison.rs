//! Fixed-point solution against the upwind scheme under refinement.

use broadwell::{
    compare_oracle, gate_report, solve, upwind_solve, FDGrid, ModelParams, ProblemData, Profile, SolverConfig,
    SpaceTimeBox,
};

fn main() -> broadwell::Result<()> {
    let wave = |base: f64, k: f64| {
        Profile::new(
            move |x, y| base * (1.0 + 0.5 * (k * x + y).sin()),
            move |x, y| (base * 0.5 * k * (k * x + y).cos(), base * 0.5 * (k * x + y).cos()),
        )
    };
    let bx = SpaceTimeBox::new(0.0, 1.0, 0.0, 1.0, 0.5)?;
    let data = ProblemData::from_profiles(
        bx,
        ModelParams::axis_aligned(1.0, 1.0)?,
        [wave(1.0, 2.0), wave(0.5, 1.0), wave(0.7, 1.5), wave(1.1, 1.0)],
    )?;
    let data = data.scaled(0.24 / gate_report(&data)?.pq)?;
    for n in [16, 32, 64] {
        let sol = solve(&data, &SolverConfig::default().with_grid(n))?;
        let fd = upwind_solve(&data, FDGrid::with_cfl_limit(&bx, data.params.c, n, n)?)?;
        let diff = compare_oracle(&sol, &fd);
        println!("n = {n:>2}: relative sup difference {:.3e}", diff.relative());
    }
    Ok(())
}
