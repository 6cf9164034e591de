//! The shifted operator keeps outputs nonnegative where plain `𝒯` does not.

use broadwell::{apply_t, apply_t_sigma, EtaField, EtaGrid, ModelParams, ProblemData, QuadratureConfig, SpaceTimeBox};

fn main() -> broadwell::Result<()> {
    let params = ModelParams::axis_aligned(1.0, 1.0)?;
    let bx = SpaceTimeBox::unit();
    // species 1 and 4 start empty, 2 and 3 hold a small density
    let data = ProblemData::constant_states(bx, params, [0.0, 0.01, 0.01, 0.0])?;
    let grid = EtaGrid::new(bx, params, 16)?;
    // a large iterate with N1·N4 dominating N2·N3
    let m = EtaField::constant(&grid, [2.0, 0.0, 0.0, 2.0]);
    let quad = QuadratureConfig::default();
    let plain = apply_t(&m, &data, &quad)?;
    let shifted = apply_t_sigma(&m, 4.0 * params.collision_rate(), &data, &quad)?;
    println!("min of T(M)       {:.4e}", plain.min_value());
    println!("min of T_sigma(M) {:.4e}", shifted.min_value());
    Ok(())
}
