//! Gate numbers for constant data and the largest admissible data scale.

use broadwell::{gate_report, ModelParams, ProblemData, SpaceTimeBox};

fn main() -> broadwell::Result<()> {
    let params = ModelParams::axis_aligned(1.0, 1.0)?;
    for eps in [1.0 / 1000.0, 1.0 / 432.0, 2.0 / 432.0] {
        let data = ProblemData::constant(SpaceTimeBox::unit(), params, eps)?;
        let g = gate_report(&data)?;
        println!(
            "eps {eps:.6}: p {:.3} q {:.6} pq {:.4} gate {} bound_B {:.6} max_scale {:.4}",
            g.p,
            g.q,
            g.pq,
            if g.gate_ok { "ok" } else { "violated" },
            g.bound_b,
            g.max_scale
        );
    }
    Ok(())
}
