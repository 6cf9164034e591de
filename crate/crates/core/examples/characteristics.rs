//! Characteristic coordinates, foot classification and backward paths.

use broadwell::{characteristic_path, classify_foot, from_eta, to_eta, ModelParams, SpaceTimeBox, Species};

fn main() -> broadwell::Result<()> {
    let params = ModelParams::axis_aligned(1.0, 1.0)?;
    let bx = SpaceTimeBox::unit();
    let (t, x, y) = (0.6, 0.3, 0.5);
    let eta = to_eta(t, x, y, &params);
    println!(
        "(t, x, y) = {:?} -> eta {:?} -> {:?}",
        (t, x, y),
        eta,
        from_eta(eta, &params)
    );
    for s in Species::ALL {
        let foot = classify_foot(s, eta, &bx, &params)?;
        let path = characteristic_path(eta, &foot, &bx, &params);
        println!(
            "species {}: {:?} foot at {:?}, path length {:.3}, start {:?}",
            s.number(),
            foot.kind,
            foot.location,
            path.length(),
            from_eta(path.point(path.start), &params)
        );
    }
    Ok(())
}
