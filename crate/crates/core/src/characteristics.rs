//! Characteristic coordinates `η = 𝓕(t, x, y)` and backward characteristics.
//!
//! In `η` coordinates species 1, 2 and 3 travel along the `η₁`, `η₂` and `η₃`
//! axes; species 4 travels along `(−1, 1, 1)`. Every path is parameterized
//! by elapsed time, so path lengths are durations.

use crate::domain_data::{ProblemData, SpaceTimeBox};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Species};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCoords {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
}

impl CharCoords {
    pub const fn new(eta1: f64, eta2: f64, eta3: f64) -> Self {
        Self { eta1, eta2, eta3 }
    }

    pub fn from_array(e: [f64; 3]) -> Self {
        Self::new(e[0], e[1], e[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.eta1, self.eta2, self.eta3]
    }
}

/// `η₁ = x/c`, `η₂ = t/2 − x/(2c) + y/(2c)`, `η₃ = t/2 − x/(2c) − y/(2c)`.
pub fn to_eta(t: f64, x: f64, y: f64, params: &ModelParams) -> CharCoords {
    let c = params.c;
    CharCoords {
        eta1: x / c,
        eta2: 0.5 * t - x / (2.0 * c) + y / (2.0 * c),
        eta3: 0.5 * t - x / (2.0 * c) - y / (2.0 * c),
    }
}

/// `t = η₁ + η₂ + η₃`, `x = cη₁`, `y = c(η₂ − η₃)`.
pub fn from_eta(eta: CharCoords, params: &ModelParams) -> (f64, f64, f64) {
    let c = params.c;
    (eta.eta1 + eta.eta2 + eta.eta3, c * eta.eta1, c * (eta.eta2 - eta.eta3))
}

/// Membership of `𝓕⁻¹(η)` in the space-time box, with a relative slack.
pub fn in_domain(eta: CharCoords, bx: &SpaceTimeBox, params: &ModelParams) -> bool {
    let (t, x, y) = from_eta(eta, params);
    bx.contains(t, x, y, domain_slack(bx))
}

pub(crate) fn domain_slack(bx: &SpaceTimeBox) -> f64 {
    1e-10 * bx.scale()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FootKind {
    /// The backward characteristic reaches `t = 0`.
    Initial,
    /// The backward characteristic reaches the species' inflow face first.
    Inflow,
}

/// Straight path `s ↦ origin + s · direction` for `s` between `start` (foot)
/// and `end` (evaluation point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPath {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub start: f64,
    pub end: f64,
}

impl CharPath {
    pub fn point(&self, s: f64) -> CharCoords {
        let o = self.origin;
        let d = self.direction;
        CharCoords::new(o[0] + s * d[0], o[1] + s * d[1], o[2] + s * d[2])
    }

    /// Elapsed time from foot to evaluation point; negative for points that
    /// sit before their foot (only possible outside the domain).
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPoint {
    pub species: Species,
    pub kind: FootKind,
    /// Physical `(t, x, y)` of the foot.
    pub location: (f64, f64, f64),
    pub path_length: f64,
    pub path: CharPath,
}

/// Classifies the backward characteristic of `species` through `eta`.
///
/// Points on the dividing plane are classified [`FootKind::Initial`].
pub fn classify_foot(species: Species, eta: CharCoords, bx: &SpaceTimeBox, params: &ModelParams) -> Result<FootPoint> {
    if !in_domain(eta, bx, params) {
        let (t, x, y) = from_eta(eta, params);
        return Err(Error::OutsideDomain(t, x, y));
    }
    Ok(foot_unchecked(species, eta, bx, params))
}

/// Same as [`classify_foot`] without the membership test; outside the domain
/// the formulas continue affinely.
pub(crate) fn foot_unchecked(species: Species, eta: CharCoords, bx: &SpaceTimeBox, params: &ModelParams) -> FootPoint {
    let kind = foot_kind(species, eta, bx, params);
    let path = path_for(species, kind, eta, bx, params);
    FootPoint {
        species,
        kind,
        location: from_eta(path.point(path.start), params),
        path_length: path.length(),
        path,
    }
}

pub(crate) fn foot_kind(species: Species, eta: CharCoords, bx: &SpaceTimeBox, params: &ModelParams) -> FootKind {
    let c = params.c;
    let CharCoords { eta1, eta2, eta3 } = eta;
    let initial = match species {
        Species::N1 => -c * eta2 - c * eta3 >= bx.a1,
        Species::N2 => -c * eta1 - 2.0 * c * eta3 >= bx.a2,
        Species::N3 => c * eta1 + 2.0 * c * eta2 <= bx.b2,
        Species::N4 => 2.0 * c * eta1 + c * eta2 + c * eta3 <= bx.b1,
    };
    if initial {
        FootKind::Initial
    } else {
        FootKind::Inflow
    }
}

fn path_for(species: Species, kind: FootKind, eta: CharCoords, bx: &SpaceTimeBox, params: &ModelParams) -> CharPath {
    let c = params.c;
    let CharCoords { eta1, eta2, eta3 } = eta;
    let initial = kind == FootKind::Initial;
    match species {
        Species::N1 => CharPath {
            origin: [0.0, eta2, eta3],
            direction: [1.0, 0.0, 0.0],
            start: if initial { -eta2 - eta3 } else { bx.a1 / c },
            end: eta1,
        },
        Species::N2 => CharPath {
            origin: [eta1, 0.0, eta3],
            direction: [0.0, 1.0, 0.0],
            start: if initial { -eta1 - eta3 } else { eta3 + bx.a2 / c },
            end: eta2,
        },
        Species::N3 => CharPath {
            origin: [eta1, eta2, 0.0],
            direction: [0.0, 0.0, 1.0],
            start: if initial { -eta1 - eta2 } else { eta2 - bx.b2 / c },
            end: eta3,
        },
        Species::N4 => {
            if initial {
                CharPath {
                    origin: [2.0 * eta1 + eta2 + eta3, -eta1 - eta3, -eta1 - eta2],
                    direction: [-1.0, 1.0, 1.0],
                    start: 0.0,
                    end: eta1 + eta2 + eta3,
                }
            } else {
                let b = bx.b1 / c;
                CharPath {
                    origin: [b, eta1 + eta2 - b, eta1 + eta3 - b],
                    direction: [-1.0, 1.0, 1.0],
                    start: 0.0,
                    end: b - eta1,
                }
            }
        }
    }
}

/// Integration path of `species` through `eta` for an already classified foot.
pub fn characteristic_path(eta: CharCoords, foot: &FootPoint, bx: &SpaceTimeBox, params: &ModelParams) -> CharPath {
    path_for(foot.species, foot.kind, eta, bx, params)
}

/// Data field arguments `(field, α, β)` of the barred data of `species` at `eta`.
fn barred_arguments(species: Species, kind: FootKind, eta: CharCoords, data: &ProblemData) -> (bool, f64, f64) {
    let bx = &data.bx;
    let c = data.params.c;
    let CharCoords { eta1, eta2, eta3 } = eta;
    match (species, kind) {
        (Species::N1, FootKind::Initial) => (true, -c * eta2 - c * eta3, c * eta2 - c * eta3),
        (Species::N1, FootKind::Inflow) => (false, bx.a1 / c + eta2 + eta3, c * eta2 - c * eta3),
        (Species::N2, FootKind::Initial) => (true, c * eta1, -c * eta1 - 2.0 * c * eta3),
        (Species::N2, FootKind::Inflow) => (false, eta1 + 2.0 * eta3 + bx.a2 / c, c * eta1),
        (Species::N3, FootKind::Initial) => (true, c * eta1, c * eta1 + 2.0 * c * eta2),
        (Species::N3, FootKind::Inflow) => (false, eta1 + 2.0 * eta2 - bx.b2 / c, c * eta1),
        (Species::N4, FootKind::Initial) => (true, 2.0 * c * eta1 + c * eta2 + c * eta3, c * eta2 - c * eta3),
        (Species::N4, FootKind::Inflow) => (false, 2.0 * eta1 + eta2 + eta3 - bx.b1 / c, c * eta2 - c * eta3),
    }
}

/// The data value transported to `eta` along the characteristic of
/// `species`, read from the initial field or the inflow field per `kind`.
///
/// Fails when the foot falls outside the field's domain.
pub fn barred_data(species: Species, kind: FootKind, data: &ProblemData, eta: CharCoords) -> Result<f64> {
    let (init, a, b) = barred_arguments(species, kind, eta, data);
    let k = species.index();
    if init {
        data.init[k].eval_checked(INIT_NAMES[k], a, b)
    } else {
        data.inflow[k].eval_checked(INFLOW_NAMES[k], a, b)
    }
}

/// [`barred_data`] with data fields extended past their rectangles.
pub(crate) fn barred_data_extended(species: Species, kind: FootKind, data: &ProblemData, eta: CharCoords) -> f64 {
    let (init, a, b) = barred_arguments(species, kind, eta, data);
    let k = species.index();
    if init {
        data.init[k].eval(a, b)
    } else {
        data.inflow[k].eval(a, b)
    }
}

const INIT_NAMES: [&str; 4] = ["N1^0", "N2^0", "N3^0", "N4^0"];
const INFLOW_NAMES: [&str; 4] = ["N1^-", "N2^-", "N3^+", "N4^+"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_data::DataField;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn p(c: f64) -> ModelParams {
        ModelParams::axis_aligned(c, 1.0).unwrap()
    }

    #[test]
    fn to_eta_examples() {
        assert_eq!(to_eta(0.0, 0.0, 0.0, &p(1.0)), CharCoords::new(0.0, 0.0, 0.0));
        assert_eq!(to_eta(0.0, 1.0, 0.0, &p(1.0)), CharCoords::new(1.0, -0.5, -0.5));
        assert_eq!(from_eta(CharCoords::new(1.0, 1.0, 0.0), &p(2.0)), (2.0, 2.0, 2.0));
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let c = rng.gen_range(0.2..5.0);
            let (t, x, y) = (
                rng.gen_range(0.0..3.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let (t2, x2, y2) = from_eta(to_eta(t, x, y, &p(c)), &p(c));
            worst = worst.max((t - t2).abs()).max((x - x2).abs()).max((y - y2).abs());
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn jacobian_scales_volume() {
        for c in [0.5, 1.0, 3.0] {
            let params = p(c);
            let o = to_eta(0.0, 0.0, 0.0, &params).to_array();
            let cols: Vec<[f64; 3]> = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
                .iter()
                .map(|&(t, x, y)| {
                    let e = to_eta(t, x, y, &params).to_array();
                    [e[0] - o[0], e[1] - o[1], e[2] - o[2]]
                })
                .collect();
            let det = cols[0][0] * (cols[1][1] * cols[2][2] - cols[1][2] * cols[2][1])
                - cols[1][0] * (cols[0][1] * cols[2][2] - cols[0][2] * cols[2][1])
                + cols[2][0] * (cols[0][1] * cols[1][2] - cols[0][2] * cols[1][1]);
            assert_relative_eq!(det.abs(), 1.0 / (2.0 * c * c), max_relative = 1e-14);
        }
    }

    #[test]
    fn classify_examples() {
        let bx = SpaceTimeBox::unit();
        let params = p(1.0);
        let f = classify_foot(Species::N1, to_eta(0.0, 0.5, 0.5, &params), &bx, &params).unwrap();
        assert_eq!(f.kind, FootKind::Initial);
        assert_eq!(f.path_length, 0.0);

        // x − ct = −0.5 < a₁
        let f = classify_foot(Species::N1, to_eta(0.75, 0.25, 0.5, &params), &bx, &params).unwrap();
        assert_eq!(f.kind, FootKind::Inflow);
        assert_relative_eq!(f.location.1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.location.0, 0.5, epsilon = 1e-15);

        // x + ct = b₁ exactly
        let f = classify_foot(Species::N4, to_eta(0.5, 0.5, 0.5, &params), &bx, &params).unwrap();
        assert_eq!(f.kind, FootKind::Initial);

        assert!(classify_foot(Species::N1, to_eta(-0.1, 0.5, 0.5, &params), &bx, &params).is_err());
    }

    #[test]
    fn path_examples() {
        let bx = SpaceTimeBox::unit();
        let params = p(1.0);
        let eta = to_eta(0.3, 0.6, 0.4, &params);
        let f = classify_foot(Species::N1, eta, &bx, &params).unwrap();
        assert_eq!(f.kind, FootKind::Initial);
        assert_eq!(f.path.start, -eta.eta2 - eta.eta3);
        assert_eq!(f.path.end, eta.eta1);
        assert_eq!(f.path.point(0.2), CharCoords::new(0.2, eta.eta2, eta.eta3));

        let eta = to_eta(0.8, 0.5, 0.2, &params);
        let f = classify_foot(Species::N2, eta, &bx, &params).unwrap();
        assert_eq!(f.kind, FootKind::Inflow);
        assert_eq!(f.path.start, eta.eta3 + bx.a2 / params.c);
        assert_eq!(characteristic_path(eta, &f, &bx, &params), f.path);
    }

    #[test]
    fn barred_examples() {
        let bx = SpaceTimeBox::unit();
        let params = p(1.0);
        let mut data = ProblemData::constant(bx, params, 0.3).unwrap();
        let eta = to_eta(0.4, 0.7, 0.2, &params);
        for s in Species::ALL {
            for kind in [FootKind::Initial, FootKind::Inflow] {
                assert_eq!(barred_data_extended(s, kind, &data, eta), 0.3);
            }
        }
        data.init[0] = DataField::analytic(bx.space(), Arc::new(|x, _| x), None);
        let eta = to_eta(0.2, 0.7, 0.5, &params);
        let v = barred_data(Species::N1, FootKind::Initial, &data, eta).unwrap();
        assert_relative_eq!(v, -eta.eta2 - eta.eta3, epsilon = 1e-15);

        data.inflow[3] = DataField::analytic(bx.ty(), Arc::new(|t, _| t), None);
        let eta = to_eta(0.8, 0.6, 0.5, &params);
        let v = barred_data(Species::N4, FootKind::Inflow, &data, eta).unwrap();
        assert_relative_eq!(v, 2.0 * eta.eta1 + eta.eta2 + eta.eta3 - 1.0, epsilon = 1e-15);

        let far = CharCoords::new(5.0, 5.0, 5.0);
        assert!(matches!(
            barred_data(Species::N1, FootKind::Initial, &data, far),
            Err(Error::FootOutOfDomain { .. })
        ));
    }

    /// Backward march in physical space until the box is left.
    fn physical_backtrace(species: Species, t: f64, x: f64, y: f64, bx: &SpaceTimeBox, c: f64) -> (FootKind, f64) {
        let (vx, vy) = crate::model::advection(species, &ModelParams::axis_aligned(c, 0.0).unwrap());
        // elapsed time until each face is reached going backward
        let mut hit_face = f64::INFINITY;
        if vx > 0.0 {
            hit_face = hit_face.min((x - bx.a1) / vx);
        }
        if vx < 0.0 {
            hit_face = hit_face.min((x - bx.b1) / vx);
        }
        if vy > 0.0 {
            hit_face = hit_face.min((y - bx.a2) / vy);
        }
        if vy < 0.0 {
            hit_face = hit_face.min((y - bx.b2) / vy);
        }
        if t <= hit_face {
            (FootKind::Initial, t)
        } else {
            (FootKind::Inflow, hit_face)
        }
    }

    #[test]
    fn classification_matches_physical_backtrace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let c = rng.gen_range(0.3..3.0);
            let params = p(c);
            let bx = SpaceTimeBox::new(
                -0.5,
                rng.gen_range(0.0..2.0),
                0.1,
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.2..2.0),
            )
            .unwrap();
            let (t, x, y) = (
                rng.gen_range(0.0..bx.t),
                rng.gen_range(bx.a1..bx.b1),
                rng.gen_range(bx.a2..bx.b2),
            );
            let eta = to_eta(t, x, y, &params);
            for s in Species::ALL {
                let f = classify_foot(s, eta, &bx, &params).unwrap();
                let (kind, elapsed) = physical_backtrace(s, t, x, y, &bx, c);
                assert_eq!(f.kind, kind, "species {s:?} at ({t},{x},{y})");
                assert!((f.path_length - elapsed).abs() <= 1e-12 * (1.0 + elapsed));
                let (ft, fx, fy) = f.location;
                match (s, kind) {
                    (_, FootKind::Initial) => assert!(ft.abs() <= 1e-12),
                    (Species::N1, _) => assert!((fx - bx.a1).abs() <= 1e-12),
                    (Species::N2, _) => assert!((fy - bx.a2).abs() <= 1e-12),
                    (Species::N3, _) => assert!((fy - bx.b2).abs() <= 1e-12),
                    (Species::N4, _) => assert!((fx - bx.b1).abs() <= 1e-12),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn paths_stay_inside_and_follow_characteristics(
            t in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, c in 0.3f64..3.0, frac in 0.0f64..1.0,
        ) {
            let bx = SpaceTimeBox::unit();
            let params = p(c);
            let eta = to_eta(t, x, y, &params);
            for s in Species::ALL {
                let f = classify_foot(s, eta, &bx, &params).unwrap();
                prop_assert!(f.path_length >= -1e-12);
                let q = f.path.point(f.path.start + frac * f.path.length());
                let (pt, px, py) = from_eta(q, &params);
                prop_assert!(bx.contains(pt, px, py, 1e-12));
                // elapsed time equals the path parameter
                prop_assert!((pt - (t - (1.0 - frac) * f.path.length())).abs() <= 1e-12);
                let (inv_a, inv_b, inv_pa, inv_pb) = match s {
                    Species::N1 => (t - x / c, y, pt - px / c, py),
                    Species::N2 => (t - y / c, x, pt - py / c, px),
                    Species::N3 => (t + y / c, x, pt + py / c, px),
                    Species::N4 => (t + x / c, y, pt + px / c, py),
                };
                prop_assert!((inv_a - inv_pa).abs() <= 1e-11);
                prop_assert!((inv_b - inv_pb).abs() <= 1e-11);
            }
        }
    }
}
