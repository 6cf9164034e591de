//! The plane four-velocity Broadwell model `B_θ`.
//!
//! Velocities are `u₁ = c(cos θ, sin θ)`, `u₂ = c(−sin θ, cos θ)`, `u₃ = −u₂`,
//! `u₄ = −u₁`. Collisions exchange the pair (1,4) with the pair (2,3), so the
//! collision term enters the four kinetic equations with signs `+, −, −, +`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Constants of the model: particle speed `c`, cross-section `S`, orientation `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub c: f64,
    pub s: f64,
    pub theta: f64,
}

impl ModelParams {
    pub fn new(c: f64, s: f64, theta: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParams(format!("c must be > 0, got {c}")));
        }
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidParams(format!("S must be >= 0, got {s}")));
        }
        if !(theta.is_finite() && (0.0..FRAC_PI_2).contains(&theta)) {
            return Err(Error::InvalidParams(format!(
                "theta must lie in [0, pi/2), got {theta}"
            )));
        }
        Ok(Self { c, s, theta })
    }

    /// The axis-aligned model `B_0` used by the initial-boundary value problem.
    pub fn axis_aligned(c: f64, s: f64) -> Result<Self> {
        Self::new(c, s, 0.0)
    }

    /// Collision prefactor `2cS`.
    pub fn collision_rate(&self) -> f64 {
        2.0 * self.c * self.s
    }
}

/// Number densities of the four velocity classes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Densities {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
}

impl Densities {
    pub const fn new(n1: f64, n2: f64, n3: f64, n4: f64) -> Self {
        Self { n1, n2, n3, n4 }
    }

    pub const fn uniform(v: f64) -> Self {
        Self::new(v, v, v, v)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.n1, self.n2, self.n3, self.n4]
    }

    pub fn total(&self) -> f64 {
        self.n1 + self.n2 + self.n3 + self.n4
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&v| v >= 0.0)
    }
}

/// Macroscopic density and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
}

/// Velocity class of a particle; `index()` is 0-based, `number()` 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    N1,
    N2,
    N3,
    N4,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::N1, Species::N2, Species::N3, Species::N4];

    /// Species from its 1-based number.
    pub fn from_number(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Species::N1),
            2 => Ok(Species::N2),
            3 => Ok(Species::N3),
            4 => Ok(Species::N4),
            other => Err(Error::InvalidSpecies(other)),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> usize {
        self as usize + 1
    }

    /// Sign with which the collision term `Q` enters this species' equation.
    pub fn collision_sign(self) -> f64 {
        match self {
            Species::N1 | Species::N4 => 1.0,
            Species::N2 | Species::N3 => -1.0,
        }
    }
}

/// `Q(N) = 2cS (N₂N₃ − N₁N₄)`.
pub fn collision_term(n: &Densities, params: &ModelParams) -> f64 {
    collision_term_raw(n.n1, n.n2, n.n3, n.n4, params.collision_rate())
}

#[inline]
pub(crate) fn collision_term_raw(n1: f64, n2: f64, n3: f64, n4: f64, rate: f64) -> f64 {
    rate * (n2 * n3 - n1 * n4)
}

/// Density and macroscopic velocity of a state.
///
/// Fails with [`Error::DegenerateState`] when the total density vanishes.
pub fn moments(n: &Densities, params: &ModelParams) -> Result<Moments> {
    let rho = n.total();
    if rho == 0.0 {
        return Err(Error::DegenerateState);
    }
    let (sin, cos) = params.theta.sin_cos();
    let d14 = n.n1 - n.n4;
    let d23 = n.n2 - n.n3;
    let rho_u = cos * d14 - sin * d23;
    let rho_v = sin * d14 + cos * d23;
    Ok(Moments {
        rho,
        u: rho_u / rho,
        v: rho_v / rho,
    })
}

/// Maxwellian densities for the given moments.
///
/// The cross term of `N₄M` uses `2UV` like the other three densities.
pub fn maxwellian(m: &Moments, params: &ModelParams) -> Densities {
    let (sin, cos) = params.theta.sin_cos();
    let (sin2, cos2) = (2.0 * params.theta).sin_cos();
    let Moments { rho, u, v } = *m;
    let quad = cos2 * (u * u - v * v) + 2.0 * u * v * sin2;
    let q = rho / 4.0;
    Densities {
        n1: q * (1.0 + quad + 2.0 * u * cos + 2.0 * v * sin),
        n2: q * (1.0 - quad + 2.0 * v * cos - 2.0 * u * sin),
        n3: q * (1.0 - quad - 2.0 * v * cos + 2.0 * u * sin),
        n4: q * (1.0 + quad - 2.0 * u * cos - 2.0 * v * sin),
    }
}

/// Advection velocity `(a_x, a_y)` of species `i` (1-based).
pub fn btheta_advection(i: usize, params: &ModelParams) -> Result<(f64, f64)> {
    let species = Species::from_number(i)?;
    Ok(advection(species, params))
}

pub fn advection(species: Species, params: &ModelParams) -> (f64, f64) {
    let (sin, cos) = params.theta.sin_cos();
    let c = params.c;
    match species {
        Species::N1 => (c * cos, c * sin),
        Species::N2 => (-c * sin, c * cos),
        Species::N3 => (c * sin, -c * cos),
        Species::N4 => (-c * cos, -c * sin),
    }
}
