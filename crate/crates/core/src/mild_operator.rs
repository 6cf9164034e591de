//! The fixed-point operator `𝒯` and its positivity-preserving shift `𝒯^σ`.
//!
//! `𝒯(M)_i(η)` is the data carried from the foot of the species-`i`
//! characteristic through `η`, plus the integral of `±Q(M)` along that
//! characteristic. `𝒯^σ` solves the same equations with `σρ(|M|)N_i` added
//! on both sides, which makes every source nonnegative for `σ ≥ 2cS`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::characteristics::{barred_data_extended, foot_unchecked, CharPath};
use crate::domain_data::{compute_p_prime, ProblemData, SpaceTimeBox};
use crate::error::{Error, Result};
pub use crate::grid::sup_distance;
use crate::grid::{lerp, EtaField, EtaGrid};
use crate::model::{collision_term_raw, ModelParams, Species};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    /// Composite trapezoid with nodes anchored at the evaluation point.
    #[default]
    Trapezoid,
    /// Composite Simpson on an even number of equal panels.
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadratureConfig {
    pub rule: QuadratureRule,
    /// Largest quadrature step in time units; `None` uses the smallest grid spacing.
    pub max_step: Option<f64>,
}

impl QuadratureConfig {
    pub fn trapezoid() -> Self {
        Self::default()
    }

    pub fn simpson() -> Self {
        Self {
            rule: QuadratureRule::Simpson,
            max_step: None,
        }
    }

    pub fn with_max_step(mut self, step: f64) -> Self {
        self.max_step = Some(step);
        self
    }

    /// Resolved step for `grid`.
    pub fn step(&self, grid: &EtaGrid) -> Result<f64> {
        let h = grid.spacing();
        let step = self.max_step.unwrap_or(h[0].min(h[1]).min(h[2]));
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidQuadrature(step));
        }
        Ok(step)
    }
}

/// `𝒯(M)`: evaluates every inside and ghost node; `M` is not modified.
pub fn apply_t(m: &EtaField, data: &ProblemData, quad: &QuadratureConfig) -> Result<EtaField> {
    apply(m, data, quad, None)
}

/// `𝒯^σ(M)` with sources `σρ(|M|)|M_i| ± Q(|M|)` and exponential weights
/// `exp(−σ ∫ρ(|M|))`.
///
/// Between consecutive quadrature nodes of the configured rule, `ρ` and the
/// source are taken linear and the weighted integral is evaluated in closed
/// form, so constant states are reproduced exactly.
pub fn apply_t_sigma(m: &EtaField, sigma: f64, data: &ProblemData, quad: &QuadratureConfig) -> Result<EtaField> {
    let min = data.params.collision_rate();
    if !(sigma >= min) || !sigma.is_finite() {
        return Err(Error::SigmaTooSmall { sigma, min });
    }
    apply(m, data, quad, Some(sigma))
}

/// `p′(‖A‖ + ‖B‖)`, the Lipschitz bound of `𝒯` between `A` and `B`.
pub fn lipschitz_bound(a: &EtaField, b: &EtaField, bx: &SpaceTimeBox, params: &ModelParams) -> f64 {
    compute_p_prime(bx, params) * (a.sup_norm() + b.sup_norm())
}

/// Barred data at every evaluated node, which equals `𝒯(0)` and `𝒯^σ(0)`.
pub fn free_streaming_field(grid: &Arc<EtaGrid>, data: &ProblemData) -> Result<EtaField> {
    if grid.bx() != &data.bx || grid.params().c != data.params.c {
        return Err(Error::GridMismatch);
    }
    let values = grid
        .evaluated_nodes()
        .par_iter()
        .map(|&idx| {
            let eta = grid.eta(idx);
            Species::ALL.map(|s| {
                let kind = foot_unchecked(s, eta, grid.bx(), &data.params).kind;
                barred_data_extended(s, kind, data, eta)
            })
        })
        .collect();
    Ok(EtaField::from_evaluated(grid, values))
}

struct Ctx<'a> {
    grid: &'a EtaGrid,
    m: &'a [[f64; 4]],
    data: &'a ProblemData,
    rule: QuadratureRule,
    step: f64,
    rate: f64,
    sigma: Option<f64>,
}

fn apply(m: &EtaField, data: &ProblemData, quad: &QuadratureConfig, sigma: Option<f64>) -> Result<EtaField> {
    let grid: &Arc<EtaGrid> = m.grid();
    if grid.bx() != &data.bx || grid.params().c != data.params.c {
        return Err(Error::GridMismatch);
    }
    let ctx = Ctx {
        grid,
        m: m.values(),
        data,
        rule: quad.rule,
        step: quad.step(grid)?,
        rate: data.params.collision_rate(),
        sigma,
    };
    let values: Vec<[f64; 4]> = grid
        .evaluated_nodes()
        .par_iter()
        .map_init(Scratch::default, |scratch, &idx| {
            let mut out = [0.0; 4];
            for s in Species::ALL {
                out[s.index()] = ctx.node_value(idx, s, scratch);
            }
            out
        })
        .collect();
    Ok(EtaField::from_evaluated(grid, values))
}

#[derive(Default)]
struct Scratch {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    samples: Vec<[f64; 4]>,
}

impl Ctx<'_> {
    fn node_value(&self, idx: usize, species: Species, scratch: &mut Scratch) -> f64 {
        let eta = self.grid.eta(idx);
        let foot = foot_unchecked(species, eta, self.grid.bx(), &self.data.params);
        let nbar = barred_data_extended(species, foot.kind, self.data, eta);
        let path = foot.path;
        if path.length() == 0.0 || (self.rate == 0.0 && self.sigma.is_none()) {
            return nbar;
        }
        // quadrature steps along grid lines are commensurate with the grid spacing
        let (step, line_axis) = match species {
            Species::N4 => (self.step, None),
            s => {
                let a = s.index();
                let h = self.grid.spacing()[a];
                (h / (h / self.step).ceil(), Some(a))
            }
        };
        self.fill_nodes(&path, step, scratch);
        scratch.samples.clear();
        let [i, j, k] = self.grid.ijk(idx);
        for &s in &scratch.nodes {
            let v = match line_axis {
                Some(a) => self.line_sample(i, j, k, a, s),
                None => self.trilinear(path, s),
            };
            scratch.samples.push(v);
        }
        let sign = species.collision_sign();
        let si = species.index();
        match self.sigma {
            None => {
                let mut acc = 0.0;
                for (w, v) in scratch.weights.iter().zip(&scratch.samples) {
                    acc += w * collision_term_raw(v[0], v[1], v[2], v[3], self.rate);
                }
                nbar + sign * acc
            }
            Some(sigma) => {
                let nodes = &scratch.nodes;
                let samples = &scratch.samples;
                let rate = self.rate;
                let (rho, source): (Vec<f64>, Vec<f64>) = samples
                    .iter()
                    .map(|v| {
                        let a = v.map(f64::abs);
                        let rho = a.iter().sum::<f64>();
                        let q = sign * collision_term_raw(a[0], a[1], a[2], a[3], rate);
                        (rho, sigma * rho * a[si] + q)
                    })
                    .unzip();
                // march from the foot: on each panel ρ and the source are linear
                // and the exponential weight is integrated exactly
                let mut value = nbar;
                for q in 1..nodes.len() {
                    let d = nodes[q] - nodes[q - 1];
                    let u = sigma * 0.5 * d * (rho[q] + rho[q - 1]);
                    let (phi0, phi1) = phi(u);
                    value = value * (-u).exp() + d * (source[q] * (phi0 - phi1) + source[q - 1] * phi1);
                }
                value
            }
        }
    }

    /// Quadrature nodes (from the foot to the evaluation point) and weights.
    fn fill_nodes(&self, path: &CharPath, step: f64, scratch: &mut Scratch) {
        let nodes = &mut scratch.nodes;
        let weights = &mut scratch.weights;
        nodes.clear();
        weights.clear();
        let len = path.length();
        let dir = len.signum();
        match self.rule {
            QuadratureRule::Trapezoid => {
                let full = (len.abs() / step * (1.0 - 1e-12)).floor() as usize;
                nodes.push(path.start);
                for q in (0..=full).rev() {
                    let s = path.end - dir * q as f64 * step;
                    if (s - path.start) * dir > 1e-12 * step {
                        nodes.push(s);
                    }
                }
                if nodes.len() == 1 {
                    nodes.push(path.end);
                }
                weights.resize(nodes.len(), 0.0);
                for q in 1..nodes.len() {
                    let d = 0.5 * (nodes[q] - nodes[q - 1]);
                    weights[q - 1] += d;
                    weights[q] += d;
                }
            }
            QuadratureRule::Simpson => {
                let pairs = ((len.abs() / (2.0 * step)).ceil() as usize).max(1);
                let panels = 2 * pairs;
                let d = len / panels as f64;
                for q in 0..=panels {
                    nodes.push(if q == panels {
                        path.end
                    } else {
                        path.start + q as f64 * d
                    });
                    let w = if q == 0 || q == panels {
                        1.0
                    } else if q % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    weights.push(w * d / 3.0);
                }
            }
        }
    }

    /// Linear interpolation along the grid line through node `(i, j, k)` parallel to axis `a`.
    fn line_sample(&self, i: usize, j: usize, k: usize, a: usize, coord: f64) -> [f64; 4] {
        let (p, f) = self.grid.locate(a, coord);
        let base = match a {
            0 => self.grid.index(p, j, k),
            1 => self.grid.index(i, p, k),
            _ => self.grid.index(i, j, p),
        };
        let stride = self.grid.strides()[a];
        let (lo, hi) = (self.m[base], self.m[base + stride]);
        std::array::from_fn(|s| lerp(lo[s], hi[s], f))
    }

    fn trilinear(&self, path: CharPath, s: f64) -> [f64; 4] {
        let e = path.point(s).to_array();
        let g = self.grid;
        let (i, fi) = g.locate(0, e[0]);
        let (j, fj) = g.locate(1, e[1]);
        let (k, fk) = g.locate(2, e[2]);
        let [si, sj, _] = g.strides();
        let b = g.index(i, j, k);
        let v = self.m;
        std::array::from_fn(|s| {
            let c00 = lerp(v[b][s], v[b + 1][s], fk);
            let c01 = lerp(v[b + sj][s], v[b + sj + 1][s], fk);
            let c10 = lerp(v[b + si][s], v[b + si + 1][s], fk);
            let c11 = lerp(v[b + si + sj][s], v[b + si + sj + 1][s], fk);
            lerp(lerp(c00, c01, fj), lerp(c10, c11, fj), fi)
        })
    }
}

/// `φ₀(u) = ∫₀¹ e^{−uτ} dτ` and `φ₁(u) = ∫₀¹ τ e^{−uτ} dτ`.
fn phi(u: f64) -> (f64, f64) {
    if u.abs() < 1e-2 {
        // Taylor series: (−u)^k/(k+1)! and (−u)^k/(k!(k+2))
        let mut p0 = 0.0;
        let mut p1 = 0.0;
        let mut term = 1.0;
        for k in 0..7 {
            p0 += term / (k + 1) as f64;
            p1 += term / (k + 2) as f64;
            term *= -u / (k + 1) as f64;
        }
        (p0, p1)
    } else {
        let e = (-u).exp();
        ((1.0 - e) / u, (1.0 - (1.0 + u) * e) / (u * u))
    }
}
