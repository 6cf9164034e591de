//! Picard iteration on `𝒯` or `𝒯^σ`, a-posteriori error control, and
//! diagnostics of the converged solution in physical coordinates.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::characteristics::to_eta;
use crate::domain_data::{gate_report, GateReport, ProblemData, SpaceTimeBox};
use crate::error::{Error, Result};
use crate::grid::{sup_distance, EtaField, EtaGrid, NodeKind};
use crate::mild_operator::{apply_t, apply_t_sigma, free_streaming_field, QuadratureConfig};
use crate::model::{collision_term_raw, Densities, ModelParams, Species};

/// Consecutive increases of the Picard delta that count as divergence.
const DIVERGENCE_RUN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialGuess {
    Zero,
    /// `𝒯(0)`: the data transported without collisions.
    #[default]
    FreeStreaming,
    /// All four species equal to the given value.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖N^{k} − N^{k−1}‖ ≤ abs_tol`.
    pub abs_tol: f64,
    /// Iterate `𝒯^σ` instead of `𝒯`.
    pub use_sigma: bool,
    /// Shift for `𝒯^σ`; `None` uses `2cS`.
    pub sigma: Option<f64>,
    pub initial_guess: InitialGuess,
    /// Grid nodes per `η` axis.
    pub grid: [usize; 3],
    pub quad: QuadratureConfig,
    /// Iterate even when `pq > 1/4`.
    pub override_gate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            abs_tol: 1e-10,
            use_sigma: false,
            sigma: None,
            initial_guess: InitialGuess::default(),
            grid: [32; 3],
            quad: QuadratureConfig::default(),
            override_gate: false,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(mut self, n: usize) -> Self {
        self.grid = [n; 3];
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParams("max_iters must be >= 1".into()));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "abs_tol must be > 0, got {}",
                self.abs_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `‖N^k − N^{k−1}‖` over inside nodes.
    pub delta: f64,
    /// `delta_k / delta_{k−1}`.
    pub ratio: Option<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last_delta(&self) -> Option<f64> {
        self.records.last().map(|r| r.delta)
    }

    /// Ratio of the last step whose preceding delta exceeded `floor`.
    ///
    /// Deltas near round-off make ratios meaningless, so `floor` should sit
    /// a few decades above machine precision times the solution scale.
    pub fn settled_ratio(&self, floor: f64) -> Option<f64> {
        self.records
            .windows(2)
            .rev()
            .find(|w| w[0].delta > floor)
            .map(|w| w[1].delta / w[0].delta)
    }
}

/// Converged (or last) Picard iterate with physical samplers.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: EtaField,
    pub gate: GateReport,
    pub trace: IterationTrace,
    /// Contraction factor when the gate holds.
    pub kappa: Option<f64>,
    /// Shift used by `𝒯^σ`, if that operator was iterated.
    pub sigma: Option<f64>,
    pub gate_overridden: bool,
    /// Nodal `∂/∂η₁`, `∂/∂η₂`, `∂/∂η₃`.
    deta: [EtaField; 3],
}

impl Solution {
    pub fn new(field: EtaField, gate: GateReport, trace: IterationTrace) -> Self {
        let deta = eta_derivatives(&field);
        Self {
            field,
            gate,
            trace,
            kappa: None,
            sigma: None,
            gate_overridden: false,
            deta,
        }
    }

    pub fn grid(&self) -> &Arc<EtaGrid> {
        self.field.grid()
    }

    pub fn status(&self) -> Status {
        self.trace.status
    }

    /// Densities at physical `(t, x, y)`.
    pub fn density(&self, t: f64, x: f64, y: f64) -> Densities {
        Densities::from_array(self.field.sample(t, x, y))
    }

    /// `[∂/∂t, ∂/∂x, ∂/∂y]` of each species at physical `(t, x, y)`.
    pub fn derivatives(&self, t: f64, x: f64, y: f64) -> [[f64; 3]; 4] {
        let eta = to_eta(t, x, y, self.grid().params());
        let d = [
            self.deta[0].sample_eta(eta),
            self.deta[1].sample_eta(eta),
            self.deta[2].sample_eta(eta),
        ];
        let c = self.grid().params().c;
        std::array::from_fn(|s| physical_derivatives([d[0][s], d[1][s], d[2][s]], c))
    }

    fn node_derivatives(&self, idx: usize) -> [[f64; 3]; 4] {
        let c = self.grid().params().c;
        let d = [self.deta[0].node(idx), self.deta[1].node(idx), self.deta[2].node(idx)];
        std::array::from_fn(|s| physical_derivatives([d[0][s], d[1][s], d[2][s]], c))
    }

    /// A-posteriori distance to the fixed point of the discrete operator.
    pub fn error_bound(&self) -> Option<f64> {
        self.kappa.and_then(|k| error_estimate(&self.trace, k).ok())
    }
}

/// `∂t = ½(∂₂ + ∂₃)`, `∂x = ∂₁/c − (∂₂ + ∂₃)/(2c)`, `∂y = (∂₂ − ∂₃)/(2c)`.
fn physical_derivatives(d: [f64; 3], c: f64) -> [f64; 3] {
    [
        0.5 * (d[1] + d[2]),
        d[0] / c - (d[1] + d[2]) / (2.0 * c),
        (d[1] - d[2]) / (2.0 * c),
    ]
}

/// Central differences along each `η` axis, one-sided next to filled nodes.
fn eta_derivatives(f: &EtaField) -> [EtaField; 3] {
    let grid = f.grid();
    let dims = grid.dims();
    let h = grid.spacing();
    let strides = grid.strides();
    std::array::from_fn(|a| {
        let values = (0..grid.len())
            .map(|idx| {
                if grid.kind(idx) == NodeKind::Filled {
                    return [0.0; 4];
                }
                let pos = grid.ijk(idx)[a];
                let usable = |j: usize| grid.kind(j) != NodeKind::Filled;
                let prev = (pos > 0).then(|| idx - strides[a]).filter(|&j| usable(j));
                let next = (pos + 1 < dims[a]).then(|| idx + strides[a]).filter(|&j| usable(j));
                let v = f.values();
                let (lo, hi, span) = match (prev, next) {
                    (Some(p), Some(n)) => (v[p], v[n], 2.0 * h[a]),
                    (Some(p), None) => (v[p], v[idx], h[a]),
                    (None, Some(n)) => (v[idx], v[n], h[a]),
                    (None, None) => return [0.0; 4],
                };
                std::array::from_fn(|s| (hi[s] - lo[s]) / span)
            })
            .collect();
        EtaField::from_values(grid, values).expect("same grid")
    })
}

/// Picard iteration `N^{k+1} = 𝒯(N^k)` (or `𝒯^σ`) from the configured guess.
///
/// Refuses to run when the gate fails unless `cfg.override_gate` is set.
/// Returns [`Error::Diverged`] when the delta grows on five consecutive steps
/// while above the tolerance.
pub fn solve(data: &ProblemData, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let gate = gate_report(data)?;
    if !gate.gate_ok && !cfg.override_gate {
        return Err(Error::GateViolation { pq: gate.pq });
    }
    let grid = EtaGrid::with_resolution(data.bx, data.params, cfg.grid)?;
    let sigma = if cfg.use_sigma {
        Some(cfg.sigma.unwrap_or_else(|| data.params.collision_rate()))
    } else {
        None
    };
    let op = |m: &EtaField| match sigma {
        Some(s) => apply_t_sigma(m, s, data, &cfg.quad),
        None => apply_t(m, data, &cfg.quad),
    };
    let mut current = match cfg.initial_guess {
        InitialGuess::Zero => EtaField::zeros(&grid),
        InitialGuess::FreeStreaming => free_streaming_field(&grid, data)?,
        InitialGuess::Constant(v) => EtaField::constant(&grid, [v; 4]),
    };
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut rising = 0;
    let mut status = Status::MaxIters;
    for k in 1..=cfg.max_iters {
        let started = Instant::now();
        let next = op(&current)?;
        let delta = sup_distance(&next, &current)?;
        let prev = records.last().map(|r| r.delta);
        records.push(IterationRecord {
            k,
            delta,
            ratio: prev.map(|p| if p > 0.0 { delta / p } else { f64::INFINITY }),
            elapsed: started.elapsed(),
        });
        current = next;
        if !delta.is_finite() {
            status = Status::Diverged;
            break;
        }
        if delta <= cfg.abs_tol {
            status = Status::Converged;
            break;
        }
        rising = match prev {
            Some(p) if delta > p => rising + 1,
            _ => 0,
        };
        if rising >= DIVERGENCE_RUN {
            status = Status::Diverged;
            break;
        }
    }
    let trace = IterationTrace { records, status };
    if status == Status::Diverged {
        return Err(Error::Diverged(Box::new(trace)));
    }
    let mut sol = Solution::new(current, gate, trace);
    sol.kappa = contraction_factor(&gate, &data.bx, &data.params).ok();
    sol.sigma = sigma;
    sol.gate_overridden = !gate.gate_ok;
    Ok(sol)
}

/// `κ = (p′/p)(1 + √(1 − 4pq))`; zero without collisions.
pub fn contraction_factor(gate: &GateReport, bx: &SpaceTimeBox, params: &ModelParams) -> Result<f64> {
    if !gate.gate_ok {
        return Err(Error::GateViolation { pq: gate.pq });
    }
    if gate.p == 0.0 {
        return Ok(0.0);
    }
    let p_prime = crate::domain_data::compute_p_prime(bx, params);
    Ok(p_prime / gate.p * (1.0 + (1.0 - 4.0 * gate.pq).max(0.0).sqrt()))
}

/// `κ/(1 − κ) · delta_last`.
pub fn error_estimate(trace: &IterationTrace, kappa: f64) -> Result<f64> {
    if !(kappa < 1.0) {
        return Err(Error::NotContractive(kappa));
    }
    if kappa < 0.0 {
        return Err(Error::InvalidParams(format!("kappa must be >= 0, got {kappa}")));
    }
    let delta = trace
        .last_delta()
        .ok_or_else(|| Error::InvalidParams("iteration trace is empty".into()))?;
    Ok(kappa / (1.0 - kappa) * delta)
}

/// Whether `idx` is an inside node whose face neighbours are inside and whose
/// difference stencil stays clear of the four planes `x − ct = a₁`,
/// `y − ct = a₂`, `y + ct = b₂`, `x + ct = b₁`.
fn smooth_interior(grid: &EtaGrid, idx: usize) -> bool {
    if grid.kind(idx) != NodeKind::Inside {
        return false;
    }
    let dims = grid.dims();
    let strides = grid.strides();
    let pos = grid.ijk(idx);
    for a in 0..3 {
        if pos[a] == 0 || pos[a] + 1 >= dims[a] {
            return false;
        }
        if grid.kind(idx - strides[a]) != NodeKind::Inside || grid.kind(idx + strides[a]) != NodeKind::Inside {
            return false;
        }
    }
    let bx = grid.bx();
    let c = grid.params().c;
    let e = grid.eta(idx);
    let h = grid.spacing();
    // each plane as (value at the node, gradient in η)
    let planes = [
        (-c * (e.eta2 + e.eta3) - bx.a1, [0.0, -c, -c]),
        (-c * e.eta1 - 2.0 * c * e.eta3 - bx.a2, [-c, 0.0, -2.0 * c]),
        (c * e.eta1 + 2.0 * c * e.eta2 - bx.b2, [c, 2.0 * c, 0.0]),
        (2.0 * c * e.eta1 + c * (e.eta2 + e.eta3) - bx.b1, [2.0 * c, c, c]),
    ];
    planes.iter().all(|(phi, g)| {
        let reach = (g[0].abs() * h[0]).max(g[1].abs() * h[1]).max(g[2].abs() * h[2]);
        phi.abs() > reach * (1.0 + 1e-9)
    })
}

/// Sup-norm residuals of the four kinetic equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub per_species: [f64; 4],
    /// Nodes that entered the sup.
    pub nodes: usize,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.per_species.iter().copied().fold(0.0, f64::max)
    }
}

/// `∂N_i/∂t + (velocity)·∇N_i ∓ Q(N)` at smooth interior grid points, with
/// central differences of the nodal values.
pub fn residual(sol: &Solution, data: &ProblemData) -> ResidualReport {
    let grid = sol.grid();
    let c = data.params.c;
    let rate = data.params.collision_rate();
    let mut per_species = [0.0f64; 4];
    let mut nodes = 0;
    for &idx in grid.inside_nodes() {
        if !smooth_interior(grid, idx) {
            continue;
        }
        nodes += 1;
        let d = sol.node_derivatives(idx);
        let n = sol.field.node(idx);
        let q = collision_term_raw(n[0], n[1], n[2], n[3], rate);
        for s in Species::ALL {
            let [dt, dx, dy] = d[s.index()];
            let transport = match s {
                Species::N1 => dt + c * dx,
                Species::N2 => dt + c * dy,
                Species::N3 => dt - c * dy,
                Species::N4 => dt - c * dx,
            };
            let r = (transport - s.collision_sign() * q).abs();
            per_species[s.index()] = per_species[s.index()].max(r);
        }
    }
    ResidualReport { per_species, nodes }
}

/// Measured derivative sup-norms against their a-priori bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    /// `[‖∂t N‖, ‖∂x N‖, ‖∂y N‖]`, maximized over species.
    pub measured: [f64; 3],
    /// `[B, 2B/c, B/c]`; without collisions every entry is the full data bound.
    pub bounds: [f64; 3],
    pub nodes: usize,
}

impl DerivativeReport {
    /// `bound − measured` per derivative.
    pub fn margins(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.bounds[k] - self.measured[k])
    }

    pub fn within(&self, slack: f64) -> bool {
        (0..3).all(|k| self.measured[k] <= self.bounds[k] * slack)
    }
}

/// Finite-difference derivative norms at smooth interior grid points.
pub fn derivative_bound_check(sol: &Solution, gate: &GateReport) -> DerivativeReport {
    let grid = sol.grid();
    let c = grid.params().c;
    let mut measured = [0.0f64; 3];
    let mut nodes = 0;
    for &idx in grid.inside_nodes() {
        if !smooth_interior(grid, idx) {
            continue;
        }
        nodes += 1;
        for d in sol.node_derivatives(idx) {
            for k in 0..3 {
                measured[k] = measured[k].max(d[k].abs());
            }
        }
    }
    let bounds = if gate.is_free_streaming() {
        [gate.bound_full; 3]
    } else {
        let b = gate.bound_b;
        [b, 2.0 * b / c, b / c]
    };
    DerivativeReport {
        measured,
        bounds,
        nodes,
    }
}

/// Balance of a conserved combination: its time derivative against the net
/// boundary flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    /// `max_k |ΔM/Δt − flux|` over time intervals.
    pub max_defect: f64,
    /// Largest total mass over the slices.
    pub scale: f64,
}

impl BalanceReport {
    /// `max_defect · T / scale`.
    pub fn relative(&self, horizon: f64) -> f64 {
        if self.scale > 0.0 {
            self.max_defect * horizon / self.scale
        } else {
            self.max_defect * horizon
        }
    }
}

/// Mass and momentum balances of the solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalanceReport {
    /// `∫∫ρ`: flux `c∮(N₁ − N₄)dy + c∮(N₂ − N₃)dx`.
    pub mass: BalanceReport,
    /// `∫∫(N₁ − N₄)`: flux `c∮(N₁ + N₄)dy`.
    pub momentum_x: BalanceReport,
    /// `∫∫(N₂ − N₃)`: flux `c∮(N₂ + N₃)dx`.
    pub momentum_y: BalanceReport,
    pub slices: usize,
}

/// Integrates the physical sampler on `slices` time levels with an
/// `n_space × n_space` trapezoid rule and compares centred time differences
/// with the trapezoid-in-time boundary fluxes.
pub fn mass_balance(sol: &Solution, data: &ProblemData, slices: usize, n_space: usize) -> MassBalanceReport {
    let bx = data.bx;
    let c = data.params.c;
    let slices = slices.max(2);
    let n_space = n_space.max(2);
    let trap = |n: usize, lo: f64, hi: f64, f: &dyn Fn(f64) -> [f64; 4]| -> [f64; 4] {
        let h = (hi - lo) / (n - 1) as f64;
        let mut acc = [0.0; 4];
        for k in 0..n {
            let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
            let v = f(lo + k as f64 * h);
            for s in 0..4 {
                acc[s] += w * v[s];
            }
        }
        acc
    };
    let mut totals = Vec::with_capacity(slices);
    let mut fluxes = Vec::with_capacity(slices);
    for n in 0..slices {
        let t = bx.t * n as f64 / (slices - 1) as f64;
        let integral = trap(n_space, bx.a1, bx.b1, &|x| {
            trap(n_space, bx.a2, bx.b2, &|y| sol.field.sample(t, x, y))
        });
        totals.push([
            integral.iter().sum::<f64>(),
            integral[0] - integral[3],
            integral[1] - integral[2],
        ]);
        let left = trap(n_space, bx.a2, bx.b2, &|y| sol.field.sample(t, bx.a1, y));
        let right = trap(n_space, bx.a2, bx.b2, &|y| sol.field.sample(t, bx.b1, y));
        let bottom = trap(n_space, bx.a1, bx.b1, &|x| sol.field.sample(t, x, bx.a2));
        let top = trap(n_space, bx.a1, bx.b1, &|x| sol.field.sample(t, x, bx.b2));
        let mass_flux =
            c * ((left[0] - left[3]) - (right[0] - right[3])) + c * ((bottom[1] - bottom[2]) - (top[1] - top[2]));
        let mx_flux = c * ((left[0] + left[3]) - (right[0] + right[3]));
        let my_flux = c * ((bottom[1] + bottom[2]) - (top[1] + top[2]));
        fluxes.push([mass_flux, mx_flux, my_flux]);
    }
    let dt = bx.t / (slices - 1) as f64;
    // |N₁ − N₄| and |N₂ − N₃| never exceed ρ, so total mass scales all three
    let scale = totals.iter().map(|v| v[0].abs()).fold(0.0f64, f64::max);
    let report = |q: usize| {
        let mut max_defect = 0.0f64;
        for n in 0..slices {
            if n + 1 < slices {
                let rate = (totals[n + 1][q] - totals[n][q]) / dt;
                let flux = 0.5 * (fluxes[n][q] + fluxes[n + 1][q]);
                max_defect = max_defect.max((rate - flux).abs());
            }
        }
        BalanceReport { max_defect, scale }
    };
    MassBalanceReport {
        mass: report(0),
        momentum_x: report(1),
        momentum_y: report(2),
        slices,
    }
}
