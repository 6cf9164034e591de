//! Problem data for the initial-boundary value problem on
//! `[0,T] × [a₁,b₁] × [a₂,b₂]`: geometry, the eight data fields, corner
//! compatibility, the `‖·‖₁` norm and the existence gate `pq ≤ 1/4`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Species};

/// Default absolute tolerance for the corner compatibility check.
pub const DEFAULT_COMPAT_TOL: f64 = 1e-9;

/// Samples per edge used when neither field of a compatibility pair is gridded.
const EDGE_SAMPLES: usize = 65;

/// Samples per axis used to estimate sup-norms of analytic closures.
const DENSE_SAMPLES: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeBox {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub t: f64,
}

impl SpaceTimeBox {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64, t: f64) -> Result<Self> {
        let all_finite = [a1, b1, a2, b2, t].iter().all(|v| v.is_finite());
        if !all_finite || a1 >= b1 || a2 >= b2 || t <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "need a1 < b1, a2 < b2, T > 0 (got [{a1}, {b1}] x [{a2}, {b2}], T = {t})"
            )));
        }
        Ok(Self { a1, b1, a2, b2, t })
    }

    pub fn unit() -> Self {
        Self {
            a1: 0.0,
            b1: 1.0,
            a2: 0.0,
            b2: 1.0,
            t: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.b1 - self.a1
    }

    pub fn height(&self) -> f64 {
        self.b2 - self.a2
    }

    pub fn space(&self) -> Rect {
        Rect::new(self.a1, self.b1, self.a2, self.b2)
    }

    /// `[0,T] × [a₂,b₂]`, the domain of `N₁⁻` and `N₄⁺`.
    pub fn ty(&self) -> Rect {
        Rect::new(0.0, self.t, self.a2, self.b2)
    }

    /// `[0,T] × [a₁,b₁]`, the domain of `N₂⁻` and `N₃⁺`.
    pub fn tx(&self) -> Rect {
        Rect::new(0.0, self.t, self.a1, self.b1)
    }

    /// Membership with an absolute slack.
    pub fn contains(&self, t: f64, x: f64, y: f64, slack: f64) -> bool {
        t >= -slack
            && t <= self.t + slack
            && x >= self.a1 - slack
            && x <= self.b1 + slack
            && y >= self.a2 - slack
            && y <= self.b2 + slack
    }

    pub(crate) fn scale(&self) -> f64 {
        self.t
            .max(self.width())
            .max(self.height())
            .max(self.a1.abs())
            .max(self.b1.abs())
            .max(self.a2.abs())
            .max(self.b2.abs())
    }
}

/// Axis-aligned rectangle `[a_lo, a_hi] × [b_lo, b_hi]` in the `(α, β)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub a_lo: f64,
    pub a_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl Rect {
    pub fn new(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> Self {
        Self { a_lo, a_hi, b_lo, b_hi }
    }

    fn slack(&self) -> f64 {
        1e-9 * (self.a_hi - self.a_lo).max(self.b_hi - self.b_lo).max(1.0)
    }

    pub fn contains(&self, a: f64, b: f64) -> bool {
        let s = self.slack();
        a >= self.a_lo - s && a <= self.a_hi + s && b >= self.b_lo - s && b <= self.b_hi + s
    }

    fn approx_eq(&self, other: &Rect) -> bool {
        let s = self.slack();
        (self.a_lo - other.a_lo).abs() <= s
            && (self.a_hi - other.a_hi).abs() <= s
            && (self.b_lo - other.b_lo).abs() <= s
            && (self.b_hi - other.b_hi).abs() <= s
    }
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// `offset + amplitude · sin(ka·α + pa) · sin(kb·β + pb)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub offset: f64,
    pub amplitude: f64,
    pub ka: f64,
    pub kb: f64,
    pub pa: f64,
    pub pb: f64,
}

/// `offset + amplitude · exp(−|(α,β) − center|² / (2 width²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub offset: f64,
    pub amplitude: f64,
    pub center_a: f64,
    pub center_b: f64,
    pub width: f64,
}

#[derive(Clone)]
enum Source {
    Constant(f64),
    Sinusoid(Sinusoid),
    Bump(Bump),
    Grid { na: usize, nb: usize, values: Vec<f64> },
    Analytic { value: ScalarFn, grad: Option<GradFn> },
}

/// A scalar data function of two variables on a rectangle.
///
/// Gridded fields are sampled uniformly (row-major, `α` slowest) and
/// interpolated bilinearly; outside the rectangle they extrapolate linearly
/// from the edge cell. Family and analytic fields evaluate exactly.
#[derive(Clone)]
pub struct DataField {
    rect: Rect,
    source: Source,
}

impl fmt::Debug for DataField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Constant(v) => format!("Constant({v})"),
            Source::Sinusoid(s) => format!("{s:?}"),
            Source::Bump(b) => format!("{b:?}"),
            Source::Grid { na, nb, .. } => format!("Grid({na}x{nb})"),
            Source::Analytic { grad, .. } => {
                format!("Analytic(grad: {})", grad.is_some())
            }
        };
        f.debug_struct("DataField")
            .field("rect", &self.rect)
            .field("source", &kind)
            .finish()
    }
}

impl DataField {
    pub fn constant(rect: Rect, value: f64) -> Self {
        Self {
            rect,
            source: Source::Constant(value),
        }
    }

    pub fn sinusoid(rect: Rect, s: Sinusoid) -> Self {
        Self {
            rect,
            source: Source::Sinusoid(s),
        }
    }

    pub fn bump(rect: Rect, b: Bump) -> Result<Self> {
        if !(b.width > 0.0) {
            return Err(Error::InvalidField(format!("bump width must be > 0, got {}", b.width)));
        }
        Ok(Self {
            rect,
            source: Source::Bump(b),
        })
    }

    /// Uniform samples `values[i * nb + j] = f(α_i, β_j)`.
    pub fn grid(rect: Rect, na: usize, nb: usize, values: Vec<f64>) -> Result<Self> {
        if na < 2 || nb < 2 {
            return Err(Error::InvalidField(format!(
                "need at least 2 samples per axis, got {na}x{nb}"
            )));
        }
        if values.len() != na * nb {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                na * nb,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite sample".into()));
        }
        Ok(Self {
            rect,
            source: Source::Grid { na, nb, values },
        })
    }

    /// Samples `f` on a uniform `na × nb` grid over `rect`.
    pub fn sampled(rect: Rect, na: usize, nb: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(na * nb);
        for i in 0..na {
            let a = lerp(rect.a_lo, rect.a_hi, i, na);
            for j in 0..nb {
                values.push(f(a, lerp(rect.b_lo, rect.b_hi, j, nb)));
            }
        }
        Self::grid(rect, na, nb, values)
    }

    /// Analytic field, optionally with exact partial derivatives.
    pub fn analytic(rect: Rect, value: ScalarFn, grad: Option<GradFn>) -> Self {
        Self {
            rect,
            source: Source::Analytic { value, grad },
        }
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    /// Sample coordinates along each axis, when the field is gridded.
    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        match &self.source {
            Source::Grid { na, nb, .. } => Some((*na, *nb)),
            _ => None,
        }
    }

    /// Value at `(α, β)`; points outside the rectangle are extrapolated.
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match &self.source {
            Source::Constant(v) => *v,
            Source::Sinusoid(s) => s.offset + s.amplitude * (s.ka * a + s.pa).sin() * (s.kb * b + s.pb).sin(),
            Source::Bump(p) => {
                let d2 = (a - p.center_a).powi(2) + (b - p.center_b).powi(2);
                p.offset + p.amplitude * (-d2 / (2.0 * p.width * p.width)).exp()
            }
            Source::Grid { na, nb, values } => self.bilinear(*na, *nb, values, a, b),
            Source::Analytic { value, .. } => value(a, b),
        }
    }

    /// Value at `(α, β)`, rejecting points outside the rectangle.
    pub fn eval_checked(&self, name: &'static str, a: f64, b: f64) -> Result<f64> {
        if !self.rect.contains(a, b) {
            return Err(Error::FootOutOfDomain {
                field: name,
                alpha: a,
                beta: b,
            });
        }
        Ok(self.eval(a, b))
    }

    /// Exact partial derivatives when the field carries them.
    pub fn analytic_grad(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        match &self.source {
            Source::Constant(_) => Some((0.0, 0.0)),
            Source::Sinusoid(s) => {
                let (sa, ca) = (s.ka * a + s.pa).sin_cos();
                let (sb, cb) = (s.kb * b + s.pb).sin_cos();
                Some((s.amplitude * s.ka * ca * sb, s.amplitude * s.kb * sa * cb))
            }
            Source::Bump(p) => {
                let w2 = p.width * p.width;
                let (da, db) = (a - p.center_a, b - p.center_b);
                let g = p.amplitude * (-(da * da + db * db) / (2.0 * w2)).exp();
                Some((-g * da / w2, -g * db / w2))
            }
            Source::Grid { .. } => None,
            Source::Analytic { grad, .. } => grad.as_ref().map(|g| g(a, b)),
        }
    }

    fn bilinear(&self, na: usize, nb: usize, values: &[f64], a: f64, b: f64) -> f64 {
        let r = &self.rect;
        let (i, fa) = cell(a, r.a_lo, (r.a_hi - r.a_lo) / (na - 1) as f64, na);
        let (j, fb) = cell(b, r.b_lo, (r.b_hi - r.b_lo) / (nb - 1) as f64, nb);
        let v = |i: usize, j: usize| values[i * nb + j];
        let lo = v(i, j) + fb * (v(i, j + 1) - v(i, j));
        let hi = v(i + 1, j) + fb * (v(i + 1, j + 1) - v(i + 1, j));
        lo + fa * (hi - lo)
    }

    /// Minimum and maximum of the field over its rectangle.
    pub fn value_range(&self) -> (f64, f64) {
        let r = &self.rect;
        match &self.source {
            Source::Constant(v) => (*v, *v),
            Source::Sinusoid(s) => {
                let ra = sin_range(s.ka * r.a_lo + s.pa, s.ka * r.a_hi + s.pa);
                let rb = sin_range(s.kb * r.b_lo + s.pb, s.kb * r.b_hi + s.pb);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for x in [ra.0, ra.1] {
                    for y in [rb.0, rb.1] {
                        let v = s.offset + s.amplitude * x * y;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (lo, hi)
            }
            Source::Bump(p) => {
                let w2 = 2.0 * p.width * p.width;
                let near_a = p.center_a.clamp(r.a_lo, r.a_hi) - p.center_a;
                let near_b = p.center_b.clamp(r.b_lo, r.b_hi) - p.center_b;
                let far_a = (r.a_lo - p.center_a).abs().max((r.a_hi - p.center_a).abs());
                let far_b = (r.b_lo - p.center_b).abs().max((r.b_hi - p.center_b).abs());
                let g_max = (-(near_a * near_a + near_b * near_b) / w2).exp();
                let g_min = (-(far_a * far_a + far_b * far_b) / w2).exp();
                let v1 = p.offset + p.amplitude * g_max;
                let v2 = p.offset + p.amplitude * g_min;
                (v1.min(v2), v1.max(v2))
            }
            Source::Grid { values, .. } => values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            }),
            Source::Analytic { value, .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for_dense(r, |a, b| {
                    let v = value(a, b);
                    lo = lo.min(v);
                    hi = hi.max(v);
                });
                (lo, hi)
            }
        }
    }

    /// `‖f‖∞` over the rectangle.
    pub fn sup_norm(&self) -> f64 {
        let (lo, hi) = self.value_range();
        lo.abs().max(hi.abs())
    }

    /// Samples this field on a uniform grid and writes it as
    /// `alpha,beta,value` CSV with 17 significant digits.
    pub fn write_csv(&self, path: &Path, na: usize, nb: usize) -> Result<()> {
        let r = self.rect;
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["alpha", "beta", "value"])
            .map_err(|e| csv_err(path, e))?;
        for i in 0..na {
            let a = lerp(r.a_lo, r.a_hi, i, na);
            for j in 0..nb {
                let b = lerp(r.b_lo, r.b_hi, j, nb);
                w.write_record([fmt17(a), fmt17(b), fmt17(self.eval(a, b))])
                    .map_err(|e| csv_err(path, e))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a gridded field from `alpha,beta,value` CSV (row-major, `alpha` slowest).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
        if headers.len() != 3 || &headers[0] != "alpha" || &headers[1] != "beta" || &headers[2] != "value" {
            return Err(Error::Csv {
                path: path.into(),
                msg: "header must be alpha,beta,value".into(),
            });
        }
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let mut row = [0.0; 3];
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = rec[k].parse().map_err(|_| Error::Csv {
                    path: path.into(),
                    msg: format!("line {}: bad number {:?}", rows.len() + 2, &rec[k]),
                })?;
            }
            rows.push(row);
        }
        if rows.len() < 4 {
            return Err(Error::Csv {
                path: path.into(),
                msg: "need at least a 2x2 grid".into(),
            });
        }
        let nb = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if nb < 2 || !rows.len().is_multiple_of(nb) {
            return Err(Error::Csv {
                path: path.into(),
                msg: "rows do not form a row-major grid".into(),
            });
        }
        let na = rows.len() / nb;
        let rect = Rect::new(rows[0][0], rows[rows.len() - 1][0], rows[0][1], rows[nb - 1][1]);
        let tol = rect.slack() * 1e3;
        for (k, row) in rows.iter().enumerate() {
            let (i, j) = (k / nb, k % nb);
            let a = lerp(rect.a_lo, rect.a_hi, i, na);
            let b = lerp(rect.b_lo, rect.b_hi, j, nb);
            if (row[0] - a).abs() > tol || (row[1] - b).abs() > tol {
                return Err(Error::Csv {
                    path: path.into(),
                    msg: format!("line {}: grid is not uniform row-major", k + 2),
                });
            }
        }
        Self::grid(rect, na, nb, rows.iter().map(|r| r[2]).collect())
    }

    fn edge_coords(&self, along_alpha: bool) -> Vec<f64> {
        let r = &self.rect;
        let (lo, hi) = if along_alpha {
            (r.a_lo, r.a_hi)
        } else {
            (r.b_lo, r.b_hi)
        };
        let n = match &self.source {
            Source::Grid { na, nb, .. } => {
                if along_alpha {
                    *na
                } else {
                    *nb
                }
            }
            _ => return Vec::new(),
        };
        (0..n).map(|k| lerp(lo, hi, k, n)).collect()
    }
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.into(),
        msg: e.to_string(),
    }
}

pub(crate) fn lerp(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Cell index and fraction for a uniform axis with `n` nodes; clamps the cell
/// so that points outside extrapolate from the edge cell.
fn cell(x: f64, lo: f64, h: f64, n: usize) -> (usize, f64) {
    let mut u = (x - lo) / h;
    if (u - u.round()).abs() < 1e-9 {
        u = u.round();
    }
    let i = (u.floor().max(0.0) as usize).min(n - 2);
    (i, u - i as f64)
}

fn for_dense(r: &Rect, mut f: impl FnMut(f64, f64)) {
    for i in 0..DENSE_SAMPLES {
        let a = lerp(r.a_lo, r.a_hi, i, DENSE_SAMPLES);
        for j in 0..DENSE_SAMPLES {
            f(a, lerp(r.b_lo, r.b_hi, j, DENSE_SAMPLES));
        }
    }
}

/// Range of `sin` over `[u0, u1]` (either order).
fn sin_range(u0: f64, u1: f64) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let (lo, hi) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
    let mut min = lo.sin().min(hi.sin());
    let mut max = lo.sin().max(hi.sin());
    // crest at π/2 + 2πk, trough at −π/2 + 2πk
    let k = ((lo - FRAC_PI_2) / (2.0 * PI)).ceil();
    if FRAC_PI_2 + 2.0 * PI * k <= hi {
        max = 1.0;
    }
    let k = ((lo + FRAC_PI_2) / (2.0 * PI)).ceil();
    if -FRAC_PI_2 + 2.0 * PI * k <= hi {
        min = -1.0;
    }
    (min, max)
}

fn abs_sup(r: (f64, f64)) -> f64 {
    r.0.abs().max(r.1.abs())
}

/// `sup |d| exp(−d² / (2w²))` for `d ∈ [lo, hi]`.
fn gauss_slope_sup(lo: f64, hi: f64, w: f64) -> f64 {
    let h = |d: f64| d.abs() * (-d * d / (2.0 * w * w)).exp();
    let mut best = h(lo).max(h(hi));
    for d in [-w, w] {
        if d >= lo && d <= hi {
            best = best.max(h(d));
        }
    }
    best
}

fn gauss_sup(lo: f64, hi: f64, w: f64) -> f64 {
    let near = 0.0f64.clamp(lo, hi);
    (-near * near / (2.0 * w * w)).exp()
}

/// `‖f‖₁ = max{‖f‖∞, ‖∂f/∂α‖∞, ‖∂f/∂β‖∞}`.
///
/// Families use closed-form sup-norms; analytic closures are sampled densely
/// (with exact derivatives when supplied); gridded fields use central
/// differences, one-sided at the edges.
pub fn c1_norm(f: &DataField) -> Result<f64> {
    let r = f.rect;
    let derivative_sup = match &f.source {
        Source::Constant(_) => 0.0,
        Source::Sinusoid(s) => {
            let (ua0, ua1) = (s.ka * r.a_lo + s.pa, s.ka * r.a_hi + s.pa);
            let (ub0, ub1) = (s.kb * r.b_lo + s.pb, s.kb * r.b_hi + s.pb);
            let sin_a = abs_sup(sin_range(ua0, ua1));
            let sin_b = abs_sup(sin_range(ub0, ub1));
            let cos_a = abs_sup(sin_range(
                ua0 + std::f64::consts::FRAC_PI_2,
                ua1 + std::f64::consts::FRAC_PI_2,
            ));
            let cos_b = abs_sup(sin_range(
                ub0 + std::f64::consts::FRAC_PI_2,
                ub1 + std::f64::consts::FRAC_PI_2,
            ));
            let da = (s.amplitude * s.ka).abs() * cos_a * sin_b;
            let db = (s.amplitude * s.kb).abs() * sin_a * cos_b;
            da.max(db)
        }
        Source::Bump(p) => {
            let w = p.width;
            let (a0, a1) = (r.a_lo - p.center_a, r.a_hi - p.center_a);
            let (b0, b1) = (r.b_lo - p.center_b, r.b_hi - p.center_b);
            let k = p.amplitude.abs() / (w * w);
            let da = k * gauss_slope_sup(a0, a1, w) * gauss_sup(b0, b1, w);
            let db = k * gauss_slope_sup(b0, b1, w) * gauss_sup(a0, a1, w);
            da.max(db)
        }
        Source::Grid { na, nb, values } => {
            if *na < 3 || *nb < 3 {
                return Err(Error::TooFewSamples(*na, *nb));
            }
            let ha = (r.a_hi - r.a_lo) / (*na - 1) as f64;
            let hb = (r.b_hi - r.b_lo) / (*nb - 1) as f64;
            grid_derivative_sup(*na, *nb, |i, j| values[i * nb + j], ha, hb)
        }
        Source::Analytic { value, grad } => match grad {
            Some(g) => {
                let mut best = 0.0f64;
                for_dense(&r, |a, b| {
                    let (da, db) = g(a, b);
                    best = best.max(da.abs()).max(db.abs());
                });
                best
            }
            None => {
                let n = DENSE_SAMPLES;
                let mut samples = Vec::with_capacity(n * n);
                for_dense(&r, |a, b| samples.push(value(a, b)));
                let ha = (r.a_hi - r.a_lo) / (n - 1) as f64;
                let hb = (r.b_hi - r.b_lo) / (n - 1) as f64;
                grid_derivative_sup(n, n, |i, j| samples[i * n + j], ha, hb)
            }
        },
    };
    Ok(f.sup_norm().max(derivative_sup))
}

fn grid_derivative_sup(na: usize, nb: usize, v: impl Fn(usize, usize) -> f64, ha: f64, hb: f64) -> f64 {
    let diff = |n: usize, k: usize, h: f64, at: &dyn Fn(usize) -> f64| -> f64 {
        if k == 0 {
            (at(1) - at(0)) / h
        } else if k == n - 1 {
            (at(n - 1) - at(n - 2)) / h
        } else {
            (at(k + 1) - at(k - 1)) / (2.0 * h)
        }
    };
    let mut best = 0.0f64;
    for i in 0..na {
        for j in 0..nb {
            let da = diff(na, i, ha, &|k| v(k, j));
            let db = diff(nb, j, hb, &|k| v(i, k));
            best = best.max(da.abs()).max(db.abs());
        }
    }
    best
}

/// Initial and inflow data of the problem.
///
/// `inflow` holds `[N₁⁻(t,y), N₂⁻(t,x), N₃⁺(t,x), N₄⁺(t,y)]`.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub bx: SpaceTimeBox,
    pub params: ModelParams,
    pub init: [DataField; 4],
    pub inflow: [DataField; 4],
}

const INIT_NAMES: [&str; 4] = ["N1^0", "N2^0", "N3^0", "N4^0"];
const INFLOW_NAMES: [&str; 4] = ["N1^-", "N2^-", "N3^+", "N4^+"];

impl ProblemData {
    /// Validates field domains and nonnegativity. `params.theta` is forced to 0.
    pub fn new(bx: SpaceTimeBox, params: ModelParams, init: [DataField; 4], inflow: [DataField; 4]) -> Result<Self> {
        let params = ModelParams::axis_aligned(params.c, params.s)?;
        let data = Self {
            bx,
            params,
            init,
            inflow,
        };
        for k in 0..4 {
            for (field, name, rect) in [
                (&data.init[k], INIT_NAMES[k], bx.space()),
                (&data.inflow[k], INFLOW_NAMES[k], inflow_rect(&bx, k)),
            ] {
                if !field.rect.approx_eq(&rect) {
                    return Err(Error::InvalidField(format!(
                        "{name} is defined on {:?}, expected {:?}",
                        field.rect, rect
                    )));
                }
                let (lo, hi) = field.value_range();
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidField(format!("{name} has non-finite values")));
                }
                if lo < 0.0 {
                    return Err(Error::InvalidField(format!("{name} takes negative value {lo}")));
                }
            }
        }
        Ok(data)
    }

    /// All eight fields equal to `value`.
    pub fn constant(bx: SpaceTimeBox, params: ModelParams, value: f64) -> Result<Self> {
        Self::constant_states(bx, params, [value; 4])
    }

    /// Species `i` is `values[i]` everywhere, initially and on its inflow face.
    pub fn constant_states(bx: SpaceTimeBox, params: ModelParams, values: [f64; 4]) -> Result<Self> {
        let init = values.map(|v| DataField::constant(bx.space(), v));
        let inflow = [0, 1, 2, 3].map(|k| DataField::constant(inflow_rect(&bx, k), values[k]));
        Self::new(bx, params, init, inflow)
    }

    /// Data generated by four profiles `g_i(x, y)` transported along the
    /// species directions: `N₁⁻(t,y) = g₁(a₁ − ct, y)`, `N₂⁻(t,x) = g₂(x, a₂ − ct)`,
    /// `N₃⁺(t,x) = g₃(x, b₂ + ct)`, `N₄⁺(t,y) = g₄(b₁ + ct, y)`.
    ///
    /// Such data are compatible to all orders, and with `S = 0` the solution
    /// is `N_i = g_i` shifted along the species velocity.
    pub fn from_profiles(bx: SpaceTimeBox, params: ModelParams, profiles: [Profile; 4]) -> Result<Self> {
        let c = params.c;
        let init = profiles
            .clone()
            .map(|p| DataField::analytic(bx.space(), p.value, Some(p.grad)));
        let [g1, g2, g3, g4] = profiles;
        let (a1, a2, b1, b2) = (bx.a1, bx.a2, bx.b1, bx.b2);
        let inflow = [
            {
                let (v, g) = (g1.value.clone(), g1.grad.clone());
                DataField::analytic(
                    bx.ty(),
                    Arc::new(move |t, y| v(a1 - c * t, y)),
                    Some(Arc::new(move |t, y| {
                        let (gx, gy) = g(a1 - c * t, y);
                        (-c * gx, gy)
                    })),
                )
            },
            {
                let (v, g) = (g2.value.clone(), g2.grad.clone());
                DataField::analytic(
                    bx.tx(),
                    Arc::new(move |t, x| v(x, a2 - c * t)),
                    Some(Arc::new(move |t, x| {
                        let (gx, gy) = g(x, a2 - c * t);
                        (-c * gy, gx)
                    })),
                )
            },
            {
                let (v, g) = (g3.value.clone(), g3.grad.clone());
                DataField::analytic(
                    bx.tx(),
                    Arc::new(move |t, x| v(x, b2 + c * t)),
                    Some(Arc::new(move |t, x| {
                        let (gx, gy) = g(x, b2 + c * t);
                        (c * gy, gx)
                    })),
                )
            },
            {
                let (v, g) = (g4.value.clone(), g4.grad.clone());
                DataField::analytic(
                    bx.ty(),
                    Arc::new(move |t, y| v(b1 + c * t, y)),
                    Some(Arc::new(move |t, y| {
                        let (gx, gy) = g(b1 + c * t, y);
                        (c * gx, gy)
                    })),
                )
            },
        ];
        Self::new(bx, params, init, inflow)
    }

    pub fn init_field(&self, s: Species) -> &DataField {
        &self.init[s.index()]
    }

    pub fn inflow_field(&self, s: Species) -> &DataField {
        &self.inflow[s.index()]
    }

    pub fn all_fields(&self) -> impl Iterator<Item = &DataField> {
        self.init.iter().chain(self.inflow.iter())
    }

    /// Multiplies every data field by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        let scale = |f: &DataField| {
            let g = f.clone();
            let value: ScalarFn = Arc::new(move |a, b| lambda * g.eval(a, b));
            let h = f.clone();
            let grad: Option<GradFn> = f.analytic_grad(f.rect.a_lo, f.rect.b_lo).map(|_| {
                Arc::new(move |a: f64, b: f64| {
                    let (da, db) = h.analytic_grad(a, b).unwrap_or((0.0, 0.0));
                    (lambda * da, lambda * db)
                }) as GradFn
            });
            match &f.source {
                Source::Constant(v) => DataField::constant(f.rect, lambda * v),
                Source::Sinusoid(s) => DataField::sinusoid(
                    f.rect,
                    Sinusoid {
                        offset: lambda * s.offset,
                        amplitude: lambda * s.amplitude,
                        ..*s
                    },
                ),
                Source::Bump(b) => DataField {
                    rect: f.rect,
                    source: Source::Bump(Bump {
                        offset: lambda * b.offset,
                        amplitude: lambda * b.amplitude,
                        ..*b
                    }),
                },
                Source::Grid { na, nb, values } => DataField {
                    rect: f.rect,
                    source: Source::Grid {
                        na: *na,
                        nb: *nb,
                        values: values.iter().map(|v| lambda * v).collect(),
                    },
                },
                Source::Analytic { .. } => DataField::analytic(f.rect, value, grad),
            }
        };
        Self::new(
            self.bx,
            self.params,
            [0, 1, 2, 3].map(|k| scale(&self.init[k])),
            [0, 1, 2, 3].map(|k| scale(&self.inflow[k])),
        )
    }
}

/// A smooth profile `g(x, y)` with its gradient, used by [`ProblemData::from_profiles`].
#[derive(Clone)]
pub struct Profile {
    pub value: ScalarFn,
    pub grad: GradFn,
}

impl Profile {
    pub fn new(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            grad: Arc::new(grad),
        }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(move |_, _| v, |_, _| (0.0, 0.0))
    }
}

pub(crate) fn inflow_rect(bx: &SpaceTimeBox, k: usize) -> Rect {
    match k {
        0 | 3 => bx.ty(),
        _ => bx.tx(),
    }
}

/// One failed corner condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatViolation {
    pub species: Species,
    /// Position along the shared edge (`y` for species 1 and 4, `x` for 2 and 3).
    pub coord: f64,
    pub mismatch: f64,
}

/// Checks `N₁⁰(a₁,y) = N₁⁻(0,y)`, `N₂⁰(x,a₂) = N₂⁻(0,x)`,
/// `N₃⁰(x,b₂) = N₃⁺(0,x)` and `N₄⁰(b₁,y) = N₄⁺(0,y)` at every edge sample.
pub fn check_compatibility(data: &ProblemData, tol: f64) -> Vec<CompatViolation> {
    let bx = &data.bx;
    let mut out = Vec::new();
    for s in Species::ALL {
        let init = data.init_field(s);
        let inflow = data.inflow_field(s);
        // (edge coordinate runs along x?) and the fixed coordinate of the initial field
        let along_x = matches!(s, Species::N2 | Species::N3);
        let (lo, hi) = if along_x { (bx.a1, bx.b1) } else { (bx.a2, bx.b2) };
        let mut coords = init.edge_coords(along_x);
        coords.extend(inflow.edge_coords(false));
        if coords.is_empty() {
            coords = (0..EDGE_SAMPLES).map(|k| lerp(lo, hi, k, EDGE_SAMPLES)).collect();
        }
        coords.sort_by(f64::total_cmp);
        coords.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        for z in coords {
            let from_init = match s {
                Species::N1 => init.eval(bx.a1, z),
                Species::N2 => init.eval(z, bx.a2),
                Species::N3 => init.eval(z, bx.b2),
                Species::N4 => init.eval(bx.b1, z),
            };
            let from_inflow = inflow.eval(0.0, z);
            let mismatch = (from_init - from_inflow).abs();
            if !(mismatch <= tol) {
                out.push(CompatViolation {
                    species: s,
                    coord: z,
                    mismatch,
                });
            }
        }
    }
    out
}

/// `p = 4cS (1 + 2 max{4T, 2(b₁−a₁)/c, (b₂−a₂)/c})`.
pub fn compute_p(bx: &SpaceTimeBox, params: &ModelParams) -> f64 {
    let c = params.c;
    let m = (4.0 * bx.t).max(2.0 * bx.width() / c).max(bx.height() / c);
    4.0 * c * params.s * (1.0 + 2.0 * m)
}

/// Lipschitz constant `p′ = 4cS max{T, (b₁−a₁)/c, (b₂−a₂)/c}` of the fixed-point operator.
pub fn compute_p_prime(bx: &SpaceTimeBox, params: &ModelParams) -> f64 {
    let c = params.c;
    4.0 * c * params.s * bx.t.max(bx.width() / c).max(bx.height() / c)
}

/// Weighted maximum of the eight `‖·‖₁` data norms.
///
/// Coefficients: `max{1, 2c}` for the initial fields, `1 + c` for `N₁⁻`,
/// `max{2, 1 + c}` for `N₂⁻` and `N₃⁺`, `2 + c` for `N₄⁺`.
pub fn compute_q(data: &ProblemData) -> Result<f64> {
    let c = data.params.c;
    let init_coef = 1f64.max(2.0 * c);
    let side_coef = 2f64.max(1.0 + c);
    let inflow_coef = [1.0 + c, side_coef, side_coef, 2.0 + c];
    let mut q = 0.0f64;
    for ((init, inflow), coef) in data.init.iter().zip(&data.inflow).zip(inflow_coef) {
        q = q.max(init_coef * c1_norm(init)?);
        q = q.max(coef * c1_norm(inflow)?);
    }
    Ok(q)
}

/// Existence-gate numbers for a problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateReport {
    pub p: f64,
    pub p_prime: f64,
    pub q: f64,
    pub pq: f64,
    pub gate_ok: bool,
    /// Smaller root of `pR² − R + q` (equals `q` when `p = 0`).
    pub r_lo: f64,
    /// Larger root; `+∞` when `p = 0`.
    pub r_hi: f64,
    /// A-priori bound on `‖N‖`.
    pub bound_b: f64,
    /// Bound on `N` together with its first partial derivatives.
    pub bound_full: f64,
    /// Largest uniform data scale `1/(4pq)` that keeps the gate open.
    pub max_scale: f64,
}

impl GateReport {
    /// `S = 0`: no collisions, the solution is transported data.
    pub fn is_free_streaming(&self) -> bool {
        self.p == 0.0
    }
}

/// Assembles `p`, `q`, the gate verdict, the admissible radius interval and
/// the a-priori bounds.
///
/// With `p = 0` the quadratic degenerates; the gate is reported open, `r_hi`
/// is `+∞`, `bound_b` is the largest data sup-norm and `bound_full` is
/// `max{1, c, 1/c}` times the largest data `‖·‖₁` norm, which bound the
/// transported solution and its derivatives.
pub fn gate_report(data: &ProblemData) -> Result<GateReport> {
    let p = compute_p(&data.bx, &data.params);
    let p_prime = compute_p_prime(&data.bx, &data.params);
    let q = compute_q(data)?;
    let pq = p * q;
    let c = data.params.c;
    let max_scale = if pq > 0.0 { 1.0 / (4.0 * pq) } else { f64::INFINITY };
    if p == 0.0 {
        let sup = data.all_fields().map(DataField::sup_norm).fold(0.0, f64::max);
        let mut c1 = 0.0f64;
        for f in data.all_fields() {
            c1 = c1.max(c1_norm(f)?);
        }
        return Ok(GateReport {
            p,
            p_prime,
            q,
            pq,
            gate_ok: true,
            r_lo: q,
            r_hi: f64::INFINITY,
            bound_b: sup,
            bound_full: 1f64.max(c).max(1.0 / c) * c1,
            max_scale,
        });
    }
    let gate_ok = pq <= 0.25;
    let (r_lo, r_hi) = if gate_ok {
        let root = (1.0 - 4.0 * pq).max(0.0).sqrt();
        // small root via Vieta avoids cancellation when pq ≪ 1
        (2.0 * q / (1.0 + root), (1.0 + root) / (2.0 * p))
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(GateReport {
        p,
        p_prime,
        q,
        pq,
        gate_ok,
        r_lo,
        r_hi,
        bound_b: r_hi,
        bound_full: 1f64.max(2.0 / c) * r_hi,
        max_scale,
    })
}
