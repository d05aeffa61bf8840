//! Boundary curves, Cartesian grids, point classification and the curvilinear
//! strips used by the continuation.
//!
//! Curves are 2π-periodic, counterclockwise, with outward normal
//! `n = (y', -x') / |q'|` and signed curvature `κ > 0` on convex arcs.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown catalog curve '{0}' (expected disk, kite, kite2, star5, ring or ellipse)")]
    UnknownCurve(String),
    #[error("invalid curve parameters: {0}")]
    BadParams(String),
    #[error("curve is not regular: |q'(θ)| = {speed:e} at θ = {theta}")]
    Degenerate { theta: f64, speed: f64 },
    #[error("offset distance {delta} exceeds the curve's reach (1 + δκ = {margin:.3e} at θ = {theta:.4}); use a smaller horizon")]
    OffsetReach { delta: f64, theta: f64, margin: f64 },
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("grid dimensions must be even and positive, got {nx} x {ny}")]
    BadDims { nx: usize, ny: usize },
    #[error("boundary sample count {0} too small")]
    TooFewSamples(usize),
    #[error("inner matching points leave the domain at θ_p = {theta:.6} (curvature {curvature:.3} too high for d·k₁)")]
    InnerPointsLeave { theta: f64, curvature: f64 },
    #[error("Cartesian strip node ({i}, {j}) has no boundary association after repair")]
    Unassociated { i: usize, j: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position and first two derivatives at one parameter value.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub pos: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
}

#[derive(Clone, Debug)]
enum Shape {
    /// `r(θ) = r0 + Σ (c cos kθ + s sin kθ)` about `center`.
    Radial {
        center: Vec2,
        r0: f64,
        terms: Vec<(f64, f64, f64)>,
    },
    /// `x = cos θ + 0.35 cos(hθ) - 0.35`, `y = 0.7 sin θ`.
    Kite { harmonic: f64 },
    Ellipse { center: Vec2, a: f64, b: f64 },
    /// Trigonometric interpolant of samples, `z(θ) = Σ c_k e^{ikθ}` with `z = x + iy`.
    Fourier { coeffs: Vec<(f64, Complex64)> },
    Offset { base: Box<BoundaryCurve>, distance: f64 },
}

#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    name: String,
    shape: Shape,
}

const DENSE: usize = 4096;

impl BoundaryCurve {
    fn checked(name: String, shape: Shape) -> Result<Self, GeometryError> {
        let c = BoundaryCurve { name, shape };
        for i in 0..DENSE {
            let t = TAU * i as f64 / DENSE as f64;
            let speed = c.eval(t).d1.norm();
            if !(speed > 1e-12) {
                return Err(GeometryError::Degenerate { theta: t, speed });
            }
        }
        Ok(c)
    }

    pub fn disk(radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::BadParams(format!("disk radius {radius}")));
        }
        Self::checked(
            format!("disk(radius={radius})"),
            Shape::Radial {
                center: Vec2::default(),
                r0: radius,
                terms: vec![],
            },
        )
    }

    /// The kite as printed: `x = cos θ + 0.35 cos θ - 0.35`, `y = 0.7 sin θ`.
    pub fn kite() -> Self {
        BoundaryCurve {
            name: "kite".into(),
            shape: Shape::Kite { harmonic: 1.0 },
        }
    }

    /// Kite variant with the second harmonic: `x = cos θ + 0.35 cos 2θ - 0.35`.
    pub fn kite2() -> Self {
        BoundaryCurve {
            name: "kite2".into(),
            shape: Shape::Kite { harmonic: 2.0 },
        }
    }

    /// `r(θ) = 5 + cos(7θ)/2 + sin(4θ)/3`.
    pub fn star5() -> Self {
        BoundaryCurve {
            name: "star5".into(),
            shape: Shape::Radial {
                center: Vec2::default(),
                r0: 5.0,
                terms: vec![(7.0, 0.5, 0.0), (4.0, 0.0, 1.0 / 3.0)],
            },
        }
    }

    /// `r(θ) = 1.1 + cos(7θ)/20 + sin(4θ)/30`.
    pub fn ring() -> Self {
        BoundaryCurve {
            name: "ring".into(),
            shape: Shape::Radial {
                center: Vec2::default(),
                r0: 1.1,
                terms: vec![(7.0, 1.0 / 20.0, 0.0), (4.0, 0.0, 1.0 / 30.0)],
            },
        }
    }

    pub fn ellipse(center: Vec2, a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a > 0.0 && b > 0.0) {
            return Err(GeometryError::BadParams(format!("ellipse semi-axes {a}, {b}")));
        }
        Self::checked(format!("ellipse(a={a},b={b})"), Shape::Ellipse { center, a, b })
    }

    /// Catalog lookup; `params` holds `radius` for disk, `a`, `b` for ellipse.
    pub fn from_catalog(name: &str, params: &[(&str, f64)]) -> Result<Self, GeometryError> {
        let get = |k: &str, default: f64| {
            params
                .iter()
                .find(|(n, _)| *n == k)
                .map(|(_, v)| *v)
                .unwrap_or(default)
        };
        match name {
            "disk" => Self::disk(get("radius", 1.0)),
            "kite" => Ok(Self::kite()),
            "kite2" => Ok(Self::kite2()),
            "star5" => Ok(Self::star5()),
            "ring" => Ok(Self::ring()),
            "ellipse" => Self::ellipse(Vec2::default(), get("a", 1.0), get("b", 0.5)),
            other => Err(GeometryError::UnknownCurve(other.to_string())),
        }
    }

    /// Trigonometric interpolant through `points` at `θ_j = 2πj/n`.
    /// Clockwise input is reversed so the result is counterclockwise.
    pub fn from_samples(points: &[Vec2]) -> Result<Self, GeometryError> {
        let n = points.len();
        if n < 8 {
            return Err(GeometryError::TooFewSamples(n));
        }
        let area: f64 = (0..n).map(|j| points[j].cross(points[(j + 1) % n])).sum();
        let mut pts = points.to_vec();
        if area < 0.0 {
            pts[1..].reverse();
        }
        let mut buf: Vec<Complex64> = pts.iter().map(|p| Complex64::new(p.x, p.y)).collect();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        let mut coeffs = Vec::with_capacity(n + 1);
        for (j, c) in buf.iter().enumerate() {
            let c = c / n as f64;
            if n % 2 == 0 && j == n / 2 {
                let half = c * 0.5;
                coeffs.push(((n / 2) as f64, half));
                coeffs.push((-((n / 2) as f64), half));
            } else {
                let k = crate::fft::signed_freq(j, n) as f64;
                coeffs.push((k, c));
            }
        }
        Self::checked(format!("tabulated({n})"), Shape::Fourier { coeffs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> CurvePoint {
        match &self.shape {
            Shape::Radial { center, r0, terms } => {
                let (mut r, mut r1, mut r2) = (*r0, 0.0, 0.0);
                for &(k, c, s) in terms {
                    let (sn, cs) = (k * t).sin_cos();
                    r += c * cs + s * sn;
                    r1 += k * (-c * sn + s * cs);
                    r2 += -k * k * (c * cs + s * sn);
                }
                let (sn, cs) = t.sin_cos();
                let e = Vec2::new(cs, sn);
                let f = Vec2::new(-sn, cs);
                CurvePoint {
                    pos: *center + e * r,
                    d1: e * r1 + f * r,
                    d2: e * (r2 - r) + f * (2.0 * r1),
                }
            }
            Shape::Kite { harmonic: h } => {
                let (s, c) = t.sin_cos();
                let (sh, ch) = (h * t).sin_cos();
                CurvePoint {
                    pos: Vec2::new(c + 0.35 * ch - 0.35, 0.7 * s),
                    d1: Vec2::new(-s - 0.35 * h * sh, 0.7 * c),
                    d2: Vec2::new(-c - 0.35 * h * h * ch, -0.7 * s),
                }
            }
            Shape::Ellipse { center, a, b } => {
                let (s, c) = t.sin_cos();
                CurvePoint {
                    pos: *center + Vec2::new(a * c, b * s),
                    d1: Vec2::new(-a * s, b * c),
                    d2: Vec2::new(-a * c, -b * s),
                }
            }
            Shape::Fourier { coeffs } => {
                let i = Complex64::new(0.0, 1.0);
                let (mut z, mut z1, mut z2) = (Complex64::default(), Complex64::default(), Complex64::default());
                for &(k, c) in coeffs {
                    let e = c * Complex64::from_polar(1.0, k * t);
                    z += e;
                    z1 += e * i * k;
                    z2 -= e * k * k;
                }
                CurvePoint {
                    pos: Vec2::new(z.re, z.im),
                    d1: Vec2::new(z1.re, z1.im),
                    d2: Vec2::new(z2.re, z2.im),
                }
            }
            Shape::Offset { base, distance } => {
                let b = base.eval(t);
                let n = outward(b.d1);
                let kappa = base.curvature(t);
                let stretch = 1.0 + distance * kappa;
                // d2 from a central difference of the exact first derivative.
                let e = 1e-5;
                let dp = base.eval(t + e);
                let dm = base.eval(t - e);
                let fp = dp.d1 * (1.0 + distance * curvature_of(&dp));
                let fm = dm.d1 * (1.0 + distance * curvature_of(&dm));
                CurvePoint {
                    pos: b.pos + n * *distance,
                    d1: b.d1 * stretch,
                    d2: (fp - fm) * (0.5 / e),
                }
            }
        }
    }

    pub fn position(&self, t: f64) -> Vec2 {
        match &self.shape {
            Shape::Offset { base, distance } => {
                let b = base.eval(t);
                b.pos + outward(b.d1) * *distance
            }
            _ => self.eval(t).pos,
        }
    }

    /// Unit outward normal.
    pub fn normal(&self, t: f64) -> Vec2 {
        match &self.shape {
            Shape::Offset { base, .. } => base.normal(t),
            _ => outward(self.eval(t).d1),
        }
    }

    /// Unit tangent in the direction of increasing θ.
    pub fn tangent(&self, t: f64) -> Vec2 {
        let n = self.normal(t);
        Vec2::new(-n.y, n.x)
    }

    /// Signed curvature, positive where the domain is locally convex.
    pub fn curvature(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Offset { base, distance } => {
                let k = base.curvature(t);
                k / (1.0 + distance * k)
            }
            _ => curvature_of(&self.eval(t)),
        }
    }

    /// Arc length by the periodic trapezoid rule.
    pub fn perimeter(&self) -> f64 {
        let n = DENSE;
        (0..n)
            .map(|i| self.eval(TAU * i as f64 / n as f64).d1.norm())
            .sum::<f64>()
            * TAU
            / n as f64
    }

    /// Smallest `1 + δκ(θ)` over a dense scan, with its location.
    fn min_stretch(&self, delta: f64) -> (f64, f64) {
        let mut worst = (f64::INFINITY, 0.0);
        for i in 0..DENSE {
            let t = TAU * i as f64 / DENSE as f64;
            let m = 1.0 + delta * self.curvature(t);
            if m < worst.0 {
                worst = (m, t);
            }
        }
        worst
    }

    /// Axis-aligned bounds of `{q(θ) + γ n(θ) : γ ∈ [0, extent]}`.
    pub fn bounds(&self, extent: f64) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..DENSE {
            let t = TAU * i as f64 / DENSE as f64;
            let q = self.position(t);
            let n = self.normal(t);
            for p in [q, q + n * extent] {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        (lo, hi)
    }

    /// Newton refinement of the nearest-point problem from seed `t0`.
    /// Returns `(θ*, signed distance)`, positive outside.
    pub fn nearest_from(&self, y: Vec2, t0: f64) -> (f64, f64) {
        let mut t = t0;
        for _ in 0..40 {
            let c = self.eval(t);
            let r = c.pos - y;
            let g = r.dot(c.d1);
            let hess = c.d1.norm2() + r.dot(c.d2);
            let mut step = if hess > 0.0 { g / hess } else { g.signum() * 1e-3 };
            step = step.clamp(-0.2, 0.2);
            t -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let q = self.position(t);
        let r = y - q;
        let s = r.norm();
        let sign = if r.dot(self.normal(t)) > 0.0 { 1.0 } else { -1.0 };
        (t.rem_euclid(TAU), sign * s)
    }

    /// Signed distance with its nearest parameter, seeded from a dense scan.
    pub fn signed_distance(&self, y: Vec2) -> (f64, f64) {
        let n = 2048;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let d = (self.position(t) - y).norm2();
            if d < best.0 {
                best = (d, t);
            }
        }
        self.nearest_from(y, best.1)
    }
}

#[inline]
fn outward(d1: Vec2) -> Vec2 {
    let s = d1.norm();
    Vec2::new(d1.y / s, -d1.x / s)
}

#[inline]
fn curvature_of(c: &CurvePoint) -> f64 {
    c.d1.cross(c.d2) / c.d1.norm().powi(3)
}

/// `θ ↦ q(θ) + δ n(θ)`; fails if `1 + δκ` is not safely positive.
pub fn offset_curve(curve: &BoundaryCurve, delta: f64) -> Result<BoundaryCurve, GeometryError> {
    if delta == 0.0 {
        return Ok(curve.clone());
    }
    let (margin, theta) = curve.min_stretch(delta);
    if margin < 0.05 {
        return Err(GeometryError::OffsetReach { delta, theta, margin });
    }
    Ok(BoundaryCurve {
        name: format!("offset({}, {delta})", curve.name),
        shape: Shape::Offset {
            base: Box::new(curve.clone()),
            distance: delta,
        },
    })
}

#[derive(Clone, Debug)]
pub struct BoundarySamples {
    pub theta: Vec<f64>,
    pub point: Vec<Vec2>,
    pub normal: Vec<Vec2>,
    pub tangent: Vec<Vec2>,
    pub curvature: Vec<f64>,
    pub k2: f64,
}

impl BoundarySamples {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

pub fn sample_boundary(curve: &BoundaryCurve, b: usize) -> Result<BoundarySamples, GeometryError> {
    if b < 3 {
        return Err(GeometryError::TooFewSamples(b));
    }
    let k2 = TAU / b as f64;
    let theta: Vec<f64> = (0..b).map(|p| p as f64 * k2).collect();
    let point = theta.iter().map(|&t| curve.position(t)).collect();
    let normal: Vec<Vec2> = theta.iter().map(|&t| curve.normal(t)).collect();
    let tangent = normal.iter().map(|n| Vec2::new(-n.y, n.x)).collect();
    let curvature = theta.iter().map(|&t| curve.curvature(t)).collect();
    Ok(BoundarySamples {
        theta,
        point,
        normal,
        tangent,
        curvature,
        k2,
    })
}

/// `B = round(perimeter / h)`.
pub fn boundary_count(curve: &BoundaryCurve, h: f64) -> usize {
    (curve.perimeter() / h).round() as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartesianGrid {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CartesianGrid {
    pub fn new(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Self, GeometryError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(GeometryError::BadStep(h));
        }
        if nx == 0 || ny == 0 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(GeometryError::BadDims { nx, ny });
        }
        Ok(CartesianGrid { x0, y0, h, nx, ny })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> Vec2 {
        let (i, j) = self.coords(idx);
        self.node(i, j)
    }

    pub fn periods(&self) -> (f64, f64) {
        (self.nx as f64 * self.h, self.ny as f64 * self.h)
    }

    /// Nearest node by rounding, if inside the grid.
    pub fn nearest_node(&self, p: Vec2) -> Option<(usize, usize)> {
        let fi = ((p.x - self.x0) / self.h).round();
        let fj = ((p.y - self.y0) / self.h).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    /// Grid with step `h/2` on the same origin, twice the node count per axis.
    pub fn refined(&self) -> CartesianGrid {
        CartesianGrid {
            x0: self.x0,
            y0: self.y0,
            h: self.h / 2.0,
            nx: 2 * self.nx,
            ny: 2 * self.ny,
        }
    }
}

/// Smallest centered grid with step `h` covering the curve, its strip of normal
/// extent `c·k₁`, and a two-node margin. Dimensions are even and FFT-friendly.
pub fn build_cartesian_grid(curve: &BoundaryCurve, h: f64, c: usize, k1: f64) -> Result<CartesianGrid, GeometryError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::BadStep(h));
    }
    let (lo, hi) = curve.bounds(c as f64 * k1);
    let margin = 2.0 * h;
    let dims = |a: f64, b: f64| crate::fft::next_smooth_even(((b - a + 2.0 * margin) / h).ceil() as usize + 1);
    let nx = dims(lo.x, hi.x);
    let ny = dims(lo.y, hi.y);
    let cx = 0.5 * (lo.x + hi.x);
    let cy = 0.5 * (lo.y + hi.y);
    CartesianGrid::new(
        cx - 0.5 * (nx - 1) as f64 * h,
        cy - 0.5 * (ny - 1) as f64 * h,
        h,
        nx,
        ny,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PointLabel {
    Exterior = 0,
    Interior = 1,
    Collar = 2,
    ContinuationStrip = 3,
}

/// Labels relative to a curve `Γ`: `Interior` (inside or on `Γ`), `Collar`
/// (outside within `δ`), `ContinuationStrip` (beyond the collar within the
/// strip width), `Exterior` otherwise.
#[derive(Clone, Debug)]
pub struct PointClassification {
    pub grid: CartesianGrid,
    pub delta: f64,
    pub strip_width: f64,
    pub labels: Vec<PointLabel>,
    /// Signed distance to `Γ` for nodes in the band around it, NaN elsewhere.
    pub signed_distance: Vec<f64>,
    /// Nearest curve parameter for band nodes, NaN elsewhere.
    pub nearest_theta: Vec<f64>,
    pub interior: Vec<usize>,
    pub collar: Vec<usize>,
    pub strip: Vec<usize>,
}

impl PointClassification {
    pub fn label(&self, i: usize, j: usize) -> PointLabel {
        self.labels[self.grid.index(i, j)]
    }

    /// Interior or collar; the data support of the nonlocal problem.
    pub fn data_mask(&self) -> Vec<bool> {
        self.labels
            .iter()
            .map(|l| matches!(l, PointLabel::Interior | PointLabel::Collar))
            .collect()
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|l| *l == PointLabel::Interior).collect()
    }

    pub fn mask_bytes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| *l as u8).collect()
    }
}

/// Classify every grid node against `curve` with collar width `delta` and a
/// continuation strip of `strip_width` beyond it.
pub fn classify_points(
    grid: &CartesianGrid,
    curve: &BoundaryCurve,
    delta: f64,
    strip_width: f64,
) -> Result<PointClassification, GeometryError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(GeometryError::BadParams(format!("collar width {delta}")));
    }
    if delta > 0.0 {
        let (margin, theta) = curve.min_stretch(delta);
        if margin < 0.05 {
            return Err(GeometryError::OffsetReach { delta, theta, margin });
        }
    }
    let h = grid.h;
    let w_in = 6.0 * h;
    let w_out = delta + strip_width + 2.0 * h;
    let n_s = ((4.0 * curve.perimeter() / h).ceil() as usize).max(1024);
    let ts: Vec<f64> = (0..n_s).map(|i| TAU * i as f64 / n_s as f64).collect();
    let qs: Vec<Vec2> = ts.iter().map(|&t| curve.position(t)).collect();
    let ns: Vec<Vec2> = ts.iter().map(|&t| curve.normal(t)).collect();

    let len = grid.len();
    let mut sd = vec![f64::NAN; len];
    let mut th = vec![f64::NAN; len];

    // Band nodes: rasterize the quadrilaterals spanned by consecutive normals.
    for i in 0..n_s {
        let i2 = (i + 1) % n_s;
        let poly = [
            qs[i] - ns[i] * w_in,
            qs[i] + ns[i] * w_out,
            qs[i2] + ns[i2] * w_out,
            qs[i2] - ns[i2] * w_in,
        ];
        let seed = ts[i] + 0.5 * TAU / n_s as f64;
        for_nodes_in_convex_hull(grid, &poly, |idx| {
            let y = grid.node_at(idx);
            let (t, s) = curve.nearest_from(y, seed);
            if sd[idx].is_nan() || s.abs() < sd[idx].abs() {
                sd[idx] = s;
                th[idx] = t;
            }
        });
    }

    // Remaining nodes: even-odd rule against the dense polygon.
    let mut inside = vec![false; len];
    let mut xs = Vec::new();
    for j in 0..grid.ny {
        let y = grid.y0 + j as f64 * h;
        xs.clear();
        for i in 0..n_s {
            let (a, b) = (qs[i], qs[(i + 1) % n_s]);
            if (a.y <= y) != (b.y <= y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            let i0 = ((pair[0] - grid.x0) / h).ceil().max(0.0) as usize;
            let i1 = ((pair[1] - grid.x0) / h).floor();
            if i1 < 0.0 {
                continue;
            }
            let i1 = (i1 as usize).min(grid.nx - 1);
            for i in i0..=i1 {
                inside[grid.index(i, j)] = true;
            }
        }
    }

    let tol = 1e-12 * (1.0 + grid.x0.abs().max(grid.y0.abs()));
    let mut labels = vec![PointLabel::Exterior; len];
    let (mut interior, mut collar, mut strip) = (Vec::new(), Vec::new(), Vec::new());
    for idx in 0..len {
        let label = if sd[idx].is_nan() {
            if inside[idx] {
                PointLabel::Interior
            } else {
                PointLabel::Exterior
            }
        } else {
            let s = sd[idx];
            if s <= tol {
                PointLabel::Interior
            } else if s <= delta + tol && delta > 0.0 {
                PointLabel::Collar
            } else if s <= delta + strip_width + tol {
                PointLabel::ContinuationStrip
            } else {
                PointLabel::Exterior
            }
        };
        labels[idx] = label;
        match label {
            PointLabel::Interior => interior.push(idx),
            PointLabel::Collar => collar.push(idx),
            PointLabel::ContinuationStrip => strip.push(idx),
            PointLabel::Exterior => {}
        }
    }
    Ok(PointClassification {
        grid: *grid,
        delta,
        strip_width,
        labels,
        signed_distance: sd,
        nearest_theta: th,
        interior,
        collar,
        strip,
    })
}

/// Calls `f` for every grid node inside (or on) the convex polygon `poly`.
fn for_nodes_in_convex_hull(grid: &CartesianGrid, poly: &[Vec2], mut f: impl FnMut(usize)) {
    let h = grid.h;
    let ymin = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let ymax = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let j0 = ((ymin - grid.y0) / h).ceil().max(0.0) as i64;
    let j1 = (((ymax - grid.y0) / h).floor() as i64).min(grid.ny as i64 - 1);
    let slack = 1e-9 * h;
    for j in j0..=j1 {
        let y = grid.y0 + j as f64 * h;
        let (mut xl, mut xr) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..poly.len() {
            let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
            let (lo, hi) = if a.y <= b.y { (a, b) } else { (b, a) };
            if y < lo.y - slack || y > hi.y + slack {
                continue;
            }
            let x = if (hi.y - lo.y).abs() < 1e-300 {
                xl = xl.min(lo.x.min(hi.x));
                xr = xr.max(lo.x.max(hi.x));
                continue;
            } else {
                lo.x + (y - lo.y).clamp(0.0, hi.y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y)
            };
            xl = xl.min(x);
            xr = xr.max(x);
        }
        if xl > xr {
            continue;
        }
        let i0 = ((xl - slack - grid.x0) / h).ceil().max(0.0) as i64;
        let i1 = (((xr + slack - grid.x0) / h).floor() as i64).min(grid.nx as i64 - 1);
        for i in i0..=i1 {
            f(grid.index(i as usize, j as usize));
        }
    }
}

/// Inner matching points `r[p][q] = q(θ_p) + n(θ_p)(q - d + 1)k₁` and outer
/// points `s[p][q] = q(θ_p) + n(θ_p) q k₁/n_r`, stored row-major per `p`.
#[derive(Clone, Debug)]
pub struct CurvilinearGrids {
    pub d: usize,
    pub c_r: usize,
    pub k1: f64,
    pub n_r: usize,
    pub inner: Vec<Vec2>,
    pub outer: Vec<Vec2>,
}

impl CurvilinearGrids {
    pub fn inner_point(&self, p: usize, q: usize) -> Vec2 {
        self.inner[p * self.d + q]
    }

    pub fn outer_point(&self, p: usize, q: usize) -> Vec2 {
        self.outer[p * (self.c_r + 1) + q]
    }

    pub fn boundary_count(&self) -> usize {
        self.inner.len() / self.d
    }
}

pub fn build_curvilinear_grids(
    samples: &BoundarySamples,
    d: usize,
    c: usize,
    k1: f64,
    n_r: usize,
) -> Result<CurvilinearGrids, GeometryError> {
    if d < 2 || c < 1 || n_r < 1 {
        return Err(GeometryError::BadParams(format!("d={d}, C={c}, n_r={n_r}")));
    }
    let c_r = c * n_r;
    let b = samples.len();
    let mut inner = Vec::with_capacity(b * d);
    let mut outer = Vec::with_capacity(b * (c_r + 1));
    for p in 0..b {
        let kappa = samples.curvature[p];
        if 1.0 - (d - 1) as f64 * k1 * kappa <= 0.0 {
            return Err(GeometryError::InnerPointsLeave {
                theta: samples.theta[p],
                curvature: kappa,
            });
        }
        let (q0, n) = (samples.point[p], samples.normal[p]);
        for q in 0..d {
            inner.push(q0 + n * ((q as f64 - (d - 1) as f64) * k1));
        }
        for q in 0..=c_r {
            outer.push(q0 + n * (q as f64 * k1 / n_r as f64));
        }
        // The shared boundary point is bit-identical in both strips.
        inner[p * d + d - 1] = q0;
    }
    Ok(CurvilinearGrids {
        d,
        c_r,
        k1,
        n_r,
        inner,
        outer,
    })
}

/// Association of strip nodes with boundary parameter indices.
#[derive(Clone, Debug)]
pub struct ProximityMap {
    /// Grid indices of the strip nodes, in increasing order.
    pub nodes: Vec<usize>,
    /// Boundary parameter index for each entry of `nodes`.
    pub param: Vec<usize>,
    pub m: usize,
    pub k_left: usize,
    pub b: usize,
}

impl ProximityMap {
    /// Stencil of `M` parameter indices around `p`, wrapping periodically.
    pub fn stencil(&self, p: usize, shift: isize) -> Vec<usize> {
        let b = self.b as isize;
        (0..self.m as isize)
            .map(|k| (p as isize - self.k_left as isize + shift + k).rem_euclid(b) as usize)
            .collect()
    }
}

/// Build the proximity map over the nodes flagged in `strip_mask`.
pub fn build_proximity_map(
    grid: &CartesianGrid,
    curvilinear: &CurvilinearGrids,
    strip_mask: &[bool],
    m: usize,
) -> Result<ProximityMap, GeometryError> {
    let b = curvilinear.boundary_count();
    if m == 0 || m > b {
        return Err(GeometryError::BadParams(format!("stencil size M={m} for B={b}")));
    }
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); grid.len()];
    for p in 0..b {
        for q in 0..=curvilinear.c_r {
            let s = curvilinear.outer_point(p, q);
            if let Some((i, j)) = grid.nearest_node(s) {
                let idx = grid.index(i, j);
                if !strip_mask[idx] {
                    continue;
                }
                let d2 = (grid.node(i, j) - s).norm2();
                if d2 < best[idx].0 {
                    best[idx] = (d2, p);
                }
            }
        }
    }
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| strip_mask[i]).collect();
    let mut param = Vec::with_capacity(nodes.len());
    for &idx in &nodes {
        if best[idx].1 != usize::MAX {
            param.push(best[idx].1);
            continue;
        }
        // Orphan: adopt the association of the nearest associated neighbour.
        let (i, j) = grid.coords(idx);
        let mut found: Option<(usize, usize)> = None;
        'rings: for r in 1..=4i64 {
            let mut cand: Option<(usize, usize)> = None;
            for dj in -r..=r {
                for di in -r..=r {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= grid.nx as i64 || jj >= grid.ny as i64 {
                        continue;
                    }
                    let nb = grid.index(ii as usize, jj as usize);
                    if best[nb].1 == usize::MAX {
                        continue;
                    }
                    let dist = (di * di + dj * dj) as usize;
                    if cand.map_or(true, |(dd, _)| dist < dd) {
                        cand = Some((dist, best[nb].1));
                    }
                }
            }
            if cand.is_some() {
                found = cand;
                break 'rings;
            }
        }
        match found {
            Some((_, p)) => param.push(p),
            None => return Err(GeometryError::Unassociated { i, j }),
        }
    }
    Ok(ProximityMap {
        nodes,
        param,
        m,
        k_left: (m - 1) / 2,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn catalog_reference_points() {
        let d = BoundaryCurve::disk(1.0).unwrap();
        assert!(close(d.position(0.0), Vec2::new(1.0, 0.0), 1e-15));
        assert!(close(d.normal(0.0), Vec2::new(1.0, 0.0), 1e-15));
        let k = BoundaryCurve::kite();
        assert!(close(k.position(0.0), Vec2::new(1.0, 0.0), 1e-15));
        assert!(close(k.position(PI), Vec2::new(-1.7, 0.0), 1e-15));
        let r = BoundaryCurve::ring();
        assert!(close(r.position(0.0), Vec2::new(1.15, 0.0), 1e-15));
        assert!(BoundaryCurve::from_catalog("blob", &[]).is_err());
        assert!(BoundaryCurve::disk(0.0).is_err());
    }

    #[test]
    fn disk_sampling_four_points() {
        let s = sample_boundary(&BoundaryCurve::disk(1.0).unwrap(), 4).unwrap();
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (p, e) in s.point.iter().zip(expect) {
            assert!(close(*p, Vec2::new(e.0, e.1), 1e-15));
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let curves = [
            BoundaryCurve::kite(),
            BoundaryCurve::kite2(),
            BoundaryCurve::star5(),
            BoundaryCurve::ring(),
            BoundaryCurve::ellipse(Vec2::new(0.1, -0.2), 0.3, 0.7).unwrap(),
        ];
        let e = 1e-6;
        for c in &curves {
            for t in [0.0, 0.7, 2.9, 5.5] {
                let p = c.eval(t);
                let fd = (c.eval(t + e).pos - c.eval(t - e).pos) * (0.5 / e);
                let fd2 = (c.eval(t + e).d1 - c.eval(t - e).d1) * (0.5 / e);
                assert!(close(p.d1, fd, 1e-7), "{}", c.name());
                assert!(close(p.d2, fd2, 1e-6), "{}", c.name());
            }
        }
    }

    #[test]
    fn normals_point_outward() {
        for c in [BoundaryCurve::kite(), BoundaryCurve::star5(), BoundaryCurve::ring()] {
            for i in 0..64 {
                let t = TAU * i as f64 / 64.0;
                let q = c.position(t);
                let n = c.normal(t);
                assert!((n.norm() - 1.0).abs() < 1e-14);
                let (_, s) = c.signed_distance(q + n * 1e-3);
                assert!((s - 1e-3).abs() < 1e-9, "{} {t} {s}", c.name());
            }
        }
    }

    #[test]
    fn tabulated_curve_interpolates_samples() {
        let pts: Vec<Vec2> = (0..64)
            .map(|j| {
                let t = TAU * j as f64 / 64.0;
                BoundaryCurve::ring().position(t)
            })
            .collect();
        let c = BoundaryCurve::from_samples(&pts).unwrap();
        for t in [0.1, 1.0, 4.0] {
            assert!(close(c.position(t), BoundaryCurve::ring().position(t), 1e-12));
        }
        // Clockwise input is reoriented.
        let rev: Vec<Vec2> = pts.iter().rev().cloned().collect();
        let c2 = BoundaryCurve::from_samples(&rev).unwrap();
        assert!(c2.eval(0.3).d1.cross(c2.eval(0.3).d2) > 0.0);
    }

    #[test]
    fn offsets() {
        let d = BoundaryCurve::disk(1.0).unwrap();
        let o = offset_curve(&d, 0.2).unwrap();
        for t in [0.0, 1.3, 4.4] {
            assert!((o.position(t).norm() - 1.2).abs() < 1e-14);
            assert!((o.curvature(t) - 1.0 / 1.2).abs() < 1e-12);
        }
        let back = offset_curve(&o, -0.2).unwrap();
        assert!(close(back.position(2.0), d.position(2.0), 1e-14));
        assert!(offset_curve(&BoundaryCurve::ring(), 0.2).is_ok());
        assert!(matches!(
            offset_curve(&BoundaryCurve::ring(), 0.6),
            Err(GeometryError::OffsetReach { .. })
        ));
    }

    #[test]
    fn grid_extent() {
        let d = BoundaryCurve::disk(1.0).unwrap();
        let g = build_cartesian_grid(&d, 0.01, 25, 0.01).unwrap();
        assert!(g.nx >= 250 && g.nx % 2 == 0 && g.nx == g.ny);
        assert!(g.x0 <= -1.25 && g.x0 + (g.nx - 1) as f64 * g.h >= 1.25);
        assert!(build_cartesian_grid(&d, 0.0, 25, 0.01).is_err());
        let s = build_cartesian_grid(&BoundaryCurve::star5(), 0.05, 25, 0.05).unwrap();
        assert!(s.x0 < -5.3 && s.y0 < -5.3);
    }

    #[test]
    fn classification_on_disk() {
        let d = BoundaryCurve::disk(1.0).unwrap();
        let g = CartesianGrid::new(-2.0, -2.0, 0.1, 40, 40).unwrap();
        let c = classify_points(&g, &d, 0.2, 0.5).unwrap();
        assert_eq!(c.label(20, 20), PointLabel::Interior);
        assert_eq!(c.label(31, 20), PointLabel::Collar);
        assert_eq!(c.label(33, 20), PointLabel::ContinuationStrip);
        assert_eq!(c.label(30, 20), PointLabel::Interior);
        assert_eq!(c.label(0, 0), PointLabel::Exterior);
    }

    #[test]
    fn curvilinear_reference() {
        let d = BoundaryCurve::disk(1.0).unwrap();
        let s = sample_boundary(&d, 360).unwrap();
        let cg = build_curvilinear_grids(&s, 4, 25, 0.01, 6).unwrap();
        let expect = [0.97, 0.98, 0.99, 1.0];
        for q in 0..4 {
            assert!(close(cg.inner_point(0, q), Vec2::new(expect[q], 0.0), 1e-15));
        }
        assert_eq!(cg.c_r + 1, 151);
        assert!(close(cg.outer_point(0, 150), Vec2::new(1.25, 0.0), 1e-14));
        assert_eq!(cg.outer_point(7, 0), cg.inner_point(7, 3));
        assert!(matches!(
            build_curvilinear_grids(&s, 4, 25, 0.5, 6),
            Err(GeometryError::InnerPointsLeave { .. })
        ));
    }
}
