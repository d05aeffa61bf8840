//! Fourier multipliers of the 2D nonlocal Laplacian.
//!
//! `m(ν) = -|ν|² ₂F₃(1, (4-β)/2; 2, 2, (6-β)/2; -|ν|²δ²/4)`.
//!
//! The hypergeometric series is summed directly (compensated f64 for small
//! arguments, double-double up to `|z| = 400`). Beyond that the alternating
//! series is useless, and the multiplier family is evaluated from
//!
//! `₂F₃ = -4(4-β) X^{β-4} F(X)`,  `F(X) = ∫₀^X (J₀(s) - 1) s^{1-β} ds`,  `X = |ν|δ`,
//!
//! with `F` split as a Weber-type constant plus a Hankel-asymptotic tail; both
//! pieces are closed-form, so the quadrature oracle stays independent.
//!
//! The oracle integrates the radial reduction of the integral definition,
//! `m = c·2π ∫₀^δ (J₀(|ν|r) - 1) r^{1-β} dr`, `c = 2(4-β)/(π δ^{4-β})`, where
//! `c` follows from requiring `m ~ -|ν|²` as `ν → 0`
//! (`cos(ν·z) - 1 ≈ -(ν·z)²/2`, angular mean `|ν|²|z|²/4`).

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::Dd;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("hypergeometric parameter pole: b = {0} is a non-positive integer")]
    Pole(f64),
    #[error("hypergeometric series did not converge for z = {z} after {terms} terms")]
    NonConvergence { z: f64, terms: usize },
    #[error("adaptive quadrature failed to reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },
}

/// Horizon `δ > 0` and kernel exponent `β <= 4`; `β = 4` is the classical limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub delta: f64,
    pub beta: f64,
}

impl KernelParams {
    pub fn new(delta: f64, beta: f64) -> Result<Self, MultiplierError> {
        let p = KernelParams { delta, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MultiplierError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(MultiplierError::InvalidParams(format!(
                "horizon delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.beta.is_finite() && self.beta <= 4.0) {
            return Err(MultiplierError::InvalidParams(format!(
                "kernel exponent beta must satisfy beta < n+2 = 4 (4 = classical limit), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn is_classical(&self) -> bool {
        self.beta == 4.0
    }

    /// Normalization constant `c = 2(4-β)/(π δ^{4-β})`.
    pub fn constant(&self) -> f64 {
        2.0 * (4.0 - self.beta) / (std::f64::consts::PI * self.delta.powf(4.0 - self.beta))
    }
}

const DD_SERIES_LIMIT: f64 = 400.0;
const MAX_TERMS: usize = 5000;

/// Generalized hypergeometric `₂F₃(a₁, a₂; b₁, b₂, b₃; z)`.
///
/// Direct summation for `|z| <= 400`; larger `|z|` is supported only for the
/// multiplier family `(1, a; 2, 2, a+1)` with `z < 0`.
pub fn hyp2f3(a1: f64, a2: f64, b1: f64, b2: f64, b3: f64, z: f64) -> Result<f64, MultiplierError> {
    for b in [b1, b2, b3] {
        if b <= 0.0 && b.fract() == 0.0 {
            return Err(MultiplierError::Pole(b));
        }
    }
    if z == 0.0 || a1 == 0.0 || a2 == 0.0 {
        return Ok(1.0);
    }
    let az = z.abs();
    if az <= 1.0 {
        return Ok(series_f64(a1, a2, b1, b2, b3, z));
    }
    if az <= DD_SERIES_LIMIT {
        return series_dd(a1, a2, b1, b2, b3, z);
    }
    let family = a1 == 1.0 && b1 == 2.0 && b2 == 2.0 && b3 == a2 + 1.0 && z < 0.0;
    if family {
        let beta = 4.0 - 2.0 * a2;
        if beta > 0.5 && beta < 4.0 {
            let x = 2.0 * az.sqrt();
            return Ok(-4.0 * (4.0 - beta) * x.powf(beta - 4.0) * radial_integral_large(x, beta));
        }
        // Outside the asymptotic range, integrate the radial form instead.
        let x = 2.0 * az.sqrt();
        let f = radial_integral_quadrature(x, beta, 1e-13)?;
        return Ok(-4.0 * (4.0 - beta) * x.powf(beta - 4.0) * f);
    }
    Err(MultiplierError::NonConvergence { z, terms: 0 })
}

fn series_f64(a1: f64, a2: f64, b1: f64, b2: f64, b3: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let (mut sum, mut comp) = (1.0f64, 0.0f64);
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a1 + kf) * (a2 + kf) / ((b1 + kf) * (b2 + kf) * (b3 + kf)) * z / (kf + 1.0);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum + comp
}

fn series_dd(a1: f64, a2: f64, b1: f64, b2: f64, b3: f64, z: f64) -> Result<f64, MultiplierError> {
    let (a1, a2, b1, b2, b3, zd) = (
        Dd::new(a1),
        Dd::new(a2),
        Dd::new(b1),
        Dd::new(b2),
        Dd::new(b3),
        Dd::new(z),
    );
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    let mut peak = 1.0f64;
    for k in 0..MAX_TERMS {
        let kf = Dd::new(k as f64);
        let num = (a1 + kf) * (a2 + kf) * zd;
        let den = (b1 + kf) * (b2 + kf) * (b3 + kf) * Dd::new(k as f64 + 1.0);
        let next = term * num / den;
        let shrinking = next.hi.abs() < term.hi.abs();
        term = next;
        sum = sum + term;
        peak = peak.max(term.hi.abs());
        if shrinking && term.hi.abs() < 1e-34 * peak.max(sum.hi.abs()) {
            return Ok(sum.to_f64());
        }
    }
    Err(MultiplierError::NonConvergence {
        z: zd.hi,
        terms: MAX_TERMS,
    })
}

/// `ζ(k)` for odd `k = 3, 5, ..., 25`.
const ZETA_ODD: [f64; 12] = [
    1.202_056_903_159_594_3,
    1.036_927_755_143_369_9,
    1.008_349_277_381_922_8,
    1.002_008_392_826_082_2,
    1.000_494_188_604_119_5,
    1.000_122_713_347_578_5,
    1.000_030_588_236_307_0,
    1.000_007_637_197_637_9,
    1.000_001_908_212_716_6,
    1.000_000_476_932_986_8,
    1.000_000_119_219_925_9,
    1.000_000_029_803_503_5,
];
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `expm1(u)/u`, continuous at `u = 0`.
fn exprel(u: f64) -> f64 {
    if u.abs() < 1e-5 {
        1.0 + u / 2.0 + u * u / 6.0
    } else {
        u.exp_m1() / u
    }
}

/// `g(ε)/ε` where `g = -ε ln 2 + lnΓ(1-ε/2) - lnΓ(1+ε/2)`.
fn g_over_eps(eps: f64) -> f64 {
    if eps.abs() < 0.1 {
        let x = eps / 2.0;
        let x2 = x * x;
        let mut p = x2;
        let mut s = EULER_GAMMA;
        for (i, z) in ZETA_ODD.iter().enumerate() {
            let k = (2 * i + 3) as f64;
            s += z * p / k;
            p *= x2;
        }
        -std::f64::consts::LN_2 + s
    } else {
        let lg = |v: f64| libm::lgamma_r(v).0;
        (-eps * std::f64::consts::LN_2 + lg(1.0 - eps / 2.0) - lg(1.0 + eps / 2.0)) / eps
    }
}

/// `∫₀^X (J₀(s) - 1) s^{1-β} ds` for large `X` and `0.5 < β < 4`.
fn radial_integral_large(x: f64, beta: f64) -> f64 {
    let eps = beta - 2.0;
    // Constant part K(β) + X^{-ε}/ε written without cancellation at ε = 0.
    let ge = g_over_eps(eps);
    let g = eps * ge;
    let u = -eps * (x.ln() + ge);
    let h = -g.exp() * exprel(u) * (x.ln() + ge);
    h - bessel_tail(x, beta)
}

/// `∫_X^∞ J₀(s) s^{1-β} ds` from the Hankel expansion of `J₀`, each term
/// integrated by parts; both asymptotic series are cut at their smallest term.
fn bessel_tail(x: f64, beta: f64) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let eix = Complex64::from_polar(1.0, x);
    let mut total = Complex64::new(0.0, 0.0);
    // e_k = (-i)^k prod_{j=1}^k (2j-1)^2 / (k! 8^k)
    let mut ek = Complex64::new(1.0, 0.0);
    let mut prev_outer = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let kf = k as f64;
            ek *= -i * ((2.0 * kf - 1.0).powi(2) / (kf * 8.0));
        }
        let alpha = 0.5 - beta - k as f64;
        // I(α) = e^{iX} Σ_m i^{m+1} α(α-1)...(α-m+1) X^{α-m}
        let mut inner = Complex64::new(0.0, 0.0);
        let mut coef = i * x.powf(alpha);
        let mut prev = f64::INFINITY;
        for m in 0..60 {
            let mag = coef.norm();
            if mag > prev || mag == 0.0 {
                break;
            }
            inner += coef;
            prev = mag;
            if mag < 1e-19 * inner.norm() {
                break;
            }
            coef *= i * ((alpha - m as f64) / x);
        }
        let term = ek * inner;
        let mag = term.norm();
        if mag > prev_outer {
            break;
        }
        total += term;
        prev_outer = mag;
        if mag < 1e-19 * total.norm() {
            break;
        }
    }
    let phase = Complex64::from_polar((2.0 / std::f64::consts::PI).sqrt(), -std::f64::consts::FRAC_PI_4);
    (phase * eix * total).re
}

/// The multiplier `m^{δ,β}` at frequency magnitude `nu = |ν|`.
pub fn multiplier(nu: f64, params: &KernelParams) -> Result<f64, MultiplierError> {
    params.validate()?;
    let nu2 = nu * nu;
    if params.is_classical() || nu == 0.0 {
        return Ok(-nu2);
    }
    let a = (4.0 - params.beta) / 2.0;
    let z = -nu2 * params.delta * params.delta / 4.0;
    Ok(-nu2 * hyp2f3(1.0, a, 2.0, 2.0, a + 1.0, z)?)
}

/// `J₀(x) - 1` without cancellation for small `x`.
fn j0m1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let q = -x * x / 4.0;
        let mut term = q;
        let mut sum = q;
        for k in 2..30 {
            term *= q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        libm::j0(x) - 1.0
    }
}

/// Quadrature oracle for `m^{δ,β}(ν)` from the integral definition.
pub fn multiplier_quadrature_oracle(nu: f64, params: &KernelParams) -> Result<f64, MultiplierError> {
    params.validate()?;
    if params.is_classical() {
        return Err(MultiplierError::InvalidParams(
            "the integral representation requires beta < 4".into(),
        ));
    }
    if nu == 0.0 {
        return Ok(0.0);
    }
    let x = nu * params.delta;
    let f = radial_integral_quadrature(x, params.beta, 1e-12)?;
    // c·2π·ν^{β-2}·F(X)
    Ok(params.constant() * 2.0 * std::f64::consts::PI * nu.powf(params.beta - 2.0) * f)
}

/// `∫₀^X (J₀(s) - 1) s^{1-β} ds` by panel-wise adaptive Gauss–Kronrod after the
/// substitution `s = X t^{1/(4-β)}`, which makes the integrand bounded at `0`.
fn radial_integral_quadrature(x: f64, beta: f64, rtol: f64) -> Result<f64, MultiplierError> {
    let p = 4.0 - beta;
    let q = 1.0 / p;
    let integrand = |t: f64| -> f64 {
        if t <= 0.0 {
            // limit of (J0-1) s^{1-β} ds/dt at t = 0
            return -x.powf(4.0 - beta) / 4.0 * q;
        }
        let s = x * t.powf(q);
        let dsdt = x * q * t.powf(q - 1.0);
        j0m1(s) * s.powf(1.0 - beta) * dsdt
    };
    // Panels uniform in s, one per half oscillation.
    let panels = ((x / std::f64::consts::PI).ceil() as usize).max(4) * 2;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut abs_total = 0.0;
    let mut pieces = Vec::with_capacity(panels);
    for j in 0..panels {
        let a = (j as f64 / panels as f64).powf(p);
        let b = ((j + 1) as f64 / panels as f64).powf(p);
        pieces.push((a, b));
    }
    for (a, b) in pieces {
        let (v, e, av) = adaptive_gk(&integrand, a, b, rtol, 40);
        total += v;
        err += e;
        abs_total += av;
    }
    if err > rtol.max(1e-14) * abs_total.max(total.abs()) * 10.0 {
        return Err(MultiplierError::Quadrature {
            estimate: total,
            error: err,
        });
    }
    Ok(total)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    let mut av = GK_WK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * GK_X[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        k += GK_WK[j] * (f1 + f2);
        av += GK_WK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += GK_WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs(), av * h.abs())
}

fn adaptive_gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64, depth: u32) -> (f64, f64, f64) {
    let (v, e, av) = gk15(f, a, b);
    if depth == 0 || e <= rtol * av.max(1e-300) || e < 1e-300 {
        return (v, e, av);
    }
    let m = 0.5 * (a + b);
    let (v1, e1, a1) = adaptive_gk(f, a, m, rtol, depth - 1);
    let (v2, e2, a2) = adaptive_gk(f, m, b, rtol, depth - 1);
    (v1 + v2, e1 + e2, a1 + a2)
}

/// Multiplier values on the half-spectrum lattice of an `nx x ny` grid with
/// periods `(lx, ly)`; layout matches [`crate::fft::Fft2`] (`k * ny + l`).
#[derive(Clone, Debug)]
pub struct MultiplierGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    params: KernelParams,
    values: Vec<f64>,
    distinct: usize,
}

/// `|ν|²` rounded to 12 significant digits.
fn radius_key(nu2: f64) -> (i32, i64) {
    if nu2 == 0.0 {
        return (i32::MIN, 0);
    }
    let e = nu2.log10().floor() as i32;
    let mant = (nu2 / 10f64.powi(e - 11)).round() as i64;
    (e, mant)
}

impl MultiplierGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, params: KernelParams) -> Result<Self, MultiplierError> {
        params.validate()?;
        if nx % 2 != 0 || ny % 2 != 0 || nx == 0 || ny == 0 {
            return Err(MultiplierError::InvalidParams(format!(
                "grid dimensions must be even, got {nx} x {ny}"
            )));
        }
        let nh = nx / 2 + 1;
        let tau = 2.0 * std::f64::consts::PI;
        let nu2_at = |k: usize, l: usize| {
            let kx = tau * crate::fft::signed_freq(k, nx) as f64 / lx;
            let ly_ = tau * crate::fft::signed_freq(l, ny) as f64 / ly;
            kx * kx + ly_ * ly_
        };
        let mut keys: HashMap<(i32, i64), f64> = HashMap::new();
        for k in 0..nh {
            for l in 0..ny {
                let nu2 = nu2_at(k, l);
                keys.entry(radius_key(nu2)).or_insert(nu2);
            }
        }
        let mut radii: Vec<((i32, i64), f64)> = keys.into_iter().collect();
        radii.sort_by(|a, b| a.0.cmp(&b.0));
        let eval = |&(key, nu2): &((i32, i64), f64)| multiplier(nu2.sqrt(), &params).map(|m| (key, m));
        #[cfg(feature = "parallel")]
        let evaluated: Result<Vec<_>, _> = {
            use rayon::prelude::*;
            radii.par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let evaluated: Result<Vec<_>, _> = radii.iter().map(eval).collect();
        let cache: HashMap<(i32, i64), f64> = evaluated?.into_iter().collect();
        let mut values = vec![0.0; nh * ny];
        for k in 0..nh {
            for l in 0..ny {
                let nu2 = nu2_at(k, l);
                values[k * ny + l] = if params.is_classical() {
                    -nu2
                } else {
                    cache[&radius_key(nu2)]
                };
            }
        }
        values[0] = 0.0;
        Ok(MultiplierGrid {
            nx,
            ny,
            lx,
            ly,
            params,
            values,
            distinct: radii.len(),
        })
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn periods(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    /// Number of distinct radial arguments evaluated.
    pub fn distinct_radii(&self) -> usize {
        self.distinct
    }

    pub fn half_spectrum(&self) -> &[f64] {
        &self.values
    }

    /// Value at lattice index `(k, l)` of the full `nx x ny` spectrum.
    pub fn at(&self, k: usize, l: usize) -> f64 {
        let nh = self.nx / 2 + 1;
        if k < nh {
            self.values[k * self.ny + l]
        } else {
            let kk = self.nx - k;
            let ll = (self.ny - l) % self.ny;
            self.values[kk * self.ny + ll]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Full-lattice values, row-major by `l` (y-frequency) then `k`.
    pub fn full_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny];
        for l in 0..self.ny {
            for k in 0..self.nx {
                out[l * self.nx + k] = self.at(k, l);
            }
        }
        out
    }
}
