//! One-dimensional blending-to-zero operator.
//!
//! Given `d` samples `f(-(d-1)), ..., f(-1), f(0)` at unit spacing (the last
//! one being the boundary value), the operator returns a smooth function on
//! `[0, C]` that matches the degree-`d-1` interpolant of the samples near `0`
//! and vanishes, together with all its derivatives to high accuracy, at `C`.
//!
//! Construction: each Lagrange basis polynomial of the matching nodes is fitted
//! in the least-squares sense by a trigonometric polynomial of period
//! `P = 2(C + d - 1)` that reproduces the polynomial on `[-(d-1), 0]` and is
//! zero on `[C, C + d - 1]`. The fit is solved in double-double arithmetic
//! with Householder QR; only the resulting coefficients are stored.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dd::Dd;
use crate::interp;

const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"NLFCBLND";
/// Fit points per unit length.
const OVERSAMPLE: usize = 20;
/// Trigonometric modes beyond `d`.
const EXTRA_MODES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlendError {
    #[error("matching-point count d={0} outside supported range 2..=12")]
    BadOrder(usize),
    #[error("continuation length C={c} must be at least d={d}")]
    ShortContinuation { c: usize, d: usize },
    #[error("refinement factor must be positive")]
    BadRefinement,
    #[error("blend fit is ill-conditioned in double precision (condition estimate {condition:.2e}); use double-double mode")]
    IllConditioned { condition: f64 },
    #[error("offset {offset} outside [0, {c}]")]
    OffsetOutOfRange { offset: f64, c: usize },
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("malformed blend data: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Double,
    DoubleDouble,
}

#[derive(Clone, Debug)]
pub struct BlendOperator {
    d: usize,
    c: usize,
    n_r: usize,
    modes: usize,
    period: usize,
    /// Row `q`: `[a_0, a_1, b_1, ..., a_K, b_K]` for the continuation of basis `q`.
    coeffs: Vec<f64>,
    /// `(C*n_r + 1) x d`, row-major: values at offsets `i / n_r`.
    refined: Vec<f64>,
    hash: [u8; 32],
}

static EMBEDDED: &[&[u8]] = &[
    include_bytes!("../data/blend_d4_c25_nr6.bin"),
    include_bytes!("../data/blend_d5_c25_nr6.bin"),
    include_bytes!("../data/blend_d8_c25_nr6.bin"),
];

fn generator_hash(d: usize, c: usize, modes: usize) -> [u8; 32] {
    let desc = format!(
        "nlfc-blend v{FORMAT_VERSION} trig-ls d={d} C={c} K={modes} os={OVERSAMPLE} zero={} free={c}",
        d - 1
    );
    Sha256::digest(desc.as_bytes()).into()
}

impl BlendOperator {
    /// Operator for `(d, C, n_r)`: the embedded table when one exists, else a fresh
    /// double-double construction.
    pub fn new(d: usize, c: usize, n_r: usize) -> Result<Self, BlendError> {
        for bytes in EMBEDDED {
            let op = Self::from_bytes(bytes)?;
            if op.d == d && op.c == c && op.n_r == n_r {
                return Ok(op);
            }
        }
        Self::build(d, c, n_r, Precision::DoubleDouble)
    }

    pub fn build(d: usize, c: usize, n_r: usize, precision: Precision) -> Result<Self, BlendError> {
        if !(2..=12).contains(&d) {
            return Err(BlendError::BadOrder(d));
        }
        if c < d {
            return Err(BlendError::ShortContinuation { c, d });
        }
        if n_r == 0 {
            return Err(BlendError::BadRefinement);
        }
        let modes = EXTRA_MODES + d;
        let period = 2 * (c + d - 1);
        let coeffs = match precision {
            Precision::DoubleDouble => fit_dd(d, c, modes, period),
            Precision::Double => fit_f64(d, c, modes, period)?,
        };
        let mut op = BlendOperator {
            d,
            c,
            n_r,
            modes,
            period,
            coeffs,
            refined: Vec::new(),
            hash: generator_hash(d, c, modes),
        };
        let cr = c * n_r;
        let mut refined = vec![0.0; (cr + 1) * d];
        let mut row = vec![0.0; d];
        for i in 0..=cr {
            op.basis_values(i as f64 / n_r as f64, &mut row);
            refined[i * d..(i + 1) * d].copy_from_slice(&row);
        }
        // The boundary value is carried through exactly.
        refined[..d].iter_mut().for_each(|v| *v = 0.0);
        refined[d - 1] = 1.0;
        op.refined = refined;
        Ok(op)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn refined_len(&self) -> usize {
        self.c * self.n_r + 1
    }

    pub fn generator_hash(&self) -> [u8; 32] {
        self.hash
    }

    /// Refined continuation matrix, `(C*n_r + 1) x d` row-major.
    pub fn refined_matrix(&self) -> &[f64] {
        &self.refined
    }

    /// Values at `x` (units of the sample spacing) of the `d` continued basis
    /// functions. Meaningful on `[-(d-1), C + d - 1]`; zero past `C` to fit accuracy.
    pub fn basis_values(&self, x: f64, out: &mut [f64]) {
        let nk = 2 * self.modes + 1;
        let w = 2.0 * std::f64::consts::PI / self.period as f64;
        for (q, o) in out.iter_mut().enumerate().take(self.d) {
            *o = self.coeffs[q * nk];
        }
        for k in 1..=self.modes {
            let (s, c) = (w * k as f64 * x).sin_cos();
            for (q, o) in out.iter_mut().enumerate().take(self.d) {
                let row = &self.coeffs[q * nk..];
                *o += row[2 * k - 1] * c + row[2 * k] * s;
            }
        }
    }

    /// Continuation of `samples` (innermost first, boundary value last) at the
    /// given offsets beyond the boundary, in units of the sample spacing.
    pub fn blend_to_zero(&self, samples: &[f64], offsets: &[f64]) -> Result<Vec<f64>, BlendError> {
        self.check_samples(samples)?;
        let mut g = vec![0.0; self.d];
        offsets
            .iter()
            .map(|&x| {
                if !(0.0..=self.c as f64).contains(&x) {
                    return Err(BlendError::OffsetOutOfRange { offset: x, c: self.c });
                }
                if x == 0.0 {
                    return Ok(samples[self.d - 1]);
                }
                self.basis_values(x, &mut g);
                Ok(g.iter().zip(samples).map(|(a, b)| a * b).sum())
            })
            .collect()
    }

    /// Continuation at the refined offsets `i / n_r`, `i = 0..=C*n_r`.
    pub fn continue_refined(&self, samples: &[f64], out: &mut [f64]) -> Result<(), BlendError> {
        self.check_samples(samples)?;
        let d = self.d;
        for (i, o) in out.iter_mut().enumerate().take(self.refined_len()) {
            *o = self.refined[i * d..(i + 1) * d]
                .iter()
                .zip(samples)
                .map(|(a, b)| a * b)
                .sum();
        }
        Ok(())
    }

    fn check_samples(&self, samples: &[f64]) -> Result<(), BlendError> {
        if samples.len() != self.d {
            return Err(BlendError::SampleCount {
                expected: self.d,
                got: samples.len(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for v in [
            FORMAT_VERSION,
            self.d as u32,
            self.c as u32,
            self.n_r as u32,
            self.modes as u32,
            self.period as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.hash);
        for v in self.coeffs.iter().chain(&self.refined) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BlendError> {
        let bad = |m: &str| BlendError::Format(m.to_string());
        if bytes.len() < 8 + 24 + 32 || &bytes[..8] != MAGIC {
            return Err(bad("missing header"));
        }
        let word = |i: usize| {
            let o = 8 + 4 * i;
            u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        };
        if word(0) != FORMAT_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let (d, c, n_r, modes, period) = (word(1), word(2), word(3), word(4), word(5));
        if !(2..=12).contains(&d) || n_r == 0 || period != 2 * (c + d - 1) {
            return Err(bad("inconsistent header"));
        }
        let mut hash = [0u8; 32];
        hash.copy_from_slice(&bytes[32..64]);
        if hash != generator_hash(d, c, modes) {
            return Err(bad("generator hash mismatch"));
        }
        let nc = d * (2 * modes + 1);
        let nr = (c * n_r + 1) * d;
        let body = &bytes[64..];
        if body.len() != 8 * (nc + nr) {
            return Err(bad("payload length"));
        }
        let vals: Vec<f64> = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(BlendOperator {
            d,
            c,
            n_r,
            modes,
            period,
            coeffs: vals[..nc].to_vec(),
            refined: vals[nc..].to_vec(),
            hash,
        })
    }
}

/// Fit abscissae in units of `1/OVERSAMPLE`: matching region then zero region.
fn fit_points(d: usize, c: usize) -> (Vec<i64>, usize) {
    let os = OVERSAMPLE as i64;
    let z = (d - 1) as i64;
    let mut pts: Vec<i64> = (0..=z * os).map(|i| i - z * os).collect();
    let n_match = pts.len();
    pts.extend((0..=z * os).map(|i| c as i64 * os + i));
    (pts, n_match)
}

fn fit_dd(d: usize, c: usize, modes: usize, period: usize) -> Vec<f64> {
    let (pts, n_match) = fit_points(d, c);
    let den = (OVERSAMPLE * period) as i64;
    let ncol = 2 * modes + 1;
    let m = pts.len();
    // Column-major design matrix.
    let mut a = vec![vec![Dd::ZERO; m]; ncol];
    for (i, &p) in pts.iter().enumerate() {
        a[0][i] = Dd::ONE;
        for k in 1..=modes {
            let (cs, sn) = Dd::cos_sin_turn(k as i64 * p, den);
            a[2 * k - 1][i] = cs;
            a[2 * k][i] = sn;
        }
    }
    let nodes: Vec<Dd> = (0..d).map(|q| Dd::new(q as f64 - (d - 1) as f64)).collect();
    let mut b = vec![vec![Dd::ZERO; m]; d];
    for (i, &p) in pts.iter().enumerate().take(n_match) {
        let x = Dd::from_ratio(p, OVERSAMPLE as i64);
        for q in 0..d {
            let mut v = Dd::ONE;
            for k in 0..d {
                if k != q {
                    v = v * (x - nodes[k]) / (nodes[q] - nodes[k]);
                }
            }
            b[q][i] = v;
        }
    }
    let sol = householder_ls_dd(a, b);
    let mut coeffs = Vec::with_capacity(d * ncol);
    for col in sol {
        coeffs.extend(col.iter().map(|v| v.to_f64()));
    }
    coeffs
}

fn householder_ls_dd(mut a: Vec<Vec<Dd>>, mut b: Vec<Vec<Dd>>) -> Vec<Vec<Dd>> {
    let n = a.len();
    let m = a[0].len();
    for j in 0..n {
        let mut norm2 = Dd::ZERO;
        for i in j..m {
            norm2 = norm2 + a[j][i] * a[j][i];
        }
        let norm = norm2.sqrt();
        let alpha = if a[j][j].hi > 0.0 { -norm } else { norm };
        let mut v: Vec<Dd> = a[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let mut vn2 = Dd::ZERO;
        for x in &v {
            vn2 = vn2 + *x * *x;
        }
        if vn2.hi == 0.0 {
            continue;
        }
        let reflect = |col: &mut Vec<Dd>| {
            let mut s = Dd::ZERO;
            for (i, vi) in v.iter().enumerate() {
                s = s + *vi * col[j + i];
            }
            let f = Dd::new(2.0) * s / vn2;
            for (i, vi) in v.iter().enumerate() {
                col[j + i] = col[j + i] - f * *vi;
            }
        };
        for col in a.iter_mut().skip(j) {
            reflect(col);
        }
        for col in b.iter_mut() {
            reflect(col);
        }
    }
    b.iter()
        .map(|rhs| {
            let mut x = vec![Dd::ZERO; n];
            for i in (0..n).rev() {
                let mut s = rhs[i];
                for k in i + 1..n {
                    s = s - a[k][i] * x[k];
                }
                x[i] = s / a[i][i];
            }
            x
        })
        .collect()
}

fn fit_f64(d: usize, c: usize, modes: usize, period: usize) -> Result<Vec<f64>, BlendError> {
    let (pts, n_match) = fit_points(d, c);
    let w = 2.0 * std::f64::consts::PI / (OVERSAMPLE * period) as f64;
    let ncol = 2 * modes + 1;
    let m = pts.len();
    let mut a = vec![vec![0.0; m]; ncol];
    for (i, &p) in pts.iter().enumerate() {
        a[0][i] = 1.0;
        for k in 1..=modes {
            let (s, cs) = (w * (k as i64 * p) as f64).sin_cos();
            a[2 * k - 1][i] = cs;
            a[2 * k][i] = s;
        }
    }
    let nodes: Vec<f64> = (0..d).map(|q| q as f64 - (d - 1) as f64).collect();
    let mut b = vec![vec![0.0; m]; d];
    let mut l = vec![0.0; d];
    for (i, &p) in pts.iter().enumerate().take(n_match) {
        interp::lagrange_basis_into(&nodes, p as f64 / OVERSAMPLE as f64, &mut l);
        for q in 0..d {
            b[q][i] = l[q];
        }
    }
    // Householder QR in f64 with a diagonal-ratio condition estimate.
    for j in 0..ncol {
        let norm = a[j][j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v = a[j][j..].to_vec();
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(j).chain(b.iter_mut()) {
            let s: f64 = v.iter().enumerate().map(|(i, vi)| vi * col[j + i]).sum();
            let f = 2.0 * s / vn2;
            for (i, vi) in v.iter().enumerate() {
                col[j + i] -= f * vi;
            }
        }
    }
    let condition = triangular_condition(&a, ncol);
    if !condition.is_finite() || condition > 1e12 {
        return Err(BlendError::IllConditioned { condition });
    }
    let mut coeffs = Vec::with_capacity(d * ncol);
    for rhs in &b {
        let mut x = vec![0.0; ncol];
        for i in (0..ncol).rev() {
            let mut s = rhs[i];
            for k in i + 1..ncol {
                s -= a[k][i] * x[k];
            }
            x[i] = s / a[i][i];
        }
        coeffs.extend(x);
    }
    Ok(coeffs)
}

/// 2-norm condition estimate of the upper-triangular factor stored column-major
/// in `a`, by power iteration on `R^T R` and on its inverse.
fn triangular_condition(a: &[Vec<f64>], n: usize) -> f64 {
    let r = |i: usize, j: usize| a[j][i];
    let mul = |x: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = (0..n).map(|i| (i..n).map(|j| r(i, j) * x[j]).sum()).collect();
        (0..n).map(|j| (0..=j).map(|i| r(i, j) * y[i]).sum()).collect()
    };
    let solve = |x: &[f64]| -> Vec<f64> {
        // R^T y = x, then R z = y.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| r(k, i) * y[k]).sum();
            y[i] = (x[i] - s) / r(i, i);
        }
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| r(i, k) * z[k]).sum();
            z[i] = (y[i] - s) / r(i, i);
        }
        z
    };
    let power = |f: &dyn Fn(&[f64]) -> Vec<f64>| {
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let mut lam = 0.0;
        for _ in 0..50 {
            let y = f(&x);
            let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !nrm.is_finite() || nrm == 0.0 {
                return f64::INFINITY;
            }
            lam = nrm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.iter().map(|v| v / nrm).collect();
        }
        lam
    };
    (power(&mul) * power(&solve)).sqrt()
}
