//! Two-dimensional Fourier continuation.
//!
//! For a function known on the grid nodes of a domain `D` (the data mask), the
//! continuation is built in three linear steps:
//!
//! 1. values at `d` inner points along each boundary normal, by two-step
//!    degree-`M-1` interpolation along grid lines and then along the normal;
//! 2. a blend-to-zero continuation along each normal;
//! 3. for each Cartesian node in the outer strip, interpolation across the `M`
//!    neighbouring normals of the continued values at the node's projections.
//!
//! All three steps are precomposed into sparse weights when the plan is built,
//! so applying the continuation is two sparse products.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcblend::{BlendError, BlendOperator};
use crate::fft::{signed_freq, Fft2};
use crate::geometry::{
    boundary_count, build_cartesian_grid, build_curvilinear_grids, build_proximity_map, classify_points,
    sample_boundary, BoundaryCurve, BoundarySamples, CartesianGrid, CurvilinearGrids, GeometryError,
    PointClassification, ProximityMap, Vec2,
};
use crate::interp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Blend(#[from] BlendError),
    #[error("cannot find {m} in-domain stencil points on grid line {line} near θ_p = {theta:.6}; grid too coarse near the boundary")]
    Stencil { theta: f64, line: usize, m: usize },
    #[error("strip node ({i}, {j}) projects outside the blended normal segment for every stencil shift; the strip width C·h may exceed a concave radius of curvature")]
    Projection { i: usize, j: usize },
    #[error("invalid continuation parameters: {0}")]
    Params(String),
    #[error("field length {got} does not match grid size {expected}")]
    Length { expected: usize, got: usize },
}

/// How continued values are evaluated at the projection of a strip node
/// onto a boundary normal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalEvaluation {
    /// Evaluate the blend's trigonometric representation at the exact offset.
    Direct,
    /// Degree-`M-1` interpolation of the values on the refined normal grid.
    Interpolated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcParams {
    pub d: usize,
    pub m: usize,
    pub c: usize,
    pub n_r: usize,
    pub evaluation: NormalEvaluation,
}

impl Default for FcParams {
    fn default() -> Self {
        FcParams {
            d: 4,
            m: 5,
            c: 25,
            n_r: 6,
            evaluation: NormalEvaluation::Direct,
        }
    }
}

impl FcParams {
    /// Parameters with `M = d + 1`.
    pub fn with_order(d: usize) -> Self {
        FcParams {
            d,
            m: d + 1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), FcError> {
        if !(2..=12).contains(&self.d) {
            return Err(FcError::Params(format!("d = {} outside 2..=12", self.d)));
        }
        if self.m < 2 || self.m > 12 {
            return Err(FcError::Params(format!("M = {} outside 2..=12", self.m)));
        }
        if self.c < self.d {
            return Err(FcError::Params(format!("C = {} must be >= d = {}", self.c, self.d)));
        }
        if self.n_r == 0 {
            return Err(FcError::Params("n_r must be positive".into()));
        }
        Ok(())
    }
}

/// Compressed sparse rows: row `r` is `idx/w[ptr[r]..ptr[r+1]]`.
#[derive(Clone, Debug, Default)]
struct Csr {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    w: Vec<f64>,
}

impl Csr {
    fn push_row(&mut self, entries: &[(usize, f64)]) {
        if self.ptr.is_empty() {
            self.ptr.push(0);
        }
        for &(i, w) in entries {
            self.idx.push(i as u32);
            self.w.push(w);
        }
        self.ptr.push(self.idx.len());
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.ptr[r], self.ptr[r + 1]);
        self.idx[a..b]
            .iter()
            .zip(&self.w[a..b])
            .map(|(&i, w)| w * x[i as usize])
            .sum()
    }

    fn rows(&self) -> usize {
        self.ptr.len().saturating_sub(1)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            y.par_iter_mut().enumerate().for_each(|(r, o)| *o = self.row_dot(r, x));
        }
        #[cfg(not(feature = "parallel"))]
        for (r, o) in y.iter_mut().enumerate() {
            *o = self.row_dot(r, x);
        }
    }
}

/// Stencil failure details from [`line_stencil_weights`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilFailure {
    pub line: usize,
}

/// Weights expressing values at `origin + dir·t` (for each `t` in `targets`)
/// as combinations of grid values on nodes where `mask` holds.
///
/// The `M` grid lines crossed first by the ray `t >= 0` are used (vertical
/// lines when `|dir.x| >= |dir.y|`, horizontal otherwise); on each line an
/// `M`-point stencil of contiguous masked nodes interpolates to the crossing,
/// and the `M` crossing values are interpolated along the ray. Lines without
/// such a stencil near the crossing are skipped.
pub fn line_stencil_weights(
    grid: &CartesianGrid,
    mask: &[bool],
    origin: Vec2,
    dir: Vec2,
    targets: &[f64],
    m: usize,
) -> Result<Vec<Vec<(usize, f64)>>, StencilFailure> {
    let vertical = dir.x.abs() >= dir.y.abs();
    // Work in (a, b) coordinates: a across lines, b along them.
    let (oa, ob, da, db, a0, b0, na, nb) = if vertical {
        (origin.x, origin.y, dir.x, dir.y, grid.x0, grid.y0, grid.nx, grid.ny)
    } else {
        (origin.y, origin.x, dir.y, dir.x, grid.y0, grid.x0, grid.ny, grid.nx)
    };
    let h = grid.h;
    let node = |ia: usize, ib: usize| if vertical { grid.index(ia, ib) } else { grid.index(ib, ia) };
    let fa = (oa - a0) / h;
    let step: i64 = if da > 0.0 { 1 } else { -1 };
    let first = if da > 0.0 { (fa - 1e-12).ceil() } else { (fa + 1e-12).floor() } as i64;

    let mut ts = Vec::with_capacity(m);
    let mut line_w: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    let mut lw = vec![0.0; m];
    let mut bnodes = vec![0.0; m];
    // Lines that only graze the data region are skipped.
    let max_lines = m as i64 + 3;
    let mut k = 0i64;
    while ts.len() < m {
        if k >= max_lines {
            return Err(StencilFailure { line: k as usize });
        }
        let ia = first + step * k;
        k += 1;
        if ia < 0 || ia >= na as i64 {
            return Err(StencilFailure { line: k as usize - 1 });
        }
        let ia = ia as usize;
        let t = ((a0 + ia as f64 * h) - oa) / da;
        let b = ob + db * t;
        let fb = (b - b0) / h;
        let jc = fb.round().clamp(0.0, (nb - 1) as f64) as i64;
        // Nearest masked node on the line, then its contiguous run.
        let mut seed = None;
        for r in 0..=(m as i64 + 1) {
            for cand in [jc - r, jc + r] {
                if cand >= 0 && (cand as usize) < nb && mask[node(ia, cand as usize)] {
                    seed = Some(cand);
                    break;
                }
            }
            if seed.is_some() {
                break;
            }
        }
        let Some(seed) = seed else { continue };
        let (mut lo, mut hi) = (seed, seed);
        while lo > 0 && mask[node(ia, (lo - 1) as usize)] {
            lo -= 1;
        }
        while hi + 1 < nb as i64 && mask[node(ia, (hi + 1) as usize)] {
            hi += 1;
        }
        if hi - lo + 1 < m as i64 {
            continue;
        }
        let start = ((fb - (m as f64 - 1.0) / 2.0).round() as i64).clamp(lo, hi - m as i64 + 1);
        for (r, bn) in bnodes.iter_mut().enumerate() {
            *bn = (start + r as i64) as f64 * h + b0;
        }
        interp::lagrange_basis_into(&bnodes, b, &mut lw);
        line_w.push(
            (0..m)
                .map(|r| (node(ia, (start + r as i64) as usize), lw[r]))
                .collect(),
        );
        ts.push(t);
    }
    let wts = interp::barycentric_weights(&ts);
    let mut lt = vec![0.0; m];
    Ok(targets
        .iter()
        .map(|&t| {
            interp::lagrange_basis_with(&ts, &wts, t, &mut lt);
            let mut row = Vec::with_capacity(m * m);
            for k in 0..m {
                for &(idx, w) in &line_w[k] {
                    row.push((idx, lt[k] * w));
                }
            }
            row
        })
        .collect())
}

/// Precomputed continuation operator for a fixed grid, boundary and data mask.
#[derive(Clone, Debug)]
pub struct FcPlan {
    grid: CartesianGrid,
    params: FcParams,
    samples: BoundarySamples,
    curvilinear: CurvilinearGrids,
    proximity: ProximityMap,
    blend: BlendOperator,
    data_nodes: Vec<usize>,
    inner: Csr,
    /// Per strip node: `M` normal indices and `M·d` weights.
    strip_normals: Vec<u32>,
    strip_w: Vec<f64>,
}

impl FcPlan {
    /// `boundary` bounds the data region; `data_mask` flags nodes with known
    /// values (inside or on `boundary`); `strip_mask` flags the nodes to receive
    /// continuation values.
    pub fn new(
        grid: &CartesianGrid,
        boundary: &BoundaryCurve,
        data_mask: &[bool],
        strip_mask: &[bool],
        params: FcParams,
    ) -> Result<Self, FcError> {
        params.validate()?;
        let (d, m) = (params.d, params.m);
        let k1 = grid.h;
        let b = boundary_count(boundary, grid.h);
        if b < 3 * m {
            return Err(FcError::Params(format!("boundary count B = {b} below 3M = {}", 3 * m)));
        }
        let samples = sample_boundary(boundary, b)?;
        let curvilinear = build_curvilinear_grids(&samples, d, params.c, k1, params.n_r)?;
        let proximity = build_proximity_map(grid, &curvilinear, strip_mask, m)?;
        let blend = BlendOperator::new(d, params.c, params.n_r)?;

        // Step 1: inner values.
        let targets: Vec<f64> = (0..d).map(|q| (d - 1 - q) as f64 * k1).collect();
        let mut inner = Csr::default();
        for p in 0..b {
            let rows = line_stencil_weights(grid, data_mask, samples.point[p], -samples.normal[p], &targets, m)
                .map_err(|e| FcError::Stencil {
                    theta: samples.theta[p],
                    line: e.line,
                    m,
                })?;
            for row in rows {
                inner.push_row(&row);
            }
        }

        // Step 3: strip weights (step 2 is folded in).
        let n_strip = proximity.nodes.len();
        let mut strip_normals = Vec::with_capacity(n_strip * m);
        let mut strip_w = Vec::with_capacity(n_strip * m * d);
        let gmin = -((d - 1) as f64);
        let gmax = (params.c + d - 1) as f64;
        let mut g = vec![0.0; d];
        let mut taus = vec![0.0; m];
        let mut gammas = vec![0.0; m];
        let mut lam = vec![0.0; m];
        let interp_nodes = InterpolatedNormal::new(&blend, m);
        'nodes: for (e, &node) in proximity.nodes.iter().enumerate() {
            let qpt = grid.node_at(node);
            let p = proximity.param[e];
            for s in 0..(2 * m as isize - 1) {
                let shift = if s % 2 == 0 { -(s / 2) } else { s / 2 + 1 };
                let win = proximity.stencil(p, shift);
                let mut ok = true;
                for (k, &j) in win.iter().enumerate() {
                    let r = qpt - samples.point[j];
                    gammas[k] = r.dot(samples.normal[j]) / k1;
                    taus[k] = r.dot(samples.tangent[j]);
                    if !(gmin..=gmax).contains(&gammas[k]) {
                        ok = false;
                    }
                }
                let monotone = taus.windows(2).all(|w| w[1] < w[0]);
                if !ok || !monotone {
                    continue;
                }
                interp::lagrange_basis_into(&taus, 0.0, &mut lam);
                for (k, &j) in win.iter().enumerate() {
                    strip_normals.push(j as u32);
                    match params.evaluation {
                        NormalEvaluation::Direct => blend.basis_values(gammas[k], &mut g),
                        NormalEvaluation::Interpolated => interp_nodes.basis_values(gammas[k], &mut g),
                    }
                    strip_w.extend(g.iter().map(|v| v * lam[k]));
                }
                continue 'nodes;
            }
            let (i, j) = grid.coords(node);
            return Err(FcError::Projection { i, j });
        }

        let data_nodes = (0..grid.len()).filter(|&i| data_mask[i]).collect();
        Ok(FcPlan {
            grid: *grid,
            params,
            samples,
            curvilinear,
            proximity,
            blend,
            data_nodes,
            inner,
            strip_normals,
            strip_w,
        })
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn params(&self) -> FcParams {
        self.params
    }

    pub fn samples(&self) -> &BoundarySamples {
        &self.samples
    }

    pub fn curvilinear(&self) -> &CurvilinearGrids {
        &self.curvilinear
    }

    pub fn proximity(&self) -> &ProximityMap {
        &self.proximity
    }

    pub fn blend(&self) -> &BlendOperator {
        &self.blend
    }

    pub fn strip_nodes(&self) -> &[usize] {
        &self.proximity.nodes
    }

    pub fn data_nodes(&self) -> &[usize] {
        &self.data_nodes
    }

    /// Values at the inner points `r[p][q]`, `B x d` row-major.
    pub fn values_on_inner_normals(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.inner.rows()];
        self.inner.apply(f, &mut out);
        out
    }

    /// Blend-to-zero values on the refined outer points, `B x (C_r+1)` row-major.
    pub fn continue_along_normals(&self, inner: &[f64]) -> Vec<f64> {
        let d = self.params.d;
        let nr = self.blend.refined_len();
        let mut out = vec![0.0; self.samples.len() * nr];
        for (p, chunk) in out.chunks_exact_mut(nr).enumerate() {
            self.blend
                .continue_refined(&inner[p * d..(p + 1) * d], chunk)
                .expect("sample count fixed by plan");
        }
        out
    }

    /// Continuation values at the strip nodes (order of [`Self::strip_nodes`]).
    pub fn scatter_to_cartesian(&self, inner: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.proximity.nodes.len()];
        self.scatter_into(inner, &mut out);
        out
    }

    fn scatter_into(&self, inner: &[f64], out: &mut [f64]) {
        let (d, m) = (self.params.d, self.params.m);
        let eval = |e: usize| -> f64 {
            let mut acc = 0.0;
            for k in 0..m {
                let j = self.strip_normals[e * m + k] as usize;
                let w = &self.strip_w[(e * m + k) * d..(e * m + k + 1) * d];
                let v = &inner[j * d..(j + 1) * d];
                for q in 0..d {
                    acc += w[q] * v[q];
                }
            }
            acc
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(e, o)| *o = eval(e));
        }
        #[cfg(not(feature = "parallel"))]
        for (e, o) in out.iter_mut().enumerate() {
            *o = eval(e);
        }
    }

    /// Full continued grid function: `f` on data nodes, continuation on strip
    /// nodes, zero elsewhere. `f` entries off the data mask are ignored.
    pub fn extend_into(&self, f: &[f64], out: &mut [f64], inner_scratch: &mut Vec<f64>) -> Result<(), FcError> {
        let n = self.grid.len();
        if f.len() != n || out.len() != n {
            return Err(FcError::Length {
                expected: n,
                got: f.len().min(out.len()),
            });
        }
        inner_scratch.resize(self.inner.rows(), 0.0);
        self.inner.apply(f, inner_scratch);
        out.iter_mut().for_each(|v| *v = 0.0);
        for &i in &self.data_nodes {
            out[i] = f[i];
        }
        let mut strip = vec![0.0; self.proximity.nodes.len()];
        self.scatter_into(inner_scratch, &mut strip);
        for (&i, v) in self.proximity.nodes.iter().zip(strip) {
            out[i] = v;
        }
        Ok(())
    }

    pub fn extend(&self, f: &[f64]) -> Result<Vec<f64>, FcError> {
        let mut out = vec![0.0; self.grid.len()];
        let mut scratch = Vec::new();
        self.extend_into(f, &mut out, &mut scratch)?;
        Ok(out)
    }
}

/// Continued basis values interpolated from the refined normal grid:
/// inner nodes at `-(d-1)..0`, refined nodes `i/n_r` up to `C`, zeros beyond.
struct InterpolatedNormal {
    d: usize,
    m: usize,
    /// Node abscissae and, per node, the `d` basis values.
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl InterpolatedNormal {
    fn new(blend: &BlendOperator, m: usize) -> Self {
        let d = blend.d();
        let nr = blend.n_r();
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for q in 0..d - 1 {
            nodes.push(q as f64 - (d - 1) as f64);
            values.extend((0..d).map(|r| if r == q { 1.0 } else { 0.0 }));
        }
        let refined = blend.refined_matrix();
        for i in 0..blend.refined_len() {
            nodes.push(i as f64 / nr as f64);
            values.extend_from_slice(&refined[i * d..(i + 1) * d]);
        }
        for i in 1..=(d - 1) * nr {
            nodes.push(blend.c() as f64 + i as f64 / nr as f64);
            values.extend(std::iter::repeat(0.0).take(d));
        }
        InterpolatedNormal { d, m, nodes, values }
    }

    fn basis_values(&self, x: f64, out: &mut [f64]) {
        let n = self.nodes.len();
        let pos = self.nodes.partition_point(|&v| v < x);
        let start = pos.saturating_sub(self.m / 2).min(n - self.m);
        let xs = &self.nodes[start..start + self.m];
        let l = interp::lagrange_basis(xs, x);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, lk) in l.iter().enumerate() {
            let v = &self.values[(start + k) * self.d..(start + k + 1) * self.d];
            for q in 0..self.d {
                out[q] += lk * v[q];
            }
        }
    }
}

/// A periodic grid function on `R` with its normalized 2D Fourier coefficients
/// (half spectrum, layout `k * ny + l`, relative to the grid origin).
#[derive(Clone, Debug)]
pub struct FourierField {
    pub grid: CartesianGrid,
    pub values: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn from_values(grid: CartesianGrid, values: Vec<f64>) -> Self {
        let mut plan = Fft2::new(grid.nx, grid.ny);
        let mut coeffs = vec![Complex64::default(); plan.half_len()];
        plan.forward(&values, &mut coeffs);
        let s = 1.0 / grid.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= s);
        FourierField { grid, values, coeffs }
    }

    pub fn periods(&self) -> (f64, f64) {
        self.grid.periods()
    }

    /// Trigonometric interpolant on the `h/2` grid by zero padding.
    pub fn resample_halfstep(&self) -> (CartesianGrid, Vec<f64>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let fine = self.grid.refined();
        let (nx2, ny2) = (fine.nx, fine.ny);
        let mut spec = vec![Complex64::default(); (nx2 / 2 + 1) * ny2];
        for k in 0..=nx / 2 {
            let xfac = if k == nx / 2 { 0.5 } else { 1.0 };
            for l in 0..ny {
                let c = self.coeffs[k * ny + l] * xfac;
                let sl = signed_freq(l, ny);
                if l == ny / 2 {
                    spec[k * ny2 + ny / 2] += c * 0.5;
                    spec[k * ny2 + (ny2 - ny / 2)] += c * 0.5;
                } else {
                    spec[k * ny2 + sl.rem_euclid(ny2 as i64) as usize] += c;
                }
            }
        }
        // The split Nyquist column at k = nx/2 stands for both ±nx/2, the
        // inverse real transform adds the conjugate half.
        let mut out = vec![0.0; fine.len()];
        Fft2::new(nx2, ny2).inverse(&mut spec, &mut out);
        (fine, out)
    }

    /// Direct evaluation of the Fourier series at arbitrary points.
    pub fn evaluate(&self, points: &[Vec2]) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (lx, ly) = self.grid.periods();
        let nh = nx / 2 + 1;
        let mut ex = vec![Complex64::default(); nh];
        let mut ey = vec![Complex64::default(); ny];
        points
            .iter()
            .map(|p| {
                let ax = 2.0 * std::f64::consts::PI * (p.x - self.grid.x0) / lx;
                let ay = 2.0 * std::f64::consts::PI * (p.y - self.grid.y0) / ly;
                for (k, e) in ex.iter_mut().enumerate() {
                    *e = Complex64::from_polar(1.0, k as f64 * ax);
                }
                for (l, e) in ey.iter_mut().enumerate() {
                    *e = if l == ny / 2 {
                        Complex64::new((l as f64 * ay).cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, signed_freq(l, ny) as f64 * ay)
                    };
                }
                let mut total = 0.0;
                for k in 0..nh {
                    let mut row = Complex64::default();
                    for l in 0..ny {
                        row += self.coeffs[k * ny + l] * ey[l];
                    }
                    let wk = if k == 0 || k == nx / 2 { 1.0 } else { 2.0 };
                    // The Nyquist row sums to a real value.
                    let v = if k == nx / 2 {
                        row.re * (k as f64 * ax).cos()
                    } else {
                        (row * ex[k]).re
                    };
                    total += wk * v;
                }
                total
            })
            .collect()
    }
}

/// Continuation setup for a domain bounded by `curve` alone (no collar).
#[derive(Clone, Debug)]
pub struct FcDomain {
    pub curve: BoundaryCurve,
    pub classification: PointClassification,
    pub plan: FcPlan,
}

impl FcDomain {
    pub fn new(curve: &BoundaryCurve, h: f64, params: FcParams) -> Result<Self, FcError> {
        params.validate()?;
        let grid = build_cartesian_grid(curve, h, params.c, h)?;
        let classification = classify_points(&grid, curve, 0.0, params.c as f64 * h)?;
        let data = classification.data_mask();
        let strip: Vec<bool> = classification
            .labels
            .iter()
            .map(|l| *l == crate::geometry::PointLabel::ContinuationStrip)
            .collect();
        let plan = FcPlan::new(&grid, curve, &data, &strip, params)?;
        Ok(FcDomain {
            curve: curve.clone(),
            classification,
            plan,
        })
    }

    pub fn grid(&self) -> &CartesianGrid {
        self.plan.grid()
    }

    /// Grid array holding `f` at data nodes and zero elsewhere.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let g = self.grid();
        let mut v = vec![0.0; g.len()];
        for &i in self.plan.data_nodes() {
            let p = g.node_at(i);
            v[i] = f(p.x, p.y);
        }
        v
    }

    /// Continued field with Fourier coefficients.
    pub fn extend(&self, f: &[f64]) -> Result<FourierField, FcError> {
        let values = self.plan.extend(f)?;
        Ok(FourierField::from_values(*self.grid(), values))
    }
}
