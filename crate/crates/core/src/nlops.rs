//! The nonlocal Laplacian on grid functions over `Ω ∪ Ω_I`.
//!
//! `u ↦ u_ext ↦ û_ext ↦ m·û_ext ↦ L u_ext ↦ L u|_Ω`, with the extension built by
//! Fourier continuation from the outer boundary of the collar.

use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fc2d::{FcError, FcParams, FcPlan};
use crate::fft::Fft2;
use crate::geometry::{
    build_cartesian_grid, classify_points, offset_curve, BoundaryCurve, CartesianGrid, GeometryError, PointClassification,
    PointLabel,
};
use crate::multipliers::{KernelParams, MultiplierError, MultiplierGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fc(#[from] FcError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
    #[error("vector length {got} does not match the operator layout ({expected})")]
    Length { expected: usize, got: usize },
    #[error("invalid step size h = {0}")]
    Step(f64),
    #[error("domain has no interior grid nodes at this resolution")]
    EmptyInterior,
}

/// Which curve bounds the data fed to the continuation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionDomain {
    /// Continue from the outer collar boundary `Γ + δn` using interior and
    /// collar values.
    #[default]
    Collar,
    /// Continue interior values from `Γ`, then overwrite collar nodes.
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub kernel: KernelParams,
    pub h: f64,
    pub fc: FcParams,
    pub extension: ExtensionDomain,
}

impl OperatorConfig {
    pub fn new(kernel: KernelParams, h: f64, fc: FcParams) -> Self {
        OperatorConfig {
            kernel,
            h,
            fc,
            extension: ExtensionDomain::Collar,
        }
    }
}

/// Unknown ordering: interior nodes, then collar nodes, each in grid order.
#[derive(Clone, Debug)]
pub struct FieldLayout {
    pub interior: Vec<usize>,
    pub collar: Vec<usize>,
    grid_len: usize,
}

impl FieldLayout {
    pub fn from_classification(c: &PointClassification) -> Self {
        FieldLayout {
            interior: c.interior.clone(),
            collar: c.collar.clone(),
            grid_len: c.grid.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.interior.len() + self.collar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_collar(&self) -> usize {
        self.collar.len()
    }

    /// Grid index of vector entry `k`.
    pub fn node(&self, k: usize) -> usize {
        if k < self.interior.len() {
            self.interior[k]
        } else {
            self.collar[k - self.interior.len()]
        }
    }

    /// Write vector entries into a zeroed grid array.
    pub fn scatter(&self, v: &[f64], grid: &mut [f64]) {
        grid.iter_mut().for_each(|g| *g = 0.0);
        for (k, &i) in self.interior.iter().chain(&self.collar).enumerate() {
            grid[i] = v[k];
        }
    }

    pub fn gather(&self, grid: &[f64]) -> Vec<f64> {
        self.interior.iter().chain(&self.collar).map(|&i| grid[i]).collect()
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }
}

struct Scratch {
    fft: Fft2,
    grid: Vec<f64>,
    ext: Vec<f64>,
    spec: Vec<Complex64>,
    inner: Vec<f64>,
}

/// Everything needed to apply `L^{δ,β}` on a fixed domain and resolution.
pub struct OperatorContext {
    config: OperatorConfig,
    curve: BoundaryCurve,
    fc_curve: BoundaryCurve,
    classification: PointClassification,
    layout: FieldLayout,
    plan: FcPlan,
    multipliers: MultiplierGrid,
    pool: Mutex<Vec<Scratch>>,
}

impl std::fmt::Debug for OperatorContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorContext")
            .field("config", &self.config)
            .field("curve", &self.curve.name())
            .field("grid", self.grid())
            .field("interior", &self.layout.n_interior())
            .field("collar", &self.layout.n_collar())
            .finish()
    }
}

impl OperatorContext {
    pub fn new(curve: &BoundaryCurve, config: OperatorConfig) -> Result<Self, OperatorError> {
        let OperatorConfig { kernel, h, fc, extension } = config;
        if !(h > 0.0 && h.is_finite()) {
            return Err(OperatorError::Step(h));
        }
        kernel.validate()?;
        fc.validate()?;
        let delta = kernel.delta;
        let outer = offset_curve(curve, delta)?;
        let strip_width = fc.c as f64 * h;
        let grid = build_cartesian_grid(&outer, h, fc.c, h)?;
        let classification = classify_points(&grid, curve, delta, strip_width)?;
        if classification.interior.is_empty() {
            return Err(OperatorError::EmptyInterior);
        }
        let (fc_curve, plan) = match extension {
            ExtensionDomain::Collar => {
                let data = classification.data_mask();
                let strip: Vec<bool> = classification
                    .labels
                    .iter()
                    .map(|l| *l == PointLabel::ContinuationStrip)
                    .collect();
                (outer.clone(), FcPlan::new(&grid, &outer, &data, &strip, fc)?)
            }
            ExtensionDomain::Boundary => {
                let data = classification.interior_mask();
                let strip: Vec<bool> = classification
                    .labels
                    .iter()
                    .zip(&classification.signed_distance)
                    .map(|(l, s)| *l != PointLabel::Interior && *s <= strip_width)
                    .collect();
                (curve.clone(), FcPlan::new(&grid, curve, &data, &strip, fc)?)
            }
        };
        let (lx, ly) = grid.periods();
        let multipliers = MultiplierGrid::new(grid.nx, grid.ny, lx, ly, kernel)?;
        let layout = FieldLayout::from_classification(&classification);
        Ok(OperatorContext {
            config,
            curve: curve.clone(),
            fc_curve,
            classification,
            layout,
            plan,
            multipliers,
            pool: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    /// The curve the continuation is built from.
    pub fn fc_curve(&self) -> &BoundaryCurve {
        &self.fc_curve
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.classification.grid
    }

    pub fn classification(&self) -> &PointClassification {
        &self.classification
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }

    pub fn plan(&self) -> &FcPlan {
        &self.plan
    }

    pub fn multipliers(&self) -> &MultiplierGrid {
        &self.multipliers
    }

    /// Mean multiplier, the diagonal of `L` in the periodic setting.
    pub fn diagonal_estimate(&self) -> f64 {
        let full = self.multipliers.full_values();
        full.iter().sum::<f64>() / full.len() as f64
    }

    fn take_scratch(&self) -> Scratch {
        if let Some(s) = self.pool.lock().expect("scratch pool poisoned").pop() {
            return s;
        }
        let g = self.grid();
        let fft = Fft2::new(g.nx, g.ny);
        let spec = vec![Complex64::default(); fft.half_len()];
        Scratch {
            fft,
            grid: vec![0.0; g.len()],
            ext: vec![0.0; g.len()],
            spec,
            inner: Vec::new(),
        }
    }

    fn give_scratch(&self, s: Scratch) {
        self.pool.lock().expect("scratch pool poisoned").push(s);
    }

    fn check_len(&self, v: &[f64]) -> Result<(), OperatorError> {
        if v.len() != self.layout.len() {
            return Err(OperatorError::Length {
                expected: self.layout.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// The continued grid function for a field vector.
    pub fn extend(&self, u: &[f64]) -> Result<Vec<f64>, OperatorError> {
        self.check_len(u)?;
        let mut s = self.take_scratch();
        self.extend_with(u, &mut s)?;
        let out = s.ext.clone();
        self.give_scratch(s);
        Ok(out)
    }

    fn extend_with(&self, u: &[f64], s: &mut Scratch) -> Result<(), OperatorError> {
        self.layout.scatter(u, &mut s.grid);
        self.plan.extend_into(&s.grid, &mut s.ext, &mut s.inner)?;
        if self.config.extension == ExtensionDomain::Boundary {
            let ni = self.layout.n_interior();
            for (k, &i) in self.layout.collar.iter().enumerate() {
                s.ext[i] = u[ni + k];
            }
        }
        Ok(())
    }

    /// `L u` on the interior nodes.
    pub fn apply_nonlocal_laplacian(&self, u: &[f64]) -> Result<Vec<f64>, OperatorError> {
        let mut out = vec![0.0; self.layout.n_interior()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// `L u` on the interior nodes, written into `out`.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<(), OperatorError> {
        self.check_len(u)?;
        if out.len() != self.layout.n_interior() {
            return Err(OperatorError::Length {
                expected: self.layout.n_interior(),
                got: out.len(),
            });
        }
        let mut s = self.take_scratch();
        self.extend_with(u, &mut s)?;
        let Scratch { fft, ext, spec, grid, .. } = &mut s;
        fft.forward(ext, spec);
        let scale = 1.0 / self.grid().len() as f64;
        for (c, m) in spec.iter_mut().zip(self.multipliers.half_spectrum()) {
            *c *= m * scale;
        }
        fft.inverse(spec, grid);
        for (o, &i) in out.iter_mut().zip(&self.layout.interior) {
            *o = grid[i];
        }
        self.give_scratch(s);
        Ok(())
    }

    /// Stacked operator `A v = (L v; v|_collar)`.
    pub fn forward_operator(&self, v: &[f64]) -> Result<Vec<f64>, OperatorError> {
        let mut out = vec![0.0; self.layout.len()];
        self.forward_into(v, &mut out)?;
        Ok(out)
    }

    pub fn forward_into(&self, v: &[f64], out: &mut [f64]) -> Result<(), OperatorError> {
        let ni = self.layout.n_interior();
        if out.len() != self.layout.len() {
            return Err(OperatorError::Length {
                expected: self.layout.len(),
                got: out.len(),
            });
        }
        self.apply_into(v, &mut out[..ni])?;
        out[ni..].copy_from_slice(&v[ni..]);
        Ok(())
    }

    /// Stacked right-hand side `(f; b)`.
    pub fn assemble_rhs(&self, f: &[f64], b: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if f.len() != self.layout.n_interior() {
            return Err(OperatorError::Length {
                expected: self.layout.n_interior(),
                got: f.len(),
            });
        }
        if b.len() != self.layout.n_collar() {
            return Err(OperatorError::Length {
                expected: self.layout.n_collar(),
                got: b.len(),
            });
        }
        Ok(f.iter().chain(b).copied().collect())
    }

    /// Field vector of `g` sampled at every unknown.
    pub fn sample(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let grid = self.grid();
        (0..self.layout.len())
            .map(|k| {
                let p = grid.node_at(self.layout.node(k));
                g(p.x, p.y)
            })
            .collect()
    }

    pub fn sample_interior(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let grid = self.grid();
        self.layout
            .interior
            .iter()
            .map(|&i| {
                let p = grid.node_at(i);
                g(p.x, p.y)
            })
            .collect()
    }

    pub fn sample_collar(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let grid = self.grid();
        self.layout
            .collar
            .iter()
            .map(|&i| {
                let p = grid.node_at(i);
                g(p.x, p.y)
            })
            .collect()
    }
}

/// `L u` for `u` periodic on the grid itself (no continuation).
pub fn apply_periodic(multipliers: &MultiplierGrid, u: &[f64]) -> Vec<f64> {
    let (nx, ny) = multipliers.dims();
    let mut fft = Fft2::new(nx, ny);
    let mut spec = vec![Complex64::default(); fft.half_len()];
    fft.forward(u, &mut spec);
    let scale = 1.0 / (nx * ny) as f64;
    for (c, m) in spec.iter_mut().zip(multipliers.half_spectrum()) {
        *c *= m * scale;
    }
    let mut out = vec![0.0; nx * ny];
    fft.inverse(&mut spec, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(beta: f64, h: f64) -> OperatorContext {
        let curve = BoundaryCurve::disk(1.0).unwrap();
        let cfg = OperatorConfig::new(KernelParams::new(0.4, beta).unwrap(), h, FcParams::default());
        OperatorContext::new(&curve, cfg).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let c = ctx(2.0, 0.025);
        let lu = c.apply_nonlocal_laplacian(&vec![1.5; c.layout().len()]).unwrap();
        assert!(lu.iter().all(|v| v.abs() < 1e-9), "{:e}", lu.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    #[test]
    fn quadratic_maps_to_four() {
        let c = ctx(1.0, 0.02);
        let lu = c.apply_nonlocal_laplacian(&c.sample(|x, y| x * x + y * y)).unwrap();
        let err = lu.iter().fold(0.0f64, |a, v| a.max((v - 4.0).abs()));
        assert!(err < 1e-8, "{err:e}");
    }

    #[test]
    fn collar_rows_are_identity() {
        let c = ctx(2.0, 0.04);
        let v = c.sample(|x, y| x - y * y);
        let av = c.forward_operator(&v).unwrap();
        let ni = c.layout().n_interior();
        assert_eq!(&av[ni..], &v[ni..]);
        assert!(c.forward_operator(&vec![0.0; v.len()]).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn layout_round_trip() {
        let c = ctx(2.0, 0.05);
        let v: Vec<f64> = (0..c.layout().len()).map(|k| k as f64).collect();
        let mut g = vec![0.0; c.grid().len()];
        c.layout().scatter(&v, &mut g);
        assert_eq!(c.layout().gather(&g), v);
    }
}
