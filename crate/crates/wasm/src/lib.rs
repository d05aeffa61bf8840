//! Browser bindings for three small demonstrations: the multiplier curve,
//! a Fourier continuation heatmap and a coarse Poisson solve.

use nlfc::fc2d::{FcDomain, FcParams};
use nlfc::geometry::BoundaryCurve;
use nlfc::harness::{build_manufactured, relative_l2_error, run_poisson, CaseId};
use nlfc::multipliers::{multiplier, KernelParams};
use nlfc::solvers::GmresConfig;
use wasm_bindgen::prelude::*;

/// Finest step the page accepts; keeps solves interactive.
pub const MIN_H: f64 = 0.015;

fn check_h(h: f64) -> Result<(), String> {
    if !(h >= MIN_H && h <= 0.2) {
        return Err(format!("h = {h} outside [{MIN_H}, 0.2]"));
    }
    Ok(())
}

/// `m(ν)` at `n` equally spaced frequencies on `[0, nu_max]`.
pub fn multiplier_samples(delta: f64, beta: f64, nu_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let kp = KernelParams::new(delta, beta).map_err(|e| e.to_string())?;
    if n < 2 || !(nu_max > 0.0 && nu_max <= 2000.0) {
        return Err(format!("need n ≥ 2 and 0 < ν_max ≤ 2000, got n = {n}, ν_max = {nu_max}"));
    }
    (0..n)
        .map(|k| multiplier(nu_max * k as f64 / (n - 1) as f64, &kp).map_err(|e| e.to_string()))
        .collect()
}

#[wasm_bindgen(js_name = multiplierCurve)]
pub fn multiplier_curve(delta: f64, beta: f64, nu_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    multiplier_samples(delta, beta, nu_max, n).map_err(|e| JsError::new(&e))
}

/// A field on a Cartesian grid, with the node labels
/// (0 exterior, 1 interior, 2 collar, 3 continuation strip).
#[wasm_bindgen]
pub struct Heatmap {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
    metric: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Row-major values, index `j * nx + i`.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.labels.clone()
    }

    /// Continuation `L²` error, or the largest jump / error of a solve.
    #[wasm_bindgen(getter)]
    pub fn metric(&self) -> f64 {
        self.metric
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

fn demo_function(name: &str) -> Option<fn(f64, f64) -> f64> {
    Some(match name {
        "wave" => |x: f64, y: f64| (3.0 * x).sin() * (2.0 * y).cos() + 0.5 * x * y,
        "bump" => |x: f64, y: f64| (-(x * x + y * y) * 2.0).exp() + x,
        "ripple" => |x: f64, y: f64| (8.0 * x.hypot(y)).cos() * (1.0 + y),
        _ => return None,
    })
}

pub fn continuation(curve: &str, function: &str, h: f64) -> Result<Heatmap, String> {
    check_h(h)?;
    let curve = match curve {
        "star5" => return Err("the star domain is too large for the page; use disk, kite, kite2 or ring".into()),
        c => BoundaryCurve::from_catalog(c, &[]).map_err(|e| e.to_string())?,
    };
    let f = demo_function(function).ok_or_else(|| format!("unknown function `{function}` (wave, bump, ripple)"))?;
    let dom = FcDomain::new(&curve, h, FcParams::default()).map_err(|e| e.to_string())?;
    let field = dom.extend(&dom.sample(f)).map_err(|e| e.to_string())?;
    let err = relative_l2_error(&field, f, &curve).map_err(|e| e.to_string())?;
    Ok(Heatmap {
        nx: field.grid.nx,
        ny: field.grid.ny,
        labels: dom.classification.mask_bytes(),
        values: field.values,
        metric: err.value,
        iterations: 0,
    })
}

#[wasm_bindgen(js_name = fcExtend)]
pub fn fc_extend(curve: &str, function: &str, h: f64) -> Result<Heatmap, JsError> {
    continuation(curve, function, h).map_err(|e| JsError::new(&e))
}

/// Solve a Poisson reference case (`poisson-quadratic`,
/// `poisson-boundary-jump` or `poisson-interface-jump`) at any β.
pub fn poisson(case: &str, beta: f64, h: f64) -> Result<Heatmap, String> {
    check_h(h)?;
    let id: CaseId = case.parse().map_err(|e: nlfc::harness::HarnessError| e.to_string())?;
    if !matches!(id, CaseId::PoissonQuadratic | CaseId::PoissonBoundaryJump | CaseId::PoissonInterfaceJump) {
        return Err(format!("`{id}` is not available on the page"));
    }
    let mc = build_manufactured(id, beta).map_err(|e| e.to_string())?;
    let gmres = GmresConfig {
        tol: 1e-10,
        ..GmresConfig::default()
    };
    let run = run_poisson(&mc, h, FcParams::default(), &gmres).map_err(|e| e.to_string())?;
    let metric = match id {
        CaseId::PoissonBoundaryJump => run.boundary_jump(5).map_err(|e| e.to_string())?.max,
        CaseId::PoissonInterfaceJump => run.interior_jump(5).map_err(|e| e.to_string())?.max,
        _ => run.max_error.unwrap_or(f64::NAN),
    };
    let g = *run.ctx.grid();
    Ok(Heatmap {
        nx: g.nx,
        ny: g.ny,
        values: run.grid_values(),
        labels: run.ctx.classification().mask_bytes(),
        metric,
        iterations: run.solution.report.iterations,
    })
}

#[wasm_bindgen(js_name = poissonSolve)]
pub fn poisson_solve(case: &str, beta: f64, h: f64) -> Result<Heatmap, JsError> {
    poisson(case, beta, h).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_curve_starts_at_zero_and_decreases() {
        let m = multiplier_samples(0.3, 2.0, 200.0, 41).unwrap();
        assert_eq!(m[0], 0.0);
        assert!(m.iter().all(|v| *v <= 0.0));
        assert!(m[40] < m[1]);
        assert!(multiplier_samples(0.3, 4.5, 200.0, 41).is_err());
    }

    #[test]
    fn continuation_keeps_interior_data() {
        let hm = continuation("kite", "wave", 0.05).unwrap();
        assert_eq!(hm.values.len(), hm.nx * hm.ny);
        assert_eq!(hm.labels.len(), hm.values.len());
        assert!(hm.metric < 1e-3, "{}", hm.metric);
        assert!(continuation("kite", "nope", 0.05).is_err());
        assert!(continuation("kite", "wave", 0.001).is_err());
    }

    #[test]
    fn quadratic_solve_is_exact() {
        let hm = poisson("poisson-quadratic", 2.0, 0.05).unwrap();
        assert!(hm.metric < 1e-6, "{}", hm.metric);
        assert!(hm.iterations > 0);
        assert!(poisson("diffusion-ring", 2.0, 0.05).is_err());
    }
}
