//! Manufactured problems, error norms, convergence orders and jump
//! measurements for the solver experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fc2d::{line_stencil_weights, FcParams, FourierField};
use crate::geometry::{
    boundary_count, classify_points, sample_boundary, BoundaryCurve, CartesianGrid, GeometryError, Vec2,
};
use crate::interp;
use crate::multipliers::{multiplier, KernelParams, MultiplierError};
use crate::nlops::{OperatorConfig, OperatorContext, OperatorError};
use crate::solvers::{solve_diffusion, solve_poisson, DiffusionProblem, GmresConfig, PoissonSolution, SolverError, StepSettings, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("case `{case}` is a {kind} problem")]
    WrongKind { case: CaseId, kind: &'static str },
    #[error("jump stencil leaves the sampled region at θ = {theta:.6}")]
    Stencil { theta: f64 },
    #[error("need at least {0} resolutions")]
    TooFewResolutions(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Oscillatory manufactured solution frequencies for the Poisson study.
pub const POISSON_R: (f64, f64) = (10.6418, 12.6418);
/// Frequencies and diffusivity for the diffusion study.
pub const DIFFUSION_R: (f64, f64) = (15.6455, 15.6455);
pub const DIFFUSION_KAPPA: f64 = 0.1;

/// Reference multipliers `(β, m)` at `δ = 0.4`, `ν = 2π|(r₁, r₂)|`.
pub const POISSON_MULTIPLIERS: [(f64, f64); 3] = [(1.2, -82.87098585883194), (2.0, -180.5053934013443), (2.5, -387.0397711705603)];
/// Reference multipliers `(β, m)` at `δ = 0.3`.
pub const DIFFUSION_MULTIPLIERS: [(f64, f64); 3] =
    [(1.0, -130.16228859689554), (2.0, -321.3202730766787), (2.5, -689.8419741563309)];

/// Reference boundary jumps `(β, min, max)` for the collar-jump problem.
pub const BOUNDARY_JUMPS: [(f64, f64, f64); 4] = [
    (1.5, 0.0538468, 0.0646947),
    (2.0, 0.0286598, 0.0454215),
    (2.2, 0.0187264, 0.0372901),
    (3.1, 6.24e-5, 0.0097378),
];
/// Reference interface jumps `(β, min, max)` for the discontinuous-load problem.
pub const INTERFACE_JUMPS: [(f64, f64, f64); 4] = [
    (1.2, 1.3589861, 1.3681906),
    (2.0, 0.3237825, 0.4040726),
    (2.5, 0.0363031, 0.0856388),
    (3.1, 1.75e-5, 0.0067363),
];

/// Reference `(h, ε₂)` for the diffusion study at `d = 4`, per β.
pub const DIFFUSION_ERRORS_D4: [(f64, [f64; 3]); 3] = [
    (0.02, [1.13e-5, 5.33e-5, 2.48e-4]),
    (0.01, [1.51e-7, 9.45e-7, 6.81e-6]),
    (0.005, [2.07e-9, 1.48e-8, 1.45e-7]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CaseId {
    PoissonOscillatory,
    DiffusionOscillatory,
    PoissonQuadratic,
    PoissonBoundaryJump,
    PoissonInterfaceJump,
    DiffusionRing,
    DiffusionRingStep,
}

impl CaseId {
    pub const ALL: [CaseId; 7] = [
        CaseId::PoissonOscillatory,
        CaseId::DiffusionOscillatory,
        CaseId::PoissonQuadratic,
        CaseId::PoissonBoundaryJump,
        CaseId::PoissonInterfaceJump,
        CaseId::DiffusionRing,
        CaseId::DiffusionRingStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::PoissonOscillatory => "poisson-oscillatory",
            CaseId::DiffusionOscillatory => "diffusion-oscillatory",
            CaseId::PoissonQuadratic => "poisson-quadratic",
            CaseId::PoissonBoundaryJump => "poisson-boundary-jump",
            CaseId::PoissonInterfaceJump => "poisson-interface-jump",
            CaseId::DiffusionRing => "diffusion-ring",
            CaseId::DiffusionRingStep => "diffusion-ring-step",
        }
    }

    pub fn is_poisson(self) -> bool {
        matches!(
            self,
            CaseId::PoissonOscillatory | CaseId::PoissonQuadratic | CaseId::PoissonBoundaryJump | CaseId::PoissonInterfaceJump
        )
    }

    /// β values swept by the reference study.
    pub fn betas(self) -> &'static [f64] {
        match self {
            CaseId::PoissonOscillatory => &[1.2, 2.0, 2.5],
            CaseId::DiffusionOscillatory => &[1.0, 2.0, 2.5],
            CaseId::PoissonQuadratic => &[1.0, 2.0, 3.0],
            CaseId::PoissonBoundaryJump => &[1.5, 2.0, 2.2, 3.1],
            CaseId::PoissonInterfaceJump => &[1.2, 2.0, 2.5, 3.1],
            CaseId::DiffusionRing => &[4.0, 1.5],
            CaseId::DiffusionRingStep => &[4.0, 1.0],
        }
    }

    pub fn delta(self) -> f64 {
        match self {
            CaseId::PoissonOscillatory | CaseId::PoissonQuadratic => 0.4,
            CaseId::DiffusionOscillatory => 0.3,
            CaseId::PoissonBoundaryJump | CaseId::DiffusionRing | CaseId::DiffusionRingStep => 0.2,
            CaseId::PoissonInterfaceJump => 0.5,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HarnessError::UnknownCase(s.to_string()))
    }
}

impl From<CaseId> for String {
    fn from(c: CaseId) -> String {
        c.name().to_string()
    }
}

impl TryFrom<String> for CaseId {
    type Error = HarnessError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A fully specified problem: domain, kernel, data and (when known) the exact
/// solution.
#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub id: CaseId,
    pub curve: BoundaryCurve,
    pub kernel: KernelParams,
    pub r: (f64, f64),
    pub kappa: f64,
    /// Multiplier at the manufactured frequency; NaN when not used.
    pub multiplier: f64,
    /// Reference time step, final time and snapshot times for diffusion cases.
    pub tau: f64,
    pub t_final: f64,
    pub snapshots: Vec<f64>,
}

/// Build a case with the given β (the reference δ, domain and data).
pub fn build_manufactured(id: CaseId, beta: f64) -> Result<ManufacturedCase, HarnessError> {
    let kernel = KernelParams::new(id.delta(), beta)?;
    let tau_ring = 2.5e-7;
    let (curve, r, kappa, tau, t_final, snapshots) = match id {
        CaseId::PoissonOscillatory => (BoundaryCurve::disk(1.0)?, POISSON_R, 0.0, 0.0, 0.0, vec![]),
        CaseId::DiffusionOscillatory => (BoundaryCurve::kite(), DIFFUSION_R, DIFFUSION_KAPPA, 5e-7, 1e-4, vec![]),
        CaseId::PoissonQuadratic | CaseId::PoissonInterfaceJump => (BoundaryCurve::kite(), (0.0, 0.0), 0.0, 0.0, 0.0, vec![]),
        CaseId::PoissonBoundaryJump => (BoundaryCurve::disk(1.0)?, (0.0, 0.0), 0.0, 0.0, 0.0, vec![]),
        CaseId::DiffusionRing => (BoundaryCurve::ring(), (0.0, 0.0), 0.0, tau_ring, 0.05, vec![0.02, 0.03, 0.04, 0.05]),
        CaseId::DiffusionRingStep => (BoundaryCurve::ring(), (0.0, 0.0), 0.0, tau_ring, 0.03, vec![0.001, 0.005, 0.01, 0.03]),
    };
    let multiplier = if r.0 > 0.0 {
        multiplier(2.0 * PI * r.0.hypot(r.1), &kernel)?
    } else {
        f64::NAN
    };
    Ok(ManufacturedCase {
        id,
        curve,
        kernel,
        r,
        kappa,
        multiplier,
        tau,
        t_final,
        snapshots,
    })
}

impl ManufacturedCase {
    fn wave(&self, x: f64, y: f64) -> f64 {
        (2.0 * PI * self.r.0 * x).sin() * (2.0 * PI * self.r.1 * y).sin()
    }

    fn decay(&self, t: f64) -> f64 {
        (-2.0 * PI * PI * self.kappa * t).exp()
    }

    /// Exact solution when known in closed form.
    pub fn exact(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        match self.id {
            CaseId::PoissonOscillatory => Some(self.wave(x, y)),
            CaseId::DiffusionOscillatory => Some(self.decay(t) * self.wave(x, y)),
            CaseId::PoissonQuadratic => Some(x * x + y * y),
            _ => None,
        }
    }

    /// Load `f` (Poisson) or source `s` (diffusion) at an interior point.
    pub fn rhs(&self, x: f64, y: f64, t: f64) -> f64 {
        match self.id {
            CaseId::PoissonOscillatory => self.multiplier * self.wave(x, y),
            CaseId::DiffusionOscillatory => (-2.0 * PI * PI * self.kappa - self.multiplier) * self.decay(t) * self.wave(x, y),
            CaseId::PoissonQuadratic => 4.0,
            CaseId::PoissonBoundaryJump => ((PI * x).sin() * (PI * y).sin()).abs(),
            CaseId::PoissonInterfaceJump => {
                if inside_interface(x, y) {
                    80.0
                } else {
                    4.0
                }
            }
            CaseId::DiffusionRing | CaseId::DiffusionRingStep => 0.0,
        }
    }

    /// Volume-constraint data on the collar.
    pub fn collar(&self, x: f64, y: f64, t: f64) -> f64 {
        match self.id {
            CaseId::PoissonOscillatory => self.wave(x, y),
            CaseId::DiffusionOscillatory => self.decay(t) * self.wave(x, y),
            CaseId::PoissonQuadratic | CaseId::PoissonInterfaceJump => x * x + y * y,
            CaseId::PoissonBoundaryJump => -x * x,
            CaseId::DiffusionRing => -(1.0 + x * x + y * y),
            CaseId::DiffusionRingStep => 0.0,
        }
    }

    /// Collar data depends on time only for the manufactured diffusion case.
    pub fn collar_is_static(&self) -> bool {
        self.id != CaseId::DiffusionOscillatory
    }

    pub fn initial(&self, x: f64, y: f64) -> f64 {
        match self.id {
            CaseId::DiffusionOscillatory => self.wave(x, y),
            CaseId::DiffusionRing => (2.0 * PI * x).sin() * (2.0 * PI * y).cos(),
            CaseId::DiffusionRingStep => {
                if x * x + y * y < 0.3 {
                    2.0
                } else {
                    (-x.powi(4) - y.powi(4)).exp()
                }
            }
            _ => 0.0,
        }
    }

    pub fn operator_config(&self, h: f64, fc: FcParams) -> OperatorConfig {
        OperatorConfig::new(self.kernel, h, fc)
    }
}

/// `x² + 4y² < 0.2`, the load discontinuity of the interface problem.
pub fn inside_interface(x: f64, y: f64) -> bool {
    x * x + 4.0 * y * y < 0.2
}

pub fn interface_curve() -> BoundaryCurve {
    BoundaryCurve::ellipse(Vec2::default(), 0.2f64.sqrt(), 0.05f64.sqrt()).expect("positive semi-axes")
}

/// Pairwise summation in a fixed traversal order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorm {
    pub value: f64,
    /// False when the exact solution vanishes and the absolute norm is reported.
    pub relative: bool,
}

/// Relative discrete `L²` error `‖u − u*‖ / ‖u*‖` over paired samples.
pub fn relative_l2(values: &[f64], exact: &[f64]) -> ErrorNorm {
    let diff: Vec<f64> = values.iter().zip(exact).map(|(u, e)| (u - e) * (u - e)).collect();
    let ex: Vec<f64> = exact.iter().map(|e| e * e).collect();
    let (num, den) = (pairwise_sum(&diff), pairwise_sum(&ex));
    if den == 0.0 {
        ErrorNorm {
            value: (num / values.len().max(1) as f64).sqrt(),
            relative: false,
        }
    } else {
        ErrorNorm {
            value: (num / den).sqrt(),
            relative: true,
        }
    }
}

pub fn max_abs_error(values: &[f64], exact: &[f64]) -> f64 {
    values.iter().zip(exact).fold(0.0f64, |a, (u, e)| a.max((u - e).abs()))
}

/// Relative `L²` error of a continued field on the `h/2` grid inside `curve`.
pub fn relative_l2_error(
    field: &FourierField,
    exact: impl Fn(f64, f64) -> f64,
    curve: &BoundaryCurve,
) -> Result<ErrorNorm, HarnessError> {
    let (fine, values) = field.resample_halfstep();
    let inside = classify_points(&fine, curve, 0.0, 0.0)?;
    let mut u = Vec::with_capacity(inside.interior.len());
    let mut e = Vec::with_capacity(inside.interior.len());
    for &i in &inside.interior {
        let p = fine.node_at(i);
        u.push(values[i]);
        e.push(exact(p.x, p.y));
    }
    Ok(relative_l2(&u, &e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub resolution: f64,
    pub eps2: f64,
    /// NaN for the first row and for rows flagged as non-convergent.
    pub order: f64,
}

/// Errors below this are treated as round-off and carry no order.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Orders `log(ε_{i-1}/ε_i) / log(ratio)` between consecutive rows. The
/// resolution ratio is `h_{i-1}/h_i` for step sizes (decreasing values) and
/// `N_i/N_{i-1}` for counts (increasing values).
pub fn convergence_study(resolutions: &[f64], errors: &[f64]) -> Result<Vec<ConvergenceRow>, HarnessError> {
    if resolutions.len() < 2 || resolutions.len() != errors.len() {
        return Err(HarnessError::TooFewResolutions(2));
    }
    let increasing = resolutions[1] > resolutions[0];
    Ok((0..resolutions.len())
        .map(|i| {
            let order = if i == 0 {
                f64::NAN
            } else {
                let (e0, e1) = (errors[i - 1], errors[i]);
                let ratio = if increasing {
                    resolutions[i] / resolutions[i - 1]
                } else {
                    resolutions[i - 1] / resolutions[i]
                };
                if e0 < ROUNDOFF_FLOOR || e1 < ROUNDOFF_FLOOR || e1 >= e0 || ratio <= 1.0 {
                    f64::NAN
                } else {
                    (e0 / e1).ln() / ratio.ln()
                }
            };
            ConvergenceRow {
                resolution: resolutions[i],
                eps2: errors[i],
                order,
            }
        })
        .collect())
}

/// Least-squares slope of `log ε` against `log(1/h)` (or `log N`).
pub fn least_squares_order(resolutions: &[f64], errors: &[f64]) -> f64 {
    let increasing = resolutions.len() > 1 && resolutions[1] > resolutions[0];
    let xs: Vec<f64> = resolutions.iter().map(|r| if increasing { r.ln() } else { -r.ln() }).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub theta: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Number of extrapolation points per normal.
    pub points: usize,
}

impl JumpReport {
    fn from_values(theta: Vec<f64>, magnitude: Vec<f64>, points: usize) -> Self {
        let min = magnitude.iter().copied().fold(f64::INFINITY, f64::min);
        let max = magnitude.iter().copied().fold(0.0, f64::max);
        JumpReport {
            theta,
            magnitude,
            min,
            max,
            points,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,jump\n");
        for (t, j) in self.theta.iter().zip(&self.magnitude) {
            s.push_str(&format!("{t:.17e},{j:.17e}\n"));
        }
        s
    }
}

/// One-sided degree-`(M-1)` extrapolation to `origin` of grid values on
/// `mask`, from `M` points at spacing `h` along `dir`.
fn one_sided_limit(grid: &CartesianGrid, mask: &[bool], values: &[f64], origin: Vec2, dir: Vec2, m: usize) -> Option<f64> {
    let targets: Vec<f64> = (1..=m).map(|j| j as f64 * grid.h).collect();
    let rows = line_stencil_weights(grid, mask, origin, dir, &targets, m).ok()?;
    let samples: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().map(|&(i, w)| w * values[i]).sum())
        .collect();
    Some(interp::interpolate(&targets, &samples, 0.0))
}

/// `|ũ − b|` at the boundary samples, with `ũ` the one-sided extrapolation
/// of interior grid values (`u` holds a full grid array).
pub fn boundary_jump(
    grid: &CartesianGrid,
    interior_mask: &[bool],
    u: &[f64],
    curve: &BoundaryCurve,
    b: impl Fn(f64, f64) -> f64,
    m: usize,
) -> Result<JumpReport, HarnessError> {
    let samples = sample_boundary(curve, boundary_count(curve, grid.h))?;
    let mut mags = Vec::with_capacity(samples.len());
    for p in 0..samples.len() {
        let q = samples.point[p];
        let ut = one_sided_limit(grid, interior_mask, u, q, -samples.normal[p], m)
            .ok_or(HarnessError::Stencil { theta: samples.theta[p] })?;
        mags.push((ut - b(q.x, q.y)).abs());
    }
    Ok(JumpReport::from_values(samples.theta, mags, m))
}

/// `|ũ_int − ũ_ext|` across an interface curve strictly inside the domain;
/// `inside` tells which side of the interface a node is on.
pub fn interior_jump(
    grid: &CartesianGrid,
    interior_mask: &[bool],
    u: &[f64],
    interface: &BoundaryCurve,
    inside: impl Fn(f64, f64) -> bool,
    m: usize,
) -> Result<JumpReport, HarnessError> {
    let mut mask_in = vec![false; grid.len()];
    let mut mask_out = vec![false; grid.len()];
    for i in 0..grid.len() {
        if interior_mask[i] {
            let p = grid.node_at(i);
            if inside(p.x, p.y) {
                mask_in[i] = true;
            } else {
                mask_out[i] = true;
            }
        }
    }
    let samples = sample_boundary(interface, boundary_count(interface, grid.h))?;
    let mut mags = Vec::with_capacity(samples.len());
    for p in 0..samples.len() {
        let (q, n) = (samples.point[p], samples.normal[p]);
        let err = HarnessError::Stencil { theta: samples.theta[p] };
        let a = one_sided_limit(grid, &mask_in, u, q, -n, m).ok_or(err.clone())?;
        let b = one_sided_limit(grid, &mask_out, u, q, n, m).ok_or(err)?;
        mags.push((a - b).abs());
    }
    Ok(JumpReport::from_values(samples.theta, mags, m))
}

/// A solved Poisson case with whatever error measures apply.
pub struct PoissonRun {
    pub case: ManufacturedCase,
    pub ctx: OperatorContext,
    pub solution: PoissonSolution,
    pub l2: Option<ErrorNorm>,
    pub max_error: Option<f64>,
    pub warnings: Vec<String>,
}

/// Stagnation within this factor of the tolerance is accepted with a warning.
pub const STAGNATION_SLACK: f64 = 100.0;

impl PoissonRun {
    /// Solution as a full grid array (zero off `Ω ∪ Ω_I`).
    pub fn grid_values(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.ctx.grid().len()];
        self.ctx.layout().scatter(&self.solution.u, &mut g);
        g
    }

    pub fn boundary_jump(&self, m: usize) -> Result<JumpReport, HarnessError> {
        let c = &self.case;
        boundary_jump(
            self.ctx.grid(),
            &self.ctx.classification().interior_mask(),
            &self.grid_values(),
            &c.curve,
            |x, y| c.collar(x, y, 0.0),
            m,
        )
    }

    pub fn interior_jump(&self, m: usize) -> Result<JumpReport, HarnessError> {
        interior_jump(
            self.ctx.grid(),
            &self.ctx.classification().interior_mask(),
            &self.grid_values(),
            &interface_curve(),
            inside_interface,
            m,
        )
    }
}

pub fn run_poisson(case: &ManufacturedCase, h: f64, fc: FcParams, gmres: &GmresConfig) -> Result<PoissonRun, HarnessError> {
    run_poisson_with(case, case.operator_config(h, fc), gmres)
}

/// Solve, accepting GMRES stagnation within [`STAGNATION_SLACK`] of the
/// tolerance (returned as a warning).
pub fn solve_poisson_tolerant(
    ctx: &OperatorContext,
    f: &[f64],
    b: &[f64],
    gmres: &GmresConfig,
) -> Result<(PoissonSolution, Vec<String>), SolverError> {
    match solve_poisson(ctx, f, b, gmres) {
        Ok(s) => Ok((s, Vec::new())),
        Err(SolverError::NotConverged {
            iterations,
            residual,
            tol,
            stagnated: true,
            best,
            history,
        }) if residual <= STAGNATION_SLACK * tol => {
            let warning =
                format!("GMRES stagnated at relative residual {residual:e} after {iterations} iterations (target {tol:e})");
            let solution = PoissonSolution {
                u: best.0,
                report: crate::solvers::GmresReport {
                    iterations,
                    restarts: iterations.div_ceil(gmres.restart),
                    residual,
                    history,
                },
            };
            Ok((solution, vec![warning]))
        }
        Err(e) => Err(e),
    }
}

/// [`run_poisson`] with an explicit operator configuration; the kernel in
/// `config` must match the case's.
pub fn run_poisson_with(case: &ManufacturedCase, config: OperatorConfig, gmres: &GmresConfig) -> Result<PoissonRun, HarnessError> {
    if !case.id.is_poisson() {
        return Err(HarnessError::WrongKind {
            case: case.id,
            kind: "diffusion",
        });
    }
    let ctx = OperatorContext::new(&case.curve, config)?;
    let f = ctx.sample_interior(|x, y| case.rhs(x, y, 0.0));
    let b = ctx.sample_collar(|x, y| case.collar(x, y, 0.0));
    let (solution, warnings) = solve_poisson_tolerant(&ctx, &f, &b, gmres)?;
    let (l2, max_error) = match case.exact(0.0, 0.0, 0.0) {
        Some(_) => {
            let ni = ctx.layout().n_interior();
            let ex = ctx.sample_interior(|x, y| case.exact(x, y, 0.0).unwrap_or(f64::NAN));
            (
                Some(relative_l2(&solution.u[..ni], &ex)),
                Some(max_abs_error(&solution.u[..ni], &ex)),
            )
        }
        None => (None, None),
    };
    Ok(PoissonRun {
        case: case.clone(),
        ctx,
        solution,
        l2,
        max_error,
        warnings,
    })
}

pub struct DiffusionRun {
    pub case: ManufacturedCase,
    pub ctx: OperatorContext,
    pub series: TimeSeries,
    /// Relative `L²` error on interior nodes at the final time.
    pub l2: Option<ErrorNorm>,
}

/// March a diffusion case; `settings` overrides the case's reference τ/T.
pub fn run_diffusion(
    case: &ManufacturedCase,
    h: f64,
    fc: FcParams,
    settings: Option<StepSettings>,
) -> Result<DiffusionRun, HarnessError> {
    run_diffusion_with(case, case.operator_config(h, fc), settings)
}

pub fn run_diffusion_with(
    case: &ManufacturedCase,
    config: OperatorConfig,
    settings: Option<StepSettings>,
) -> Result<DiffusionRun, HarnessError> {
    if case.id.is_poisson() {
        return Err(HarnessError::WrongKind {
            case: case.id,
            kind: "Poisson",
        });
    }
    let ctx = OperatorContext::new(&case.curve, config)?;
    let settings = settings.unwrap_or_else(|| StepSettings {
        tau: case.tau,
        t_final: case.t_final,
        snapshots: case.snapshots.clone(),
    });
    let grid = *ctx.grid();
    let layout = ctx.layout();
    let interior_pts: Vec<Vec2> = layout.interior.iter().map(|&i| grid.node_at(i)).collect();
    let collar_pts: Vec<Vec2> = layout.collar.iter().map(|&i| grid.node_at(i)).collect();
    let mut u0 = ctx.sample(|x, y| case.initial(x, y));
    let ni = layout.n_interior();
    for (k, p) in collar_pts.iter().enumerate() {
        u0[ni + k] = case.collar(p.x, p.y, 0.0);
    }
    let static_collar: Vec<f64> = collar_pts.iter().map(|p| case.collar(p.x, p.y, 0.0)).collect();
    // Space-time separable data are sampled once and rescaled in time.
    let separable = case.id == CaseId::DiffusionOscillatory;
    let src_shape: Vec<f64> = interior_pts.iter().map(|p| case.rhs(p.x, p.y, 0.0)).collect();
    let c = case.clone();
    let problem = DiffusionProblem {
        u0,
        source: Box::new(move |t, out: &mut [f64]| {
            if separable {
                let s = c.decay(t);
                for (o, v) in out.iter_mut().zip(&src_shape) {
                    *o = s * v;
                }
            } else {
                for (o, p) in out.iter_mut().zip(&interior_pts) {
                    *o = c.rhs(p.x, p.y, t);
                }
            }
        }),
        collar: Box::new(move |t, out: &mut [f64]| {
            let s = if separable { (-2.0 * PI * PI * DIFFUSION_KAPPA * t).exp() } else { 1.0 };
            for (o, v) in out.iter_mut().zip(&static_collar) {
                *o = s * v;
            }
        }),
        settings,
    };
    let series = solve_diffusion(&ctx, &problem)?;
    let l2 = case.exact(0.0, 0.0, 0.0).map(|_| {
        let ex = ctx.sample_interior(|x, y| case.exact(x, y, series.t).unwrap_or(f64::NAN));
        relative_l2(&series.u[..ni], &ex)
    });
    Ok(DiffusionRun {
        case: case.clone(),
        ctx,
        series,
        l2,
    })
}
