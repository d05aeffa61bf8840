//! Restarted GMRES for the stacked Poisson system and explicit RK4/AB4 time
//! stepping for nonlocal diffusion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlops::{OperatorContext, OperatorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid solver settings: {0}")]
    Config(String),
    #[error("GMRES stopped after {iterations} iterations at relative residual {residual:e} (target {tol:e}; stagnated: {stagnated})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
        stagnated: bool,
        best: BestIterate,
        history: Vec<f64>,
    },
    #[error("non-finite values in GMRES input or iteration")]
    NonFinite,
    #[error("Adams-Bashforth history holds {0} of 4 evaluations")]
    HistoryUnderfull(usize),
    #[error("time step {tau:e} exceeds the explicit stability bound {bound:e} (|m|_max = {m_max:e})")]
    Unstable { tau: f64, bound: f64, m_max: f64 },
    #[error("solution norm grew by {growth:e} at step {step} (t = {t:e}); aborting")]
    Blowup { step: usize, t: f64, growth: f64 },
}

/// Best iterate carried by a non-convergence error.
#[derive(Clone, PartialEq)]
pub struct BestIterate(pub Vec<f64>);

impl std::fmt::Debug for BestIterate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BestIterate(len = {})", self.0.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Right diagonal scaling by the mean multiplier on interior rows.
    pub precondition: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-12,
            restart: 60,
            max_iter: 2000,
            precondition: false,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(SolverError::Config(format!("tolerance {} outside (0, 1)", self.tol)));
        }
        if self.restart == 0 || self.max_iter == 0 {
            return Err(SolverError::Config("restart and max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresReport {
    pub iterations: usize,
    pub restarts: usize,
    /// Final relative residual `‖b − A x‖ / ‖b‖`, recomputed explicitly.
    pub residual: f64,
    /// Relative residual estimate after each inner iteration.
    pub history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.
///
/// `precond` is an optional right diagonal scaling: the iteration solves
/// `A D y = b` and returns `x = D y`.
pub fn gmres<E>(
    mut apply: impl FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    rhs: &[f64],
    x0: Option<&[f64]>,
    precond: Option<&[f64]>,
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, GmresReport), SolverError>
where
    SolverError: From<E>,
{
    cfg.validate()?;
    let n = rhs.len();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite);
    }
    let bnorm = norm(rhs);
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            GmresReport {
                iterations: 0,
                restarts: 0,
                residual: 0.0,
                history,
            },
        ));
    }
    let m = cfg.restart.min(n.max(1));
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hmat = vec![0.0; (m + 1) * m];
    let (mut cs, mut sn, mut g) = (vec![0.0; m], vec![0.0; m], vec![0.0; m + 1]);
    let mut iterations = 0;
    let mut restarts = 0;
    let mut last_cycle = f64::INFINITY;

    let residual = |apply: &mut dyn FnMut(&[f64], &mut [f64]) -> Result<(), E>, x: &[f64], r: &mut [f64]| {
        apply(x, r)?;
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        Ok::<f64, E>(norm(r))
    };

    loop {
        let beta = residual(&mut apply, &x, &mut r)?;
        if !beta.is_finite() {
            return Err(SolverError::NonFinite);
        }
        if beta / bnorm <= cfg.tol {
            return Ok((
                x,
                GmresReport {
                    iterations,
                    restarts,
                    residual: beta / bnorm,
                    history,
                },
            ));
        }
        // A full cycle that gains less than 1% means GMRES sits at its
        // round-off floor.
        let stagnated = restarts > 0 && beta > 0.99 * last_cycle;
        if iterations >= cfg.max_iter || stagnated {
            return Err(SolverError::NotConverged {
                iterations,
                residual: beta / bnorm,
                tol: cfg.tol,
                stagnated,
                best: BestIterate(x),
                history,
            });
        }
        last_cycle = beta;
        v.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            match precond {
                Some(dg) => {
                    for ((zi, vi), di) in z.iter_mut().zip(&v[k]).zip(dg) {
                        *zi = vi * di;
                    }
                    apply(&z, &mut w)?;
                }
                None => apply(&v[k], &mut w)?,
            }
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                hmat[i * m + k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            hmat[(k + 1) * m + k] = hn;
            for i in 0..k {
                let (a, b) = (hmat[i * m + k], hmat[(i + 1) * m + k]);
                hmat[i * m + k] = cs[i] * a + sn[i] * b;
                hmat[(i + 1) * m + k] = -sn[i] * a + cs[i] * b;
            }
            let (a, b) = (hmat[k * m + k], hmat[(k + 1) * m + k]);
            let den = a.hypot(b);
            if den == 0.0 || !den.is_finite() {
                return Err(SolverError::NonFinite);
            }
            cs[k] = a / den;
            sn[k] = b / den;
            hmat[k * m + k] = den;
            hmat[(k + 1) * m + k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            let est = g[k + 1].abs() / bnorm;
            history.push(est);
            // Lucky breakdown: the Krylov space is invariant.
            let breakdown = hn <= 1e-14 * den.max(beta);
            if est <= cfg.tol || breakdown || iterations >= cfg.max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // Back substitution for the k_used x k_used triangular system.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hmat[i * m + j] * y[j];
            }
            y[i] = s / hmat[i * m + i];
        }
        for (j, yj) in y.iter().enumerate() {
            match precond {
                Some(dg) => {
                    for ((xi, vi), di) in x.iter_mut().zip(&v[j]).zip(dg) {
                        *xi += yj * vi * di;
                    }
                }
                None => {
                    for (xi, vi) in x.iter_mut().zip(&v[j]) {
                        *xi += yj * vi;
                    }
                }
            }
        }
        restarts += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    /// Field vector (interior then collar).
    pub u: Vec<f64>,
    pub report: GmresReport,
}

/// Solve `L u = f` on `Ω` with `u = b` on `Ω_I`.
pub fn solve_poisson(
    ctx: &OperatorContext,
    f: &[f64],
    b: &[f64],
    cfg: &GmresConfig,
) -> Result<PoissonSolution, SolverError> {
    let rhs = ctx.assemble_rhs(f, b)?;
    let ni = ctx.layout().n_interior();
    let mut x0 = vec![0.0; rhs.len()];
    x0[ni..].copy_from_slice(b);
    let diag;
    let precond = if cfg.precondition {
        let m = ctx.diagonal_estimate();
        let s = if m != 0.0 { 1.0 / m } else { 1.0 };
        diag = (0..rhs.len()).map(|k| if k < ni { s } else { 1.0 }).collect::<Vec<_>>();
        Some(diag.as_slice())
    } else {
        None
    };
    let (u, report) = gmres(|v, out| ctx.forward_into(v, out), &rhs, Some(&x0), precond, cfg)?;
    Ok(PoissonSolution { u, report })
}

/// One classical RK4 step of `u' = f(t, u)`.
pub fn rk4_step(
    f: &mut impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolverError>,
    t: f64,
    u: &[f64],
    tau: f64,
) -> Result<Vec<f64>, SolverError> {
    let n = u.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    f(t, u, &mut k1)?;
    for i in 0..n {
        tmp[i] = u[i] + 0.5 * tau * k1[i];
    }
    f(t + 0.5 * tau, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = u[i] + 0.5 * tau * k2[i];
    }
    f(t + 0.5 * tau, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = u[i] + tau * k3[i];
    }
    f(t + tau, &tmp, &mut k4)?;
    Ok((0..n)
        .map(|i| u[i] + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

pub const AB4_WEIGHTS: [f64; 4] = [55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0];

/// Interval `(−C, 0]` of the real axis where AB4 is stable, for `τ·|m|`.
pub const AB4_STABILITY: f64 = 0.3;

/// Most recent right-hand-side evaluations, newest first once full.
#[derive(Clone, Debug, Default)]
pub struct Ab4History {
    evals: std::collections::VecDeque<Vec<f64>>,
}

impl Ab4History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, eval: Vec<f64>) {
        self.evals.push_front(eval);
        self.evals.truncate(4);
    }

    pub fn len(&self) -> usize {
        self.evals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evals.is_empty()
    }
}

/// `u_{k+4} = u_{k+3} + τ (55 f_{k+3} − 59 f_{k+2} + 37 f_{k+1} − 9 f_k)/24`.
pub fn ab4_step(u: &[f64], history: &Ab4History, tau: f64) -> Result<Vec<f64>, SolverError> {
    if history.len() < 4 {
        return Err(SolverError::HistoryUnderfull(history.len()));
    }
    let h = &history.evals;
    Ok((0..u.len())
        .map(|i| {
            u[i] + tau
                * (AB4_WEIGHTS[0] * h[0][i] + AB4_WEIGHTS[1] * h[1][i] + AB4_WEIGHTS[2] * h[2][i] + AB4_WEIGHTS[3] * h[3][i])
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSettings {
    pub tau: f64,
    pub t_final: f64,
    /// Requested snapshot times; each is taken at the nearest step.
    pub snapshots: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub steps: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<String>,
}

/// Integrate `u' = f(t, u)` to `t_final` with three RK4 steps and then AB4.
pub fn integrate(
    mut f: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolverError>,
    u0: &[f64],
    settings: &StepSettings,
) -> Result<TimeSeries, SolverError> {
    let StepSettings { tau, t_final, .. } = *settings;
    if !(tau > 0.0 && tau.is_finite()) || !(t_final >= 0.0) {
        return Err(SolverError::Config(format!("τ = {tau}, T = {t_final}")));
    }
    let steps = (t_final / tau).round() as usize;
    let mut wanted: Vec<(usize, usize)> = settings
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, &ts)| (((ts / tau).round() as usize).min(steps), i))
        .collect();
    wanted.sort();
    let mut snaps: Vec<Option<Snapshot>> = vec![None; settings.snapshots.len()];
    let mut take = |k: usize, u: &[f64], wanted: &mut Vec<(usize, usize)>| {
        while let Some(&(ks, i)) = wanted.first() {
            if ks != k {
                break;
            }
            snaps[i] = Some(Snapshot {
                step: k,
                t: k as f64 * tau,
                u: u.to_vec(),
            });
            wanted.remove(0);
        }
    };
    let n0 = norm(u0).max(f64::MIN_POSITIVE);
    let mut u = u0.to_vec();
    let mut hist = Ab4History::new();
    let mut buf = vec![0.0; u.len()];
    take(0, &u, &mut wanted);
    for k in 0..steps {
        let t = k as f64 * tau;
        f(t, &u, &mut buf)?;
        hist.push(buf.clone());
        u = if k < 3 {
            rk4_step(&mut f, t, &u, tau)?
        } else {
            ab4_step(&u, &hist, tau)?
        };
        let growth = norm(&u) / n0;
        if !growth.is_finite() || growth > 1e10 {
            return Err(SolverError::Blowup {
                step: k + 1,
                t: t + tau,
                growth,
            });
        }
        take(k + 1, &u, &mut wanted);
    }
    Ok(TimeSeries {
        steps,
        t: steps as f64 * tau,
        u,
        snapshots: snaps.into_iter().flatten().collect(),
        warnings: Vec::new(),
    })
}

/// Nonlocal diffusion data on a fixed operator context.
pub struct DiffusionProblem<'a> {
    /// Initial values at every unknown (interior then collar).
    pub u0: Vec<f64>,
    /// Source on interior nodes at time `t`.
    pub source: Box<dyn Fn(f64, &mut [f64]) + 'a>,
    /// Collar values at time `t`; constant for a static volume constraint.
    pub collar: Box<dyn Fn(f64, &mut [f64]) + 'a>,
    pub settings: StepSettings,
}

/// Check `τ |m|_max` against the AB4 bound; returns a warning above half of it.
pub fn check_stability(ctx: &OperatorContext, tau: f64) -> Result<Option<String>, SolverError> {
    let m_max = ctx.multipliers().max_abs();
    let bound = AB4_STABILITY / m_max.max(f64::MIN_POSITIVE);
    if tau > bound {
        return Err(SolverError::Unstable { tau, bound, m_max });
    }
    Ok((tau > 0.5 * bound).then(|| format!("τ = {tau:e} is above half the stability bound {bound:e}")))
}

/// March `u_t = L u + s` with the collar held at the prescribed values.
pub fn solve_diffusion(ctx: &OperatorContext, problem: &DiffusionProblem) -> Result<TimeSeries, SolverError> {
    let warning = check_stability(ctx, problem.settings.tau)?;
    let layout = ctx.layout();
    let (ni, nc) = (layout.n_interior(), layout.n_collar());
    if problem.u0.len() != ni + nc {
        return Err(OperatorError::Length {
            expected: ni + nc,
            got: problem.u0.len(),
        }
        .into());
    }
    let mut full = problem.u0.clone();
    let mut src = vec![0.0; ni];
    let rhs = |t: f64, u: &[f64], out: &mut [f64]| -> Result<(), SolverError> {
        full[..ni].copy_from_slice(u);
        (problem.collar)(t, &mut full[ni..]);
        ctx.apply_into(&full, out)?;
        (problem.source)(t, &mut src);
        for (o, s) in out.iter_mut().zip(&src) {
            *o += s;
        }
        Ok(())
    };
    let mut series = integrate(rhs, &problem.u0[..ni], &problem.settings)?;
    let attach = |u: &mut Vec<f64>, t: f64| {
        let mut c = vec![0.0; nc];
        (problem.collar)(t, &mut c);
        u.extend(c);
    };
    let t_end = series.t;
    attach(&mut series.u, t_end);
    for s in &mut series.snapshots {
        attach(&mut s.u, s.t);
    }
    series.warnings.extend(warning);
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &[f64], n: usize) -> impl FnMut(&[f64], &mut [f64]) -> Result<(), SolverError> + '_ {
        move |x, y| {
            for i in 0..n {
                y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            }
            Ok(())
        }
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.0];
        let (x, rep) = gmres(
            |v: &[f64], o: &mut [f64]| {
                o.copy_from_slice(v);
                Ok::<_, SolverError>(())
            },
            &b,
            None,
            None,
            &GmresConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        for (a, c) in x.iter().zip(&b) {
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_system() {
        let n = 10;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = (i + 1) as f64;
        }
        let (x, _) = gmres(dense(&a, n), &vec![1.0; n], None, None, &GmresConfig::default()).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_matches_taylor_polynomial() {
        let lam = -3.0;
        let tau = 0.1;
        let mut f = |_: f64, u: &[f64], o: &mut [f64]| {
            o[0] = lam * u[0];
            Ok(())
        };
        let u = rk4_step(&mut f, 0.0, &[1.0], tau).unwrap();
        let z: f64 = lam * tau;
        let taylor = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        assert!((u[0] - taylor).abs() < 1e-15);
    }

    #[test]
    fn ab4_uses_published_weights() {
        let mut h = Ab4History::new();
        for v in [1.0, 0.0, 0.0, 0.0] {
            h.push(vec![v]);
        }
        // Newest first: 0, 0, 0, 1 -> only the oldest weight contributes.
        assert_eq!(ab4_step(&[0.0], &h, 1.0).unwrap()[0], -9.0 / 24.0);
        let mut h = Ab4History::new();
        for _ in 0..3 {
            h.push(vec![0.0]);
        }
        assert!(matches!(ab4_step(&[0.0], &h, 1.0), Err(SolverError::HistoryUnderfull(3))));
        h.push(vec![0.0]);
        assert_eq!(ab4_step(&[0.0], &h, 0.1).unwrap(), vec![0.0]);
    }
}
