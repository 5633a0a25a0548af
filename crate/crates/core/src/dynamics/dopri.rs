//! Dormand–Prince 5(4) with PI step-size control.

use serde::Serialize;

use super::{IntegrationErrorKind, IntegratorConfig};
use crate::expr::EvalError;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
// Fifth-order weights (also the last row of A, FSAL).
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// Difference between fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest normalized error estimate among accepted steps (`≤ 1`).
    pub max_error: f64,
    pub min_step: f64,
    pub max_step: f64,
}

pub(crate) type Rhs<'a> = dyn FnMut(f64, &[f64], &mut [f64]) -> Result<(), EvalError> + 'a;
pub(crate) type Observer<'a> = dyn FnMut(f64, &[f64]) -> Result<(), IntegrationErrorKind> + 'a;

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn initial_step(
    rhs: &mut Rhs<'_>,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    cfg: &IntegratorConfig,
    stats: &mut IntegratorStats,
) -> f64 {
    let dim = y0.len();
    let scale: Vec<f64> = y0.iter().map(|y| cfg.abs_tol + cfg.rel_tol * y.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&scale).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(cfg.max_step).min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; dim];
    stats.evaluations += 1;
    if rhs(t0 + h0, &y1, &mut f1).is_err() {
        return h0.max(cfg.min_step);
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(cfg.max_step).min(span).max(cfg.min_step)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`, calling `observe` at
/// the initial point and after every accepted step.
pub(crate) fn solve(
    rhs: &mut Rhs<'_>,
    observe: &mut Observer<'_>,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> (IntegratorStats, Result<(), IntegrationErrorKind>) {
    let mut stats = IntegratorStats { min_step: f64::INFINITY, ..Default::default() };
    let result = run(rhs, observe, t0, y0, t_end, cfg, &mut stats);
    if stats.accepted == 0 {
        stats.min_step = 0.0;
    }
    (stats, result)
}

fn run(
    rhs: &mut Rhs<'_>,
    observe: &mut Observer<'_>,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    stats: &mut IntegratorStats,
) -> Result<(), IntegrationErrorKind> {
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    observe(t, &y)?;
    stats.evaluations += 1;
    rhs(t, &y, &mut k[0]).map_err(IntegrationErrorKind::Eval)?;

    let span = t_end - t0;
    let mut h = initial_step(rhs, t, &y, &k[0].clone(), span, cfg, stats);
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;
    // Relative slack so that the final step lands exactly on t_end.
    let end_slack = 1e-12 * t_end.abs().max(1.0);

    for _ in 0..MAX_STEPS {
        if t_end - t <= end_slack {
            return Ok(());
        }
        let mut last = false;
        if t + h >= t_end - end_slack {
            h = t_end - t;
            last = true;
        }
        if h < cfg.min_step && !last {
            return Err(IntegrationErrorKind::StepSizeUnderflow { t, h });
        }

        let stages: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        let mut failed = None;
        for (s, row) in stages.iter().enumerate() {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * k[j][i];
                }
                stage[i] = y[i] + h * acc;
            }
            stats.evaluations += 1;
            let (head, tail) = k.split_at_mut(s + 1);
            if let Err(e) = rhs(t + C[s + 1] * h, &stage, &mut tail[0]) {
                failed = Some(e);
                break;
            }
            let _ = head;
        }
        if failed.is_none() {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, b) in B.iter().enumerate() {
                    acc += b * k[j][i];
                }
                y_new[i] = y[i] + h * acc;
            }
            stats.evaluations += 1;
            let (_, tail) = k.split_at_mut(6);
            if let Err(e) = rhs(t + h, &y_new, &mut tail[0]) {
                failed = Some(e);
            }
        }
        if let Some(e) = failed {
            // A stage left the domain of the vector field: retry smaller.
            stats.rejected += 1;
            h *= 0.5;
            last_rejected = true;
            if h < cfg.min_step {
                return Err(IntegrationErrorKind::Eval(e));
            }
            continue;
        }

        for i in 0..dim {
            let mut acc = 0.0;
            for (j, e) in E.iter().enumerate() {
                acc += e * k[j][i];
            }
            err[i] = h * acc;
        }
        let norm = error_norm(&err, &y, &y_new, cfg);
        if !norm.is_finite() {
            stats.rejected += 1;
            h *= 0.5;
            last_rejected = true;
            continue;
        }

        let fac11 = norm.powf(0.2 - BETA * 0.75);
        if norm <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_next = h / fac;
            fac_old = norm.max(1e-4);

            stats.accepted += 1;
            stats.max_error = stats.max_error.max(norm);
            stats.min_step = stats.min_step.min(h);
            stats.max_step = stats.max_step.max(h);

            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            let (head, tail) = k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]);
            observe(t, &y)?;

            if last_rejected {
                h_next = h_next.min(h);
            }
            last_rejected = false;
            h = h_next.min(cfg.max_step);
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Err(IntegrationErrorKind::StepSizeUnderflow { t, h })
}
