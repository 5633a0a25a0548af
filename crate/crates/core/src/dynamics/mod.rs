//! Contact and extended contact Hamiltonian vector fields, and their flow.
//!
//! With `t` as the independent variable the extended field `X_h + ∂_t`
//! reduces to the first-order system
//!
//! ```text
//! q̇ = ∂h/∂p,   ṗ = -∂h/∂q - p ∂h/∂S,   Ṡ = p·∂h/∂p - h
//! ```
//!
//! The integrator also carries `∫ R(h) dt` (so dissipated quantities can be
//! checked as `F·exp(∫R(h))`) and any auxiliary parameters whose time
//! derivatives the system declares.

mod dopri;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dopri::IntegratorStats;

use crate::error::Error as CrateError;
use crate::expr::{EvalError, ScalarField, Var};
use crate::geometry::{ContactSystem, VectorFieldSpec};
use crate::point::{EvalContext, ExtendedPoint, Params};

/// The contact Hamiltonian field of `f` with a prescribed `t`-component:
/// `(∂f/∂p, -∂f/∂q - p ∂f/∂S, p·∂f/∂p - f, yt)`.
pub fn hamiltonian_vector_field(f: &ScalarField, yt: &ScalarField) -> VectorFieldSpec {
    let n = f.dim().max(yt.dim());
    let f_s = f.partial(Var::S);
    let mut yq = Vec::with_capacity(n);
    let mut yp = Vec::with_capacity(n);
    let mut ys = -f;
    for a in 0..n {
        let f_p = f.partial(Var::P(a));
        let p = ScalarField::var(Var::P(a), n);
        yp.push(-f.partial(Var::Q(a)) - &p * &f_s);
        ys = ys + &p * &f_p;
        yq.push(f_p);
    }
    VectorFieldSpec::new(yq, yp, ys, yt.clone())
}

/// `X_h` for a time-independent `h`.
pub fn contact_field(system: &ContactSystem) -> Result<VectorFieldSpec, CrateError> {
    if system.h().depends_on(Var::T) {
        return Err(CrateError::TimeDependentHamiltonian);
    }
    Ok(hamiltonian_vector_field(system.h(), &ScalarField::zero(system.n())))
}

/// `X_h^t = X_h + ∂_t`.
pub fn extended_field(system: &ContactSystem) -> VectorFieldSpec {
    hamiltonian_vector_field(system.h(), &ScalarField::constant(1.0, system.n()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Distance from the singular set below which the guard trips.
    pub guard_margin: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 1.0, min_step: 1e-14, guard_margin: 1e-3 }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(format!("tolerances must be positive (rel {}, abs {})", self.rel_tol, self.abs_tol));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return Err(format!("need 0 < min_step <= max_step (got {} and {})", self.min_step, self.max_step));
        }
        if !(self.guard_margin >= 0.0) {
            return Err("guard_margin must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationErrorKind {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("domain violation at t = {t}: {reason}")]
    DomainViolation { t: f64, reason: String },
    #[error("auxiliary `{name}` = {value:e} left its admissible range at t = {t}")]
    AuxiliaryBlowup { name: String, value: f64, t: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid integration request: {0}")]
    InvalidConfig(String),
}

/// A failed integration, carrying everything computed before the failure.
#[derive(Debug, Clone, Error)]
#[error("{kind} (after {} accepted samples)", partial.len())]
pub struct IntegrationFailure {
    pub kind: IntegrationErrorKind,
    pub partial: Box<Trajectory>,
}

/// A labelled scalar field evaluated at every accepted step.
#[derive(Debug, Clone)]
pub struct TrackedField {
    pub label: String,
    pub field: ScalarField,
}

impl TrackedField {
    pub fn new(label: &str, field: ScalarField) -> Self {
        Self { label: label.to_owned(), field }
    }
}

/// Auxiliary parameters integrated alongside the state. Each name must
/// have a rate in the system; values outside `bounds` abort the run.
#[derive(Debug, Clone, Default)]
pub struct AuxiliarySpec {
    pub initial: Vec<(String, f64)>,
    pub bounds: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub n: usize,
    pub samples: Vec<ExtendedPoint>,
    pub tracked_labels: Vec<String>,
    /// `tracked[i][j]`: field `j` at sample `i`.
    pub tracked: Vec<Vec<f64>>,
    pub aux_labels: Vec<String>,
    pub aux: Vec<Vec<f64>>,
    /// `∫_{t0}^{t_i} R(h) dt` at each sample.
    pub dissipation: Vec<f64>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&ExtendedPoint> {
        self.samples.last()
    }

    pub fn series(&self, label: &str) -> Option<Vec<f64>> {
        let j = self.tracked_labels.iter().position(|l| l == label)?;
        Some(self.tracked.iter().map(|row| row[j]).collect())
    }

    pub fn aux_series(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.aux_labels.iter().position(|l| l == name)?;
        Some(self.aux.iter().map(|row| row[j]).collect())
    }

    /// Evaluation context at sample `i`: system parameters plus the
    /// auxiliary values reached there.
    pub fn context(&self, system: &ContactSystem, i: usize) -> EvalContext {
        let mut ctx = system.context(self.samples[i].clone());
        for (name, value) in self.aux_labels.iter().zip(&self.aux[i]) {
            ctx.params.set(name, *value);
        }
        ctx
    }

    /// `max_i |F_i - F_0| / max(1, |F_0|)`.
    pub fn drift(&self, label: &str) -> Option<f64> {
        self.series(label).map(|v| relative_spread(&v))
    }

    /// Drift of `F·exp(∫R(h) dt)`, which is constant for a dissipated `F`.
    pub fn dissipated_drift(&self, label: &str) -> Option<f64> {
        let v = self.series(label)?;
        let scaled: Vec<f64> = v.iter().zip(&self.dissipation).map(|(f, d)| f * d.exp()).collect();
        Some(relative_spread(&scaled))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_owned()];
        header.extend((0..self.n).map(|a| format!("q{a}")));
        header.extend((0..self.n).map(|a| format!("p{a}")));
        header.push("S".into());
        header.extend(self.tracked_labels.iter().cloned());
        header.extend(self.aux_labels.iter().cloned());
        w.write_record(&header)?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut row: Vec<f64> = vec![s.t];
            row.extend(&s.q);
            row.extend(&s.p);
            row.push(s.s);
            row.extend(&self.tracked[i]);
            row.extend(&self.aux[i]);
            w.write_record(row.iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// `max_i |v_i - v_0| / max(1, |v_0|)`.
pub fn relative_spread(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else { return 0.0 };
    let spread = values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max);
    spread / first.abs().max(1.0)
}

/// Integrates `field` (which must have constant `Y^t` equal to 1, or 0 for
/// time-independent fields) from `start` to `t_end`.
pub fn integrate(
    system: &ContactSystem,
    field: &VectorFieldSpec,
    start: &ExtendedPoint,
    t_end: f64,
    cfg: &IntegratorConfig,
    tracked: &[TrackedField],
) -> Result<Trajectory, IntegrationFailure> {
    integrate_coupled(system, field, start, &AuxiliarySpec::default(), t_end, cfg, tracked)
}

/// [`integrate`] with auxiliary parameters co-integrated from the system's rates.
pub fn integrate_coupled(
    system: &ContactSystem,
    field: &VectorFieldSpec,
    start: &ExtendedPoint,
    aux: &AuxiliarySpec,
    t_end: f64,
    cfg: &IntegratorConfig,
    tracked: &[TrackedField],
) -> Result<Trajectory, IntegrationFailure> {
    let n = system.n();
    let mut traj = Trajectory {
        n,
        tracked_labels: tracked.iter().map(|f| f.label.clone()).collect(),
        aux_labels: aux.initial.iter().map(|(k, _)| k.clone()).collect(),
        ..Default::default()
    };
    let fail = |kind, traj: Trajectory| IntegrationFailure { kind, partial: Box::new(traj) };

    if let Err(msg) = check_request(system, field, start, aux, t_end, cfg) {
        return Err(fail(IntegrationErrorKind::InvalidConfig(msg), traj));
    }
    if let Err(reason) = system.admissible(start, cfg.guard_margin) {
        return Err(fail(IntegrationErrorKind::DomainViolation { t: start.t, reason }, traj));
    }

    let rates: Vec<ScalarField> =
        aux.initial.iter().map(|(name, _)| system.rates().get(name).cloned().expect("checked above")).collect();
    let components: Vec<ScalarField> = field.components()[..2 * n + 1].iter().map(|c| (*c).clone()).collect();
    let reeb = system.reeb_h().clone();
    let base = system.params().clone();
    let n_aux = aux.initial.len();

    let unpack = |t: f64, y: &[f64]| -> EvalContext {
        let point = ExtendedPoint::new(y[..n].to_vec(), y[n..2 * n].to_vec(), y[2 * n], t);
        let mut params: Params = base.clone();
        for (k, (name, _)) in aux.initial.iter().enumerate() {
            params.set(name, y[2 * n + 2 + k]);
        }
        EvalContext::new(point, params)
    };

    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
        let ctx = unpack(t, y);
        for (i, c) in components.iter().enumerate() {
            dy[i] = c.evaluate(&ctx)?;
        }
        dy[2 * n + 1] = reeb.evaluate(&ctx)?;
        for (k, r) in rates.iter().enumerate() {
            dy[2 * n + 2 + k] = r.evaluate(&ctx)?;
        }
        Ok(())
    };

    let mut y0 = Vec::with_capacity(2 * n + 2 + n_aux);
    y0.extend(&start.q);
    y0.extend(&start.p);
    y0.push(start.s);
    y0.push(0.0);
    y0.extend(aux.initial.iter().map(|(_, v)| *v));

    let traj_ref = &mut traj;
    let mut observe = |t: f64, y: &[f64]| -> Result<(), IntegrationErrorKind> {
        let ctx = unpack(t, y);
        system
            .admissible(&ctx.point, cfg.guard_margin)
            .map_err(|reason| IntegrationErrorKind::DomainViolation { t, reason })?;
        for (k, (name, lo, hi)) in aux.bounds.iter().enumerate() {
            let _ = k;
            if let Some(j) = aux.initial.iter().position(|(a, _)| a == name) {
                let value = y[2 * n + 2 + j];
                if !(value > *lo && value < *hi) {
                    return Err(IntegrationErrorKind::AuxiliaryBlowup { name: name.clone(), value, t });
                }
            }
        }
        let values: Vec<f64> = tracked.iter().map(|f| f.field.evaluate(&ctx)).collect::<Result<_, _>>()?;
        traj_ref.samples.push(ctx.point);
        traj_ref.tracked.push(values);
        traj_ref.aux.push(y[2 * n + 2..].to_vec());
        traj_ref.dissipation.push(y[2 * n + 1]);
        Ok(())
    };

    let (stats, result) = dopri::solve(&mut rhs, &mut observe, start.t, &y0, t_end, cfg);
    traj.stats = stats;
    match result {
        Ok(()) => Ok(traj),
        Err(kind) => Err(fail(kind, traj)),
    }
}

fn check_request(
    system: &ContactSystem,
    field: &VectorFieldSpec,
    start: &ExtendedPoint,
    aux: &AuxiliarySpec,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<(), String> {
    cfg.validate()?;
    if field.dim() != system.n() || start.dim() != system.n() {
        return Err(format!(
            "dimension mismatch: system {}, field {}, start point {}",
            system.n(),
            field.dim(),
            start.dim()
        ));
    }
    if !(t_end > start.t) {
        return Err(format!("t_end = {t_end} must exceed the start time {}", start.t));
    }
    match field.yt.as_constant() {
        Some(1.0) => {}
        Some(0.0) => {
            if field.components().iter().any(|c| c.depends_on(Var::T)) || !aux.initial.is_empty() {
                return Err("a field with zero t-component must not depend on time".into());
            }
        }
        _ => return Err(format!("the t-component of the field must be the constant 1 (got {})", field.yt)),
    }
    for (name, _) in &aux.initial {
        if system.rates().get(name).is_none() {
            return Err(format!("auxiliary `{name}` has no declared rate in system `{}`", system.name()));
        }
    }
    Ok(())
}

/// `max_i |S(t_i) - S(t_0) - ∫_{t_0}^{t_i} (p·∂h/∂p - h) dt|`, the integral
/// taken by composite Simpson on the (nonuniform) sample grid.
pub fn action_consistency(system: &ContactSystem, traj: &Trajectory) -> Result<f64, EvalError> {
    let n = system.n();
    let integrand: ScalarField = (0..n)
        .map(|a| ScalarField::var(Var::P(a), n) * system.dh_dp(a))
        .sum::<ScalarField>()
        - system.h();
    let values: Vec<f64> = (0..traj.len()).map(|i| integrand.evaluate(&traj.context(system, i))).collect::<Result<_, _>>()?;
    let times = traj.times();
    let integral = cumulative_simpson(&times, &values);
    let s0 = traj.samples.first().map_or(0.0, |s| s.s);
    Ok(traj
        .samples
        .iter()
        .zip(&integral)
        .map(|(s, i)| (s.s - s0 - i).abs())
        .fold(0.0, f64::max))
}

/// Running integral of samples `f` on grid `x`. Even indices use Simpson's
/// rule on consecutive interval pairs; odd indices add the last interval of
/// the quadratic through the three most recent points.
pub fn cumulative_simpson(x: &[f64], f: &[f64]) -> Vec<f64> {
    let len = x.len();
    let mut out = vec![0.0; len];
    for i in 1..len {
        out[i] = if i == 1 {
            0.5 * (x[1] - x[0]) * (f[0] + f[1])
        } else if i % 2 == 0 {
            out[i - 2] + simpson_pair(&x[i - 2..=i], &f[i - 2..=i])
        } else {
            out[i - 1] + quadratic_tail(&x[i - 2..=i], &f[i - 2..=i])
        };
    }
    out
}

fn simpson_pair(x: &[f64], f: &[f64]) -> f64 {
    let h0 = x[1] - x[0];
    let h1 = x[2] - x[1];
    (h0 + h1) / 6.0 * ((2.0 - h1 / h0) * f[0] + (h0 + h1).powi(2) / (h0 * h1) * f[1] + (2.0 - h0 / h1) * f[2])
}

// ∫_{x1}^{x2} of the interpolating quadratic, written around x1.
fn quadratic_tail(x: &[f64], f: &[f64]) -> f64 {
    let h0 = x[1] - x[0];
    let h1 = x[2] - x[1];
    let c = ((f[2] - f[1]) / h1 + (f[0] - f[1]) / h0) / (h0 + h1);
    let b = (f[2] - f[1]) / h1 - c * h1;
    f[1] * h1 + b * h1 * h1 / 2.0 + c * h1.powi(3) / 3.0
}
