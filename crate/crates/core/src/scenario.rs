//! JSON scenarios: a system, a start point, invariants, symmetries and the
//! checks to run on them.
//!
//! ```json
//! {
//!   "name": "kepler-scaling",
//!   "system": { "builtin": "kepler", "params": { "m": 1, "eps": 0.25 } },
//!   "initial": { "q": [1, 0, 0], "p": [0, 1.2, 0], "S": 0, "t": 0 },
//!   "t_end": 10,
//!   "integrator": { "rel_tol": 1e-10, "abs_tol": 1e-12 },
//!   "invariants": ["Q_K", { "label": "L3", "expr": "q0*p1 - q1*p0" }],
//!   "symmetries": [{ "label": "Y_KS", "scaling": { "alpha": 2, "beta": -1, "gamma": 1, "sigma": 3 } }],
//!   "checks": [
//!     { "kind": "drift", "invariant": "Q_K", "threshold": 1e-7 },
//!     { "kind": "similarity", "symmetry": "Y_KS", "threshold": 1e-9, "lambda": -3 }
//!   ],
//!   "seed": 42,
//!   "sample_count": 100
//! }
//! ```
//!
//! Inline systems use `{ "h": "...", "dim": n, "params": {...} }`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, relative_spread, IntegratorConfig, TrackedField, Trajectory};
use crate::error::Error;
use crate::expr::ScalarField;
use crate::geometry::{ContactSystem, DomainGuard, VectorFieldSpec};
use crate::noether::{self, SimilarityVerdict, SymmetryVerdict};
use crate::point::{EvalContext, ExtendedPoint, Params};
use crate::sampling::sample_points;
use crate::scaling::{scaling_generator, ScalingAnsatz};
use crate::systems::{self, AuxiliaryState, Behavior, TrackedInvariant};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSpec,
    pub initial: Option<ExtendedPoint>,
    #[serde(default)]
    pub aux: Option<AuxiliaryState>,
    pub t_end: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub invariants: Vec<InvariantSpec>,
    #[serde(default)]
    pub symmetries: Vec<SymmetrySpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    /// Minimum `|q|` for sampled points of central-force systems.
    #[serde(default = "default_sample_margin")]
    pub sample_margin: f64,
}

fn default_seed() -> u64 {
    42
}

fn default_sample_count() -> usize {
    100
}

fn default_sample_margin() -> f64 {
    systems::KEPLER_SAMPLE_MARGIN
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SystemSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: Params,
        /// `f(t)` for `harmonic-dissipative`.
        #[serde(default)]
        f: Option<String>,
    },
    Inline {
        h: String,
        dim: usize,
        #[serde(default)]
        params: Params,
        #[serde(default)]
        exclude_origin: bool,
        #[serde(default)]
        positive_time: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InvariantSpec {
    Builtin(String),
    Inline {
        label: String,
        expr: String,
        #[serde(default = "conserved")]
        behavior: Behavior,
    },
}

fn conserved() -> Behavior {
    Behavior::Conserved
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    pub label: String,
    #[serde(default)]
    pub scaling: Option<AnsatzSpec>,
    #[serde(default)]
    pub components: Option<ComponentSpec>,
    /// Label of an invariant to build the symmetry from.
    #[serde(default)]
    pub from_invariant: Option<String>,
    /// `Y^t` for `from_invariant` (default `0`).
    #[serde(default)]
    pub yt: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub q: Vec<String>,
    pub p: Vec<String>,
    #[serde(rename = "S")]
    pub s: String,
    #[serde(default = "zero_expr")]
    pub t: String,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Conserved: `F` constant; dissipated: `F·exp(∫R(h))` constant.
    Drift { invariant: String, threshold: f64 },
    /// `|X_h^t(F) + R(h)F| / max(1, |F|)` at seeded samples.
    Residual { invariant: String, threshold: f64 },
    Symmetry {
        symmetry: String,
        threshold: f64,
        #[serde(default)]
        expect: Option<SymmetryVerdict>,
    },
    Similarity {
        symmetry: String,
        threshold: f64,
        #[serde(default)]
        expect: Option<SimilarityVerdict>,
        /// Expected constant `Λ`, checked to `threshold`.
        #[serde(default)]
        lambda: Option<f64>,
    },
    /// `F/G` constant along the trajectory.
    Ratio { numerator: String, denominator: String, threshold: f64 },
    Closure { first: String, second: String, threshold: f64 },
}

impl CheckSpec {
    pub fn label(&self) -> String {
        match self {
            CheckSpec::Drift { invariant, .. } => format!("drift:{invariant}"),
            CheckSpec::Residual { invariant, .. } => format!("residual:{invariant}"),
            CheckSpec::Symmetry { symmetry, .. } => format!("symmetry:{symmetry}"),
            CheckSpec::Similarity { symmetry, .. } => format!("similarity:{symmetry}"),
            CheckSpec::Ratio { numerator, denominator, .. } => format!("ratio:{numerator}/{denominator}"),
            CheckSpec::Closure { first, second, .. } => format!("closure:[{first},{second}]"),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CheckSpec::Drift { .. } => "drift",
            CheckSpec::Residual { .. } => "residual",
            CheckSpec::Symmetry { .. } => "symmetry",
            CheckSpec::Similarity { .. } => "similarity",
            CheckSpec::Ratio { .. } => "ratio",
            CheckSpec::Closure { .. } => "closure",
        }
    }

    fn needs_trajectory(&self) -> bool {
        matches!(self, CheckSpec::Drift { .. } | CheckSpec::Ratio { .. })
    }

    fn threshold_mut(&mut self) -> &mut f64 {
        match self {
            CheckSpec::Drift { threshold, .. }
            | CheckSpec::Residual { threshold, .. }
            | CheckSpec::Symmetry { threshold, .. }
            | CheckSpec::Similarity { threshold, .. }
            | CheckSpec::Ratio { threshold, .. }
            | CheckSpec::Closure { threshold, .. } => threshold,
        }
    }
}

/// A symmetry resolved against its system.
#[derive(Debug, Clone)]
pub struct BuiltSymmetry {
    pub label: String,
    pub field: VectorFieldSpec,
    /// `λ` as a field when known in closed form.
    pub lambda: Option<ScalarField>,
}

/// A scenario with its system, invariants and symmetries built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub system: ContactSystem,
    pub invariants: Vec<TrackedInvariant>,
    pub symmetries: Vec<BuiltSymmetry>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_owned(), message: message.into() }
}

impl Scenario {
    /// Parses a scenario; syntax and schema errors carry line and column.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| {
            config_err(origin, format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&origin, format!("cannot read: {e}")))?;
        Self::from_json(&text, &origin)
    }

    /// Resolves builtins, parses every expression and checks references.
    pub fn prepare(&self, origin: &str) -> Result<Prepared, Error> {
        let err = |what: String, e: &dyn std::fmt::Display| config_err(origin, format!("{what}: {e}"));
        let system = match &self.system {
            SystemSpec::Builtin { builtin, params, f } => {
                systems::builtin(builtin, params, f.as_deref()).map_err(|e| err("system".into(), &e))?
            }
            SystemSpec::Inline { h, dim, params, exclude_origin, positive_time } => {
                let h = ScalarField::parse(h, *dim).map_err(|e| err("system.h".into(), &e))?;
                ContactSystem::new("inline", h, params.clone())
                    .map_err(|e| err("system.params".into(), &e))?
                    .with_guard(DomainGuard { exclude_origin: *exclude_origin, positive_time: *positive_time })
            }
        };
        let n = system.n();

        let mut invariants: Vec<TrackedInvariant> = Vec::new();
        for (i, spec) in self.invariants.iter().enumerate() {
            let inv = match spec {
                InvariantSpec::Builtin(label) => system.invariant(label).cloned().ok_or_else(|| {
                    let known: Vec<&str> = system.invariants().iter().map(|i| i.label.as_str()).collect();
                    config_err(
                        origin,
                        format!("invariants[{i}]: `{label}` is not an invariant of `{}` (known: {})", system.name(), known.join(", ")),
                    )
                })?,
                InvariantSpec::Inline { label, expr, behavior } => {
                    let field = ScalarField::parse(expr, n).map_err(|e| err(format!("invariants[{i}].expr"), &e))?;
                    TrackedInvariant::new(label, field, *behavior)
                }
            };
            if invariants.iter().any(|j| j.label == inv.label) {
                return Err(config_err(origin, format!("invariants[{i}]: duplicate label `{}`", inv.label)));
            }
            invariants.push(inv);
        }

        let mut symmetries: Vec<BuiltSymmetry> = Vec::new();
        for (i, spec) in self.symmetries.iter().enumerate() {
            let at = format!("symmetries[{i}]");
            let given = [spec.scaling.is_some(), spec.components.is_some(), spec.from_invariant.is_some()];
            if given.iter().filter(|b| **b).count() != 1 {
                return Err(config_err(origin, format!("{at}: give exactly one of `scaling`, `components`, `from_invariant`")));
            }
            if spec.yt.is_some() && spec.from_invariant.is_none() {
                return Err(config_err(origin, format!("{at}: `yt` only applies to `from_invariant`")));
            }
            let built = if let Some(a) = spec.scaling {
                let ansatz = ScalingAnsatz::new(a.alpha, a.beta, a.gamma, a.sigma);
                BuiltSymmetry {
                    label: spec.label.clone(),
                    field: scaling_generator(&ansatz, n),
                    lambda: Some(ScalarField::constant(a.gamma, n)),
                }
            } else if let Some(c) = &spec.components {
                if c.q.len() != n || c.p.len() != n {
                    return Err(config_err(origin, format!("{at}.components: need {n} q and {n} p entries")));
                }
                let parse = |what: String, s: &str| ScalarField::parse(s, n).map_err(|e| err(what, &e));
                let mut comps = Vec::with_capacity(2 * n + 2);
                for (j, s) in c.q.iter().enumerate() {
                    comps.push(parse(format!("{at}.components.q[{j}]"), s)?);
                }
                for (j, s) in c.p.iter().enumerate() {
                    comps.push(parse(format!("{at}.components.p[{j}]"), s)?);
                }
                comps.push(parse(format!("{at}.components.S"), &c.s)?);
                comps.push(parse(format!("{at}.components.t"), &c.t)?);
                BuiltSymmetry { label: spec.label.clone(), field: VectorFieldSpec::from_components(n, comps), lambda: None }
            } else {
                let label = spec.from_invariant.as_deref().unwrap_or_default();
                let f = invariants
                    .iter()
                    .find(|inv| inv.label == label)
                    .map(|inv| inv.field.clone())
                    .or_else(|| system.invariant(label).map(|inv| inv.field.clone()))
                    .ok_or_else(|| config_err(origin, format!("{at}.from_invariant: unknown invariant `{label}`")))?;
                let yt = ScalarField::parse(spec.yt.as_deref().unwrap_or("0"), n).map_err(|e| err(format!("{at}.yt"), &e))?;
                BuiltSymmetry {
                    label: spec.label.clone(),
                    field: noether::symmetry_from_invariant(&system, &f, &yt),
                    lambda: Some(noether::lambda_field(&system, &f, &yt)),
                }
            };
            if symmetries.iter().any(|s| s.label == built.label) {
                return Err(config_err(origin, format!("{at}: duplicate label `{}`", built.label)));
            }
            symmetries.push(built);
        }

        for (i, check) in self.checks.iter().enumerate() {
            let at = format!("checks[{i}]");
            let inv = |l: &str| {
                invariants
                    .iter()
                    .any(|x| x.label == l)
                    .then_some(())
                    .ok_or_else(|| config_err(origin, format!("{at}: invariant `{l}` is not listed under `invariants`")))
            };
            let sym = |l: &str| {
                symmetries
                    .iter()
                    .any(|x| x.label == l)
                    .then_some(())
                    .ok_or_else(|| config_err(origin, format!("{at}: unknown symmetry `{l}`")))
            };
            match check {
                CheckSpec::Drift { invariant, .. } | CheckSpec::Residual { invariant, .. } => inv(invariant)?,
                CheckSpec::Ratio { numerator, denominator, .. } => {
                    inv(numerator)?;
                    inv(denominator)?;
                }
                CheckSpec::Symmetry { symmetry, .. } | CheckSpec::Similarity { symmetry, .. } => sym(symmetry)?,
                CheckSpec::Closure { first, second, .. } => {
                    sym(first)?;
                    sym(second)?;
                }
            }
            if check.needs_trajectory() && (self.initial.is_none() || self.t_end.is_none()) {
                return Err(config_err(origin, format!("{at}: `{}` checks need `initial` and `t_end`", check.kind())));
            }
        }
        if let Some(start) = &self.initial {
            if start.dim() != n {
                return Err(config_err(origin, format!("initial: expected {n} coordinates, got {}", start.dim())));
            }
        }
        if self.sample_count == 0 && self.checks.iter().any(|c| !c.needs_trajectory()) {
            return Err(config_err(origin, "sample_count must be positive"));
        }
        self.integrator.validate().map_err(|m| config_err(origin, format!("integrator: {m}")))?;

        Ok(Prepared { scenario: self.clone(), system, invariants, symmetries })
    }
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Replaces the integrator's relative and absolute tolerance.
    pub tol_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub label: String,
    pub kind: String,
    pub passed: bool,
    /// The headline number compared against the threshold.
    pub value: f64,
    pub threshold: f64,
    pub details: BTreeMap<String, String>,
    /// Per-sample λ or Λ, when the check produces one.
    pub table: Option<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_error_estimate: f64,
    pub action_consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub system: String,
    pub hamiltonian: String,
    pub seed: u64,
    pub sample_count: usize,
    pub integrator: IntegratorConfig,
    pub version: String,
    pub trajectory: Option<TrajectorySummary>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "system = {}", self.system);
        let _ = writeln!(s, "hamiltonian = {}", self.hamiltonian);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "sample_count = {}", self.sample_count);
        let i = &self.integrator;
        let _ = writeln!(s, "integrator.rel_tol = {:e}", i.rel_tol);
        let _ = writeln!(s, "integrator.abs_tol = {:e}", i.abs_tol);
        let _ = writeln!(s, "integrator.max_step = {:e}", i.max_step);
        let _ = writeln!(s, "integrator.min_step = {:e}", i.min_step);
        let _ = writeln!(s, "integrator.guard_margin = {:e}", i.guard_margin);
        let _ = writeln!(s, "version = {}", self.version);
        if let Some(t) = &self.trajectory {
            let _ = writeln!(s, "trajectory.samples = {}", t.samples);
            let _ = writeln!(s, "trajectory.t_start = {:e}", t.t_start);
            let _ = writeln!(s, "trajectory.t_end = {:e}", t.t_end);
            let _ = writeln!(s, "trajectory.accepted_steps = {}", t.accepted_steps);
            let _ = writeln!(s, "trajectory.rejected_steps = {}", t.rejected_steps);
            let _ = writeln!(s, "trajectory.max_error_estimate = {:e}", t.max_error_estimate);
            let _ = writeln!(s, "trajectory.action_consistency = {:e}", t.action_consistency);
        }
        for (k, c) in self.checks.iter().enumerate() {
            let p = format!("check[{k}].");
            let _ = writeln!(s, "{p}label = {}", c.label);
            let _ = writeln!(s, "{p}result = {}", if c.passed { "pass" } else { "fail" });
            let _ = writeln!(s, "{p}value = {:e}", c.value);
            let _ = writeln!(s, "{p}threshold = {:e}", c.threshold);
            for (key, v) in &c.details {
                let _ = writeln!(s, "{p}{key} = {v}");
            }
            if let Some((name, values)) = &c.table {
                for (j, v) in values.iter().enumerate() {
                    let _ = writeln!(s, "{p}{name}[{j}] = {v:e}");
                }
            }
        }
        let _ = writeln!(s, "result = {}", if self.passed { "pass" } else { "fail" });
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub trajectory: Option<Trajectory>,
}

impl Prepared {
    fn effective_integrator(&self, opts: &RunOptions) -> IntegratorConfig {
        let mut cfg = self.scenario.integrator;
        if let Some(tol) = opts.tol_override {
            cfg = cfg.with_tolerance(tol);
        }
        cfg
    }

    /// Integrates the extended flow (co-integrating auxiliaries when the
    /// system declares them), tracking every listed invariant.
    pub fn simulate(&self, opts: &RunOptions) -> Result<Trajectory, Error> {
        let (Some(start), Some(t_end)) = (&self.scenario.initial, self.scenario.t_end) else {
            return Err(config_err(&self.scenario.name, "simulation needs `initial` and `t_end`"));
        };
        let cfg = self.effective_integrator(opts);
        let tracked: Vec<TrackedField> = self.invariants.iter().map(TrackedInvariant::tracked).collect();
        let aux = self.scenario.aux.unwrap_or_default().spec(&self.system);
        let field = dynamics::extended_field(&self.system);
        Ok(dynamics::integrate_coupled(&self.system, &field, start, &aux, t_end, &cfg, &tracked)?)
    }

    pub fn run(&self, opts: &RunOptions) -> Result<RunOutput, Error> {
        let sc = &self.scenario;
        let seed = opts.seed.unwrap_or(sc.seed);
        let cfg = self.effective_integrator(opts);
        fn tagged(check: &str) -> impl Fn(Error) -> Error + '_ {
            move |e| Error::Check { check: check.to_owned(), source: Box::new(e) }
        }

        let trajectory = if sc.initial.is_some() && sc.t_end.is_some() {
            Some(self.simulate(opts).map_err(tagged("trajectory"))?)
        } else {
            None
        };
        let needs_samples = sc.checks.iter().any(|c| !c.needs_trajectory());
        let samples = if needs_samples {
            sample_points(&self.system, sc.sample_count, seed, sc.sample_margin).map_err(tagged("sampling"))?
        } else {
            Vec::new()
        };

        let mut checks = Vec::new();
        for spec in &sc.checks {
            let mut spec = spec.clone();
            if !spec.threshold_mut().is_finite() {
                *spec.threshold_mut() = 0.0;
            }
            let label = spec.label();
            let outcome = self.run_check(&spec, trajectory.as_ref(), &samples).map_err(tagged(&label))?;
            checks.push(outcome);
        }

        let summary = match &trajectory {
            Some(t) => Some(TrajectorySummary {
                samples: t.len(),
                t_start: t.samples.first().map_or(0.0, |s| s.t),
                t_end: t.last().map_or(0.0, |s| s.t),
                accepted_steps: t.stats.accepted,
                rejected_steps: t.stats.rejected,
                max_error_estimate: t.stats.max_error,
                action_consistency: dynamics::action_consistency(&self.system, t).map_err(|e| tagged("trajectory")(e.into()))?,
            }),
            None => None,
        };
        let passed = checks.iter().all(|c| c.passed);
        let report = Report {
            scenario: sc.name.clone(),
            system: self.system.name().to_owned(),
            hamiltonian: self.system.h().to_string(),
            seed,
            sample_count: if needs_samples { sc.sample_count } else { 0 },
            integrator: cfg,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            trajectory: summary,
            checks,
            passed,
        };
        Ok(RunOutput { report, trajectory })
    }

    fn invariant(&self, label: &str) -> &TrackedInvariant {
        self.invariants.iter().find(|i| i.label == label).expect("validated in prepare")
    }

    fn symmetry(&self, label: &str) -> &BuiltSymmetry {
        self.symmetries.iter().find(|s| s.label == label).expect("validated in prepare")
    }

    fn run_check(&self, spec: &CheckSpec, traj: Option<&Trajectory>, samples: &[EvalContext]) -> Result<CheckOutcome, Error> {
        let sys = &self.system;
        let mut details = BTreeMap::new();
        let mut table = None;
        let (value, threshold, passed) = match spec {
            CheckSpec::Drift { invariant, threshold } => {
                let traj = traj.expect("validated in prepare");
                let inv = self.invariant(invariant);
                let drift = match inv.behavior {
                    Behavior::Conserved => traj.drift(invariant),
                    Behavior::DissipatedAtRate => traj.dissipated_drift(invariant),
                }
                .expect("tracked");
                details.insert("behavior".into(), format!("{:?}", inv.behavior));
                (drift, *threshold, drift <= *threshold)
            }
            CheckSpec::Residual { invariant, threshold } => {
                let inv = self.invariant(invariant);
                let field = noether::dissipation_field(sys, &inv.field);
                let mut worst = 0.0_f64;
                for ctx in samples {
                    let r = field.evaluate(ctx)?;
                    let scale = inv.field.evaluate(ctx)?.abs().max(1.0);
                    worst = worst.max(r.abs() / scale);
                }
                (worst, *threshold, worst <= *threshold)
            }
            CheckSpec::Symmetry { symmetry, threshold, expect } => {
                let y = self.symmetry(symmetry);
                let rep = noether::symmetry_test(sys, &y.field, samples, *threshold)?;
                let want = expect.unwrap_or(SymmetryVerdict::GeneralizedNoether);
                details.insert("verdict".into(), format!("{:?}", rep.verdict));
                details.insert("expected".into(), format!("{want:?}"));
                let mut ok = rep.verdict == want;
                if let (Some(lambda), SymmetryVerdict::GeneralizedNoether) = (&y.lambda, rep.verdict) {
                    let mut worst = 0.0_f64;
                    for (ctx, got) in samples.iter().zip(&rep.lambda_at_samples) {
                        let want = lambda.evaluate(ctx)?;
                        worst = worst.max((got - want).abs() / want.abs().max(1.0));
                    }
                    details.insert("lambda_mismatch".into(), format!("{worst:e}"));
                    ok &= worst <= *threshold;
                }
                table = Some(("lambda".to_owned(), rep.lambda_at_samples.clone()));
                (rep.residual, *threshold, ok)
            }
            CheckSpec::Similarity { symmetry, threshold, expect, lambda } => {
                let y = self.symmetry(symmetry);
                let x = dynamics::extended_field(sys);
                let rep = noether::similarity_test_with(&x, &y.field, sys.rates(), samples, *threshold)?;
                details.insert("verdict".into(), format!("{:?}", rep.verdict));
                let mut ok = match expect {
                    Some(want) => {
                        details.insert("expected".into(), format!("{want:?}"));
                        rep.verdict == *want
                    }
                    None => rep.verdict != SimilarityVerdict::Neither,
                };
                if let Some(want) = lambda {
                    let worst = rep.lambda_at_samples.iter().map(|l| (l - want).abs()).fold(0.0, f64::max);
                    details.insert("expected_Lambda".into(), format!("{want:e}"));
                    details.insert("Lambda_mismatch".into(), format!("{worst:e}"));
                    ok &= worst <= *threshold;
                }
                table = Some(("Lambda".to_owned(), rep.lambda_at_samples.clone()));
                (rep.residual, *threshold, ok)
            }
            CheckSpec::Ratio { numerator, denominator, threshold } => {
                let traj = traj.expect("validated in prepare");
                let num = traj.series(numerator).expect("tracked");
                let den = traj.series(denominator).expect("tracked");
                let ratios: Vec<f64> =
                    num.iter().zip(&den).map(|(a, b)| noether::RatioInvariant::from_values(*a, *b)).collect::<Result<_, _>>()?;
                let spread = relative_spread(&ratios);
                details.insert("initial_ratio".into(), format!("{:e}", ratios.first().copied().unwrap_or(f64::NAN)));
                (spread, *threshold, spread <= *threshold)
            }
            CheckSpec::Closure { first, second, threshold } => {
                let (y1, y2) = (self.symmetry(first), self.symmetry(second));
                let lambdas = match (&y1.lambda, &y2.lambda) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => None,
                };
                let rep = noether::closure_check(sys, &y1.field, &y2.field, lambdas, samples, *threshold)?;
                if let Some(m) = rep.lambda_mismatch {
                    details.insert("lambda_mismatch".into(), format!("{m:e}"));
                }
                details.insert("verdict".into(), format!("{:?}", rep.bracket.verdict));
                table = Some(("lambda".to_owned(), rep.bracket.lambda_at_samples.clone()));
                (rep.bracket.residual, *threshold, rep.passed)
            }
        };
        Ok(CheckOutcome { label: spec.label(), kind: spec.kind().to_owned(), passed, value, threshold, details, table })
    }
}

/// Writes `trajectory.csv`, `report.txt` and `report.json` under
/// `out_dir/<scenario name>/`, returning that directory.
pub fn write_artifacts(out_dir: &Path, output: &RunOutput) -> Result<PathBuf, Error> {
    let dir = out_dir.join(&output.report.scenario);
    std::fs::create_dir_all(&dir)?;
    if let Some(traj) = &output.trajectory {
        write_trajectory(&dir, traj)?;
    }
    std::fs::write(dir.join("report.txt"), output.report.to_text())?;
    std::fs::write(dir.join("report.json"), output.report.to_json() + "\n")?;
    Ok(dir)
}

pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join("trajectory.csv"))?;
    traj.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Loads, prepares and runs a scenario file.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunOutput, Error> {
    let scenario = Scenario::load(path)?;
    scenario.prepare(&path.display().to_string())?.run(opts)
}

/// Seeded samples for `system`, skipping inadmissible ones.
pub fn samples_for(system: &ContactSystem, count: usize, seed: u64, margin: f64) -> Result<Vec<EvalContext>, Error> {
    sample_points(system, count, seed, margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_particle(invariant: &str) -> String {
        format!(
            r#"{{
  "name": "free",
  "system": {{ "h": "p0^2/2", "dim": 1 }},
  "initial": {{ "q": [0], "p": [1.5], "S": 0, "t": 0 }},
  "t_end": 3,
  "invariants": [{{ "label": "F", "expr": "{invariant}" }}],
  "checks": [{{ "kind": "drift", "invariant": "F", "threshold": 1e-9 }}]
}}"#
        )
    }

    #[test]
    fn conserved_momentum_passes_and_position_fails() {
        let sc = Scenario::from_json(&free_particle("p0"), "mem").unwrap();
        let out = sc.prepare("mem").unwrap().run(&RunOptions::default()).unwrap();
        assert!(out.report.passed);
        assert_eq!(out.report.checks[0].value, 0.0);

        let sc = Scenario::from_json(&free_particle("q0"), "mem").unwrap();
        let out = sc.prepare("mem").unwrap().run(&RunOptions::default()).unwrap();
        assert!(!out.report.passed);
        assert!(out.report.checks[0].value > 1.0);
    }

    #[test]
    fn config_errors_carry_location() {
        let err = Scenario::from_json("{\n  \"name\": \"x\",\n  \"system\": 3\n}", "bad.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json") && msg.contains("line"), "{msg}");

        let text = free_particle("p0 +");
        let err = Scenario::from_json(&text, "mem").unwrap().prepare("mem").unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        assert!(err.to_string().contains("invariants[0].expr"), "{err}");
    }

    #[test]
    fn reports_are_deterministic() {
        let text = r#"{
  "name": "kepler-mini",
  "system": { "builtin": "kepler" },
  "initial": { "q": [1, 0, 0], "p": [0, 1.2, 0], "S": 0, "t": 0 },
  "t_end": 2,
  "invariants": ["Q_K"],
  "symmetries": [{ "label": "Y", "scaling": { "alpha": 2, "beta": -1, "gamma": 1, "sigma": 3 } }],
  "checks": [
    { "kind": "drift", "invariant": "Q_K", "threshold": 1e-7 },
    { "kind": "similarity", "symmetry": "Y", "threshold": 1e-9, "lambda": -3 },
    { "kind": "symmetry", "symmetry": "Y", "threshold": 1e-9 }
  ],
  "sample_count": 20
}"#;
        let sc = Scenario::from_json(text, "mem").unwrap();
        let a = sc.prepare("mem").unwrap().run(&RunOptions::default()).unwrap();
        let b = sc.prepare("mem").unwrap().run(&RunOptions::default()).unwrap();
        assert!(a.report.passed, "{}", a.report.to_text());
        assert_eq!(a.report.to_text(), b.report.to_text());
        assert_eq!(a.report.to_json(), b.report.to_json());
    }
}
