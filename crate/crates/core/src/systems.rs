//! Built-in systems and their closed-form invariants.
//!
//! | name                   | h                                                  |
//! |------------------------|----------------------------------------------------|
//! | `kepler`               | `p·p/2m − 4ε/|q|`                                  |
//! | `td-kepler`            | `p·p/2m − t^((3Λ−1)/2) · 4ε/|q|`  (t > 0)          |
//! | `harmonic-dissipative` | `p0²/2m + (m/2) f(t) q0² + g0 S`                   |
//!
//! The oscillator invariants `F_LR`, `F_GLR` and `F_EM` depend on solutions of
//! auxiliary linear/Ermakov-type ODEs. Those solutions enter as parameters
//! (`rho`, `rho_dot`, `a`, `a_dot`, `b`, `b_dot`) whose time derivatives are
//! declared as rates, so `∂/∂t` of an invariant follows them exactly.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, AuxiliarySpec, IntegrationFailure, IntegratorConfig, TrackedField, Trajectory};
use crate::error::Error;
use crate::expr::{ParamRates, ScalarField, Var};
use crate::geometry::{ContactSystem, DomainGuard, VectorFieldSpec};
use crate::noether;
use crate::point::{ExtendedPoint, Params};
use crate::sampling::{sample_points, SampleBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    Conserved,
    /// `X_h^t(F) = −R(h) F`, so `F·exp(∫R(h) dt)` is constant.
    DissipatedAtRate,
}

#[derive(Debug, Clone)]
pub struct TrackedInvariant {
    pub label: String,
    pub field: ScalarField,
    pub behavior: Behavior,
}

impl TrackedInvariant {
    pub fn new(label: &str, field: ScalarField, behavior: Behavior) -> Self {
        Self { label: label.to_owned(), field, behavior }
    }

    pub fn tracked(&self) -> TrackedField {
        TrackedField::new(&self.label, self.field.clone())
    }
}

/// Builtin names with a one-line parameter summary.
pub const BUILTINS: [(&str, &str); 3] = [
    ("kepler", "m (mass, default 1), eps (coupling 4*eps, default 0.25); n = 3"),
    ("td-kepler", "m (default 1), eps (default 0.25), Lambda (default 1); f(t) = t^((3*Lambda-1)/2), t > 0; n = 3"),
    (
        "harmonic-dissipative",
        "m (default 1), g0 (default 0.2), f(t) expression (default \"1\"), rho0/a0 (default 1); n = 1",
    ),
];

/// Builds a builtin by name. Unlisted parameters take their defaults;
/// additional parameters are kept (they may appear in `f_expr`).
pub fn builtin(name: &str, params: &Params, f_expr: Option<&str>) -> Result<ContactSystem, Error> {
    let get = |k: &str, d: f64| params.get(k).unwrap_or(d);
    let sys = match name {
        "kepler" => make_kepler(get("m", 1.0), get("eps", 0.25))?,
        "td-kepler" => make_td_kepler(get("m", 1.0), get("eps", 0.25), get("Lambda", 1.0))?,
        "harmonic-dissipative" => {
            let f = ScalarField::parse(f_expr.unwrap_or("1"), 1)?;
            make_harmonic_dissipative_with(get("m", 1.0), &f, get("g0", 0.2), params)?
        }
        other => {
            let known: Vec<&str> = BUILTINS.iter().map(|(n, _)| *n).collect();
            return Err(Error::InvalidArgument(format!("unknown system `{other}` (known: {})", known.join(", "))));
        }
    };
    if f_expr.is_some() && name != "harmonic-dissipative" {
        return Err(Error::InvalidArgument(format!("system `{name}` does not take an f(t) expression")));
    }
    Ok(sys)
}

fn dot_qp(n: usize) -> ScalarField {
    (0..n).map(|a| ScalarField::var(Var::Q(a), n) * ScalarField::var(Var::P(a), n)).sum()
}

fn kinetic(n: usize, m: &ScalarField) -> ScalarField {
    let pp: ScalarField = (0..n).map(|a| ScalarField::var(Var::P(a), n).powf(2.0)).sum();
    pp / (2.0 * m)
}

fn radius(n: usize) -> ScalarField {
    (0..n).map(|a| ScalarField::var(Var::Q(a), n).powf(2.0)).sum::<ScalarField>().sqrt()
}

fn t_field(n: usize) -> ScalarField {
    ScalarField::var(Var::T, n)
}

fn s_field(n: usize) -> ScalarField {
    ScalarField::var(Var::S, n)
}

fn check_mass(m: f64) -> Result<(), Error> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mass must be positive, got {m}")))
    }
}

fn kepler_sample_box() -> SampleBox {
    SampleBox::new(3).with_q(-2.0, 2.0).with_p(-1.5, 1.5)
}

/// Minimum `|q|` used when sampling central-force systems.
pub const KEPLER_SAMPLE_MARGIN: f64 = 0.1;

/// `h = p·p/2m − 4ε/|q|` on `n = 3`, with `H_K`, `Q_K = 2q·p − 3tH_K − S`
/// and `F2_K = (2/3)q·p − tH_K − S/3` registered.
pub fn make_kepler(m: f64, eps: f64) -> Result<ContactSystem, Error> {
    check_mass(m)?;
    let n = 3;
    let h = kinetic(n, &ScalarField::param("m", n)) - 4.0 * ScalarField::param("eps", n) / radius(n);
    let params = Params::from([("m", m), ("eps", eps), ("k_grav", 4.0 * eps)]);
    let t = t_field(n);
    let s = s_field(n);
    let q_k = 2.0 * dot_qp(n) - 3.0 * &t * &h - &s;
    let f2 = (2.0 / 3.0) * dot_qp(n) - &t * &h - &s / 3.0;
    Ok(ContactSystem::new("kepler", h.clone(), params)?
        .with_guard(DomainGuard { exclude_origin: true, positive_time: false })
        .with_sample_box(kepler_sample_box())
        .with_invariant(TrackedInvariant::new("H_K", h, Behavior::Conserved))
        .with_invariant(TrackedInvariant::new("Q_K", q_k, Behavior::Conserved))
        .with_invariant(TrackedInvariant::new("F2_K", f2, Behavior::Conserved)))
}

/// `h = p·p/2m − t^((3Λ−1)/2)·4ε/|q|` for `t > 0`, registering
/// `F_TD = (Λ+1) q·p − 2th − 2ΛS`.
pub fn make_td_kepler(m: f64, eps: f64, lambda: f64) -> Result<ContactSystem, Error> {
    check_mass(m)?;
    let n = 3;
    let f = t_field(n).powf((3.0 * lambda - 1.0) / 2.0);
    let h = kinetic(n, &ScalarField::param("m", n)) - f * (4.0 * ScalarField::param("eps", n) / radius(n));
    let params = Params::from([("m", m), ("eps", eps), ("k_grav", 4.0 * eps), ("Lambda", lambda)]);
    let inv = (lambda + 1.0) * dot_qp(n) - 2.0 * &h * t_field(n) - 2.0 * lambda * s_field(n);
    Ok(ContactSystem::new("td-kepler", h, params)?
        .with_guard(DomainGuard { exclude_origin: true, positive_time: true })
        .with_sample_box(kepler_sample_box().with_t(0.5, 5.0))
        .with_invariant(TrackedInvariant::new("F_TD", inv, Behavior::Conserved)))
}

/// `h = p·p/2m + f(t)·coupling·|q|^k + g0 S` on `n = 3`.
pub fn make_power_law(m: f64, k: f64, coupling: f64, f: &ScalarField, g0: f64) -> Result<ContactSystem, Error> {
    check_mass(m)?;
    let n = 3;
    let qq: ScalarField = (0..n).map(|a| ScalarField::var(Var::Q(a), n).powf(2.0)).sum();
    let v = ScalarField::param("coupling", n) * qq.powf(k / 2.0);
    let f = lift(f, n);
    let mut h = kinetic(n, &ScalarField::param("m", n)) + f.clone() * v;
    if g0 != 0.0 {
        h = h + ScalarField::param("g0", n) * s_field(n);
    }
    let params = Params::from([("m", m), ("coupling", coupling), ("g0", g0), ("k", k)]);
    let guard = DomainGuard { exclude_origin: k <= 0.0, positive_time: f.depends_on(Var::T) };
    let mut bx = SampleBox::new(n).with_p(-1.5, 1.5);
    if guard.positive_time {
        bx = bx.with_t(0.5, 5.0);
    }
    Ok(ContactSystem::new("power-law", h, params)?.with_guard(guard).with_sample_box(bx))
}

// Re-dimension a field over `t` and parameters only.
fn lift(f: &ScalarField, n: usize) -> ScalarField {
    if f.dim() == n {
        return f.clone();
    }
    ScalarField::parse(&f.to_string(), n).expect("printed fields re-parse")
}

/// `h = p0²/2m + (m/2) f(t) q0² + g0 S`.
pub fn make_harmonic_dissipative(m: f64, f_spec: &ScalarField, g0: f64) -> Result<ContactSystem, Error> {
    make_harmonic_dissipative_with(m, f_spec, g0, &Params::new())
}

/// As [`make_harmonic_dissipative`], with extra parameter bindings (for
/// parameters referenced by `f_spec`, or overrides of `rho0`, `a0` and
/// auxiliary defaults).
pub fn make_harmonic_dissipative_with(
    m: f64,
    f_spec: &ScalarField,
    g0: f64,
    extra: &Params,
) -> Result<ContactSystem, Error> {
    check_mass(m)?;
    if f_spec.free_vars().iter().any(|v| *v != Var::T) {
        return Err(Error::InvalidArgument(format!("f must depend on t only, got `{f_spec}`")));
    }
    let n = 1;
    let f = lift(f_spec, n);
    let par = |name: &str| ScalarField::param(name, n);
    let q = ScalarField::var(Var::Q(0), n);
    let p = ScalarField::var(Var::P(0), n);
    let s = s_field(n);
    let (mm, g) = (par("m"), par("g0"));

    let h = p.powf(2.0) / (2.0 * &mm) + &mm / 2.0 * &f * q.powf(2.0) + &g * &s;

    let mut params = Params::from([
        ("rho", 1.0),
        ("rho_dot", 0.0),
        ("a", 1.0),
        ("a_dot", 0.0),
        ("b", 1.0),
        ("b_dot", 0.0),
        ("rho0", 1.0),
        ("a0", 1.0),
    ]);
    params.extend(extra);
    params.set("m", m);
    params.set("g0", g0);

    let (rho, rho_dot, rho0) = (par("rho"), par("rho_dot"), par("rho0"));
    let (a, a_dot, a0) = (par("a"), par("a_dot"), par("a0"));
    let (b, b_dot) = (par("b"), par("b_dot"));
    let glr_c = a0.powf(3.0) * (1.0 + 3.0 * &a0 * g.powf(2.0) / 4.0);

    let mut rates = ParamRates::default();
    rates.insert("rho", rho_dot.clone());
    rates.insert("rho_dot", -(&f * &rho) + &rho0 / rho.powf(3.0));
    rates.insert("a", a_dot.clone());
    rates.insert("a_dot", -(&f * &a) + g.powf(2.0) * &a / 4.0 + &glr_c / a.powf(3.0));
    rates.insert("b", b_dot.clone());
    rates.insert("b_dot", -(&g * &b_dot) - &f * &b);

    let qp = &q * &p;
    let f0 = &qp - 2.0 * &s;
    let f_lr = rho.powf(2.0) * p.powf(2.0) / (2.0 * &mm) - &rho * &rho_dot * &qp
        + &mm / 2.0 * (rho_dot.powf(2.0) + &rho0 / rho.powf(2.0)) * q.powf(2.0);
    let f_glr = a.powf(2.0) * p.powf(2.0) / (2.0 * &mm)
        + 0.5 * (&g * a.powf(2.0) - 2.0 * &a * &a_dot) * &qp
        + (a_dot.powf(2.0) - &g * &a * &a_dot + g.powf(2.0) * a.powf(2.0) / 4.0 + &glr_c / a.powf(2.0)) * &mm
            / 2.0
            * q.powf(2.0);
    let f_em = &b * &p - &mm * &b_dot * &q;

    let rate = if g0 == 0.0 { Behavior::Conserved } else { Behavior::DissipatedAtRate };
    let bx = SampleBox::new(n)
        .with_param("rho", 0.5, 2.0)
        .with_param("rho_dot", -1.0, 1.0)
        .with_param("a", 0.5, 2.0)
        .with_param("a_dot", -1.0, 1.0)
        .with_param("b", -1.5, 1.5)
        .with_param("b_dot", -1.5, 1.5);
    let mut sys = ContactSystem::new("harmonic-dissipative", h, params)?
        .with_rates(rates)
        .with_sample_box(bx)
        .with_invariant(TrackedInvariant::new("F0", f0, rate));
    if g0 == 0.0 {
        // The Lewis–Riesenfeld invariant only solves the undamped equation.
        sys = sys.with_invariant(TrackedInvariant::new("F_LR", f_lr, Behavior::Conserved));
    }
    sys = sys
        .with_invariant(TrackedInvariant::new("F_GLR", f_glr, rate))
        .with_invariant(TrackedInvariant::new("F_EM", f_em, rate));
    self_test(&sys)?;
    Ok(sys)
}

/// Residual threshold for the constructor self-test.
pub const SELF_TEST_THRESHOLD: f64 = 1e-9;

// Every registered invariant must satisfy the dissipation equation at
// seeded samples; a transcription error fails construction.
fn self_test(system: &ContactSystem) -> Result<(), Error> {
    let samples = sample_points(system, 64, 0x5e1f, 0.0)?;
    for inv in system.invariants() {
        let residual = noether::dissipation_field(system, &inv.field);
        let mut worst = 0.0_f64;
        for ctx in &samples {
            let r = residual.evaluate(ctx)?;
            let scale = inv.field.evaluate(ctx)?.abs().max(1.0);
            worst = worst.max(r.abs() / scale);
        }
        if !(worst <= SELF_TEST_THRESHOLD) {
            return Err(Error::SelfTestFailed { label: inv.label.clone(), residual: worst, threshold: SELF_TEST_THRESHOLD });
        }
    }
    Ok(())
}

/// Initial data for the auxiliary equations of the oscillator invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxiliaryState {
    pub rho: f64,
    pub rho_dot: f64,
    pub a: f64,
    pub a_dot: f64,
    pub b: f64,
    pub b_dot: f64,
    pub lr: bool,
    pub glr: bool,
    pub em: bool,
}

impl Default for AuxiliaryState {
    fn default() -> Self {
        Self { rho: 1.0, rho_dot: 0.0, a: 1.0, a_dot: 0.0, b: 1.0, b_dot: 0.0, lr: true, glr: true, em: true }
    }
}

/// Bounds outside which `rho` and `a` are treated as blown up.
pub const AUX_BOUNDS: (f64, f64) = (1e-6, 1e6);

impl AuxiliaryState {
    /// Ermakov equilibrium `ρ = (ρ0/ω²)^{1/4}` for constant `f = ω²`.
    pub fn ermakov_equilibrium(omega_sq: f64, rho0: f64) -> Self {
        Self { rho: (rho0 / omega_sq).powf(0.25), rho_dot: 0.0, ..Self::default() }
    }

    pub fn spec(&self, system: &ContactSystem) -> AuxiliarySpec {
        let mut spec = AuxiliarySpec::default();
        let mut push = |name: &str, value: f64| {
            if system.rates().get(name).is_some() {
                spec.initial.push((name.to_owned(), value));
            }
        };
        if self.lr {
            push("rho", self.rho);
            push("rho_dot", self.rho_dot);
        }
        if self.glr {
            push("a", self.a);
            push("a_dot", self.a_dot);
        }
        if self.em {
            push("b", self.b);
            push("b_dot", self.b_dot);
        }
        for name in ["rho", "a"] {
            if spec.initial.iter().any(|(k, _)| k == name) {
                spec.bounds.push((name.to_owned(), AUX_BOUNDS.0, AUX_BOUNDS.1));
            }
        }
        spec
    }
}

/// Integrates the system together with the active auxiliary equations,
/// tracking every registered invariant whose auxiliaries are active.
pub fn co_integrate(
    system: &ContactSystem,
    start: &ExtendedPoint,
    aux0: &AuxiliaryState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationFailure> {
    let spec = aux0.spec(system);
    let inactive: Vec<&str> = system.rates().names().filter(|n| !spec.initial.iter().any(|(k, _)| k == n)).collect();
    let tracked: Vec<TrackedField> = system
        .invariants()
        .iter()
        .filter(|inv| inactive.iter().all(|name| !inv.field.free_params().contains(*name)))
        .map(TrackedInvariant::tracked)
        .collect();
    dynamics::integrate_coupled(system, &dynamics::extended_field(system), start, &spec, t_end, cfg, &tracked)
}

/// The symmetry generated by `F_GLR` with `Y^t = 0`.
pub fn glr_symmetry(system: &ContactSystem) -> Result<VectorFieldSpec, Error> {
    let inv = system
        .invariant("F_GLR")
        .ok_or_else(|| Error::InvalidArgument(format!("system `{}` has no F_GLR invariant", system.name())))?;
    Ok(noether::symmetry_from_invariant(system, &inv.field, &ScalarField::zero(system.n())))
}
