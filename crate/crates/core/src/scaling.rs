//! Scaling symmetries of `h = p·p/2m + f(t) V(q) + g(S)` with `V`
//! homogeneous of degree `k` and `g` homogeneous of degree `κ`.
//!
//! For `Y = αq∂_q + βp∂_p + γS∂_S + σt∂_t` the symmetry condition
//! `L_Y η^E = λη^E` splits into `λ = γ`, `β = γ − α`, and `Y(h) + σh = γh`
//! term by term:
//!
//! ```text
//! p·p :  α = (γ + σ)/2
//! V   :  σ t f'/f = γ − σ − αk
//! g   :  σ + γκ = γ
//! ```
//!
//! The dissipated quantity is `F = −ι_Y η^E = α q·p − σ t h − γ S`.

use std::fmt;

use serde::Serialize;

use crate::error::Error;
use crate::expr::{ScalarField, Var};
use crate::geometry::{ContactSystem, VectorFieldSpec};
use crate::noether::invariant_from_symmetry;
use crate::point::EvalContext;
use crate::systems::{make_power_law, Behavior, TrackedInvariant};

/// Tolerance for recognizing the special degrees `k = ±2`, `κ = 1`.
pub const DEGREE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingAnsatz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl ScalingAnsatz {
    pub fn new(alpha: f64, beta: f64, gamma: f64, sigma: f64) -> Self {
        Self { alpha, beta, gamma, sigma }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.alpha, c * self.beta, c * self.gamma, c * self.sigma)
    }

    pub fn is_finite(&self) -> bool {
        [self.alpha, self.beta, self.gamma, self.sigma].iter().all(|x| x.is_finite())
    }
}

/// `Y^a = α q^a`, `Y_a = β p_a`, `Y^S = γ S`, `Y^t = σ t`.
pub fn scaling_generator(ansatz: &ScalingAnsatz, n: usize) -> VectorFieldSpec {
    let yq = (0..n).map(|a| ansatz.alpha * ScalarField::var(Var::Q(a), n)).collect();
    let yp = (0..n).map(|a| ansatz.beta * ScalarField::var(Var::P(a), n)).collect();
    VectorFieldSpec::new(
        yq,
        yp,
        ansatz.gamma * ScalarField::var(Var::S, n),
        ansatz.sigma * ScalarField::var(Var::T, n),
    )
}

/// Euler's identity `q·∇V = kV` at every sample, to `1e-9` relative.
pub fn homogeneity_check(v: &ScalarField, k: f64, samples: &[EvalContext]) -> bool {
    let n = v.dim();
    let euler: ScalarField = (0..n).map(|a| ScalarField::var(Var::Q(a), n) * v.partial(Var::Q(a))).sum();
    samples.iter().all(|ctx| match (euler.evaluate(ctx), v.evaluate(ctx)) {
        (Ok(lhs), Ok(val)) => {
            let scale = lhs.abs().max((k * val).abs()).max(val.abs()).max(f64::MIN_POSITIVE);
            (lhs - k * val).abs() <= 1e-9 * scale
        }
        _ => false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FKind {
    Constant,
    /// `f(t) = t^c` with the exponent forced by `Λ = γ/σ`.
    PowerLaw { lambda: f64 },
    /// `f` unconstrained: only `σ = 0` solutions.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GKind {
    Zero,
    Homogeneous { kappa: f64 },
}

// Tags follow the conventional case names.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    Trivial,
    K2_F0,
    Kminus2_F1,
    GenericK_F2,
    TimeDependent_Case3,
    Dissipative_F0,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone)]
pub struct ScalingSolution {
    pub case_tag: CaseTag,
    pub ansatz: ScalingAnsatz,
    /// `α q·p − σ t h − γ S` for the emitted system.
    pub invariant: ScalarField,
    pub f_required: Option<ScalarField>,
    /// The form `g` is forced into (dissipative branch).
    pub g_forced: Option<ScalarField>,
    pub constraints_log: Vec<String>,
    /// Emitted for completeness; the invariant carries no information.
    pub informational: bool,
    /// A representative system of the family (n = 3, `V = c·|q|^k`).
    pub system: ContactSystem,
}

impl ScalingSolution {
    /// Coefficients of `q·p`, `t·h` and `S` in `F = a q·p − b t h − c S`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        (self.ansatz.alpha, self.ansatz.sigma, self.ansatz.gamma)
    }

    pub fn generator(&self) -> VectorFieldSpec {
        scaling_generator(&self.ansatz, self.system.n())
    }

    /// Human-readable invariant, written over `q·p`, `t·h` and `S`.
    pub fn invariant_text(&self) -> String {
        let (a, b, c) = self.coefficients();
        let mut parts = Vec::new();
        let mut term = |coef: f64, what: &str, negate: bool| {
            let coef = if negate { -coef } else { coef };
            if coef == 0.0 {
                return;
            }
            let sign = if coef < 0.0 { "-" } else { "+" };
            let mag = coef.abs();
            let body = if (mag - 1.0).abs() < 1e-15 { what.to_owned() } else { format!("{}*{what}", fmt_coef(mag)) };
            parts.push((sign, body));
        };
        term(a, "q.p", false);
        term(b, "t*h", true);
        term(c, "S", true);
        if parts.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (sign, body)) in parts.iter().enumerate() {
            if i == 0 {
                if *sign == "-" {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {sign} "));
            }
            out.push_str(body);
        }
        out
    }
}

/// Short rational rendering for coefficients such as 2/3.
pub fn fmt_coef(x: f64) -> String {
    for den in 1..=12_i64 {
        let num = x * den as f64;
        if (num - num.round()).abs() < 1e-12 {
            let num = num.round() as i64;
            return if den == 1 { num.to_string() } else { format!("{num}/{den}") };
        }
    }
    format!("{x}")
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= DEGREE_TOL
}

struct Emit<'a> {
    m: f64,
    k: f64,
    out: &'a mut Vec<ScalingSolution>,
}

impl Emit<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        tag: CaseTag,
        ansatz: ScalingAnsatz,
        f: ScalarField,
        coupling: f64,
        g0: f64,
        log: Vec<String>,
        informational: bool,
    ) -> Result<(), Error> {
        let n = 3;
        let system = make_power_law(self.m, self.k, coupling, &f, g0)?;
        let invariant = invariant_from_symmetry(&system, &scaling_generator(&ansatz, n));
        let f_required = f.depends_on(Var::T).then(|| f.clone());
        let g_forced = (tag == CaseTag::Dissipative_F0).then(|| g0 * ScalarField::var(Var::S, n));
        let system = system.with_invariant(TrackedInvariant::new(
            &tag.to_string(),
            invariant.clone(),
            if g0 == 0.0 { Behavior::Conserved } else { Behavior::DissipatedAtRate },
        ));
        self.out.push(ScalingSolution {
            case_tag: tag,
            ansatz,
            invariant,
            f_required,
            g_forced,
            constraints_log: log,
            informational,
            system,
        });
        Ok(())
    }
}

/// Enumerates the scaling solutions of the family. Ansätze are normalized
/// to the conventional representatives `F0 = q·p − 2S`, `F1 = q·p − 2th`,
/// `F2 = (2/(2−k)) q·p − th − ((2+k)/(2−k)) S` and `ΛF0 + F1`.
pub fn solve_scaling(m: f64, k: f64, f_kind: FKind, g_kind: GKind, g0: f64) -> Result<Vec<ScalingSolution>, Error> {
    if !(m > 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!("need m > 0 and finite k (got m = {m}, k = {k})")));
    }
    let mut out = Vec::new();
    let mut emit = Emit { m, k, out: &mut out };
    let one = ScalarField::constant(1.0, 3);
    let base = vec!["lambda = gamma".to_owned(), "beta = gamma - alpha".to_owned()];
    let with = |extra: &[&str]| {
        let mut log = base.clone();
        log.extend(extra.iter().map(|s| s.to_string()));
        log
    };

    match g_kind {
        GKind::Homogeneous { kappa } => {
            if !near(kappa, 1.0) {
                return Err(Error::InadmissibleCase {
                    constraint: format!("sigma = 0 forces gamma*(kappa - 1) = 0, so kappa must be 1 (got {kappa})"),
                });
            }
            let f = match f_kind {
                FKind::PowerLaw { lambda } => power_law_f(k, lambda),
                _ => one.clone(),
            };
            let log = with(&["sigma = 0", "alpha = gamma/2", "kappa = 1: g(S) = g0*S"]);
            if near(k, 2.0) {
                emit.push(CaseTag::Dissipative_F0, ScalingAnsatz::new(1.0, 1.0, 2.0, 0.0), f, 1.0, g0, with(&["sigma = 0", "alpha = gamma/2", "kappa = 1: g(S) = g0*S", "k = 2"]), false)?;
            } else if near(k, 0.0) {
                // The potential term contributes f·V·(2 − k) to the dissipation
                // equation, which only vanishes here when V ≡ 0.
                let mut log = log;
                log.push("k = 0: requires V = 0 (informational)".into());
                emit.push(CaseTag::Dissipative_F0, ScalingAnsatz::new(1.0, 1.0, 2.0, 0.0), f, 0.0, g0, log, true)?;
            } else {
                return Err(Error::InadmissibleCase {
                    constraint: format!("sigma = 0 with a nonzero potential needs gamma*(1 - k/2) = 0, so k = 2 (got {k})"),
                });
            }
        }
        GKind::Zero => {
            let sigma0 = ["alpha = (gamma + sigma)/2", "sigma = 0", "gamma*(1 - k/2) = 0"];
            match f_kind {
                FKind::Constant => {
                    if near(k, 2.0) {
                        emit.push(CaseTag::K2_F0, ScalingAnsatz::new(1.0, 1.0, 2.0, 0.0), one.clone(), 1.0, 0.0, with(&[sigma0[0], sigma0[1], sigma0[2], "k = 2"]), false)?;
                    } else if near(k, -2.0) {
                        emit.push(
                            CaseTag::Kminus2_F1,
                            ScalingAnsatz::new(1.0, -1.0, 0.0, 2.0),
                            one.clone(),
                            1.0,
                            0.0,
                            with(&["alpha = (gamma + sigma)/2", "f constant: gamma - sigma - alpha*k = 0", "k = -2: gamma = 0"]),
                            false,
                        )?;
                    } else {
                        let gamma = (2.0 + k) / (2.0 - k);
                        let alpha = 2.0 / (2.0 - k);
                        emit.push(
                            CaseTag::GenericK_F2,
                            ScalingAnsatz::new(alpha, gamma - alpha, gamma, 1.0),
                            one.clone(),
                            1.0,
                            0.0,
                            with(&["alpha = (gamma + sigma)/2", "f constant: gamma - sigma - alpha*k = 0", "sigma = 1"]),
                            false,
                        )?;
                    }
                }
                FKind::PowerLaw { lambda } => {
                    let f = power_law_f(k, lambda);
                    let alpha = lambda + 1.0;
                    emit.push(
                        CaseTag::TimeDependent_Case3,
                        ScalingAnsatz::new(alpha, lambda - 1.0, 2.0 * lambda, 2.0),
                        f,
                        1.0,
                        0.0,
                        with(&[
                            "alpha = (gamma + sigma)/2",
                            "f = t^c with c = (gamma - sigma - alpha*k)/sigma",
                            "Lambda = gamma/sigma, sigma = 2",
                        ]),
                        false,
                    )?;
                    if near(k, 2.0) {
                        emit.push(CaseTag::K2_F0, ScalingAnsatz::new(1.0, 1.0, 2.0, 0.0), power_law_f(k, lambda), 1.0, 0.0, with(&[sigma0[0], sigma0[1], sigma0[2], "k = 2"]), false)?;
                    }
                }
                FKind::Free => {
                    if near(k, 2.0) {
                        emit.push(CaseTag::K2_F0, ScalingAnsatz::new(1.0, 1.0, 2.0, 0.0), one.clone(), 1.0, 0.0, with(&[sigma0[0], sigma0[1], sigma0[2], "k = 2"]), false)?;
                    }
                }
            }
            emit.push(CaseTag::Trivial, ScalingAnsatz::new(0.0, 0.0, 0.0, 0.0), one, 1.0, 0.0, with(&["gamma = sigma = 0"]), true)?;
        }
    }
    Ok(out)
}

/// `f(t; Λ) = t^{(2−k)Λ/2 − (2+k)/2}`.
pub fn power_law_f(k: f64, lambda: f64) -> ScalarField {
    let c = (2.0 - k) * lambda / 2.0 - (2.0 + k) / 2.0;
    ScalarField::var(Var::T, 3).powf(c)
}

/// `h = p·p/2m + f(t;Λ)·coupling·|q|^k` on `t > 0`, with `ΛF0 + F1`
/// registered as `F_case3`.
pub fn case3_system(k: f64, lambda: f64, m: f64, coupling: f64) -> Result<ContactSystem, Error> {
    let sys = make_power_law(m, k, coupling, &power_law_f(k, lambda), 0.0)?;
    let y = scaling_generator(&ScalingAnsatz::new(lambda + 1.0, lambda - 1.0, 2.0 * lambda, 2.0), 3);
    let inv = invariant_from_symmetry(&sys, &y);
    let guard = crate::geometry::DomainGuard { exclude_origin: k <= 0.0, positive_time: true };
    let bx = sys.sample_box().clone().with_t(0.5, 5.0);
    Ok(sys
        .with_guard(guard)
        .with_sample_box(bx)
        .with_invariant(TrackedInvariant::new("F_case3", inv, Behavior::Conserved)))
}
