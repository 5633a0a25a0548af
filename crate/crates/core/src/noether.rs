//! Dissipated quantities and generalized Noether symmetries.
//!
//! A field `Y` is a generalized Noether symmetry when `L_Y η^E = λ η^E`.
//! Such a `Y` yields the dissipated quantity `F = −ι_Y η^E`, i.e.
//! `X_h^t(F) + R(h) F = 0`; conversely every dissipated `F` yields a
//! symmetry, unique up to adding `Y^t X_h^t`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{contact_field, extended_field, hamiltonian_vector_field};
use crate::error::Error;
use crate::expr::{ParamRates, ScalarField, Var};
use crate::geometry::{
    contract_eta, contract_eta_extended, eta_extended, lie_bracket_with, lie_derivative_eta_field,
    ContactSystem, VectorFieldSpec,
};
use crate::point::EvalContext;

/// Default threshold for checks built from exact derivatives.
pub const EXACT_THRESHOLD: f64 = 1e-9;
/// Default threshold for checks along integrated trajectories.
pub const FLOW_THRESHOLD: f64 = 1e-6;
/// Below this `‖X‖∞` a sample is useless for the similarity fit.
pub const DEGENERATE_NORM: f64 = 1e-8;
/// Denominator cut-off for ratio invariants.
pub const RATIO_CUTOFF: f64 = 1e-12;

/// Symbolic `X_h^t(F) + R(h) F`.
pub fn dissipation_field(system: &ContactSystem, f: &ScalarField) -> ScalarField {
    system.directional(&extended_field(system), f) + system.reeb_h() * f
}

/// `X_h^t(F) + R(h) F` at `ctx`; zero exactly when `F` is dissipated.
pub fn dissipation_residual(system: &ContactSystem, f: &ScalarField, ctx: &EvalContext) -> Result<f64, Error> {
    system.admissible(&ctx.point, 0.0).map_err(Error::Inadmissible)?;
    Ok(dissipation_field(system, f).evaluate(ctx)?)
}

/// `F = −ι_Y η^E = p·Y^q − Y^S − h Y^t`.
pub fn invariant_from_symmetry(system: &ContactSystem, y: &VectorFieldSpec) -> ScalarField {
    -contract_eta_extended(system, y)
}

/// The symmetry associated with `F`: `X_F` (contact field of `F`, no
/// `t`-component) plus the gauge term `Y^t X_h^t`.
pub fn symmetry_from_invariant(system: &ContactSystem, f: &ScalarField, yt: &ScalarField) -> VectorFieldSpec {
    let n = system.n();
    let x_f = hamiltonian_vector_field(f, &ScalarField::zero(n));
    x_f.plus(&extended_field(system).scaled(yt))
}

/// `λ = −Y^t ∂h/∂S − ∂F/∂S` for the symmetry built from `F` and `Y^t`.
pub fn lambda_field(system: &ContactSystem, f: &ScalarField, yt: &ScalarField) -> ScalarField {
    -(yt * system.reeb_h()) - f.partial(Var::S)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryVerdict {
    GeneralizedNoether,
    NotSymmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub lambda_at_samples: Vec<f64>,
    pub residual: f64,
    pub threshold: f64,
    pub verdict: SymmetryVerdict,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.verdict == SymmetryVerdict::GeneralizedNoether
    }
}

fn check_samples(system: &ContactSystem, samples: &[EvalContext]) -> Result<(), Error> {
    for (i, ctx) in samples.iter().enumerate() {
        system.admissible(&ctx.point, 0.0).map_err(|m| Error::Inadmissible(format!("sample {i}: {m}")))?;
    }
    Ok(())
}

/// Checks `L_Y η^E = λ η^E` at each sample, reading `λ` from the `dS` slot.
pub fn symmetry_test(
    system: &ContactSystem,
    y: &VectorFieldSpec,
    samples: &[EvalContext],
    threshold: f64,
) -> Result<SymmetryReport, Error> {
    check_samples(system, samples)?;
    let lie = lie_derivative_eta_field(system, y);
    let mut lambdas = Vec::with_capacity(samples.len());
    let mut residual = 0.0_f64;
    for ctx in samples {
        let omega = lie.evaluate(ctx)?;
        let eta = eta_extended(system, ctx)?;
        let (lambda, r) = omega.proportionality(&eta);
        lambdas.push(lambda);
        residual = residual.max(r);
    }
    let verdict = if residual <= threshold { SymmetryVerdict::GeneralizedNoether } else { SymmetryVerdict::NotSymmetry };
    Ok(SymmetryReport { lambda_at_samples: lambdas, residual, threshold, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimilarityVerdict {
    Similarity,
    DynamicalSymmetry,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    #[serde(rename = "Lambda_at_samples")]
    pub lambda_at_samples: Vec<f64>,
    pub residual: f64,
    pub threshold: f64,
    pub verdict: SimilarityVerdict,
}

/// Checks `[Y, X] = Λ X`, with parameters held constant.
pub fn similarity_test(
    x: &VectorFieldSpec,
    y: &VectorFieldSpec,
    samples: &[EvalContext],
    threshold: f64,
) -> Result<SimilarityReport, Error> {
    similarity_test_with(x, y, &ParamRates::default(), samples, threshold)
}

/// [`similarity_test`] where `rates` differentiates time-dependent parameters.
/// `Λ` is read at the index of `X`'s largest component, then checked on
/// every component.
pub fn similarity_test_with(
    x: &VectorFieldSpec,
    y: &VectorFieldSpec,
    rates: &ParamRates,
    samples: &[EvalContext],
    threshold: f64,
) -> Result<SimilarityReport, Error> {
    let bracket = lie_bracket_with(y, x, rates);
    let mut lambdas = Vec::with_capacity(samples.len());
    let mut residual = 0.0_f64;
    for (index, ctx) in samples.iter().enumerate() {
        let xv = x.evaluate(ctx)?;
        let bv = bracket.evaluate(ctx)?;
        let (k, norm) = xv.iter().enumerate().fold((0, 0.0_f64), |(bi, bm), (i, v)| if v.abs() > bm { (i, v.abs()) } else { (bi, bm) });
        if norm <= DEGENERATE_NORM {
            return Err(Error::DegeneratePoint { index, norm });
        }
        let lambda = bv[k] / xv[k];
        let mismatch = bv.iter().zip(&xv).map(|(b, x)| (b - lambda * x).abs()).fold(0.0, f64::max);
        let scale = bv.iter().fold(1.0_f64, |m, b| m.max(b.abs()));
        lambdas.push(lambda);
        residual = residual.max(mismatch / scale);
    }
    let max_lambda = lambdas.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let verdict = if residual > threshold {
        SimilarityVerdict::Neither
    } else if max_lambda <= threshold {
        SimilarityVerdict::DynamicalSymmetry
    } else {
        SimilarityVerdict::Similarity
    };
    Ok(SimilarityReport { lambda_at_samples: lambdas, residual, threshold, verdict })
}

/// `F / G`, conserved whenever `F` and `G` are dissipated at the same rate.
#[derive(Debug, Clone)]
pub struct RatioInvariant {
    pub numerator: ScalarField,
    pub denominator: ScalarField,
}

pub fn ratio_invariant(f: &ScalarField, g: &ScalarField) -> RatioInvariant {
    RatioInvariant { numerator: f.clone(), denominator: g.clone() }
}

impl RatioInvariant {
    pub fn field(&self) -> ScalarField {
        &self.numerator / &self.denominator
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<f64, Error> {
        let den = self.denominator.evaluate(ctx)?;
        if den.abs() < RATIO_CUTOFF {
            return Err(Error::DivisionNearZero { value: den });
        }
        Ok(self.numerator.evaluate(ctx)? / den)
    }

    /// Ratio from already-evaluated numerator and denominator values.
    pub fn from_values(num: f64, den: f64) -> Result<f64, Error> {
        if den.abs() < RATIO_CUTOFF {
            return Err(Error::DivisionNearZero { value: den });
        }
        Ok(num / den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub bracket: SymmetryReport,
    /// `max |λ_[Y1,Y2] − (Y1(λ2) − Y2(λ1))| / max(1, |λ_[Y1,Y2]|)`, when
    /// both `λ` fields were supplied.
    pub lambda_mismatch: Option<f64>,
    pub passed: bool,
}

/// Runs [`symmetry_test`] on `[Y1, Y2]` and, given `λ1`, `λ2` as fields,
/// checks `λ_[Y1,Y2] = Y1(λ2) − Y2(λ1)`.
pub fn closure_check(
    system: &ContactSystem,
    y1: &VectorFieldSpec,
    y2: &VectorFieldSpec,
    lambdas: Option<(&ScalarField, &ScalarField)>,
    samples: &[EvalContext],
    threshold: f64,
) -> Result<ClosureReport, Error> {
    let bracket = lie_bracket_with(y1, y2, system.rates());
    let report = symmetry_test(system, &bracket, samples, threshold)?;
    let lambda_mismatch = match lambdas {
        None => None,
        Some((l1, l2)) => {
            let expected = system.directional(y1, l2) - system.directional(y2, l1);
            let mut worst = 0.0_f64;
            for (ctx, got) in samples.iter().zip(&report.lambda_at_samples) {
                let want = expected.evaluate(ctx)?;
                worst = worst.max((got - want).abs() / got.abs().max(1.0));
            }
            Some(worst)
        }
    };
    let passed = report.passed() && lambda_mismatch.is_none_or(|m| m <= threshold);
    Ok(ClosureReport { bracket: report, lambda_mismatch, passed })
}

/// `ι_{[Y, X_h^t]} η^E` at `ctx`; zero for every generalized Noether symmetry.
pub fn bracket_contraction(system: &ContactSystem, y: &VectorFieldSpec, ctx: &EvalContext) -> Result<f64, Error> {
    let b = lie_bracket_with(y, &extended_field(system), system.rates());
    Ok(contract_eta_extended(system, &b).evaluate(ctx)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactCheckReport {
    pub residual: f64,
    pub threshold: f64,
    pub holds: bool,
}

/// Contact-level (no `t`) test `ι_{[X_h, Y]} η = 0`, normalized by
/// `max(1, ‖[X_h, Y]‖∞)`. Requires a time-independent `h` and `Y^t = 0`.
pub fn contact_noether_check(
    system: &ContactSystem,
    y: &VectorFieldSpec,
    samples: &[EvalContext],
    threshold: f64,
) -> Result<ContactCheckReport, Error> {
    if !y.yt.is_zero() || y.components().iter().any(|c| c.depends_on(Var::T)) {
        return Err(Error::TimeDependentField);
    }
    let xh = contact_field(system)?;
    let b = lie_bracket_with(&xh, y, system.rates());
    let iota = contract_eta(&b);
    let mut residual = 0.0_f64;
    for ctx in samples {
        let bv = b.evaluate(ctx)?;
        let scale = bv.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        residual = residual.max(iota.evaluate(ctx)?.abs() / scale);
    }
    Ok(ContactCheckReport { residual, threshold, holds: residual <= threshold })
}

/// Flat `key = value` rendering for reports.
pub trait KeyValue {
    fn write_kv(&self, prefix: &str, out: &mut String);

    fn to_kv(&self, prefix: &str) -> String {
        let mut s = String::new();
        self.write_kv(prefix, &mut s);
        s
    }
}

fn kv_table(prefix: &str, name: &str, values: &[f64], out: &mut String) {
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{prefix}{name}[{i}] = {v:e}");
    }
}

impl KeyValue for SymmetryReport {
    fn write_kv(&self, prefix: &str, out: &mut String) {
        let _ = writeln!(out, "{prefix}verdict = {:?}", self.verdict);
        let _ = writeln!(out, "{prefix}residual = {:e}", self.residual);
        let _ = writeln!(out, "{prefix}threshold = {:e}", self.threshold);
        kv_table(prefix, "lambda", &self.lambda_at_samples, out);
    }
}

impl KeyValue for SimilarityReport {
    fn write_kv(&self, prefix: &str, out: &mut String) {
        let _ = writeln!(out, "{prefix}verdict = {:?}", self.verdict);
        let _ = writeln!(out, "{prefix}residual = {:e}", self.residual);
        let _ = writeln!(out, "{prefix}threshold = {:e}", self.threshold);
        kv_table(prefix, "Lambda", &self.lambda_at_samples, out);
    }
}

impl KeyValue for ClosureReport {
    fn write_kv(&self, prefix: &str, out: &mut String) {
        let _ = writeln!(out, "{prefix}passed = {}", self.passed);
        if let Some(m) = self.lambda_mismatch {
            let _ = writeln!(out, "{prefix}lambda_mismatch = {m:e}");
        }
        self.bracket.write_kv(&format!("{prefix}bracket."), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::{ExtendedPoint, Params};
    use crate::sampling::sample_points;
    use crate::systems::{make_harmonic_dissipative, make_kepler, KEPLER_SAMPLE_MARGIN};

    fn sf(s: &str, n: usize) -> ScalarField {
        ScalarField::parse(s, n).unwrap()
    }

    fn kepler_samples(sys: &ContactSystem, seed: u64) -> Vec<EvalContext> {
        sample_points(sys, 100, seed, KEPLER_SAMPLE_MARGIN).unwrap()
    }

    #[test]
    fn conserved_momentum_has_zero_residual() {
        let sys = ContactSystem::new("free", sf("p0^2/2", 1), Params::new()).unwrap();
        let ctx = sys.context(ExtendedPoint::new(vec![0.4], vec![1.1], 0.3, 2.0));
        assert_eq!(dissipation_residual(&sys, &sf("p0", 1), &ctx).unwrap(), 0.0);
    }

    #[test]
    fn kepler_f2_residual_at_reference_point() {
        let k = make_kepler(1.0, 0.25).unwrap();
        let f = (2.0 / 3.0) * sf("q0*p0 + q1*p1 + q2*p2", 3) - ScalarField::var(Var::T, 3) * k.h() - sf("S", 3) / 3.0;
        let ctx = k.context(ExtendedPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], 0.0, 0.0));
        assert!(dissipation_residual(&k, &f, &ctx).unwrap().abs() < 1e-12);
    }

    #[test]
    fn invariant_from_symmetry_examples() {
        let k = make_kepler(1.0, 0.25).unwrap();
        let f = invariant_from_symmetry(&k, &extended_field(&k));
        assert!(kepler_samples(&k, 1).iter().all(|c| f.evaluate(c).unwrap().abs() < 1e-12));

        let mut y = VectorFieldSpec::zero(3);
        y.ys = 4.0 * sf("S", 3);
        let f = invariant_from_symmetry(&k, &y);
        for c in kepler_samples(&k, 2).iter().take(10) {
            assert_eq!(f.evaluate(c).unwrap(), -4.0 * c.point.s);
        }
    }

    #[test]
    fn kepler_scaling_generator_from_q_k() {
        let k = make_kepler(1.0, 0.25).unwrap();
        let q_k = &k.invariant("Q_K").unwrap().field;
        let y = symmetry_from_invariant(&k, q_k, &(3.0 * ScalarField::var(Var::T, 3)));
        let expected = ["2*q0", "2*q1", "2*q2", "-p0", "-p1", "-p2", "S", "3*t"];
        for ctx in kepler_samples(&k, 2) {
            let got = y.evaluate(&ctx).unwrap();
            for (g, e) in got.iter().zip(expected) {
                let want = sf(e, 3).evaluate(&ctx).unwrap();
                assert!((g - want).abs() <= 1e-12 * want.abs().max(1.0), "{e}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn zero_invariant_gives_pure_gauge() {
        let k = make_kepler(1.0, 0.25).unwrap();
        let yt = sf("t^2 + q0", 3);
        let y = symmetry_from_invariant(&k, &ScalarField::zero(3), &yt);
        let gauge = extended_field(&k).scaled(&yt);
        for ctx in kepler_samples(&k, 3).iter().take(20) {
            assert_eq!(y.evaluate(ctx).unwrap(), gauge.evaluate(ctx).unwrap());
        }
    }

    #[test]
    fn symmetry_and_similarity_verdicts() {
        let k = make_kepler(1.0, 0.25).unwrap();
        let samples = kepler_samples(&k, 5);
        let zero = symmetry_test(&k, &VectorFieldSpec::zero(3), &samples, EXACT_THRESHOLD).unwrap();
        assert!(zero.passed() && zero.lambda_at_samples.iter().all(|l| *l == 0.0));

        let hk_reeb = VectorFieldSpec::reeb(3).scaled(k.h());
        assert_eq!(symmetry_test(&k, &hk_reeb, &samples, EXACT_THRESHOLD).unwrap().verdict, SymmetryVerdict::NotSymmetry);
        let x = extended_field(&k);
        let sim = similarity_test(&x, &hk_reeb, &samples, EXACT_THRESHOLD).unwrap();
        assert_eq!(sim.verdict, SimilarityVerdict::DynamicalSymmetry);
        let own = similarity_test(&x, &x, &samples, EXACT_THRESHOLD).unwrap();
        assert_eq!(own.verdict, SimilarityVerdict::DynamicalSymmetry);
    }

    #[test]
    fn degenerate_similarity_point() {
        let sys = ContactSystem::new("osc", sf("p0^2/2 + q0^2/2", 1), Params::new()).unwrap();
        let x = contact_field(&sys).unwrap();
        let ctx = sys.context(ExtendedPoint::origin(1));
        let err = similarity_test(&x, &x, &[ctx], EXACT_THRESHOLD).unwrap_err();
        assert!(matches!(err, Error::DegeneratePoint { index: 0, .. }));
    }

    #[test]
    fn ratio_guards_small_denominators() {
        let f = sf("q0", 1);
        let r = ratio_invariant(&f, &f);
        let ctx = EvalContext::new(ExtendedPoint::new(vec![0.5], vec![0.0], 0.0, 0.0), Params::new());
        assert_eq!(r.evaluate(&ctx).unwrap(), 1.0);
        let ctx0 = EvalContext::new(ExtendedPoint::origin(1), Params::new());
        assert!(matches!(r.evaluate(&ctx0), Err(Error::DivisionNearZero { .. })));
    }

    #[test]
    fn closure_of_oscillator_symmetries() {
        let sys = make_harmonic_dissipative(1.0, &ScalarField::constant(1.0, 1), 0.0).unwrap();
        let zero = ScalarField::zero(1);
        let f0 = &sys.invariant("F0").unwrap().field;
        let lr = &sys.invariant("F_LR").unwrap().field;
        let y1 = symmetry_from_invariant(&sys, f0, &zero);
        let y2 = symmetry_from_invariant(&sys, lr, &zero);
        let (l1, l2) = (lambda_field(&sys, f0, &zero), lambda_field(&sys, lr, &zero));
        let samples = sample_points(&sys, 100, 8, 0.0).unwrap();
        let report = closure_check(&sys, &y1, &y2, Some((&l1, &l2)), &samples, 1e-8).unwrap();
        assert!(report.passed, "{report:?}");
        let same = closure_check(&sys, &y1, &y1, None, &samples, 1e-8).unwrap();
        assert!(same.passed && same.bracket.lambda_at_samples.iter().all(|l| l.abs() < 1e-12));
        let gauge = symmetry_from_invariant(&sys, &zero, &sf("t^2", 1));
        assert!(closure_check(&sys, &y1, &gauge, None, &samples, 1e-8).unwrap().passed);
    }

    #[test]
    fn contact_level_scaling_is_not_a_symmetry() {
        let k = make_kepler(1.0, 0.25).unwrap();
        let mut y = VectorFieldSpec::zero(3);
        for a in 0..3 {
            y.yq[a] = 2.0 * ScalarField::var(Var::Q(a), 3);
            y.yp[a] = -ScalarField::var(Var::P(a), 3);
        }
        y.ys = sf("S", 3);
        let report = contact_noether_check(&k, &y, &kepler_samples(&k, 6), EXACT_THRESHOLD).unwrap();
        assert!(!report.holds);
        // while the Reeb-scaled energy is a contact-level symmetry
        let r = VectorFieldSpec::reeb(3).scaled(k.h());
        assert!(contact_noether_check(&k, &r, &kepler_samples(&k, 6), EXACT_THRESHOLD).unwrap().holds);
    }

    #[test]
    fn key_value_rendering() {
        let r = SymmetryReport { lambda_at_samples: vec![0.5, -1.0], residual: 1e-12, threshold: 1e-9, verdict: SymmetryVerdict::GeneralizedNoether };
        let kv = r.to_kv("sym.");
        assert!(kv.contains("sym.verdict = GeneralizedNoether\n"));
        assert!(kv.contains("sym.lambda[1] = -1e0\n"));
    }
}
