//! Extended contact form `η^E = dS - p_a dq^a + h dt`, its exterior
//! derivative `dη^E = dq^a ∧ dp_a + dh ∧ dt`, interior products, Lie
//! brackets and Lie derivatives, plus the Poisson and Jacobi brackets.
//!
//! Vector fields are kept symbolic; one-forms are returned as values at a
//! point. Component order everywhere is `q, p, S, t`.

use std::fmt;

use serde::Serialize;

use crate::dynamics;
use crate::error::Error;
use crate::expr::{unbound_params, EvalError, ParamRates, ScalarField, Var};
use crate::point::{EvalContext, ExtendedPoint, Params};
use crate::sampling::SampleBox;
use crate::systems::TrackedInvariant;

/// Admissible region of a system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DomainGuard {
    /// Exclude `‖q‖ < margin` (central-force singularity).
    pub exclude_origin: bool,
    /// Require `t > 0` (fractional powers of time).
    pub positive_time: bool,
}

impl DomainGuard {
    pub fn check(&self, point: &ExtendedPoint, margin: f64) -> Result<(), String> {
        if !point.is_finite() {
            return Err("non-finite state".into());
        }
        if self.exclude_origin && point.radius() < margin {
            return Err(format!("|q| = {:e} is below the guard margin {:e}", point.radius(), margin));
        }
        if self.positive_time && point.t <= 0.0 {
            return Err(format!("t = {} is not positive", point.t));
        }
        Ok(())
    }
}

/// A contact Hamiltonian system on the extended phase space.
#[derive(Debug, Clone)]
pub struct ContactSystem {
    name: String,
    h: ScalarField,
    params: Params,
    guard: DomainGuard,
    rates: ParamRates,
    h_q: Vec<ScalarField>,
    h_p: Vec<ScalarField>,
    h_s: ScalarField,
    h_t: ScalarField,
    invariants: Vec<TrackedInvariant>,
    sample_box: SampleBox,
}

impl ContactSystem {
    /// Builds a system; every free parameter of `h` must be bound in `params`.
    pub fn new(name: &str, h: ScalarField, params: Params) -> Result<Self, Error> {
        let missing = unbound_params(&h, &params);
        if let Some(first) = missing.first() {
            return Err(EvalError::UnboundParameter(first.clone()).into());
        }
        let n = h.dim();
        let mut sys = Self {
            name: name.to_owned(),
            h_q: Vec::new(),
            h_p: Vec::new(),
            h_s: ScalarField::zero(n),
            h_t: ScalarField::zero(n),
            h,
            params,
            guard: DomainGuard::default(),
            rates: ParamRates::default(),
            invariants: Vec::new(),
            sample_box: SampleBox::new(n),
        };
        sys.refresh_partials();
        Ok(sys)
    }

    fn refresh_partials(&mut self) {
        let n = self.n();
        self.h_q = (0..n).map(|a| self.partial(&self.h, Var::Q(a))).collect();
        self.h_p = (0..n).map(|a| self.partial(&self.h, Var::P(a))).collect();
        self.h_s = self.partial(&self.h, Var::S);
        self.h_t = self.partial(&self.h, Var::T);
    }

    pub fn with_guard(mut self, guard: DomainGuard) -> Self {
        self.guard = guard;
        self
    }

    /// Declares time-dependent parameters; they are bound per sample and
    /// differentiated in `t` through the given rates.
    pub fn with_rates(mut self, rates: ParamRates) -> Self {
        self.rates = rates;
        self.refresh_partials();
        self
    }

    pub fn with_invariant(mut self, invariant: TrackedInvariant) -> Self {
        self.invariants.retain(|i| i.label != invariant.label);
        self.invariants.push(invariant);
        self
    }

    pub fn with_sample_box(mut self, sample_box: SampleBox) -> Self {
        self.sample_box = sample_box;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.h.dim()
    }

    pub fn h(&self) -> &ScalarField {
        &self.h
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn guard(&self) -> DomainGuard {
        self.guard
    }

    pub fn rates(&self) -> &ParamRates {
        &self.rates
    }

    pub fn invariants(&self) -> &[TrackedInvariant] {
        &self.invariants
    }

    pub fn invariant(&self, label: &str) -> Option<&TrackedInvariant> {
        self.invariants.iter().find(|i| i.label == label)
    }

    pub fn sample_box(&self) -> &SampleBox {
        &self.sample_box
    }

    pub fn dh_dq(&self, a: usize) -> &ScalarField {
        &self.h_q[a]
    }

    pub fn dh_dp(&self, a: usize) -> &ScalarField {
        &self.h_p[a]
    }

    /// `R(h) = ∂h/∂S`.
    pub fn reeb_h(&self) -> &ScalarField {
        &self.h_s
    }

    pub fn dh_dt(&self) -> &ScalarField {
        &self.h_t
    }

    /// Partial derivative honoring the system's time-dependent parameters.
    pub fn partial(&self, field: &ScalarField, var: Var) -> ScalarField {
        field.partial_with(var, &self.rates)
    }

    pub fn context(&self, point: ExtendedPoint) -> EvalContext {
        EvalContext::new(point, self.params.clone())
    }

    pub fn admissible(&self, point: &ExtendedPoint, margin: f64) -> Result<(), String> {
        if point.dim() != self.n() {
            return Err(format!("point has dimension {}, system has {}", point.dim(), self.n()));
        }
        self.guard.check(point, margin)
    }

    /// `Y(F)`: the derivative of `F` along `Y`.
    pub fn directional(&self, y: &VectorFieldSpec, field: &ScalarField) -> ScalarField {
        y.apply(field, &self.rates)
    }
}

/// Components of a vector field `Y^a ∂_{q^a} + Y_a ∂_{p_a} + Y^S ∂_S + Y^t ∂_t`.
#[derive(Debug, Clone)]
pub struct VectorFieldSpec {
    pub yq: Vec<ScalarField>,
    pub yp: Vec<ScalarField>,
    pub ys: ScalarField,
    pub yt: ScalarField,
}

impl VectorFieldSpec {
    pub fn new(yq: Vec<ScalarField>, yp: Vec<ScalarField>, ys: ScalarField, yt: ScalarField) -> Self {
        assert_eq!(yq.len(), yp.len(), "q and p blocks must have equal length");
        Self { yq, yp, ys, yt }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![ScalarField::zero(n); n], vec![ScalarField::zero(n); n], ScalarField::zero(n), ScalarField::zero(n))
    }

    /// The Reeb field `∂_S`.
    pub fn reeb(n: usize) -> Self {
        let mut y = Self::zero(n);
        y.ys = ScalarField::constant(1.0, n);
        y
    }

    /// `∂_t`.
    pub fn time_translation(n: usize) -> Self {
        let mut y = Self::zero(n);
        y.yt = ScalarField::constant(1.0, n);
        y
    }

    /// Builds a field from its `2n + 2` components in `q, p, S, t` order.
    pub fn from_components(n: usize, mut comps: Vec<ScalarField>) -> Self {
        assert_eq!(comps.len(), 2 * n + 2);
        let yt = comps.pop().unwrap();
        let ys = comps.pop().unwrap();
        let yp = comps.split_off(n);
        Self::new(comps, yp, ys, yt)
    }

    pub fn dim(&self) -> usize {
        self.yq.len()
    }

    pub fn components(&self) -> Vec<&ScalarField> {
        self.yq.iter().chain(&self.yp).chain([&self.ys, &self.yt]).collect()
    }

    pub fn component(&self, var: Var) -> &ScalarField {
        match var {
            Var::Q(a) => &self.yq[a],
            Var::P(a) => &self.yp[a],
            Var::S => &self.ys,
            Var::T => &self.yt,
        }
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::from_components(self.dim(), self.components().into_iter().map(f).collect())
    }

    pub fn zip(&self, other: &Self, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        let comps = self.components().into_iter().zip(other.components()).map(|(a, b)| f(a, b)).collect();
        Self::from_components(self.dim(), comps)
    }

    pub fn scaled(&self, factor: &ScalarField) -> Self {
        self.map(|c| c * factor)
    }

    pub fn plus(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<Vec<f64>, EvalError> {
        self.components().into_iter().map(|c| c.evaluate(ctx)).collect()
    }

    /// `Y(F) = Σ_i Y^i ∂_i F`.
    pub fn apply(&self, field: &ScalarField, rates: &ParamRates) -> ScalarField {
        Var::all(self.dim())
            .into_iter()
            .map(|v| self.component(v) * field.partial_with(v, rates))
            .sum::<ScalarField>()
    }

    /// True when every component folded to the literal zero.
    pub fn is_identically_zero(&self) -> bool {
        self.components().iter().all(|c| c.is_zero())
    }
}

impl fmt::Display for VectorFieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        let mut first = true;
        for (var, comp) in Var::all(n).into_iter().zip(self.components()) {
            if comp.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({comp}) d/d{var}")?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Coefficients of a one-form on `dq, dp, dS, dt` at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneFormValue {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    #[serde(rename = "dS")]
    pub ds: f64,
    pub dt: f64,
}

impl OneFormValue {
    pub fn zeros(n: usize) -> Self {
        Self { dq: vec![0.0; n], dp: vec![0.0; n], ds: 0.0, dt: 0.0 }
    }

    pub fn from_components(n: usize, comps: &[f64]) -> Self {
        assert_eq!(comps.len(), 2 * n + 2);
        Self { dq: comps[..n].to_vec(), dp: comps[n..2 * n].to_vec(), ds: comps[2 * n], dt: comps[2 * n + 1] }
    }

    pub fn dim(&self) -> usize {
        self.dq.len()
    }

    pub fn components(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.dim() + 2);
        out.extend(&self.dq);
        out.extend(&self.dp);
        out.push(self.ds);
        out.push(self.dt);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.components().into_iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::from_components(self.dim(), &self.components().iter().map(|c| c * k).collect::<Vec<_>>())
    }

    pub fn minus(&self, other: &Self) -> Self {
        let c: Vec<f64> = self.components().iter().zip(other.components()).map(|(a, b)| a - b).collect();
        Self::from_components(self.dim(), &c)
    }

    /// Reads `λ` from the `dS` slot and measures how far `self` is from
    /// `λ · reference` on the remaining components, normalized by
    /// `max(1, ‖self‖∞)`. The reference must have a nonzero `dS` slot.
    pub fn proportionality(&self, reference: &OneFormValue) -> (f64, f64) {
        let lambda = self.ds / reference.ds;
        let n = self.dim();
        let mine = self.components();
        let theirs = reference.components();
        let mismatch = (0..2 * n + 2)
            .filter(|&i| i != 2 * n)
            .map(|i| (mine[i] - lambda * theirs[i]).abs())
            .fold(0.0, f64::max);
        (lambda, mismatch / self.max_abs().max(1.0))
    }
}

/// A symbolic one-form, evaluated pointwise on demand.
#[derive(Debug, Clone)]
pub struct OneFormField {
    comps: Vec<ScalarField>,
}

impl OneFormField {
    pub fn dim(&self) -> usize {
        (self.comps.len() - 2) / 2
    }

    pub fn evaluate(&self, ctx: &EvalContext) -> Result<OneFormValue, EvalError> {
        let values: Vec<f64> = self.comps.iter().map(|c| c.evaluate(ctx)).collect::<Result<_, _>>()?;
        Ok(OneFormValue::from_components(self.dim(), &values))
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }
}

fn p_var(a: usize, n: usize) -> ScalarField {
    ScalarField::var(Var::P(a), n)
}

/// Symbolic `η^E`.
pub fn eta_extended_field(system: &ContactSystem) -> OneFormField {
    let n = system.n();
    let mut comps: Vec<ScalarField> = (0..n).map(|a| -p_var(a, n)).collect();
    comps.extend((0..n).map(|_| ScalarField::zero(n)));
    comps.push(ScalarField::constant(1.0, n));
    comps.push(system.h().clone());
    OneFormField { comps }
}

/// `η^E` at a point: `dq = -p`, `dp = 0`, `dS = 1`, `dt = h`.
pub fn eta_extended(system: &ContactSystem, ctx: &EvalContext) -> Result<OneFormValue, EvalError> {
    let n = system.n();
    Ok(OneFormValue {
        dq: ctx.point.p.iter().map(|p| -p).collect(),
        dp: vec![0.0; n],
        ds: 1.0,
        dt: system.h().evaluate(ctx)?,
    })
}

/// The contact form `η = dS - p_a dq^a` at a point (no `dt` part).
pub fn eta_contact(point: &ExtendedPoint) -> OneFormValue {
    OneFormValue {
        dq: point.p.iter().map(|p| -p).collect(),
        dp: vec![0.0; point.dim()],
        ds: 1.0,
        dt: 0.0,
    }
}

/// Symbolic `ι_Y dη^E`.
pub fn contract_d_eta_extended_field(system: &ContactSystem, y: &VectorFieldSpec) -> OneFormField {
    let n = system.n();
    let mut comps = Vec::with_capacity(2 * n + 2);
    for a in 0..n {
        comps.push(-&y.yp[a] - system.dh_dq(a) * &y.yt);
    }
    for a in 0..n {
        comps.push(&y.yq[a] - system.dh_dp(a) * &y.yt);
    }
    comps.push(-(system.reeb_h() * &y.yt));
    let mut dt: ScalarField = (0..n)
        .map(|a| &y.yq[a] * system.dh_dq(a) + &y.yp[a] * system.dh_dp(a))
        .sum();
    dt = dt + &y.ys * system.reeb_h();
    comps.push(dt);
    OneFormField { comps }
}

/// `ι_Y dη^E` at a point.
pub fn contract_d_eta_extended(
    system: &ContactSystem,
    y: &VectorFieldSpec,
    ctx: &EvalContext,
) -> Result<OneFormValue, EvalError> {
    contract_d_eta_extended_field(system, y).evaluate(ctx)
}

/// Symbolic `ι_Y η^E = Y^S - p_a Y^a + h Y^t`.
pub fn contract_eta_extended(system: &ContactSystem, y: &VectorFieldSpec) -> ScalarField {
    contract_eta(y) + system.h() * &y.yt
}

/// Symbolic `ι_Y η = Y^S - p_a Y^a` for the contact form.
pub fn contract_eta(y: &VectorFieldSpec) -> ScalarField {
    let n = y.dim();
    let pq: ScalarField = (0..n).map(|a| p_var(a, n) * &y.yq[a]).sum();
    &y.ys - pq
}

/// Symbolic exterior derivative of a scalar field.
pub fn differential_field(field: &ScalarField, rates: &ParamRates) -> OneFormField {
    let n = field.dim();
    OneFormField { comps: Var::all(n).into_iter().map(|v| field.partial_with(v, rates)).collect() }
}

/// Symbolic `L_Y η^E = ι_Y dη^E + d(ι_Y η^E)`.
pub fn lie_derivative_eta_field(system: &ContactSystem, y: &VectorFieldSpec) -> OneFormField {
    let contraction = contract_d_eta_extended_field(system, y);
    let exact = differential_field(&contract_eta_extended(system, y), system.rates());
    let comps = contraction.comps.iter().zip(&exact.comps).map(|(a, b)| a + b).collect();
    OneFormField { comps }
}

/// `L_Y η^E` at a point.
pub fn lie_derivative_eta(
    system: &ContactSystem,
    y: &VectorFieldSpec,
    ctx: &EvalContext,
) -> Result<OneFormValue, EvalError> {
    lie_derivative_eta_field(system, y).evaluate(ctx)
}

/// `[Y, X] = (Y·∇)X - (X·∇)Y` with parameters treated as constants.
pub fn lie_bracket(y: &VectorFieldSpec, x: &VectorFieldSpec) -> VectorFieldSpec {
    lie_bracket_with(y, x, &ParamRates::default())
}

/// `[Y, X]` where `rates` gives the time derivatives of time-dependent parameters.
pub fn lie_bracket_with(y: &VectorFieldSpec, x: &VectorFieldSpec, rates: &ParamRates) -> VectorFieldSpec {
    assert_eq!(y.dim(), x.dim(), "vector fields must share a dimension");
    x.zip(y, |xi, yi| y.apply(xi, rates) - x.apply(yi, rates))
}

/// `{F, G}_P = Σ_a (∂F/∂q^a ∂G/∂p_a - ∂F/∂p_a ∂G/∂q^a)`.
pub fn poisson_bracket(f: &ScalarField, g: &ScalarField) -> ScalarField {
    let n = f.dim().max(g.dim());
    (0..n)
        .map(|a| f.partial(Var::Q(a)) * g.partial(Var::P(a)) - f.partial(Var::P(a)) * g.partial(Var::Q(a)))
        .sum()
}

/// `{F, G}_J = ι_{[X_F, X_G]} η` with `X_F`, `X_G` the contact Hamiltonian
/// fields of `F` and `G`.
pub fn jacobi_bracket(f: &ScalarField, g: &ScalarField) -> Result<ScalarField, Error> {
    if f.depends_on(Var::T) || g.depends_on(Var::T) {
        return Err(Error::TimeDependentField);
    }
    let xf = dynamics::hamiltonian_vector_field(f, &ScalarField::zero(f.dim()));
    let xg = dynamics::hamiltonian_vector_field(g, &ScalarField::zero(g.dim()));
    Ok(contract_eta(&lie_bracket(&xf, &xg)))
}
