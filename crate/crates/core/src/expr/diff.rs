use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::{add, call, div, konst, mul, neg, pow, sub, Expr, Intrinsic, Node, ScalarField, Var};

/// Time derivatives of parameters that stand for functions of `t`
/// (auxiliary solutions such as an Ermakov function and its derivative).
#[derive(Debug, Clone, Default)]
pub struct ParamRates {
    rates: BTreeMap<String, ScalarField>,
}

impl ParamRates {
    pub fn insert(&mut self, name: &str, rate: ScalarField) {
        self.rates.insert(name.to_owned(), rate);
    }

    pub fn get(&self, name: &str) -> Option<&ScalarField> {
        self.rates.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rates.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn merge(&mut self, other: &ParamRates) {
        for (k, v) in &other.rates {
            self.rates.insert(k.clone(), v.clone());
        }
    }
}

pub(super) struct Differentiator<'a> {
    var: Var,
    rates: &'a ParamRates,
    memo: HashMap<usize, Expr>,
}

impl<'a> Differentiator<'a> {
    pub(super) fn new(var: Var, rates: &'a ParamRates) -> Self {
        Self { var, rates, memo: HashMap::new() }
    }

    pub(super) fn diff(&mut self, node: &Expr) -> Expr {
        let key = Arc::as_ptr(node) as usize;
        if let Some(done) = self.memo.get(&key) {
            return done.clone();
        }
        let d = self.rule(node);
        self.memo.insert(key, d.clone());
        d
    }

    fn rule(&mut self, node: &Expr) -> Expr {
        match &**node {
            Node::Const(_) => konst(0.0),
            Node::Var(v) => konst(if *v == self.var { 1.0 } else { 0.0 }),
            Node::Param(name) => match (self.var, self.rates.get(name)) {
                (Var::T, Some(rate)) => rate.expr().clone(),
                _ => konst(0.0),
            },
            Node::Neg(a) => neg(self.diff(a)),
            Node::Add(a, b) => add(self.diff(a), self.diff(b)),
            Node::Sub(a, b) => sub(self.diff(a), self.diff(b)),
            Node::Mul(a, b) => {
                let da = self.diff(a);
                let db = self.diff(b);
                add(mul(da, b.clone()), mul(a.clone(), db))
            }
            Node::Div(a, b) => {
                let da = self.diff(a);
                let db = self.diff(b);
                // (a' b - a b') / b^2
                let num = sub(mul(da, b.clone()), mul(a.clone(), db));
                div(num, pow(b.clone(), konst(2.0)))
            }
            Node::Pow(u, v) => {
                let du = self.diff(u);
                let dv = self.diff(v);
                if dv.as_const() == Some(0.0) {
                    let reduced = match v.as_const() {
                        Some(c) => konst(c - 1.0),
                        None => sub(v.clone(), konst(1.0)),
                    };
                    mul(mul(v.clone(), pow(u.clone(), reduced)), du)
                } else {
                    // u^v (v' ln u + v u' / u)
                    let log_term = mul(dv, call(Intrinsic::Ln, u.clone()));
                    let base_term = div(mul(v.clone(), du), u.clone());
                    mul(node.clone(), add(log_term, base_term))
                }
            }
            Node::Call(f, a) => {
                let da = self.diff(a);
                if da.as_const() == Some(0.0) {
                    return konst(0.0);
                }
                let outer = match f {
                    Intrinsic::Sin => call(Intrinsic::Cos, a.clone()),
                    Intrinsic::Cos => neg(call(Intrinsic::Sin, a.clone())),
                    Intrinsic::Exp => node.clone(),
                    Intrinsic::Ln => div(konst(1.0), a.clone()),
                    Intrinsic::Sqrt => div(konst(0.5), node.clone()),
                    Intrinsic::Abs => div(a.clone(), node.clone()),
                };
                mul(outer, da)
            }
        }
    }
}
