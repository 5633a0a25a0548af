//! Points of the extended contact phase space and evaluation contexts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A state `(q, p, S, t)` on the extended contact phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(rename = "S")]
    pub s: f64,
    pub t: f64,
}

impl ExtendedPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>, s: f64, t: f64) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same length");
        Self { q, p, s, t }
    }

    pub fn origin(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n], 0.0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite()) && self.s.is_finite() && self.t.is_finite()
    }

    /// Euclidean norm of the position vector.
    pub fn radius(&self) -> f64 {
        self.q.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn q_dot_p(&self) -> f64 {
        self.q.iter().zip(&self.p).map(|(a, b)| a * b).sum()
    }
}

/// Named real parameter bindings (`m`, `eps`, `g0`, auxiliary values, ...).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        if let Some(slot) = self.0.get_mut(name) {
            *slot = value;
        } else {
            self.0.insert(name.to_owned(), value);
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn extend(&mut self, other: &Params) {
        for (k, v) in &other.0 {
            self.set(k, *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<const N: usize> From<[(&str, f64); N]> for Params {
    fn from(items: [(&str, f64); N]) -> Self {
        let mut params = Params::new();
        for (k, v) in items {
            params.set(k, v);
        }
        params
    }
}

/// A point together with the parameter bindings needed to evaluate fields there.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub point: ExtendedPoint,
    pub params: Params,
}

impl EvalContext {
    pub fn new(point: ExtendedPoint, params: Params) -> Self {
        Self { point, params }
    }
}
