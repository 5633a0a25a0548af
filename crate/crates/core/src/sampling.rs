//! Seeded sample points over per-system boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::geometry::ContactSystem;
use crate::point::{EvalContext, ExtendedPoint};

/// Closed-open uniform ranges for each coordinate block, plus ranges for
/// time-dependent parameters bound per sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBox {
    pub n: usize,
    pub q: (f64, f64),
    pub p: (f64, f64),
    pub s: (f64, f64),
    pub t: (f64, f64),
    pub params: Vec<(String, f64, f64)>,
}

impl SampleBox {
    pub fn new(n: usize) -> Self {
        Self { n, q: (-2.0, 2.0), p: (-2.0, 2.0), s: (-2.0, 2.0), t: (0.0, 5.0), params: Vec::new() }
    }

    pub fn with_t(mut self, lo: f64, hi: f64) -> Self {
        self.t = (lo, hi);
        self
    }

    pub fn with_q(mut self, lo: f64, hi: f64) -> Self {
        self.q = (lo, hi);
        self
    }

    pub fn with_p(mut self, lo: f64, hi: f64) -> Self {
        self.p = (lo, hi);
        self
    }

    pub fn with_param(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.params.retain(|(k, _, _)| k != name);
        self.params.push((name.to_owned(), lo, hi));
        self
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws `count` admissible contexts for `system` from its sample box.
/// Points where the guard fails or `h` cannot be evaluated are rejected.
pub fn sample_points(system: &ContactSystem, count: usize, seed: u64, margin: f64) -> Result<Vec<EvalContext>, Error> {
    sample_points_in(system, system.sample_box(), count, seed, margin)
}

pub fn sample_points_in(
    system: &ContactSystem,
    bx: &SampleBox,
    count: usize,
    seed: u64,
    margin: f64,
) -> Result<Vec<EvalContext>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = system.n();
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(1000).max(1000);
    for _ in 0..max_attempts {
        if out.len() == count {
            break;
        }
        let q = (0..n).map(|_| draw(&mut rng, bx.q)).collect();
        let p = (0..n).map(|_| draw(&mut rng, bx.p)).collect();
        let s = draw(&mut rng, bx.s);
        let t = draw(&mut rng, bx.t);
        let point = ExtendedPoint::new(q, p, s, t);
        let mut ctx = system.context(point);
        for (name, lo, hi) in &bx.params {
            let v = draw(&mut rng, (*lo, *hi));
            ctx.params.set(name, v);
        }
        if system.admissible(&ctx.point, margin).is_err() {
            continue;
        }
        if system.h().evaluate(&ctx).is_err() {
            continue;
        }
        out.push(ctx);
    }
    if out.len() < count {
        return Err(Error::SamplingExhausted { wanted: count, got: out.len() });
    }
    Ok(out)
}
