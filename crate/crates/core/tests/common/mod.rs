//! Independent reference computations and random instance generators shared
//! by the integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use ermrer::measure::{AtomDistribution, ReferenceMeasure};
use ermrer::risk::EmpiricalRisk;

/// `log Σ_i q_i exp(t L_i)` over atoms with `q_i > 0`, shifted by the largest exponent.
pub fn log_partition(q: &[f64], l: &[f64], t: f64) -> f64 {
    let mut exps = Vec::with_capacity(q.len());
    for (&w, &x) in q.iter().zip(l) {
        if w <= 0.0 {
            continue;
        }
        if x.is_infinite() {
            if t > 0.0 {
                return f64::INFINITY;
            }
            if t == 0.0 {
                exps.push(w.ln());
            }
            continue;
        }
        exps.push(w.ln() + t * x);
    }
    let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + exps.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

/// Gibbs weights `q_i exp(−L_i/λ − K(−1/λ))`.
pub fn posterior(q: &[f64], l: &[f64], lambda: f64) -> Vec<f64> {
    let k = log_partition(q, l, -1.0 / lambda);
    q.iter()
        .zip(l)
        .map(|(&w, &x)| if w > 0.0 && x.is_finite() { (w.ln() - x / lambda - k).exp() } else { 0.0 })
        .collect()
}

/// `Σ_i p_i log(p_i/q_i)` for arbitrary nonnegative `q`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

pub fn expectation(p: &[f64], l: &[f64]) -> f64 {
    p.iter().zip(l).filter(|(&a, _)| a > 0.0).map(|(&a, &x)| a * x).sum()
}

pub fn variance(p: &[f64], l: &[f64]) -> f64 {
    let m = expectation(p, l);
    p.iter().zip(l).filter(|(&a, _)| a > 0.0).map(|(&a, &x)| a * (x - m) * (x - m)).sum()
}

/// Two distinct risk values among atoms of positive weight.
pub fn separable(q: &[f64], l: &[f64]) -> bool {
    let mut vals = q.iter().zip(l).filter(|(&w, _)| w > 0.0).map(|(_, &x)| x);
    match vals.next() {
        Some(first) => vals.any(|x| x != first),
        None => false,
    }
}

/// Tilted probabilities at exponent `t`.
pub fn tilted(q: &[f64], l: &[f64], t: f64) -> Vec<f64> {
    let k = log_partition(q, l, t);
    q.iter()
        .zip(l)
        .map(|(&w, &x)| if w > 0.0 { (w.ln() + t * x - k).exp() } else { 0.0 })
        .collect()
}

/// Increments `K(t ± h) − K(t)` computed as `log1p(Σ p_i expm1(±h L_i))`,
/// then combined into the central second difference.
pub fn second_difference(q: &[f64], l: &[f64], t: f64, h: f64) -> f64 {
    let p = tilted(q, l, t);
    let inc = |s: f64| -> f64 {
        p.iter()
            .zip(l)
            .map(|(&a, &x)| a * (s * h * x).exp_m1())
            .sum::<f64>()
            .ln_1p()
    };
    (inc(1.0) + inc(-1.0)) / (h * h)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (a.ln() + (b.ln() - a.ln()) * j as f64 / (n - 1) as f64).exp())
        .collect()
}

/// A random finite instance: reference weights, risks in `[0, 1)` and a factor.
#[derive(Debug, Clone)]
pub struct Instance {
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub lambda: f64,
    pub probability: bool,
}

impl Instance {
    pub fn measure(&self) -> ReferenceMeasure {
        if self.probability {
            ReferenceMeasure::probability(self.q.clone()).expect("normalized weights")
        } else {
            ReferenceMeasure::custom(self.q.clone()).expect("positive weights")
        }
    }

    pub fn risk(&self) -> EmpiricalRisk {
        EmpiricalRisk::new(self.l.clone()).expect("nonnegative risks")
    }
}

pub struct Gen {
    pub rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * self.rng.random::<f64>()).exp()
    }

    pub fn weights(&mut self, m: usize, probability: bool) -> Vec<f64> {
        let w: Vec<f64> = (0..m).map(|_| self.rng.random_range(0.05..2.0)).collect();
        if probability {
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        } else {
            w
        }
    }

    pub fn instance(&mut self, max_atoms: usize, lam: (f64, f64), probability: Option<bool>) -> Instance {
        let m = self.rng.random_range(2..=max_atoms);
        let probability = probability.unwrap_or_else(|| self.rng.random::<bool>());
        let q = self.weights(m, probability);
        let l = (0..m).map(|_| self.rng.random::<f64>()).collect();
        let lambda = self.log_uniform(lam.0, lam.1);
        Instance {
            q,
            l,
            lambda,
            probability,
        }
    }

    /// Instance whose unique minimizer sits at least 0.1 below every other risk.
    pub fn gapped(&mut self, lam: (f64, f64)) -> Instance {
        let mut inst = self.instance(8, lam, None);
        let i0 = self.rng.random_range(0..inst.l.len());
        let lo = inst.l[i0];
        for j in 0..inst.l.len() {
            if j != i0 && inst.l[j] < lo + 0.1 {
                inst.l[j] = lo + 0.1 + 0.9 * self.rng.random::<f64>();
            }
        }
        inst
    }

    pub fn dirichlet(&mut self, m: usize, alpha: f64) -> Vec<f64> {
        self.dirichlet_with(&vec![alpha; m])
    }

    /// Zero entries of `alpha` stay zero.
    pub fn dirichlet_with(&mut self, alpha: &[f64]) -> Vec<f64> {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| if a > 0.0 { Gamma::new(a, 1.0).expect("positive shape").sample(&mut self.rng) } else { 0.0 })
            .collect();
        let s: f64 = draws.iter().sum();
        draws.iter().map(|d| d / s).collect()
    }

    pub fn descending(&mut self, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let mut g: Vec<f64> = (0..n).map(|_| self.log_uniform(lo, hi)).collect();
        g.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        g.dedup();
        g
    }
}

pub fn dist(p: &[f64]) -> AtomDistribution {
    AtomDistribution::from_weights(p).expect("valid distribution")
}
