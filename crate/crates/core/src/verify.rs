//! Randomized identity and inequality battery behind `ermrer verify`.
//!
//! Every check draws small random instances from its own ChaCha stream, so a
//! check's outcome depends only on the seed, not on which other checks run.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generalization::{
    barycenter, generalization_error, sensitivity, sensitivity_bound, sensitivity_identity_check, DatasetPrior,
};
use crate::gibbs::{
    agadir_check, compose, constrained_solution, jeffrey_gap, limit_distribution, objective_value, solve_ermrer,
    solve_type2, type2_transformed_risk,
};
use crate::measure::{generalized_relative_entropy, quadrature_lebesgue, AtomDistribution, ReferenceMeasure};
use crate::optimality::{analyze, concentration_profile, solve_delta_epsilon};
use crate::partition::{
    cgf, countable_family, cumulants, feasible_set, is_feasible, log_partition, subgaussian_beta, FeasibleShape,
};
use crate::risk::{is_separable, EmpiricalRisk};

pub const DEFAULT_SEED: u64 = 20240601;

/// Deliberate corruption of one check, used to confirm the battery can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the right-hand side of the risk gap identity.
    JeffreySign,
}

impl std::str::FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jeffrey-sign" => Ok(Fault::JeffreySign),
            other => Err(Error::InvalidArgument(format!("unknown fault {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Restrict to these check names; `Some(empty)` runs nothing.
    pub only: Option<Vec<String>>,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub claim: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// First failure, or a summary when everything passed.
    pub detail: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(CheckResult::passed)
    }

    pub fn table(&self) -> String {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for r in &self.results {
            let status = if r.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{status}  {:width$}  {:>3}/{:<3}  {}  [{}]",
                r.name,
                r.trials - r.failures,
                r.trials,
                r.claim,
                r.detail
            );
        }
        let passed = self.results.iter().filter(|r| r.passed()).count();
        let _ = writeln!(out, "{passed}/{} checks passed (seed {})", self.results.len(), self.seed);
        out
    }
}

/// Accumulates trial outcomes for one check.
struct Tally {
    trials: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            trials: 0,
            failures: 0,
            first: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.trials += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(detail());
            }
        }
    }

    fn record_result(&mut self, r: Result<bool>, detail: impl FnOnce() -> String) {
        match r {
            Ok(ok) => self.record(ok, detail),
            Err(e) => self.record(false, || format!("{}: {e}", detail())),
        }
    }
}

struct Instance {
    q: ReferenceMeasure,
    risk: EmpiricalRisk,
    lambda: f64,
}

impl std::fmt::Display for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q={:?} L={:?} lambda={}", self.q.weights(), self.risk.values(), self.lambda)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize, probability: bool) -> ReferenceMeasure {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    if probability {
        let s: f64 = w.iter().sum();
        ReferenceMeasure::probability(w.iter().map(|x| x / s).collect()).expect("normalized weights")
    } else {
        ReferenceMeasure::custom(w).expect("positive weights")
    }
}

fn random_instance(rng: &mut ChaCha8Rng, lam: (f64, f64), probability: Option<bool>) -> Instance {
    let m = rng.random_range(2..=8);
    let probability = probability.unwrap_or_else(|| rng.random::<bool>());
    let q = random_weights(rng, m, probability);
    let risk = EmpiricalRisk::new((0..m).map(|_| rng.random::<f64>()).collect()).expect("risks in [0,1)");
    Instance {
        q,
        risk,
        lambda: log_uniform(rng, lam.0, lam.1),
    }
}

/// Risks whose smallest value is separated from the rest by at least 0.1.
fn gapped_instance(rng: &mut ChaCha8Rng) -> Instance {
    let mut inst = random_instance(rng, (0.1, 10.0), None);
    let mut v = inst.risk.values().to_vec();
    let i0 = rng.random_range(0..v.len());
    let lo = v[i0];
    for (j, x) in v.iter_mut().enumerate() {
        if j != i0 && *x < lo + 0.1 {
            *x = lo + 0.1 + rng.random::<f64>() * 0.9;
        }
    }
    inst.risk = EmpiricalRisk::new(v).expect("nonnegative risks");
    inst
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    let draws: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a > 0.0 {
                Gamma::new(a, 1.0).expect("positive shape").sample(rng)
            } else {
                0.0
            }
        })
        .collect();
    let s: f64 = draws.iter().sum();
    if s > 0.0 {
        draws.iter().map(|d| d / s).collect()
    } else {
        let mut p = vec![0.0; alpha.len()];
        let i = alpha.iter().position(|&a| a > 0.0).unwrap_or(0);
        p[i] = 1.0;
        p
    }
}

fn dist(p: Vec<f64>) -> AtomDistribution {
    AtomDistribution::from_weights(&p).expect("valid Dirichlet draw")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Increments `K(t±h) − K(t)` from raw exponential sums sharing one shift,
/// so their sum keeps the digits that a difference of rounded `K` values loses.
fn second_difference(q: &ReferenceMeasure, risk: &EmpiricalRisk, t: f64, h: f64) -> f64 {
    let terms: Vec<(f64, f64)> = q
        .weights()
        .iter()
        .zip(risk.values())
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &l)| (w.ln() + t * l, l))
        .collect();
    let m = terms.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let s0: f64 = terms.iter().map(|(a, _)| (a - m).exp()).sum();
    let inc = |s: f64| -> f64 {
        let num: f64 = terms.iter().map(|(a, l)| (a - m).exp() * (s * h * l).exp_m1()).sum();
        (num / s0).ln_1p()
    };
    (inc(1.0) + inc(-1.0)) / (h * h)
}

type CheckFn = fn(&mut ChaCha8Rng, Option<Fault>) -> Tally;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("log-partition-monotone", "K is nondecreasing in t", check_monotone),
    ("log-partition-convex", "K is midpoint convex, strictly when separable", check_convex),
    ("derivative-consistency", "finite differences of K match k1 and k2", check_derivatives),
    ("variance-separability", "k2 >= 0, and k2 > 0 iff the risk is separable", check_variance),
    ("subgaussian-cgf-bound", "J(t) <= t k1 + t^2 beta^2 / 2 and beta <= range/2", check_subgaussian),
    ("feasibility-monotone", "feasible factors form a downward-closed set", check_feasibility_monotone),
    ("feasible-boundary", "log(1+k) family on N has boundary b = 1", check_feasible_boundary),
    ("posterior-normalization", "posterior sums to 1 and matches exp(-K - L/lambda) Q", check_normalization),
    ("posterior-optimality", "no perturbation of P* lowers the objective", check_optimality),
    ("posterior-support", "posterior support does not depend on lambda", check_support),
    ("value-identity-first", "R(P*) + lambda D(P*||Q) = -lambda K(-1/lambda)", check_value_first),
    ("value-identity-second", "R(Q) - lambda D(Q||P*) = -lambda K(-1/lambda)", check_value_second),
    ("risk-gap-identity", "R(Q) - R(P*) = lambda (D(Q||P*) + D(P*||Q)) >= 0", check_jeffrey),
    ("composition", "Gibbs reference at lambda then alpha equals factor 1/(1/lambda+1/alpha)", check_composition),
    ("type2-normalization", "sum Q lambda/(beta+L) = 1", check_type2_normalization),
    ("type2-bridge", "Type-II equals Type-I on log(beta+L) at factor 1", check_type2_bridge),
    ("constrained-deviation", "D(P*_omega || P*_lambda) = c with omega <= lambda", check_constrained),
    ("expected-risk-monotone", "k1 nonincreasing along decreasing lambda, strictly iff separable", check_k1_monotone),
    ("expected-risk-limit", "k1 -> delta* and P*(L*) -> 1 as lambda -> 0", check_limits),
    ("concentration-nested", "N(lambda) nested and mass inequality along decreasing lambda", check_concentration),
    ("erm-solutions-coherence", "argmin L equals L* iff Q is coherent", check_coherence),
    ("delta-epsilon", "(delta, epsilon) solver certificates and refusals", check_delta_epsilon),
    ("sensitivity-identity", "S = lambda (D(P*||Q) + D(P||P*) - D(P||Q))", check_sensitivity_identity),
    ("sensitivity-bound", "|S| <= sqrt(2 beta^2 D(P||P*))", check_sensitivity_bound),
    ("generalization-decomposition", "G = lambda (I + L)", check_generalization),
    ("lautum-bound", "0 <= G <= sqrt(2 sigma^2 L)", check_lautum),
    ("generalization-sensitivity", "G is the mean sensitivity to the barycenter", check_gen_sensitivity),
    ("differential-entropy-sign", "D(Gaussian || Lebesgue) vanishes at variance 1/(2 pi e)", check_entropy_sign),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    if let Some(only) = &opts.only {
        if let Some(bad) = only.iter().find(|n| !CHECKS.iter().any(|c| c.0 == n.as_str())) {
            return Err(Error::InvalidArgument(format!("unknown check {bad:?}")));
        }
    }
    let selected = CHECKS.iter().enumerate().filter(|(_, c)| match &opts.only {
        None => true,
        Some(only) => only.iter().any(|n| n == c.0),
    });
    let mut results = Vec::new();
    for (i, &(name, claim, f)) in selected {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let tally = f(&mut rng, opts.fault);
        let detail = tally
            .first
            .clone()
            .unwrap_or_else(|| format!("{} trials", tally.trials));
        results.push(CheckResult {
            name,
            claim,
            trials: tally.trials,
            failures: tally.failures,
            detail,
        });
    }
    Ok(VerifyReport {
        seed: opts.seed,
        results,
    })
}

fn t_grid() -> Vec<f64> {
    (0..=80).map(|j| -10.0 + 0.25 * j as f64).collect()
}

fn check_monotone(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let ks: Result<Vec<f64>> = t_grid().iter().map(|&x| log_partition(&inst.q, &inst.risk, x)).collect();
        t.record_result(ks.map(|k| k.windows(2).all(|w| w[1] >= w[0])), || inst.to_string());
    }
    t
}

fn check_convex(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let t1 = rng.random_range(-10.0..10.0);
        let t2 = t1 + rng.random_range(0.5..5.0);
        let k = |x: f64| log_partition(&inst.q, &inst.risk, x);
        let r = (|| -> Result<bool> {
            let gap = 0.5 * (k(t1)? + k(t2)?) - k(0.5 * (t1 + t2))?;
            Ok(if is_separable(&inst.risk, &inst.q) { gap > 0.0 } else { gap >= -1e-12 })
        })();
        t.record_result(r, || format!("{inst} t1={t1} t2={t2}"));
    }
    t
}

fn check_derivatives(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    let h = 1e-5;
    for _ in 0..100 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let r = (|| -> Result<bool> {
            let c = cumulants(&inst.q, &inst.risk, inst.lambda)?;
            let x = -1.0 / inst.lambda;
            let d1 = (log_partition(&inst.q, &inst.risk, x + h)? - log_partition(&inst.q, &inst.risk, x - h)?) / (2.0 * h);
            let d2 = second_difference(&inst.q, &inst.risk, x, h);
            Ok((d1 - c.k1).abs() <= 1e-4 * c.k1.abs() && (d2 - c.k2).abs() <= 1e-3 * c.k2.abs())
        })();
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_variance(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for j in 0..60 {
        let mut inst = random_instance(rng, (0.1, 10.0), None);
        if j % 3 == 0 {
            inst.risk = EmpiricalRisk::constant(inst.risk.len(), inst.risk.value(0)).expect("constant risk");
        }
        let r = cumulants(&inst.q, &inst.risk, inst.lambda)
            .map(|c| c.k2 >= 0.0 && ((c.k2 > 0.0) == is_separable(&inst.risk, &inst.q)));
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_subgaussian(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..100 {
        let inst = random_instance(rng, (1e-2, 10.0), None);
        let r = (|| -> Result<Option<String>> {
            let b = subgaussian_beta(&inst.q, &inst.risk)?;
            let (lo, hi) = inst.risk.supported_finite_range(&inst.q).expect("finite risks");
            if b.beta > 0.5 * (hi - lo) + 1e-12 {
                return Ok(Some(format!("beta {} above ceiling", b.beta)));
            }
            let k1 = cumulants(&inst.q, &inst.risk, inst.lambda)?.k1;
            for x in t_grid() {
                let j = cgf(&inst.q, &inst.risk, inst.lambda, x)?;
                if j.is_finite() && j > x * k1 + 0.5 * x * x * b.beta * b.beta + 1e-10 {
                    return Ok(Some(format!("t={x}: J={j} beta={}", b.beta)));
                }
            }
            Ok(None)
        })();
        match r {
            Ok(None) => t.record(true, String::new),
            Ok(Some(msg)) => t.record(false, || format!("{inst} {msg}")),
            Err(e) => t.record(false, || format!("{inst}: {e}")),
        }
    }
    t
}

fn check_feasibility_monotone(_: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    let families: [(f64, &str); 3] = [(1.0, "log(1+k)"), (2.0, "2 log(1+k)"), (0.5, "log(1+k)/2")];
    for (scale, label) in families {
        let (q, r) = countable_family(move |k| scale * ((1 + k) as f64).ln()).expect("valid family");
        let grid: Vec<f64> = (1..=30).map(|j| 0.1 * j as f64).collect();
        let mut seen_infeasible = false;
        let mut ok = true;
        for &lam in &grid {
            match is_feasible(&q, &r, lam) {
                Ok(true) if seen_infeasible => ok = false,
                Ok(false) => seen_infeasible = true,
                _ => {}
            }
        }
        t.record(ok, || format!("family {label}"));
    }
    t
}

fn check_feasible_boundary(_: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    let (q, r) = countable_family(|k| ((1 + k) as f64).ln()).expect("valid family");
    let r = feasible_set(&q, &r).map(|fs| {
        fs.shape == FeasibleShape::OpenBounded
            && fs.b_tolerance.is_some_and(|tol| tol <= 1e-2)
            && fs.b.is_some_and(|b| (b - 1.0).abs() <= 1e-2)
    });
    t.record_result(r, || "bracket misses 1".into());
    t
}

fn check_normalization(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..100 {
        let inst = random_instance(rng, (1e-3, 1e3), None);
        let r = solve_ermrer(&inst.q, &inst.risk, inst.lambda).map(|p| {
            let sum: f64 = p.probs.probs().iter().sum();
            let raw: Vec<f64> = (0..inst.q.len())
                .map(|i| inst.q.weight(i) * (-p.log_partition - inst.risk.value(i) / inst.lambda).exp())
                .collect();
            let rs: f64 = raw.iter().sum();
            close(sum, 1.0, 1e-12) && raw.iter().zip(p.probs.probs()).all(|(a, b)| close(a / rs, *b, 1e-12))
        });
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_optimality(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..20 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let r = (|| -> Result<bool> {
            let post = solve_ermrer(&inst.q, &inst.risk, inst.lambda)?;
            let best = objective_value(&post.probs, &inst.q, &inst.risk, inst.lambda)?;
            let alpha: Vec<f64> = post.probs.probs().iter().map(|p| 100.0 * p).collect();
            for _ in 0..100 {
                let p = dist(dirichlet(rng, &alpha));
                if objective_value(&p, &inst.q, &inst.risk, inst.lambda)? < best - 1e-12 {
                    return Ok(false);
                }
            }
            Ok(true)
        })();
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_support(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let mut w = inst.q.weights().to_vec();
        let mut l = inst.risk.values().to_vec();
        w[0] = 0.0;
        if l.len() > 2 {
            let last = l.len() - 1;
            l[last] = f64::INFINITY;
        }
        let q = ReferenceMeasure::custom(w).expect("one positive weight remains");
        let risk = EmpiricalRisk::new(l).expect("valid risks");
        let other = log_uniform(rng, 1e-2, 1e2);
        let r = (|| -> Result<bool> {
            let a = solve_ermrer(&q, &risk, inst.lambda)?;
            let b = solve_ermrer(&q, &risk, other)?;
            Ok(a.probs.support() == b.probs.support())
        })();
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_value_first(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..100 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let r = agadir_check(&inst.q, &inst.risk, inst.lambda).map(|(a, _, c)| close(a, c, 1e-10));
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_value_second(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..100 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let r = agadir_check(&inst.q, &inst.risk, inst.lambda).map(|(_, b, c)| close(b, c, 1e-10));
        t.record_result(r, || format!("{inst} mass={}", inst.q.total_mass()));
    }
    t
}

fn check_jeffrey(rng: &mut ChaCha8Rng, fault: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for j in 0..60 {
        let mut inst = random_instance(rng, (0.1, 10.0), Some(true));
        if j % 4 == 0 {
            inst.risk = EmpiricalRisk::constant(inst.risk.len(), 0.3).expect("constant risk");
        }
        let r = jeffrey_gap(&inst.q, &inst.risk, inst.lambda).map(|(lhs, rhs)| {
            let rhs = if fault == Some(Fault::JeffreySign) { -rhs } else { rhs };
            let sign_ok = if is_separable(&inst.risk, &inst.q) { lhs > 0.0 } else { lhs.abs() <= 1e-12 };
            close(lhs, rhs, 1e-10) && lhs >= -1e-12 && sign_ok
        });
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_composition(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let alpha = log_uniform(rng, 0.1, 10.0);
        let r = (|| -> Result<bool> {
            let c = compose(&inst.q, &inst.risk, inst.lambda, alpha)?;
            let d = solve_ermrer(&inst.q, &inst.risk, 1.0 / (1.0 / inst.lambda + 1.0 / alpha))?;
            Ok(c.probs.probs().iter().zip(d.probs.probs()).all(|(a, b)| close(*a, *b, 1e-12)))
        })();
        t.record_result(r, || format!("{inst} alpha={alpha}"));
    }
    t
}

fn type2_trials(rng: &mut ChaCha8Rng, check: impl Fn(&Instance, &crate::gibbs::Type2Solution) -> Result<bool>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        match solve_type2(&inst.q, &inst.risk, inst.lambda) {
            Err(Error::Infeasible { .. }) => {}
            Ok(s) => t.record_result(check(&inst, &s), || inst.to_string()),
            Err(e) => t.record(false, || format!("{inst}: {e}")),
        }
    }
    t
}

fn check_type2_normalization(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    type2_trials(rng, |inst, s| {
        let total: f64 = (0..inst.q.len())
            .map(|i| inst.q.weight(i) * inst.lambda / (s.beta + inst.risk.value(i)))
            .sum();
        Ok(close(total, 1.0, 1e-12))
    })
}

fn check_type2_bridge(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    type2_trials(rng, |inst, s| {
        let transformed = type2_transformed_risk(s.beta, &inst.risk)?;
        let p = solve_ermrer(&inst.q, &transformed, 1.0)?;
        Ok(p.probs.probs().iter().zip(s.probs.probs()).all(|(a, b)| close(*a, *b, 1e-10)))
    })
}

fn check_constrained(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..40 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let frac = rng.random_range(0.05..0.95);
        let r = (|| -> Result<bool> {
            let base = solve_ermrer(&inst.q, &inst.risk, inst.lambda)?;
            let sup = limit_distribution(&inst.q, &inst.risk)?.relative_entropy(&base.probs)?;
            let c = frac * sup;
            let (omega, p) = constrained_solution(&inst.q, &inst.risk, inst.lambda, c)?;
            let d = p.probs.relative_entropy(&base.probs)?;
            let beyond = constrained_solution(&inst.q, &inst.risk, inst.lambda, sup * 1.01);
            Ok(close(d, c, 1e-8) && omega <= inst.lambda && matches!(beyond, Err(Error::Infeasible { .. })))
        })();
        t.record_result(r, || format!("{inst} fraction={frac}"));
    }
    t
}

fn descending_grid(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|_| log_uniform(rng, lo, hi)).collect();
    g.sort_by(|a, b| b.partial_cmp(a).expect("finite grid"));
    g.dedup();
    g
}

fn check_k1_monotone(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for j in 0..60 {
        let mut inst = random_instance(rng, (0.1, 10.0), None);
        if j % 4 == 0 {
            inst.risk = EmpiricalRisk::constant(inst.risk.len(), 0.6).expect("constant risk");
        }
        let grid = descending_grid(rng, 0.05, 10.0, 12);
        let sep = is_separable(&inst.risk, &inst.q);
        let r = grid
            .iter()
            .map(|&l| cumulants(&inst.q, &inst.risk, l).map(|c| c.k1))
            .collect::<Result<Vec<f64>>>()
            .map(|k| {
                k.windows(2).all(|w| {
                    if sep {
                        w[1] < w[0]
                    } else {
                        close(w[1], w[0], 1e-12)
                    }
                })
            });
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_limits(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = gapped_instance(rng);
        let r = (|| -> Result<bool> {
            let rep = analyze(&inst.q, &inst.risk)?;
            let post = solve_ermrer(&inst.q, &inst.risk, 1e-3)?;
            let k1 = cumulants(&inst.q, &inst.risk, 1e-3)?.k1;
            let all_k1_above = [10.0, 1.0, 0.1]
                .iter()
                .map(|&l| cumulants(&inst.q, &inst.risk, l).map(|c| c.k1 > rep.delta_star))
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .all(|b| b);
            Ok(close(k1, rep.delta_star, 1e-6)
                && post.probs.mass_of(&rep.lstar_atoms) >= 1.0 - 1e-6
                && all_k1_above)
        })();
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_concentration(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let grid = descending_grid(rng, 0.05, 10.0, 8);
        let r = concentration_profile(&inst.q, &inst.risk, &grid).map(|p| {
            let pairs = p.rows.len() - 1;
            p.nested && p.inequality_holds && (!is_separable(&inst.risk, &inst.q) || p.strict_pairs == pairs)
        });
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_coherence(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..60 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let mut w = inst.q.weights().to_vec();
        for x in w.iter_mut().skip(1) {
            if rng.random::<f64>() < 0.3 {
                *x = 0.0;
            }
        }
        if rng.random::<bool>() {
            w[0] = 0.0;
        }
        if w.iter().all(|&x| x == 0.0) {
            w[1] = 1.0;
        }
        let q = ReferenceMeasure::custom(w).expect("nonempty support");
        let r = analyze(&q, &inst.risk).map(|rep| {
            rep.delta_star >= rep.rho_star
                && rep.consistent
                && ((rep.erm_solutions == rep.lstar_atoms) == rep.coherent)
        });
        t.record_result(r, || inst.to_string());
    }
    t
}

fn check_delta_epsilon(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    let q = ReferenceMeasure::probability(vec![0.5, 0.5]).expect("valid");
    let r = EmpiricalRisk::new(vec![0.0, 1.0]).expect("valid");
    let ex = solve_delta_epsilon(&q, &r, 0.5, 0.1)
        .map(|s| s.lambda <= 1.0 / 9f64.ln() && s.certificate > 0.9);
    t.record_result(ex, || "two-atom example".into());
    for _ in 0..40 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let res = (|| -> Result<bool> {
            let rep = analyze(&inst.q, &inst.risk)?;
            let (_, hi) = inst.risk.supported_finite_range(&inst.q).expect("finite");
            let delta = rep.delta_star + rng.random_range(0.05..1.0) * (hi - rep.delta_star).max(1e-3);
            let eps = rng.random_range(0.01..0.5);
            let s = solve_delta_epsilon(&inst.q, &inst.risk, delta, eps)?;
            let post = solve_ermrer(&inst.q, &inst.risk, s.lambda)?;
            let level = crate::optimality::level_set(&inst.risk, delta);
            let refused = matches!(
                solve_delta_epsilon(&inst.q, &inst.risk, rep.delta_star, eps),
                Err(Error::Infeasible { .. })
            );
            Ok(post.probs.mass_of(&level) > 1.0 - eps && refused)
        })();
        t.record_result(res, || inst.to_string());
    }
    t
}

fn random_p(rng: &mut ChaCha8Rng, m: usize) -> AtomDistribution {
    dist(dirichlet(rng, &vec![1.0; m]))
}

fn check_sensitivity_identity(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..200 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let p = random_p(rng, inst.q.len());
        let r = sensitivity_identity_check(&inst.q, inst.lambda, &inst.risk, &p).map(|(a, b)| close(a, b, 1e-10));
        t.record_result(r, || format!("{inst} P={:?}", p.probs()));
    }
    t
}

fn check_sensitivity_bound(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..200 {
        let inst = random_instance(rng, (0.1, 10.0), None);
        let p = random_p(rng, inst.q.len());
        let r = (|| -> Result<bool> {
            let s = sensitivity(&inst.q, inst.lambda, &inst.risk, &p)?;
            let b = sensitivity_bound(&inst.q, inst.lambda, &inst.risk, &p)?;
            Ok(s.abs() <= b + 1e-9)
        })();
        t.record_result(r, || format!("{inst} P={:?}", p.probs()));
    }
    t
}

fn random_prior(rng: &mut ChaCha8Rng) -> (ReferenceMeasure, DatasetPrior, f64) {
    let m = rng.random_range(2..=5);
    let n = rng.random_range(1..=4);
    let probability = rng.random::<bool>();
    let q = random_weights(rng, m, probability);
    let risks = (0..n)
        .map(|_| EmpiricalRisk::new((0..m).map(|_| rng.random::<f64>()).collect()).expect("valid"))
        .collect();
    let probs = dirichlet(rng, &vec![1.0; n]);
    let prior = DatasetPrior::new(risks, probs).expect("valid prior");
    (q, prior, log_uniform(rng, 0.1, 10.0))
}

fn check_generalization(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..100 {
        let (q, prior, lambda) = random_prior(rng);
        let r = generalization_error(&q, lambda, &prior).map(|g| g.difference.abs() <= 1e-9);
        t.record_result(r, || format!("lambda={lambda} prior={:?}", prior.probs()));
    }
    let q = ReferenceMeasure::probability(vec![0.5, 0.5]).expect("valid");
    let point = DatasetPrior::point_mass(EmpiricalRisk::new(vec![0.0, 1.0]).expect("valid"));
    let r = generalization_error(&q, 1.0, &point)
        .map(|g| g.gen_error == 0.0 && g.mutual_info == 0.0 && g.lautum_info == 0.0);
    t.record_result(r, || "point-mass prior".into());
    t
}

fn check_lautum(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..100 {
        let (q, prior, lambda) = random_prior(rng);
        let r = generalization_error(&q, lambda, &prior)
            .map(|g| g.gen_error >= -1e-15 && g.gen_error <= g.lautum_bound + 1e-9);
        t.record_result(r, || format!("lambda={lambda} prior={:?}", prior.probs()));
    }
    t
}

fn check_gen_sensitivity(rng: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    for _ in 0..50 {
        let (q, prior, lambda) = random_prior(rng);
        let r = (|| -> Result<bool> {
            let g = generalization_error(&q, lambda, &prior)?;
            let b = barycenter(&prior, &q, lambda)?;
            let mut mean = 0.0;
            for (risk, w) in prior.risks().iter().zip(prior.probs()) {
                if *w > 0.0 {
                    mean += w * sensitivity(&q, lambda, risk, &b)?;
                }
            }
            Ok(close(mean, g.gen_error, 1e-12))
        })();
        t.record_result(r, || format!("lambda={lambda}"));
    }
    t
}

/// `D(P‖Leb)` for a centered Gaussian with variance `var`, on 4001 points over ±6σ.
pub fn gaussian_quadrature_divergence(var: f64) -> Result<f64> {
    let sd = var.sqrt();
    let n = 4001;
    let h = 12.0 * sd / (n - 1) as f64;
    let grid: Vec<Vec<f64>> = (0..n).map(|i| vec![-6.0 * sd + h * i as f64]).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|x| (-x[0] * x[0] / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt() * h)
        .collect();
    let leb = quadrature_lebesgue(grid, h)?;
    generalized_relative_entropy(&AtomDistribution::from_weights(&density)?, &leb)
}

fn check_entropy_sign(_: &mut ChaCha8Rng, _: Option<Fault>) -> Tally {
    let mut t = Tally::new();
    let target = 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E);
    let r = (|| -> Result<bool> {
        let (mut lo, mut hi) = (target / 4.0, target * 4.0);
        if !(gaussian_quadrature_divergence(lo)? > 0.0 && gaussian_quadrature_divergence(hi)? < 0.0) {
            return Ok(false);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if gaussian_quadrature_divergence(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(close(0.5 * (lo + hi), target, 1e-3))
    })();
    t.record_result(r, || "root away from 1/(2 pi e)".into());
    t
}
