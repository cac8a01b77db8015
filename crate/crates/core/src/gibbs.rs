//! Gibbs posteriors: the unique minimizer of `R_z(P) + λ·D(P‖Q)` and the
//! identities it satisfies, plus the Type-II variant and the
//! constrained-deviation problem.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::measure::{
    generalized_relative_entropy, is_absolutely_continuous, relative_entropy_weights, AtomDistribution,
    ReferenceMeasure,
};
use crate::partition::{log_partition, require_feasible, tilt};
use crate::risk::{expected_empirical_risk, integrate_risk, is_separable, EmpiricalRisk, SEPARABILITY_TOL};

/// Solution of the regularized problem at one factor `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsPosterior {
    pub lambda: f64,
    pub probs: AtomDistribution,
    /// `K(−1/λ)`.
    pub log_partition: f64,
    /// Hash of the reference weights and risk values the posterior was built from.
    pub fingerprint: u64,
}

/// Serialized posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDoc {
    pub lambda: f64,
    pub k0: f64,
    pub probs: Vec<f64>,
}

impl GibbsPosterior {
    pub fn to_doc(&self) -> PosteriorDoc {
        PosteriorDoc {
            lambda: self.lambda,
            k0: self.log_partition,
            probs: self.probs.probs().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// True when built from exactly this reference and risk.
    pub fn matches(&self, q: &ReferenceMeasure, risk: &EmpiricalRisk) -> bool {
        self.fingerprint == reference_fingerprint(q, risk)
    }
}

pub fn reference_fingerprint(q: &ReferenceMeasure, risk: &EmpiricalRisk) -> u64 {
    let mut h = DefaultHasher::new();
    for w in q.weights() {
        w.to_bits().hash(&mut h);
    }
    0xffu8.hash(&mut h);
    for l in risk.values() {
        l.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Gibbs posterior `dP*/dQ (θ_i) = exp(−K(−1/λ) − L_i/λ)`.
pub fn solve_ermrer(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<GibbsPosterior> {
    check_len(q.len(), risk.len())?;
    require_feasible(q, risk, lambda)?;
    let tl = tilt(q, risk, -1.0 / lambda)?;
    Ok(GibbsPosterior {
        lambda,
        probs: AtomDistribution::from_normalized(tl.probs),
        log_partition: tl.log_norm,
        fingerprint: reference_fingerprint(q, risk),
    })
}

/// Radon-Nikodym derivative of the posterior with respect to `Q` at atom `i`.
pub fn rn_derivative(post: &GibbsPosterior, q: &ReferenceMeasure, i: usize) -> Result<f64> {
    check_len(q.len(), post.len())?;
    if i >= q.len() {
        return Err(Error::InvalidArgument(format!("atom {i} outside 0..{}", q.len())));
    }
    if !q.in_support(i) {
        return Err(Error::Domain(format!("atom {i} is outside supp Q")));
    }
    Ok(post.probs.prob(i) / q.weight(i))
}

/// `R_z(P) + λ·D(P‖Q)`.
pub fn objective_value(p: &AtomDistribution, q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<f64> {
    check_len(q.len(), p.len())?;
    check_len(q.len(), risk.len())?;
    if !is_absolutely_continuous(p, q)? {
        return Err(Error::Domain("P is not absolutely continuous with respect to Q".into()));
    }
    let r = expected_empirical_risk(risk, p)?;
    if r == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(r + lambda * generalized_relative_entropy(p, q)?)
}

/// The three quantities tied together by the value identities of the optimum:
/// `R_z(P*) + λD(P*‖Q)`, `R_z(Q) − λD(Q‖P*)` against the raw measure `Q`,
/// and `−λK(−1/λ)`.
///
/// The second one integrates against `Q` as given, so it equals
/// `−λ·Q(M)·K(−1/λ)` and meets the third only when `Q(M) = 1`.
pub fn agadir_check(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<(f64, f64, f64)> {
    if !q.is_finite_backend() {
        return Err(Error::Unsupported("value identities need a finite-mass reference".into()));
    }
    let post = solve_ermrer(q, risk, lambda)?;
    let first = objective_value(&post.probs, q, risk, lambda)?;
    let third = -lambda * post.log_partition;
    let has_infinite = risk
        .values()
        .iter()
        .zip(q.weights())
        .any(|(l, &w)| w > 0.0 && l.is_infinite());
    let second = if has_infinite {
        // R_z(Q) and D(Q‖P*) are both +∞; combine atomwise where
        // Q_i L_i − λ Q_i log(Q_i/P*_i) = −λ Q_i K(−1/λ).
        -lambda * q.total_mass() * post.log_partition
    } else {
        integrate_risk(risk, q.weights()) - lambda * relative_entropy_weights(q.weights(), post.probs.probs())?
    };
    Ok((first, second, third))
}

/// Both sides of `R_z(Q) − R_z(P*) = λ(D(Q‖P*) + D(P*‖Q))` for a probability `Q`.
pub fn jeffrey_gap(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<(f64, f64)> {
    if !q.is_probability() {
        return Err(Error::Domain("the risk gap identity needs a probability reference".into()));
    }
    let post = solve_ermrer(q, risk, lambda)?;
    let qd = q.normalized()?;
    let rq = expected_empirical_risk(risk, &qd)?;
    let rp = expected_empirical_risk(risk, &post.probs)?;
    if rq == f64::INFINITY {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let forward = relative_entropy_weights(qd.probs(), post.probs.probs())?;
    let backward = relative_entropy_weights(post.probs.probs(), qd.probs())?;
    Ok((rq - rp, lambda * (forward + backward)))
}

/// Solves the problem at factor `α` with the posterior at `λ` as reference.
/// The result is the posterior of the original problem at `1/(1/λ + 1/α)`.
pub fn compose(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64, alpha: f64) -> Result<GibbsPosterior> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
    }
    let first = solve_ermrer(q, risk, lambda)?;
    let eff = 1.0 / (1.0 / lambda + 1.0 / alpha);
    require_feasible(q, risk, eff)?;
    let second = solve_ermrer(&first.probs.as_measure(), risk, alpha)?;
    Ok(GibbsPosterior {
        lambda: eff,
        probs: second.probs,
        log_partition: log_partition(q, risk, -1.0 / eff)?,
        fingerprint: first.fingerprint,
    })
}

/// Type-II solution `P_i = Q_i·λ/(β + L_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type2Solution {
    pub lambda: f64,
    pub beta: f64,
    pub probs: AtomDistribution,
    /// `Σ Q_i λ/(β + L_i) − 1` at the returned `β`.
    pub residual: f64,
}

fn type2_residual(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64, beta: f64) -> f64 {
    q.weights()
        .iter()
        .zip(risk.values())
        .filter(|(&w, l)| w > 0.0 && l.is_finite())
        .map(|(&w, &l)| w * lambda / (beta + l))
        .sum::<f64>()
        - 1.0
}

/// Finds `β > max(0, −min L)` with `Σ_i Q_i λ/(β + L_i) = 1` by bisection.
/// The residual is strictly decreasing in `β`.
pub fn solve_type2(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<Type2Solution> {
    check_len(q.len(), risk.len())?;
    if !q.is_finite_backend() {
        return Err(Error::Unsupported("Type-II solve needs an explicit finite atom list".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive and finite")));
    }
    let (min_l, max_l) = risk
        .supported_finite_range(q)
        .ok_or_else(|| Error::InvalidArgument("no supported atom has finite risk".into()))?;
    let f = |b: f64| type2_residual(q, risk, lambda, b);
    let mut lo = (-min_l).max(0.0) + 1e-15;
    if f(lo) <= 0.0 {
        return Err(Error::Infeasible {
            reason: format!("no beta > 0 solves the normalization: residual {} at the lower bracket", f(lo)),
            supremum: None,
        });
    }
    let mut hi = lambda * q.total_mass() * (max_l + 1.0);
    let mut doublings = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 {
            return Err(Error::Convergence("could not bracket beta".into()));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = f(mid);
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if r.abs() <= 1e-15 {
            lo = mid;
            hi = mid;
            break;
        }
    }
    let beta = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let residual = f(beta);
    if residual.abs() > 1e-12 {
        return Err(Error::Convergence(format!("beta residual {residual} above 1e-12")));
    }
    let weights: Vec<f64> = q
        .weights()
        .iter()
        .zip(risk.values())
        .map(|(&w, &l)| if w > 0.0 && l.is_finite() { w * lambda / (beta + l) } else { 0.0 })
        .collect();
    Ok(Type2Solution {
        lambda,
        beta,
        probs: AtomDistribution::from_weights(&weights)?,
        residual,
    })
}

/// `log(β + L_i)` shifted up by the smallest constant that makes it nonnegative.
/// The posterior at factor 1 under this risk is the Type-II solution; the
/// shift cancels in the normalization.
pub fn type2_transformed_risk(beta: f64, risk: &EmpiricalRisk) -> Result<EmpiricalRisk> {
    let logs: Vec<f64> = risk.values().iter().map(|&l| (beta + l).ln()).collect();
    let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    EmpiricalRisk::new(logs.into_iter().map(|v| v + shift).collect())
}

/// Reference measure restricted to the minimizing supported atoms and normalized.
pub(crate) fn limit_distribution(q: &ReferenceMeasure, risk: &EmpiricalRisk) -> Result<AtomDistribution> {
    let (lo, _) = risk
        .supported_finite_range(q)
        .ok_or_else(|| Error::InvalidArgument("no supported atom has finite risk".into()))?;
    let w: Vec<f64> = q
        .weights()
        .iter()
        .zip(risk.values())
        .map(|(&w, &l)| if w > 0.0 && l - lo <= SEPARABILITY_TOL { w } else { 0.0 })
        .collect();
    AtomDistribution::from_weights(&w)
}

/// Finds `ω ∈ (0, λ]` with `D(P*_ω ‖ P*_λ) = c` and returns `(ω, P*_ω)`.
///
/// The divergence vanishes at `ω = λ` and increases towards
/// `D(P*_{0+} ‖ P*_λ)` as `ω → 0`, where `P*_{0+}` is `Q` restricted to the
/// minimizing atoms. Targets at or beyond that supremum are infeasible.
pub fn constrained_solution(
    q: &ReferenceMeasure,
    risk: &EmpiricalRisk,
    lambda: f64,
    c: f64,
) -> Result<(f64, GibbsPosterior)> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("deviation budget {c} must be finite and nonnegative")));
    }
    let base = solve_ermrer(q, risk, lambda)?;
    if c == 0.0 {
        return Ok((lambda, base));
    }
    if !is_separable(risk, q) {
        return Err(Error::infeasible("risk is not separable: every factor gives the same posterior"));
    }
    let sup = limit_distribution(q, risk)?.relative_entropy(&base.probs)?;
    if c >= sup {
        return Err(Error::Infeasible {
            reason: format!("deviation {c} is not below the supremum {sup} reached as omega -> 0"),
            supremum: Some(sup),
        });
    }
    let div = |omega: f64| -> Result<(f64, GibbsPosterior)> {
        let p = solve_ermrer(q, risk, omega)?;
        Ok((p.probs.relative_entropy(&base.probs)?, p))
    };
    let mut hi = lambda;
    let mut lo = lambda / 2.0;
    let mut lo_val = div(lo)?;
    let mut halvings = 0;
    while lo_val.0 < c {
        hi = lo;
        lo /= 2.0;
        lo_val = div(lo)?;
        halvings += 1;
        if halvings > 2000 || lo == 0.0 {
            return Err(Error::Convergence("could not bracket omega".into()));
        }
    }
    let mut best = lo_val;
    let mut best_omega = lo;
    for _ in 0..300 {
        if (best.0 - c).abs() <= 1e-10 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let cur = div(mid)?;
        if cur.0 >= c {
            lo = mid;
        } else {
            hi = mid;
        }
        if (cur.0 - c).abs() < (best.0 - c).abs() {
            best = cur;
            best_omega = mid;
        }
    }
    if (best.0 - c).abs() > 1e-8 {
        return Err(Error::infeasible(format!(
            "divergence jumps past {c} near omega = {best_omega}; closest value {}",
            best.0
        )));
    }
    Ok((best_omega, best.1))
}

/// `count` i.i.d. atom draws from the posterior, reproducible from `seed`.
pub fn sample(post: &GibbsPosterior, seed: u64, count: usize) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let dist = WeightedIndex::new(post.probs.probs()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::counting_measure;

    const E: f64 = std::f64::consts::E;

    fn example1(q: f64) -> (ReferenceMeasure, EmpiricalRisk) {
        (
            ReferenceMeasure::probability(vec![q, 1.0 - q]).unwrap(),
            EmpiricalRisk::new(vec![0.0, 1.0]).unwrap(),
        )
    }

    #[test]
    fn posterior_examples() {
        let (q, r) = example1(0.5);
        let p = solve_ermrer(&q, &r, 1.0).unwrap();
        assert!((p.probs.prob(0) - 1.0 / (1.0 + 1.0 / E)).abs() < 1e-15);
        assert!((p.probs.prob(0) - 0.731_059).abs() < 1e-6);

        let (q, r) = example1(0.3);
        let p = solve_ermrer(&q, &r, 1e6).unwrap();
        assert!((p.probs.prob(0) - 0.3).abs() < 1e-6);

        let q = ReferenceMeasure::probability(vec![0.5, 0.5]).unwrap();
        let r = EmpiricalRisk::new(vec![0.2, f64::INFINITY]).unwrap();
        for lambda in [0.01, 1.0, 100.0] {
            let p = solve_ermrer(&q, &r, lambda).unwrap();
            assert_eq!(p.probs.probs(), &[1.0, 0.0]);
        }
        assert!(p_fails(&q, &r, 0.0));
    }

    fn p_fails(q: &ReferenceMeasure, r: &EmpiricalRisk, lambda: f64) -> bool {
        solve_ermrer(q, r, lambda).is_err()
    }

    #[test]
    fn posterior_is_zero_off_support() {
        let q = ReferenceMeasure::custom(vec![0.0, 2.0, 1.0]).unwrap();
        let r = EmpiricalRisk::new(vec![0.0, 0.5, 1.0]).unwrap();
        let p = solve_ermrer(&q, &r, 0.7).unwrap();
        assert_eq!(p.probs.prob(0), 0.0);
        assert!(p.matches(&q, &r));
        assert!(rn_derivative(&p, &q, 0).is_err());
    }

    #[test]
    fn rn_derivative_examples() {
        let q = counting_measure(4).unwrap();
        let r = EmpiricalRisk::constant(4, 0.3).unwrap();
        let p = solve_ermrer(&q, &r, 2.0).unwrap();
        for i in 0..4 {
            assert!((rn_derivative(&p, &q, i).unwrap() - 0.25).abs() < 1e-15);
        }
        let q = ReferenceMeasure::probability(vec![0.3, 0.3, 0.4]).unwrap();
        let r = EmpiricalRisk::new(vec![0.0, 0.4, f64::INFINITY]).unwrap();
        let p = solve_ermrer(&q, &r, 0.5).unwrap();
        assert_eq!(rn_derivative(&p, &q, 2).unwrap(), 0.0);
        assert!(rn_derivative(&p, &q, 0).unwrap() > rn_derivative(&p, &q, 1).unwrap());
    }

    #[test]
    fn objective_examples() {
        let (q, r) = example1(0.5);
        let p = solve_ermrer(&q, &r, 1.0).unwrap();
        let v = objective_value(&p.probs, &q, &r, 1.0).unwrap();
        assert!((v + p.log_partition).abs() < 1e-15);
        let qd = q.normalized().unwrap();
        assert!((objective_value(&qd, &q, &r, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let other = AtomDistribution::new(vec![0.6, 0.4]).unwrap();
        assert!(objective_value(&other, &q, &r, 1.0).unwrap() > v);

        let q0 = ReferenceMeasure::probability(vec![1.0, 0.0]).unwrap();
        assert!(objective_value(&qd, &q0, &r, 1.0).is_err());
    }

    #[test]
    fn agadir_examples() {
        let (q, r) = example1(0.5);
        let (a, b, c) = agadir_check(&q, &r, 1.0).unwrap();
        for v in [a, b, c] {
            assert!((v - 0.379_885_493_041_722_4).abs() < 1e-12, "{v}");
        }
        // Raw-mass second quantity is the third scaled by Q(M).
        let q = ReferenceMeasure::custom(vec![2.0, 1.5]).unwrap();
        let (a, b, c) = agadir_check(&q, &r, 0.8).unwrap();
        assert!((a - c).abs() < 1e-12);
        assert!((b - 3.5 * c).abs() < 1e-12);
        // Constant risk.
        let (a, _, c) = agadir_check(&q, &EmpiricalRisk::constant(2, 0.4).unwrap(), 0.8).unwrap();
        assert!((a - (0.4 - 0.8 * 3.5f64.ln())).abs() < 1e-12);
        assert!((c - a).abs() < 1e-12);
    }

    #[test]
    fn jeffrey_examples() {
        let (q, r) = example1(0.5);
        let (lhs, rhs) = jeffrey_gap(&q, &r, 1.0).unwrap();
        assert!((lhs - (0.5 - 1.0 / (1.0 + E))).abs() < 1e-15);
        assert!((lhs - rhs).abs() < 1e-12);
        let (lhs, rhs) = jeffrey_gap(&q, &EmpiricalRisk::constant(2, 0.3).unwrap(), 1.0).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));
        assert!(matches!(
            jeffrey_gap(&counting_measure(2).unwrap(), &r, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn composition_examples() {
        let (q, r) = example1(0.5);
        let p = compose(&q, &r, 1.0, 1.0).unwrap();
        assert!((p.probs.prob(0) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p.probs.prob(0) - 0.880_797).abs() < 1e-6);
        assert_eq!(p.lambda, 0.5);
        let d = solve_ermrer(&q, &r, 1.0).unwrap();
        let far = compose(&q, &r, 2.0, 2.0).unwrap();
        assert!((far.probs.prob(0) - d.probs.prob(0)).abs() < 1e-14);
        let inf = compose(&q, &r, 1.0, 1e12).unwrap();
        assert!((inf.probs.prob(0) - d.probs.prob(0)).abs() < 1e-10);
    }

    #[test]
    fn type2_examples() {
        let (q, r) = example1(0.5);
        let s = solve_type2(&q, &r, 1.0).unwrap();
        assert!((s.beta - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.probs.prob(0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(s.residual.abs() <= 1e-12);

        let q1 = ReferenceMeasure::probability(vec![1.0]).unwrap();
        let s = solve_type2(&q1, &EmpiricalRisk::new(vec![0.0]).unwrap(), 0.7).unwrap();
        assert!((s.beta - 0.7).abs() < 1e-12);

        let qc = ReferenceMeasure::custom(vec![1.0, 3.0]).unwrap();
        let s = solve_type2(&qc, &EmpiricalRisk::constant(2, 0.5).unwrap(), 2.0).unwrap();
        assert!((s.beta - (2.0 * 4.0 - 0.5)).abs() < 1e-11);
        assert!((s.probs.prob(1) - 0.75).abs() < 1e-12);

        // λ·Q(M) below the smallest risk: no positive root.
        let s = solve_type2(&q1, &EmpiricalRisk::new(vec![2.0]).unwrap(), 1.0);
        assert!(matches!(s, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn type2_bridge() {
        let q = ReferenceMeasure::custom(vec![0.4, 1.1, 0.2]).unwrap();
        let r = EmpiricalRisk::new(vec![0.1, 0.9, 2.5]).unwrap();
        let s = solve_type2(&q, &r, 0.6).unwrap();
        let t = type2_transformed_risk(s.beta, &r).unwrap();
        let p = solve_ermrer(&q, &t, 1.0).unwrap();
        for i in 0..3 {
            assert!((p.probs.prob(i) - s.probs.prob(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_examples() {
        let (q, r) = example1(0.5);
        let (w, p) = constrained_solution(&q, &r, 1.0, 0.0).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(p, solve_ermrer(&q, &r, 1.0).unwrap());

        let base = solve_ermrer(&q, &r, 1.0).unwrap();
        let (w, p) = constrained_solution(&q, &r, 1.0, 0.1).unwrap();
        assert!(w < 1.0);
        assert!((p.probs.relative_entropy(&base.probs).unwrap() - 0.1).abs() < 1e-8);
        let rp = expected_empirical_risk(&r, &p.probs).unwrap();
        let rb = expected_empirical_risk(&r, &base.probs).unwrap();
        assert!(rp < rb);

        // Supremum is D(δ_0 ‖ P*_1) = −log P*_1(0).
        let sup = -base.probs.prob(0).ln();
        match constrained_solution(&q, &r, 1.0, sup + 0.01) {
            Err(Error::Infeasible { supremum: Some(s), .. }) => assert!((s - sup).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let flat = EmpiricalRisk::constant(2, 0.3).unwrap();
        assert!(matches!(constrained_solution(&q, &flat, 1.0, 0.1), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn sampling() {
        let (q, r) = example1(0.5);
        let p = solve_ermrer(&q, &r, 1.0).unwrap();
        assert!(sample(&p, 1, 0).unwrap().is_empty());
        assert_eq!(sample(&p, 9, 100).unwrap(), sample(&p, 9, 100).unwrap());

        let qp = ReferenceMeasure::probability(vec![0.0, 1.0]).unwrap();
        let pm = solve_ermrer(&qp, &r, 1.0).unwrap();
        assert!(sample(&pm, 3, 50).unwrap().iter().all(|&i| i == 1));

        let n = 1_000_000;
        let draws = sample(&p, 42, n).unwrap();
        let freq = draws.iter().filter(|&&i| i == 0).count() as f64 / n as f64;
        let p0 = p.probs.prob(0);
        let sd = (p0 * (1.0 - p0) / n as f64).sqrt();
        assert!((freq - p0).abs() < 3.0 * sd, "{freq} vs {p0}");
    }

    #[test]
    fn doc_round_trip() {
        let (q, r) = example1(0.5);
        let p = solve_ermrer(&q, &r, 1.0).unwrap();
        let json = serde_json::to_string(&p.to_doc()).unwrap();
        let back: PosteriorDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p.to_doc());
    }
}
