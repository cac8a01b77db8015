//! Log-partition function `K(t) = log Σ_i Q_i exp(t·L_i)` and the quantities
//! derived from it: feasibility of a regularization factor, tilted cumulants,
//! the cumulant generating function of the risk under the Gibbs posterior,
//! and the sub-Gaussianity constant.
//!
//! All sums are max-shifted log-sum-exp. Atoms with `t·L_i = −∞` (infinite
//! risk, negative `t`) are dropped before the shift and receive exactly zero
//! tilted mass.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::measure::{ReferenceMeasure, TailDescriptor};
use crate::risk::{EmpiricalRisk, SEPARABILITY_TOL};

/// Default half-width of the bracket reported around a feasibility boundary.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-2;

/// Number of log-spaced starting points in the β search.
pub const BETA_MULTISTART: usize = 32;

/// Band around the critical power-law exponent 1 inside which the tail test abstains.
const TAIL_EXPONENT_BAND: f64 = 1e-3;

/// Smallest truncation at which the tail test is allowed to decide.
const TAIL_MIN_TERMS: u64 = 1 << 10;

/// Per-doubling growth of the local exponent that marks super-polynomial decay.
const SUPERPOLY_RATIO: f64 = 1.3;

fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().filter(|a| *a != f64::NEG_INFINITY).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|a| (a - max).exp()).sum::<f64>().ln()
}

/// `log(w) + t·l` with the conventions of the finite sum: zero weight or
/// `t·(+∞)` with `t < 0` gives −∞, `0·∞` is 0.
fn log_term(w: f64, l: f64, t: f64) -> f64 {
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let tl = if t == 0.0 { 0.0 } else { t * l };
    w.ln() + tl
}

/// Tilted distribution `Q_i exp(t L_i − K(t))` of a finite backend.
#[derive(Debug, Clone)]
pub(crate) struct Tilt {
    pub log_norm: f64,
    pub probs: Vec<f64>,
}

pub(crate) fn tilt(q: &ReferenceMeasure, risk: &EmpiricalRisk, t: f64) -> Result<Tilt> {
    check_len(q.len(), risk.len())?;
    if !q.is_finite_backend() {
        return Err(Error::Unsupported(
            "tilted distributions need an explicit finite atom list".into(),
        ));
    }
    let logs: Vec<f64> = q
        .weights()
        .iter()
        .zip(risk.values())
        .map(|(&w, &l)| log_term(w, l, t))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "no atom of supp Q has finite risk; the posterior is undefined".into(),
        ));
    }
    if max == f64::INFINITY || t.is_infinite() {
        return Err(Error::Domain(format!("log-partition diverges at t = {t}")));
    }
    let unnorm: Vec<f64> = logs.iter().map(|a| (a - max).exp()).collect();
    let sum: f64 = unnorm.iter().sum();
    Ok(Tilt {
        log_norm: max + sum.ln(),
        probs: unnorm.into_iter().map(|u| u / sum).collect(),
    })
}

/// Outcome of the series test on a countable tail.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TailVerdict {
    Converges,
    Diverges,
    Undecided { exponent: f64 },
}

fn tail_exponent(tail: &TailDescriptor, t: f64, n: u64) -> f64 {
    let (w1, l1) = tail.term(n);
    let (w2, l2) = tail.term(2 * n);
    let g1 = log_term(w1, l1, t);
    let g2 = log_term(w2, l2, t);
    if g2 == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    if g1 == f64::NEG_INFINITY || g2 == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    -(g2 - g1) / std::f64::consts::LN_2
}

/// Local power-law exponent of the terms, tracked along doubling truncations.
/// Geometric decay shows up as a growing exponent, growth as a negative one.
fn classify_tail(tail: &TailDescriptor, t: f64) -> TailVerdict {
    let mut n = TAIL_MIN_TERMS.max(tail.start.max(1));
    let mut history: Vec<f64> = Vec::new();
    let cap = tail.max_terms.max(2 * TAIL_MIN_TERMS);
    while 2 * n <= cap {
        let p = tail_exponent(tail, t, n);
        history.push(p);
        if let [.., p0, p1, p2] = history[..] {
            // Exponent growing by a fixed factor per doubling: faster than any power.
            if p0 > 0.0 && p1 / p0 > SUPERPOLY_RATIO && p2 / p1 > SUPERPOLY_RATIO {
                return TailVerdict::Converges;
            }
        }
        if let [.., pp, p] = history[..] {
            if p > 1.0 + TAIL_EXPONENT_BAND && pp > 1.0 + TAIL_EXPONENT_BAND {
                return TailVerdict::Converges;
            }
            let growing = pp > 0.0 && p / pp > SUPERPOLY_RATIO;
            if p < 1.0 - TAIL_EXPONENT_BAND && pp < 1.0 - TAIL_EXPONENT_BAND && !growing {
                return TailVerdict::Diverges;
            }
        }
        n *= 2;
    }
    TailVerdict::Undecided { exponent: history.last().copied().unwrap_or(f64::NAN) }
}

/// Log of the tail sum `Σ_{k ≥ start} w_k exp(t r_k)`, or +∞ when it diverges.
fn tail_log_sum(tail: &TailDescriptor, t: f64) -> Result<f64> {
    match classify_tail(tail, t) {
        TailVerdict::Diverges => return Ok(f64::INFINITY),
        TailVerdict::Undecided { exponent } => {
            return Err(Error::Indeterminate {
                reason: format!("tail exponent {exponent} too close to 1 at t = {t}"),
                lo: t,
                hi: t,
            })
        }
        TailVerdict::Converges => {}
    }
    let cap = tail.max_terms.max(2 * TAIL_MIN_TERMS);
    let mut acc = f64::NEG_INFINITY;
    let mut k = tail.start;
    let mut end = TAIL_MIN_TERMS.max(tail.start + 1);
    loop {
        let block = log_sum_exp((k..end).map(|i| {
            let (w, l) = tail.term(i);
            log_term(w, l, t)
        }));
        acc = log_sum_exp([acc, block]);
        k = end;
        let p = tail_exponent(tail, t, end);
        let (w, l) = tail.term(end);
        let g_end = log_term(w, l, t);
        // Integral-test estimate of what remains beyond `end`.
        let remainder = if p.is_finite() && p > 1.0 {
            g_end + ((end as f64) / (p - 1.0) + 0.5).ln()
        } else {
            f64::NEG_INFINITY
        };
        if remainder - acc < -37.0 || 2 * end > cap {
            return Ok(log_sum_exp([acc, remainder]));
        }
        end *= 2;
    }
}

/// `K(t) = log Σ_i Q_i exp(t L_i)`; +∞ when the sum diverges or overflows.
pub fn log_partition(q: &ReferenceMeasure, risk: &EmpiricalRisk, t: f64) -> Result<f64> {
    check_len(q.len(), risk.len())?;
    let head = log_sum_exp(
        q.weights()
            .iter()
            .zip(risk.values())
            .map(|(&w, &l)| log_term(w, l, t)),
    );
    match q.tail() {
        None => Ok(head),
        Some(tail) => Ok(log_sum_exp([head, tail_log_sum(tail, t)?])),
    }
}

/// Shape of the set of regularization factors `λ > 0` with `K(−1/λ) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibleShape {
    Empty,
    AllPositiveReals,
    /// `(0, b)`.
    OpenBounded,
    /// `(0, b]`.
    ClosedBounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    pub shape: FeasibleShape,
    /// Boundary estimate for bounded shapes.
    pub b: Option<f64>,
    /// Half-width of the bracket around `b`.
    pub b_tolerance: Option<f64>,
}

impl FeasibleSet {
    pub const ALL: FeasibleSet = FeasibleSet {
        shape: FeasibleShape::AllPositiveReals,
        b: None,
        b_tolerance: None,
    };

    /// Membership when decidable from the bracket alone; `None` inside the bracket.
    pub fn contains(&self, lambda: f64) -> Option<bool> {
        if !(lambda > 0.0) {
            return Some(false);
        }
        match self.shape {
            FeasibleShape::Empty => Some(false),
            FeasibleShape::AllPositiveReals => Some(true),
            FeasibleShape::OpenBounded | FeasibleShape::ClosedBounded => {
                let b = self.b.unwrap_or(f64::NAN);
                let tol = self.b_tolerance.unwrap_or(0.0);
                if lambda < b - tol {
                    Some(true)
                } else if lambda > b + tol {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }
}

/// Decides `K(−1/λ) < ∞` for one factor.
pub fn is_feasible(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<bool> {
    check_len(q.len(), risk.len())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Ok(false);
    }
    match q.tail() {
        None => Ok(true),
        Some(tail) => match classify_tail(tail, -1.0 / lambda) {
            TailVerdict::Converges => Ok(true),
            TailVerdict::Diverges => Ok(false),
            TailVerdict::Undecided { exponent } => Err(Error::Indeterminate {
                reason: format!("tail exponent {exponent} undecided at lambda = {lambda}"),
                lo: lambda,
                hi: lambda,
            }),
        },
    }
}

pub(crate) fn require_feasible(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization factor {lambda} must be positive and finite"
        )));
    }
    if is_feasible(q, risk, lambda)? {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "lambda = {lambda} is outside the feasible set: K(-1/lambda) = +inf"
        )))
    }
}

pub fn feasible_set(q: &ReferenceMeasure, risk: &EmpiricalRisk) -> Result<FeasibleSet> {
    feasible_set_with_tol(q, risk, DEFAULT_BOUNDARY_TOL)
}

/// Feasible set, with the boundary of a countable backend bracketed to `tol`.
///
/// Finite backends are always feasible. For countable tails the boundary is
/// located by doubling/halving `λ` from 1 until the tail verdict flips, then
/// bisecting. A pure power-law tail diverges at its critical exponent, so the
/// bounded shape is reported as open.
pub fn feasible_set_with_tol(q: &ReferenceMeasure, risk: &EmpiricalRisk, tol: f64) -> Result<FeasibleSet> {
    check_len(q.len(), risk.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("boundary tolerance {tol} must be positive")));
    }
    let Some(tail) = q.tail() else {
        return Ok(FeasibleSet::ALL);
    };
    let verdict = |lambda: f64| classify_tail(tail, -1.0 / lambda);
    let (mut lo, mut hi) = match verdict(1.0) {
        TailVerdict::Converges => {
            let mut lam = 1.0;
            loop {
                let next = lam * 2.0;
                if next > 1e18 {
                    return Ok(FeasibleSet::ALL);
                }
                match verdict(next) {
                    TailVerdict::Converges => lam = next,
                    _ => break (lam, next),
                }
            }
        }
        _ => {
            let mut lam = 1.0;
            loop {
                let next = lam / 2.0;
                if next < 1e-18 {
                    return Ok(FeasibleSet {
                        shape: FeasibleShape::Empty,
                        b: None,
                        b_tolerance: None,
                    });
                }
                match verdict(next) {
                    TailVerdict::Converges => break (next, lam),
                    _ => lam = next,
                }
            }
        }
    };
    // `lo` converges; `hi` diverges or is undecided.
    let mut undecided_hi = !matches!(verdict(hi), TailVerdict::Diverges);
    while hi - lo > 2.0 * tol {
        let mid = 0.5 * (lo + hi);
        match verdict(mid) {
            TailVerdict::Converges => lo = mid,
            TailVerdict::Diverges => {
                hi = mid;
                undecided_hi = false;
            }
            TailVerdict::Undecided { .. } => {
                hi = mid;
                undecided_hi = true;
            }
        }
    }
    if undecided_hi && hi - lo > 2.0 * tol {
        return Err(Error::Indeterminate {
            reason: "tail test inconclusive at maximal truncation".into(),
            lo,
            hi,
        });
    }
    Ok(FeasibleSet {
        shape: FeasibleShape::OpenBounded,
        b: Some(0.5 * (lo + hi)),
        b_tolerance: Some(0.5 * (hi - lo)),
    })
}

/// Derivatives of `K` at `−1/λ`: the mean, variance and third central
/// moment of the risk under the Gibbs posterior at `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantReport {
    pub lambda: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Mean and central moments of `risk` under tilted probabilities.
/// Deviations are taken from the smallest supported risk first, so a risk
/// that is constant on the support gives exactly zero central moments.
pub(crate) fn tilted_moments(probs: &[f64], risk: &EmpiricalRisk) -> (f64, f64, f64) {
    let support = || probs.iter().zip(risk.values()).filter(|(&p, _)| p > 0.0);
    let base = support().map(|(_, &l)| l).fold(f64::INFINITY, f64::min);
    if !base.is_finite() {
        return (base, f64::NAN, f64::NAN);
    }
    let shift: f64 = support().map(|(&p, &l)| p * (l - base)).sum();
    let (k2, k3) = support().fold((0.0, 0.0), |(s2, s3), (&p, &l)| {
        let d = (l - base) - shift;
        (s2 + p * d * d, s3 + p * d * d * d)
    });
    (base + shift, k2, k3)
}

/// Cumulants at `t = −1/λ`, from exact tilted moments.
pub fn cumulants(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<CumulantReport> {
    require_feasible(q, risk, lambda)?;
    let tl = tilt(q, risk, -1.0 / lambda)?;
    let (k1, k2, k3) = tilted_moments(&tl.probs, risk);
    Ok(CumulantReport {
        lambda,
        k0: tl.log_norm,
        k1,
        k2,
        k3,
    })
}

/// Cumulants of `K` at an arbitrary point `t`.
pub fn cumulants_at(q: &ReferenceMeasure, risk: &EmpiricalRisk, t: f64) -> Result<(f64, f64, f64, f64)> {
    let tl = tilt(q, risk, t)?;
    let (k1, k2, k3) = tilted_moments(&tl.probs, risk);
    Ok((tl.log_norm, k1, k2, k3))
}

/// `J(t) = K(t − 1/λ) − K(−1/λ)`, the cumulant generating function of the
/// risk of a model drawn from the Gibbs posterior at `λ`.
pub fn cgf(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64, t: f64) -> Result<f64> {
    require_feasible(q, risk, lambda)?;
    let base = log_partition(q, risk, -1.0 / lambda)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let shifted = log_partition(q, risk, t - 1.0 / lambda)?;
    if shifted == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(shifted - base)
}

/// How the supremum defining β was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaStatus {
    /// Attained at an interior point `ξ < 0`.
    Attained,
    /// Approached as `ξ → 0⁻`, not attained.
    LimitAtZero,
    /// Risk is a.s. constant on `supp Q`.
    Degenerate,
    /// A supported atom has infinite risk.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    /// `sup_{ξ<0} sqrt(K''(ξ))`.
    pub beta: f64,
    /// Half the range of the supported risks; an upper bound on `beta`.
    pub ceiling: f64,
    /// Location of the maximizer (0 for the limit case).
    pub argmax: f64,
    pub status: BetaStatus,
}

fn variance_at(q: &ReferenceMeasure, risk: &EmpiricalRisk, xi: f64) -> Result<f64> {
    let tl = tilt(q, risk, xi)?;
    Ok(tilted_moments(&tl.probs, risk).1)
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Sub-Gaussianity constant `β = sup_{ξ ∈ (−∞,0)} sqrt(K''(ξ))`.
///
/// `K''(ξ)` is the variance of the risk under `Q` tilted by `exp(ξ L)`. It is
/// sampled at [`BETA_MULTISTART`] log-spaced points of `[−T, −1e−6]`, where
/// `T` is large enough for the tilt to sit within `1e−12` of the minimizers,
/// every sampled local maximum is refined by golden-section search, and the
/// result is compared with the limit value at `ξ → 0⁻` (the `ξ → −∞` limit is
/// zero). The grid can miss a narrow peak between samples.
pub fn subgaussian_beta(q: &ReferenceMeasure, risk: &EmpiricalRisk) -> Result<BetaReport> {
    check_len(q.len(), risk.len())?;
    if !q.is_finite_backend() {
        return Err(Error::Unsupported("beta needs an explicit finite atom list".into()));
    }
    let supported: Vec<(f64, f64)> = q
        .weights()
        .iter()
        .zip(risk.values())
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &l)| (w, l))
        .collect();
    if supported.iter().any(|(_, l)| l.is_infinite()) {
        return Ok(BetaReport {
            beta: f64::INFINITY,
            ceiling: f64::INFINITY,
            argmax: f64::NAN,
            status: BetaStatus::Unbounded,
        });
    }
    let lo = supported.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = supported.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let ceiling = 0.5 * (hi - lo);
    if hi - lo <= SEPARABILITY_TOL {
        return Ok(BetaReport {
            beta: 0.0,
            ceiling,
            argmax: f64::NAN,
            status: BetaStatus::Degenerate,
        });
    }
    let gap = supported
        .iter()
        .map(|p| p.1 - lo)
        .filter(|d| *d > SEPARABILITY_TOL)
        .fold(f64::INFINITY, f64::min);
    let mass_min: f64 = supported.iter().filter(|p| p.1 - lo <= SEPARABILITY_TOL).map(|p| p.0).sum();
    let mass_rest: f64 = supported.iter().filter(|p| p.1 - lo > SEPARABILITY_TOL).map(|p| p.0).sum();
    let horizon = (((mass_rest / mass_min).ln() + 12.0 * std::f64::consts::LN_10) / gap).max(1.0);

    let (near, far) = (1e-6_f64.ln(), horizon.ln());
    let grid: Vec<f64> = (0..BETA_MULTISTART)
        .map(|j| -(near + (far - near) * j as f64 / (BETA_MULTISTART - 1) as f64).exp())
        .collect();
    let values = grid
        .iter()
        .map(|&xi| variance_at(q, risk, xi))
        .collect::<Result<Vec<f64>>>()?;

    let f = |xi: f64| variance_at(q, risk, xi);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for j in 0..grid.len() {
        let left = if j + 1 < grid.len() { values[j + 1] } else { f64::NEG_INFINITY };
        let right = if j > 0 { values[j - 1] } else { f64::NEG_INFINITY };
        if values[j] >= left && values[j] >= right {
            let a = grid[(j + 1).min(grid.len() - 1)];
            let b = if j > 0 { grid[j - 1] } else { grid[0] };
            let cand = if a < b { golden_max(f, a, b)? } else { (grid[j], values[j]) };
            let cand = if values[j] > cand.1 { (grid[j], values[j]) } else { cand };
            if cand.1 > best.1 {
                best = cand;
            }
        }
    }
    let at_zero = variance_at(q, risk, 0.0)?;
    let (sup, argmax, status) = if at_zero >= best.1 {
        (at_zero, 0.0, BetaStatus::LimitAtZero)
    } else {
        (best.1, best.0, BetaStatus::Attained)
    };
    Ok(BetaReport {
        beta: sup.max(0.0).sqrt().min(ceiling),
        ceiling,
        argmax,
        status,
    })
}

/// Cumulant sweep over a λ grid, evaluated in parallel and returned in grid order.
pub fn cumulant_sweep(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambdas: &[f64]) -> Result<Vec<CumulantReport>> {
    use rayon::prelude::*;
    lambdas.par_iter().map(|&l| cumulants(q, risk, l)).collect()
}

/// CSV with header `lambda,k0,k1,k2,k3`.
pub fn sweep_csv(rows: &[CumulantReport]) -> String {
    let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.lambda, r.k0, r.k1, r.k2, r.k3]).collect();
    crate::io::table_string(&["lambda", "k0", "k1", "k2", "k3"], &table)
}

/// Counting measure on ℕ with the given risk per atom, first atom stored explicitly.
pub fn countable_family<F>(risk_of: F) -> Result<(ReferenceMeasure, EmpiricalRisk)>
where
    F: Fn(u64) -> f64 + Send + Sync + 'static,
{
    let first = risk_of(0);
    let tail = TailDescriptor::new(1, move |k| (1.0, risk_of(k)));
    Ok((ReferenceMeasure::countable(vec![1.0], tail)?, EmpiricalRisk::new(vec![first])?))
}
