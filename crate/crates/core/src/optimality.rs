//! Level sets of the risk, the smallest nonnegligible risk level, coherence of
//! the reference, concentration of the posterior as `λ → 0` and
//! `(δ, ε)`-optimality certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gibbs::solve_ermrer;
use crate::measure::{MeasureKind, ReferenceMeasure};
use crate::partition::{cumulants, tilted_moments};
use crate::risk::{EmpiricalRisk, SEPARABILITY_TOL};

/// Maximum number of halvings of `λ` in the `(δ, ε)` solver once `k1 ≤ δ`.
pub const MAX_SHRINK_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// Infimum of the risk over all atoms.
    #[serde(with = "crate::io::ext_real")]
    pub rho_star: f64,
    /// Smallest risk level whose sublevel set has positive `Q` mass.
    #[serde(with = "crate::io::ext_real")]
    pub delta_star: f64,
    /// Supported atoms at level `delta_star`.
    pub lstar_atoms: Vec<usize>,
    /// Atoms attaining `rho_star`.
    pub erm_solutions: Vec<usize>,
    pub coherent: bool,
    pub consistent: bool,
    /// Set for quadrature references, where every grid cell carries positive
    /// mass and coherence says nothing about the underlying continuous measure.
    pub quadrature_caveat: bool,
}

/// `{i : L_i ≤ δ}`.
pub fn level_set(risk: &EmpiricalRisk, delta: f64) -> Vec<usize> {
    risk.values()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= delta)
        .map(|(i, _)| i)
        .collect()
}

pub fn analyze(q: &ReferenceMeasure, risk: &EmpiricalRisk) -> Result<OptimalityReport> {
    check_len(q.len(), risk.len())?;
    if !q.is_finite_backend() {
        return Err(Error::Unsupported("optimality analysis needs a finite atom list".into()));
    }
    let rho_star = risk.values().iter().copied().fold(f64::INFINITY, f64::min);
    let delta_star = risk
        .values()
        .iter()
        .zip(q.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&l, _)| l)
        .fold(f64::INFINITY, f64::min);
    let near = |l: f64, level: f64| l == level || l - level <= SEPARABILITY_TOL;
    let lstar_atoms: Vec<usize> = (0..q.len())
        .filter(|&i| q.in_support(i) && near(risk.value(i), delta_star))
        .collect();
    let erm_solutions: Vec<usize> = (0..q.len()).filter(|&i| near(risk.value(i), rho_star)).collect();
    let lstar_mass: f64 = lstar_atoms.iter().map(|&i| q.weight(i)).sum();
    Ok(OptimalityReport {
        rho_star,
        delta_star,
        coherent: near(delta_star, rho_star),
        consistent: lstar_mass > 0.0,
        lstar_atoms,
        erm_solutions,
        quadrature_caveat: q.kind() == MeasureKind::Quadrature,
    })
}

/// `N(λ) = {i : L_i ≤ k1(λ)}`, with a `1e−12` allowance for rounding in `k1`.
pub fn expected_sublevel_set(q: &ReferenceMeasure, risk: &EmpiricalRisk, lambda: f64) -> Result<Vec<usize>> {
    let c = cumulants(q, risk, lambda)?;
    Ok(level_set(risk, c.k1 + SEPARABILITY_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// `|N(λ)|`.
    pub n_size: usize,
    /// `P*_λ(N(λ))`.
    pub p_n: f64,
    /// `P*_λ(L*)`.
    pub p_lstar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub rows: Vec<ProfileRow>,
    /// `N(λ_{j+1}) ⊆ N(λ_j)` for every consecutive pair.
    pub nested: bool,
    /// `P*_{λ_j}(N(λ_{j+1})) ≤ P*_{λ_{j+1}}(N(λ_{j+1}))` for every pair, to `1e−12`.
    pub inequality_holds: bool,
    /// Number of pairs where the inequality is strict.
    pub strict_pairs: usize,
    /// Human-readable description of each failed check.
    pub violations: Vec<String>,
}

impl ConcentrationProfile {
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| vec![r.lambda, r.k1, r.k2, r.k3, r.n_size as f64, r.p_n, r.p_lstar])
            .collect();
        crate::io::table_string(&["lambda", "k1", "k2", "k3", "n_size", "p_n", "p_lstar"], &rows)
    }
}

struct ProfilePoint {
    row: ProfileRow,
    probs: Vec<f64>,
    n_set: Vec<usize>,
}

/// Profile of the posterior along a strictly decreasing grid of factors.
pub fn concentration_profile(
    q: &ReferenceMeasure,
    risk: &EmpiricalRisk,
    lambda_grid: &[f64],
) -> Result<ConcentrationProfile> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if lambda_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("lambda grid must be strictly decreasing".into()));
    }
    let report = analyze(q, risk)?;
    let points = lambda_grid
        .par_iter()
        .map(|&lambda| -> Result<ProfilePoint> {
            let post = solve_ermrer(q, risk, lambda)?;
            let probs = post.probs.probs().to_vec();
            let (k1, k2, k3) = tilted_moments(&probs, risk);
            let n_set = level_set(risk, k1 + SEPARABILITY_TOL);
            let row = ProfileRow {
                lambda,
                k1,
                k2,
                k3,
                n_size: n_set.len(),
                p_n: post.probs.mass_of(&n_set),
                p_lstar: post.probs.mass_of(&report.lstar_atoms),
            };
            Ok(ProfilePoint { row, probs, n_set })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut nested = true;
    let mut inequality_holds = true;
    let mut strict_pairs = 0;
    let mut violations = Vec::new();
    for (a, b) in points.iter().zip(points.iter().skip(1)) {
        if !b.n_set.iter().all(|i| a.n_set.contains(i)) {
            nested = false;
            violations.push(format!(
                "N({}) is not contained in N({})",
                b.row.lambda, a.row.lambda
            ));
        }
        let earlier: f64 = b.n_set.iter().map(|&i| a.probs[i]).sum();
        let later = b.row.p_n;
        if earlier > later + 1e-12 {
            inequality_holds = false;
            violations.push(format!(
                "P*_{}(N({})) = {earlier} exceeds P*_{}(N({})) = {later}",
                a.row.lambda, b.row.lambda, b.row.lambda, b.row.lambda
            ));
        } else if earlier < later {
            strict_pairs += 1;
        }
    }
    Ok(ConcentrationProfile {
        rows: points.into_iter().map(|p| p.row).collect(),
        nested,
        inequality_holds,
        strict_pairs,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEpsilonSolution {
    pub lambda: f64,
    pub k1: f64,
    /// `P*_λ(L(δ))`, strictly above `1 − ε`.
    pub certificate: f64,
}

/// A factor `λ` whose posterior puts more than `1 − ε` on `{L ≤ δ}`.
///
/// First brings `k1(λ)` below `δ` (halving from 1, then bisecting on the
/// monotone `k1`), then halves `λ` until the mass condition holds. Levels
/// `δ ≤ δ*` are refused, including the band `(ρ*, δ*]` of a noncoherent
/// reference.
pub fn solve_delta_epsilon(
    q: &ReferenceMeasure,
    risk: &EmpiricalRisk,
    delta: f64,
    epsilon: f64,
) -> Result<DeltaEpsilonSolution> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if delta.is_nan() {
        return Err(Error::InvalidArgument("delta is NaN".into()));
    }
    let report = analyze(q, risk)?;
    if !(delta > report.delta_star) {
        return Err(Error::infeasible(format!(
            "delta = {delta} does not exceed the smallest nonnegligible risk {}",
            report.delta_star
        )));
    }
    let k1 = |lambda: f64| cumulants(q, risk, lambda).map(|c| c.k1);
    let mut lambda = 1.0;
    if k1(lambda)? > delta {
        let mut hi = lambda;
        let mut halvings = 0;
        while k1(lambda)? > delta {
            hi = lambda;
            lambda /= 2.0;
            halvings += 1;
            if halvings > 1100 || lambda == 0.0 {
                return Err(Error::Convergence("k1 did not fall below delta".into()));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lambda + hi);
            if mid <= lambda || mid >= hi {
                break;
            }
            if k1(mid)? <= delta {
                lambda = mid;
            } else {
                hi = mid;
            }
        }
    }
    let level = level_set(risk, delta);
    for _ in 0..=MAX_SHRINK_STEPS {
        let post = solve_ermrer(q, risk, lambda)?;
        let mass = post.probs.mass_of(&level);
        if mass > 1.0 - epsilon {
            let (k1, _, _) = tilted_moments(post.probs.probs(), risk);
            return Ok(DeltaEpsilonSolution {
                lambda,
                k1,
                certificate: mass,
            });
        }
        lambda /= 2.0;
    }
    Err(Error::Convergence(format!(
        "mass on L(delta) stayed at or below 1 - epsilon after {MAX_SHRINK_STEPS} halvings"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{counting_measure, quadrature_lebesgue};

    fn example1(q: f64) -> (ReferenceMeasure, EmpiricalRisk) {
        (
            ReferenceMeasure::probability(vec![q, 1.0 - q]).unwrap(),
            EmpiricalRisk::new(vec![0.0, 1.0]).unwrap(),
        )
    }

    #[test]
    fn level_set_examples() {
        let r = EmpiricalRisk::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(level_set(&r, 0.5), vec![0]);
        assert_eq!(level_set(&r, f64::INFINITY), vec![0, 1]);
        assert!(level_set(&r, -0.1).is_empty());
        let r = EmpiricalRisk::new(vec![0.0, f64::INFINITY]).unwrap();
        assert_eq!(level_set(&r, f64::INFINITY), vec![0, 1]);
    }

    #[test]
    fn analyze_examples() {
        let (q, r) = example1(0.5);
        let a = analyze(&q, &r).unwrap();
        assert_eq!((a.rho_star, a.delta_star), (0.0, 0.0));
        assert_eq!(a.lstar_atoms, vec![0]);
        assert!(a.coherent && a.consistent);

        let q = ReferenceMeasure::probability(vec![0.0, 1.0]).unwrap();
        let a = analyze(&q, &r).unwrap();
        assert_eq!((a.rho_star, a.delta_star), (0.0, 1.0));
        assert_eq!(a.lstar_atoms, vec![1]);
        assert_eq!(a.erm_solutions, vec![0]);
        assert!(a.consistent && !a.coherent);

        let q = counting_measure(3).unwrap();
        let a = analyze(&q, &EmpiricalRisk::constant(3, 0.4).unwrap()).unwrap();
        assert_eq!(a.delta_star, 0.4);
        assert_eq!(a.lstar_atoms, vec![0, 1, 2]);
        assert!(!a.quadrature_caveat);

        let g = quadrature_lebesgue(vec![vec![0.0], vec![1.0]], 0.5).unwrap();
        assert!(analyze(&g, &r).unwrap().quadrature_caveat);
    }

    #[test]
    fn tied_minima_group_together() {
        let q = counting_measure(3).unwrap();
        let r = EmpiricalRisk::new(vec![0.1 + 0.2, 0.3, 0.5]).unwrap();
        let a = analyze(&q, &r).unwrap();
        assert_eq!(a.lstar_atoms, vec![0, 1]);
        assert_eq!(a.erm_solutions, a.lstar_atoms);
    }

    #[test]
    fn sublevel_examples() {
        let (q, r) = example1(0.5);
        assert_eq!(expected_sublevel_set(&q, &r, 1.0).unwrap(), vec![0]);
        let q = counting_measure(3).unwrap();
        let c = EmpiricalRisk::constant(3, 0.7).unwrap();
        assert_eq!(expected_sublevel_set(&q, &c, 0.2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn profile_example1() {
        let (q, r) = example1(0.5);
        let grid = [2.0, 1.0, 0.5, 0.1, 0.001];
        let p = concentration_profile(&q, &r, &grid).unwrap();
        assert!(p.nested && p.inequality_holds, "{:?}", p.violations);
        for w in p.rows.windows(2) {
            assert!(w[1].p_lstar > w[0].p_lstar);
        }
        assert!(p.rows.last().unwrap().p_lstar >= 1.0 - 1e-12);
        for row in &p.rows {
            let exact = 1.0 / (1.0 + (-1.0 / row.lambda).exp());
            assert!((row.p_lstar - exact).abs() < 1e-15);
        }
        let csv = p.to_csv();
        assert!(csv.starts_with("lambda,k1,k2,k3,n_size,p_n,p_lstar\n"));
        assert_eq!(csv.lines().count(), grid.len() + 1);
    }

    #[test]
    fn profile_constant_risk() {
        let q = counting_measure(2).unwrap();
        let c = EmpiricalRisk::constant(2, 0.3).unwrap();
        let p = concentration_profile(&q, &c, &[1.0, 0.1]).unwrap();
        assert!(p.rows.iter().all(|r| r.p_lstar == 1.0));
        assert_eq!(p.strict_pairs, 0);
    }

    #[test]
    fn profile_rejects_bad_grids() {
        let (q, r) = example1(0.5);
        assert!(concentration_profile(&q, &r, &[1.0, 1.0]).is_err());
        assert!(concentration_profile(&q, &r, &[0.5, 1.0]).is_err());
        assert!(concentration_profile(&q, &r, &[]).is_err());
    }

    #[test]
    fn delta_epsilon_examples() {
        let (q, r) = example1(0.5);
        let s = solve_delta_epsilon(&q, &r, 0.5, 0.1).unwrap();
        assert!(s.lambda < 1.0 / 9f64.ln());
        let exact = 1.0 / (1.0 + (-1.0 / s.lambda).exp());
        assert!((s.certificate - exact).abs() < 1e-15);
        assert!(s.certificate > 0.9);

        let q2 = ReferenceMeasure::probability(vec![0.0, 0.5, 0.5]).unwrap();
        let r2 = EmpiricalRisk::new(vec![0.0, 0.2, 1.0]).unwrap();
        assert!(matches!(solve_delta_epsilon(&q2, &r2, 0.1, 0.1), Err(Error::Infeasible { .. })));
        assert!(matches!(solve_delta_epsilon(&q, &r, 0.0, 0.1), Err(Error::Infeasible { .. })));

        let s = solve_delta_epsilon(&q, &r, 0.5, 1.0 - 1e-9).unwrap();
        assert_eq!(s.lambda, 1.0);
        assert!(solve_delta_epsilon(&q, &r, 0.5, 1.0).is_err());
    }

    #[test]
    fn delta_epsilon_needs_k1_bisection() {
        let (q, r) = example1(0.1);
        let s = solve_delta_epsilon(&q, &r, 0.05, 0.01).unwrap();
        assert!(s.k1 <= 0.05);
        assert!(s.certificate > 0.99);
    }
}
