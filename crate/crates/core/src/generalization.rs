//! Dataset priors, the posterior barycenter, sensitivity of the expected
//! empirical risk and the generalization error of the Gibbs algorithm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gibbs::{solve_ermrer, GibbsPosterior};
use crate::measure::{
    generalized_relative_entropy, is_absolutely_continuous, relative_entropy_weights, AtomDistribution,
    ModelSpace, ReferenceMeasure,
};
use crate::partition::{is_feasible, subgaussian_beta};
use crate::risk::{empirical_risk, expected_empirical_risk, Dataset, EmpiricalRisk, LossSpec};

/// Finite-support probability measure over datasets, each represented by
/// the empirical risk it induces on the model atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPrior {
    risks: Vec<EmpiricalRisk>,
    probs: AtomDistribution,
}

impl DatasetPrior {
    pub fn new(risks: Vec<EmpiricalRisk>, probs: Vec<f64>) -> Result<Self> {
        if risks.is_empty() {
            return Err(Error::InvalidArgument("dataset prior needs at least one dataset".into()));
        }
        check_len(risks.len(), probs.len())?;
        let m = risks[0].len();
        if let Some(r) = risks.iter().find(|r| r.len() != m) {
            return Err(Error::SizeMismatch {
                expected: m,
                found: r.len(),
            });
        }
        Ok(Self {
            risks,
            probs: AtomDistribution::new(probs)?,
        })
    }

    pub fn from_datasets(space: &ModelSpace, datasets: &[Dataset], spec: &LossSpec, probs: Vec<f64>) -> Result<Self> {
        let risks = datasets
            .iter()
            .map(|ds| empirical_risk(space, ds, spec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(risks, probs)
    }

    /// All datasets on one risk.
    pub fn point_mass(risk: EmpiricalRisk) -> Self {
        Self {
            risks: vec![risk],
            probs: AtomDistribution::from_normalized(vec![1.0]),
        }
    }

    pub fn risks(&self) -> &[EmpiricalRisk] {
        &self.risks
    }

    pub fn probs(&self) -> &[f64] {
        self.probs.probs()
    }

    /// Indices of datasets with positive prior probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.risks.len()).filter(|&v| self.probs.prob(v) > 0.0).collect()
    }

    fn atoms(&self) -> usize {
        self.risks[0].len()
    }
}

/// Posteriors of every supported dataset, in support order.
fn supported_posteriors(prior: &DatasetPrior, q: &ReferenceMeasure, lambda: f64) -> Result<Vec<(f64, GibbsPosterior)>> {
    check_len(q.len(), prior.atoms())?;
    prior
        .support()
        .par_iter()
        .map(|&v| Ok((prior.probs.prob(v), solve_ermrer(q, &prior.risks[v], lambda)?)))
        .collect()
}

fn mixture(posteriors: &[(f64, GibbsPosterior)], m: usize) -> AtomDistribution {
    let mut acc = vec![0.0; m];
    for (w, p) in posteriors {
        for (a, &x) in acc.iter_mut().zip(p.probs.probs()) {
            *a += w * x;
        }
    }
    AtomDistribution::from_normalized(acc)
}

/// `Σ_ν P_Z(ν)·P*_{λ,ν}` over the supported datasets.
pub fn barycenter(prior: &DatasetPrior, q: &ReferenceMeasure, lambda: f64) -> Result<AtomDistribution> {
    let posts = supported_posteriors(prior, q, lambda)?;
    Ok(mixture(&posts, prior.atoms()))
}

fn check_continuity(p: &AtomDistribution, q: &ReferenceMeasure) -> Result<()> {
    if is_absolutely_continuous(p, q)? {
        Ok(())
    } else {
        Err(Error::Domain("P is not absolutely continuous with respect to Q".into()))
    }
}

/// `D(a‖b)` with an absolute-continuity failure read as `+∞`.
fn divergence_or_inf(a: &[f64], b: &[f64]) -> Result<f64> {
    match relative_entropy_weights(a, b) {
        Ok(d) => Ok(d),
        Err(Error::Domain(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `R_z(P) − R_z(P*_{λ,z})`, or `+∞` when `λ` is infeasible.
pub fn sensitivity(q: &ReferenceMeasure, lambda: f64, risk: &EmpiricalRisk, p: &AtomDistribution) -> Result<f64> {
    check_len(q.len(), risk.len())?;
    check_continuity(p, q)?;
    if !(lambda > 0.0) || !is_feasible(q, risk, lambda)? {
        return Ok(f64::INFINITY);
    }
    let post = solve_ermrer(q, risk, lambda)?;
    let rp = expected_empirical_risk(risk, p)?;
    if rp == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(rp - expected_empirical_risk(risk, &post.probs)?)
}

/// The sensitivity and `λ(D(P*‖Q) + D(P‖P*) − D(P‖Q))`.
pub fn sensitivity_identity_check(
    q: &ReferenceMeasure,
    lambda: f64,
    risk: &EmpiricalRisk,
    p: &AtomDistribution,
) -> Result<(f64, f64)> {
    let direct = sensitivity(q, lambda, risk, p)?;
    let post = solve_ermrer(q, risk, lambda)?;
    let d_post_q = generalized_relative_entropy(&post.probs, q)?;
    let d_p_post = divergence_or_inf(p.probs(), post.probs.probs())?;
    let d_p_q = generalized_relative_entropy(p, q)?;
    Ok((direct, lambda * (d_post_q + d_p_post - d_p_q)))
}

/// `sqrt(2β²·D(P‖P*))`, with `β` the sub-Gaussianity constant of `(Q, risk)`.
pub fn sensitivity_bound(q: &ReferenceMeasure, lambda: f64, risk: &EmpiricalRisk, p: &AtomDistribution) -> Result<f64> {
    check_continuity(p, q)?;
    let beta = subgaussian_beta(q, risk)?.beta;
    if beta.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let post = solve_ermrer(q, risk, lambda)?;
    let d = divergence_or_inf(p.probs(), post.probs.probs())?;
    Ok((2.0 * beta * beta * d).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub lambda: f64,
    /// Whether `λ` lies in every supported dataset's feasible set.
    pub feasible: bool,
    /// `Σ_ν P_Z(ν)[R_ν(barycenter) − R_ν(P*_ν)]`.
    #[serde(with = "crate::io::ext_real")]
    pub gen_error: f64,
    /// `λ(I + L)`.
    #[serde(with = "crate::io::ext_real")]
    pub closed_form: f64,
    #[serde(with = "crate::io::ext_real")]
    pub difference: f64,
    #[serde(with = "crate::io::ext_real")]
    pub mutual_info: f64,
    #[serde(with = "crate::io::ext_real")]
    pub lautum_info: f64,
    /// Largest `β` over datasets with positive prior probability.
    #[serde(with = "crate::io::ext_real")]
    pub sigma_q: f64,
    /// Largest `β` over every listed dataset, including zero-probability ones.
    /// Differs from `sigma_q` when the support restriction matters.
    #[serde(with = "crate::io::ext_real")]
    pub sigma_q_listed: f64,
    #[serde(with = "crate::io::ext_real")]
    pub lautum_bound: f64,
}

pub fn generalization_error(q: &ReferenceMeasure, lambda: f64, prior: &DatasetPrior) -> Result<GeneralizationReport> {
    check_len(q.len(), prior.atoms())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive and finite")));
    }
    let support = prior.support();
    let (sigma_q, sigma_q_listed) = if q.is_finite_backend() {
        let betas = prior
            .risks
            .iter()
            .map(|r| subgaussian_beta(q, r).map(|b| b.beta))
            .collect::<Result<Vec<f64>>>()?;
        (
            support.iter().map(|&v| betas[v]).fold(0.0, f64::max),
            betas.iter().copied().fold(0.0, f64::max),
        )
    } else {
        (f64::NAN, f64::NAN)
    };

    let mut feasible = true;
    for &v in &support {
        feasible &= is_feasible(q, &prior.risks[v], lambda)?;
    }
    if !feasible {
        return Ok(GeneralizationReport {
            lambda,
            feasible,
            gen_error: f64::INFINITY,
            closed_form: f64::INFINITY,
            difference: f64::NAN,
            mutual_info: f64::NAN,
            lautum_info: f64::NAN,
            sigma_q,
            sigma_q_listed,
            lautum_bound: f64::NAN,
        });
    }

    let posts = supported_posteriors(prior, q, lambda)?;
    let bary = mixture(&posts, prior.atoms());
    let mut gen_error = 0.0;
    let mut mutual_info = 0.0;
    let mut lautum_info = 0.0;
    for (&v, (w, post)) in support.iter().zip(&posts) {
        let risk = &prior.risks[v];
        gen_error += w * (expected_empirical_risk(risk, &bary)? - expected_empirical_risk(risk, &post.probs)?);
        mutual_info += w * divergence_or_inf(post.probs.probs(), bary.probs())?;
        lautum_info += w * divergence_or_inf(bary.probs(), post.probs.probs())?;
    }
    let closed_form = lambda * (mutual_info + lautum_info);
    Ok(GeneralizationReport {
        lambda,
        feasible,
        gen_error,
        closed_form,
        difference: gen_error - closed_form,
        mutual_info,
        lautum_info,
        sigma_q,
        sigma_q_listed,
        lautum_bound: (2.0 * sigma_q * sigma_q * lautum_info).sqrt(),
    })
}
