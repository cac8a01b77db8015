//! Model spaces and reference measures as weighted atom collections.
//!
//! Every measure lives on a finite list of atoms `0..m`. Counting and
//! probability measures are exact; a Lebesgue measure is approximated by
//! equal quadrature cells; a countable family keeps its first atoms here and
//! describes the remaining terms analytically through a [`TailDescriptor`]
//! (evaluated by the `partition` module).
//!
//! Relative entropy follows the generalized definition
//! `D(P‖Q) = Σ_{P_i>0} P_i log(P_i / Q_i)`, which can be negative when `Q`
//! is not a probability measure.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Total-mass tolerance for a measure to count as a probability measure.
pub const PROBABILITY_MASS_TOL: f64 = 1e-9;

/// Normalization tolerance of an [`AtomDistribution`].
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

/// Finite indexed set of candidate models, optionally embedded in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    ids: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
    dim: usize,
}

impl ModelSpace {
    /// Models named `0..m` with no coordinates.
    pub fn indexed(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("model space must hold at least one model".into()));
        }
        Ok(Self {
            ids: (0..m).map(|i| i.to_string()).collect(),
            coords: None,
            dim: 0,
        })
    }

    /// Models carrying parameter vectors; all vectors must share one length.
    pub fn with_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        let first = coords
            .first()
            .ok_or_else(|| Error::InvalidArgument("model space must hold at least one model".into()))?;
        let dim = first.len();
        if let Some(bad) = coords.iter().position(|c| c.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "model {bad} has dimension {}, expected {dim}",
                coords[bad].len()
            )));
        }
        Ok(Self {
            ids: (0..coords.len()).map(|i| i.to_string()).collect(),
            coords: Some(coords),
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// What a [`ReferenceMeasure`] stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Probability,
    Counting,
    Quadrature,
    Custom,
    CountableAnalytic,
}

/// Analytic description of the atoms `start, start+1, ...` of a countable
/// measure: `term(k)` returns `(weight, risk)` of atom `k`.
#[derive(Clone)]
pub struct TailDescriptor {
    term: Arc<dyn Fn(u64) -> (f64, f64) + Send + Sync>,
    /// Index of the first atom not stored explicitly.
    pub start: u64,
    /// Largest truncation point used by series evaluation and tail tests.
    pub max_terms: u64,
}

impl TailDescriptor {
    pub fn new<F>(start: u64, term: F) -> Self
    where
        F: Fn(u64) -> (f64, f64) + Send + Sync + 'static,
    {
        Self {
            term: Arc::new(term),
            start,
            max_terms: 1 << 22,
        }
    }

    pub fn with_max_terms(mut self, max_terms: u64) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn term(&self, k: u64) -> (f64, f64) {
        (self.term)(k)
    }
}

impl fmt::Debug for TailDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailDescriptor")
            .field("start", &self.start)
            .field("max_terms", &self.max_terms)
            .finish_non_exhaustive()
    }
}

/// Nonnegative atom weights standing for a σ-finite measure.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    weights: Vec<f64>,
    kind: MeasureKind,
    total_mass: f64,
    coords: Option<Vec<Vec<f64>>>,
    cell_volume: Option<f64>,
    tail: Option<TailDescriptor>,
}

impl ReferenceMeasure {
    fn build(weights: Vec<f64>, kind: MeasureKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("measure needs at least one atom".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight {i} = {} is not a nonnegative finite real",
                weights[i]
            )));
        }
        if kind != MeasureKind::CountableAnalytic && !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidArgument("measure has empty support".into()));
        }
        let total_mass = weights.iter().sum::<f64>();
        match kind {
            MeasureKind::Probability if (total_mass - 1.0).abs() > PROBABILITY_MASS_TOL => {
                return Err(Error::InvalidArgument(format!(
                    "probability measure has total mass {total_mass}"
                )));
            }
            MeasureKind::Counting if weights.iter().any(|&w| w != 0.0 && w != 1.0) => {
                return Err(Error::InvalidArgument("counting measure weights must be 0 or 1".into()));
            }
            _ => {}
        }
        Ok(Self {
            weights,
            kind,
            total_mass,
            coords: None,
            cell_volume: None,
            tail: None,
        })
    }

    /// Probability measure; weights must sum to one within [`PROBABILITY_MASS_TOL`].
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        Self::build(weights, MeasureKind::Probability)
    }

    /// Arbitrary finite nonnegative weights.
    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        Self::build(weights, MeasureKind::Custom)
    }

    /// Weights `0/1` marking a subset under the counting measure.
    pub fn counting_subset(weights: Vec<f64>) -> Result<Self> {
        Self::build(weights, MeasureKind::Counting)
    }

    /// Countable measure: explicit leading atoms plus an analytic tail.
    ///
    /// The leading weights may all be zero; the tail then carries the support.
    pub fn countable(head: Vec<f64>, tail: TailDescriptor) -> Result<Self> {
        if tail.start != head.len() as u64 {
            return Err(Error::InvalidArgument(format!(
                "tail starts at atom {} but {} atoms are stored",
                tail.start,
                head.len()
            )));
        }
        let mut m = Self::build(head, MeasureKind::CountableAnalytic)?;
        m.total_mass = f64::NAN;
        m.tail = Some(tail);
        Ok(m)
    }

    /// Rebuilds a measure from its serialized form.
    pub fn from_doc(doc: MeasureDoc) -> Result<Self> {
        match doc.kind {
            MeasureKind::Quadrature => {
                let grid = doc
                    .coords
                    .ok_or_else(|| Error::InvalidArgument("quadrature measure needs coords".into()))?;
                let volume = doc
                    .cell_volume
                    .ok_or_else(|| Error::InvalidArgument("quadrature measure needs cell_volume".into()))?;
                quadrature_lebesgue(grid, volume)
            }
            MeasureKind::CountableAnalytic => Err(Error::Unsupported(
                "countable-analytic measures cannot be read from a document".into(),
            )),
            kind => {
                let mut m = Self::build(doc.weights, kind)?;
                m.coords = doc.coords;
                m.cell_volume = doc.cell_volume;
                Ok(m)
            }
        }
    }

    pub fn to_doc(&self) -> Result<MeasureDoc> {
        if self.tail.is_some() {
            return Err(Error::Unsupported(
                "countable-analytic measures have no finite document form".into(),
            ));
        }
        Ok(MeasureDoc {
            kind: self.kind,
            weights: self.weights.clone(),
            coords: self.coords.clone(),
            cell_volume: self.cell_volume,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    /// Sum of the stored weights; NaN for countable measures, whose mass
    /// may be infinite.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn cell_volume(&self) -> Option<f64> {
        self.cell_volume
    }

    pub fn tail(&self) -> Option<&TailDescriptor> {
        self.tail.as_ref()
    }

    /// True when every atom is stored explicitly.
    pub fn is_finite_backend(&self) -> bool {
        self.tail.is_none()
    }

    /// True when the stored weights sum to one within [`PROBABILITY_MASS_TOL`],
    /// whatever the declared kind.
    pub fn is_probability(&self) -> bool {
        self.tail.is_none() && (self.total_mass - 1.0).abs() <= PROBABILITY_MASS_TOL
    }

    pub fn in_support(&self, i: usize) -> bool {
        self.weights[i] > 0.0
    }

    pub fn support(&self) -> Vec<bool> {
        self.weights.iter().map(|&w| w > 0.0).collect()
    }

    /// Same measure with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {factor} must be positive")));
        }
        let kind = match self.kind {
            MeasureKind::CountableAnalytic => {
                return Err(Error::Unsupported("cannot rescale a countable measure".into()))
            }
            _ => MeasureKind::Custom,
        };
        let mut m = Self::build(self.weights.iter().map(|w| w * factor).collect(), kind)?;
        m.coords = self.coords.clone();
        Ok(m)
    }

    /// The normalized measure `Q / Q(M)`, defined for finite backends.
    pub fn normalized(&self) -> Result<AtomDistribution> {
        if self.tail.is_some() {
            return Err(Error::Unsupported("countable measure cannot be normalized atomwise".into()));
        }
        AtomDistribution::from_weights(&self.weights)
    }
}

/// Serialized form of a finite [`ReferenceMeasure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub kind: MeasureKind,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_volume: Option<f64>,
}

/// Probability distribution over the atoms of a model space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AtomDistribution {
    probs: Vec<f64>,
}

impl AtomDistribution {
    /// Validates nonnegativity and `Σ p = 1 ± 1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("distribution needs at least one atom".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "probability {i} = {} is not in [0, 1]",
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(Error::InvalidArgument(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative finite weights with positive sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight {i} = {} is not a nonnegative finite real",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidArgument("weights have zero total mass".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn point_mass(m: usize, at: usize) -> Result<Self> {
        if at >= m {
            return Err(Error::InvalidArgument(format!("atom {at} outside 0..{m}")));
        }
        let mut probs = vec![0.0; m];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; m])
    }

    /// Crate-internal constructor for vectors normalized by construction.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn support(&self) -> Vec<bool> {
        self.probs.iter().map(|&p| p > 0.0).collect()
    }

    /// Mass of an index set.
    pub fn mass_of(&self, atoms: &[usize]) -> f64 {
        atoms.iter().map(|&i| self.probs[i]).sum()
    }

    /// This distribution viewed as a probability reference measure.
    pub fn as_measure(&self) -> ReferenceMeasure {
        ReferenceMeasure {
            weights: self.probs.clone(),
            kind: MeasureKind::Probability,
            total_mass: self.probs.iter().sum(),
            coords: None,
            cell_volume: None,
            tail: None,
        }
    }

    /// `D(self ‖ other)` between two distributions on the same atoms.
    pub fn relative_entropy(&self, other: &AtomDistribution) -> Result<f64> {
        relative_entropy_weights(&self.probs, &other.probs)
    }
}

impl TryFrom<Vec<f64>> for AtomDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<AtomDistribution> for Vec<f64> {
    fn from(d: AtomDistribution) -> Self {
        d.probs
    }
}

/// Counting measure on `m` atoms.
pub fn counting_measure(m: usize) -> Result<ReferenceMeasure> {
    if m == 0 {
        return Err(Error::InvalidArgument("counting measure needs m >= 1".into()));
    }
    ReferenceMeasure::build(vec![1.0; m], MeasureKind::Counting)
}

/// Lebesgue measure discretized on `grid`, each point owning a cell of volume `cell_volume`.
pub fn quadrature_lebesgue(grid: Vec<Vec<f64>>, cell_volume: f64) -> Result<ReferenceMeasure> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("quadrature grid is empty".into()));
    }
    if !(cell_volume > 0.0 && cell_volume.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cell volume {cell_volume} must be positive and finite"
        )));
    }
    let dim = grid[0].len();
    if grid.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidArgument("grid points differ in dimension".into()));
    }
    let mut m = ReferenceMeasure::build(vec![cell_volume; grid.len()], MeasureKind::Quadrature)?;
    m.coords = Some(grid);
    m.cell_volume = Some(cell_volume);
    Ok(m)
}

/// True iff no atom carries probability where `q` has zero weight.
pub fn is_absolutely_continuous(p: &AtomDistribution, q: &ReferenceMeasure) -> Result<bool> {
    check_len(q.len(), p.len())?;
    Ok(p
        .probs
        .iter()
        .zip(&q.weights)
        .all(|(&pi, &qi)| pi == 0.0 || qi > 0.0))
}

/// Generalized relative entropy `D(P‖Q)`; negative values are legitimate
/// when `Q` is not a probability measure.
pub fn generalized_relative_entropy(p: &AtomDistribution, q: &ReferenceMeasure) -> Result<f64> {
    check_len(q.len(), p.len())?;
    relative_entropy_weights(&p.probs, &q.weights)
}

/// `Σ_{a_i>0} a_i log(a_i / b_i)` for raw weight vectors.
///
/// Zero entries of `a` contribute nothing; a positive `a_i` against a zero
/// `b_i` is an absolute-continuity violation.
pub fn relative_entropy_weights(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let mut acc = 0.0;
    for (i, (&ai, &bi)) in a.iter().zip(b).enumerate() {
        if ai == 0.0 {
            continue;
        }
        if bi <= 0.0 {
            return Err(Error::Domain(format!(
                "atom {i} has mass {ai} but the reference gives it zero weight"
            )));
        }
        acc += ai * (ai / bi).ln();
    }
    Ok(acc)
}

/// Convex combination `w·P1 + (1−w)·P2`.
pub fn mix(p1: &AtomDistribution, p2: &AtomDistribution, w: f64) -> Result<AtomDistribution> {
    check_len(p1.len(), p2.len())?;
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidArgument(format!("mixing weight {w} outside [0, 1]")));
    }
    let probs = p1
        .probs
        .iter()
        .zip(&p2.probs)
        .map(|(a, b)| w * a + (1.0 - w) * b)
        .collect();
    Ok(AtomDistribution::from_normalized(probs))
}
