//! Empirical risk functions built from datasets and losses.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::measure::{AtomDistribution, ModelSpace, ReferenceMeasure};

/// Absolute tolerance under which two finite risks count as the same value.
pub const SEPARABILITY_TOL: f64 = 1e-12;

/// One labeled pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub pattern: Vec<f64>,
    pub label: f64,
}

/// A training set `z = ((x_1, y_1), ..., (x_n, y_n))`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("dataset must hold at least one sample".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reads a delimited table, one row per sample; the last column is the
    /// label. A first row that does not parse as numbers is taken as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("row {}: {e}", row + 1))),
            };
            let (label, pattern) = values
                .split_last()
                .ok_or_else(|| Error::Parse(format!("row {} is empty", row + 1)))?;
            samples.push(Sample {
                pattern: pattern.to_vec(),
                label: *label,
            });
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }
}

/// Built-in predictors `f(θ, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// `θ·x`, or `θ_0 + θ_{1..}·x` when `θ` is one longer than `x`.
    Linear,
    /// Sign of the linear predictor, in `{-1, +1}`.
    SignLinear,
    /// Ignores the pattern and predicts `θ_0`.
    Constant,
}

/// Built-in losses `ℓ(ŷ, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Squared,
    Absolute,
    ZeroOne,
}

fn linear(theta: &[f64], x: &[f64]) -> f64 {
    if theta.len() == x.len() + 1 {
        theta[0] + theta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    } else {
        theta.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

type Predictor = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type Loss = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A predictor paired with a loss.
#[derive(Clone)]
pub struct LossSpec {
    predictor: Arc<Predictor>,
    loss: Arc<Loss>,
}

impl std::fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LossSpec").finish_non_exhaustive()
    }
}

impl LossSpec {
    pub fn new<F, L>(predictor: F, loss: L) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        L: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            predictor: Arc::new(predictor),
            loss: Arc::new(loss),
        }
    }

    pub fn builtin(predictor: PredictorKind, loss: LossKind) -> Self {
        let f: Arc<Predictor> = match predictor {
            PredictorKind::Linear => Arc::new(linear),
            PredictorKind::SignLinear => Arc::new(|t: &[f64], x: &[f64]| {
                if linear(t, x) >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }),
            PredictorKind::Constant => Arc::new(|t: &[f64], _: &[f64]| t.first().copied().unwrap_or(0.0)),
        };
        let l: Arc<Loss> = match loss {
            LossKind::Squared => Arc::new(|a: f64, b: f64| (a - b) * (a - b)),
            LossKind::Absolute => Arc::new(|a: f64, b: f64| (a - b).abs()),
            LossKind::ZeroOne => Arc::new(|a: f64, b: f64| if a == b { 0.0 } else { 1.0 }),
        };
        Self { predictor: f, loss: l }
    }

    pub fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        (self.predictor)(theta, x)
    }

    pub fn loss(&self, predicted: f64, label: f64) -> f64 {
        (self.loss)(predicted, label)
    }
}

/// Risk value per model atom, in `[0, +∞]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmpiricalRisk {
    values: Vec<f64>,
}

impl EmpiricalRisk {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("risk needs at least one atom".into()));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "risk {i} = {} is not in [0, +inf]",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    /// The same risk on every one of `m` atoms.
    pub fn constant(m: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; m])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `(min, max)` over atoms with positive reference weight and finite risk.
    pub fn supported_finite_range(&self, q: &ReferenceMeasure) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(q.weights())
            .filter(|(l, w)| **w > 0.0 && l.is_finite())
            .fold(None, |acc, (&l, _)| match acc {
                None => Some((l, l)),
                Some((lo, hi)) => Some((lo.min(l), hi.max(l))),
            })
    }

    /// One-column table (`risk` header) aligned with atom indices.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("risk\n");
        for v in &self.values {
            out.push_str(&crate::io::fmt_num(*v));
            out.push('\n');
        }
        out
    }
}

impl TryFrom<Vec<f64>> for EmpiricalRisk {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<EmpiricalRisk> for Vec<f64> {
    fn from(r: EmpiricalRisk) -> Self {
        r.values
    }
}

/// `L_z(θ_i) = (1/n) Σ_j ℓ(f(θ_i, x_j), y_j)` for every model.
pub fn empirical_risk(space: &ModelSpace, ds: &Dataset, spec: &LossSpec) -> Result<EmpiricalRisk> {
    let coords = space
        .coords()
        .ok_or_else(|| Error::InvalidArgument("model space has no coordinates".into()))?;
    let n = ds.len() as f64;
    let mut values = Vec::with_capacity(coords.len());
    for theta in coords {
        let mut total = 0.0;
        for s in ds.samples() {
            let l = spec.loss(spec.predict(theta, &s.pattern), s.label);
            if l.is_nan() || l < 0.0 {
                return Err(Error::Domain(format!("loss returned {l}; losses must be in [0, +inf]")));
            }
            total += l;
        }
        values.push(total / n);
    }
    EmpiricalRisk::new(values)
}

/// `R_z(P) = Σ P_i L_i`, with `0·∞ = 0`.
pub fn expected_empirical_risk(risk: &EmpiricalRisk, p: &AtomDistribution) -> Result<f64> {
    check_len(risk.len(), p.len())?;
    Ok(risk
        .values
        .iter()
        .zip(p.probs())
        .filter(|(_, &pi)| pi > 0.0)
        .map(|(&l, &pi)| pi * l)
        .sum())
}

/// Raw integral `Σ Q_i L_i` against an unnormalized measure, with `0·∞ = 0`.
pub(crate) fn integrate_risk(risk: &EmpiricalRisk, weights: &[f64]) -> f64 {
    risk.values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&l, &w)| w * l)
        .sum()
}

/// True iff the risk takes at least two distinct finite values on `supp Q`.
pub fn is_separable(risk: &EmpiricalRisk, q: &ReferenceMeasure) -> bool {
    if risk.len() != q.len() {
        return false;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |l: f64| {
        if l.is_finite() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
    };
    for (&l, &w) in risk.values.iter().zip(q.weights()) {
        if w > 0.0 {
            visit(l);
        }
    }
    if let Some(tail) = q.tail() {
        for k in tail.start..tail.start + 64 {
            let (w, l) = tail.term(k);
            if w > 0.0 {
                visit(l);
            }
        }
    }
    hi - lo > SEPARABILITY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn risk(v: &[f64]) -> EmpiricalRisk {
        EmpiricalRisk::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_model_has_zero_risk() {
        let space = ModelSpace::with_coords(vec![vec![2.0]]).unwrap();
        let ds = Dataset::new(
            (0..4)
                .map(|i| Sample {
                    pattern: vec![i as f64],
                    label: 2.0 * i as f64,
                })
                .collect(),
        )
        .unwrap();
        let spec = LossSpec::builtin(PredictorKind::Linear, LossKind::Squared);
        assert_eq!(empirical_risk(&space, &ds, &spec).unwrap().values(), &[0.0]);
    }

    #[test]
    fn zero_one_loss_fraction() {
        // Predicts +1 everywhere; three of ten labels are -1.
        let space = ModelSpace::with_coords(vec![vec![1.0, 0.0]]).unwrap();
        let ds = Dataset::new(
            (0..10)
                .map(|i| Sample {
                    pattern: vec![1.0],
                    label: if i < 3 { -1.0 } else { 1.0 },
                })
                .collect(),
        )
        .unwrap();
        let spec = LossSpec::builtin(PredictorKind::SignLinear, LossKind::ZeroOne);
        let r = empirical_risk(&space, &ds, &spec).unwrap();
        assert!((r.value(0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn squared_loss_hand_sum() {
        let space = ModelSpace::with_coords(vec![vec![1.0]]).unwrap();
        let ds = Dataset::new(vec![
            Sample { pattern: vec![1.0], label: 0.0 },
            Sample { pattern: vec![3.0], label: 0.0 },
        ])
        .unwrap();
        let spec = LossSpec::builtin(PredictorKind::Linear, LossKind::Squared);
        assert_eq!(empirical_risk(&space, &ds, &spec).unwrap().values(), &[5.0]);
    }

    #[test]
    fn missing_coords_rejected() {
        let space = ModelSpace::indexed(2).unwrap();
        let ds = Dataset::new(vec![Sample { pattern: vec![], label: 0.0 }]).unwrap();
        let spec = LossSpec::builtin(PredictorKind::Constant, LossKind::Squared);
        assert!(matches!(
            empirical_risk(&space, &ds, &spec),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn expected_risk_examples() {
        let p = AtomDistribution::point_mass(2, 1).unwrap();
        assert_eq!(expected_empirical_risk(&risk(&[0.1, 0.7]), &p).unwrap(), 0.7);
        let half = AtomDistribution::uniform(2).unwrap();
        assert_eq!(expected_empirical_risk(&risk(&[0.0, 1.0]), &half).unwrap(), 0.5);
        let first = AtomDistribution::point_mass(2, 0).unwrap();
        assert_eq!(
            expected_empirical_risk(&risk(&[0.2, f64::INFINITY]), &first).unwrap(),
            0.2
        );
        assert_eq!(
            expected_empirical_risk(&risk(&[0.2, f64::INFINITY]), &half).unwrap(),
            f64::INFINITY
        );
        assert!(expected_empirical_risk(&risk(&[0.2]), &half).is_err());
    }

    #[test]
    fn separability_examples() {
        let q = ReferenceMeasure::probability(vec![0.5, 0.5]).unwrap();
        assert!(is_separable(&risk(&[0.0, 1.0]), &q));
        let q3 = ReferenceMeasure::custom(vec![0.2, 3.0, 1.0]).unwrap();
        assert!(!is_separable(&risk(&[0.4, 0.4, 0.4]), &q3));
        let q10 = ReferenceMeasure::probability(vec![1.0, 0.0]).unwrap();
        assert!(!is_separable(&risk(&[0.0, 1.0]), &q10));
        // Infinite values do not count as a second level.
        assert!(!is_separable(&risk(&[0.3, f64::INFINITY]), &q));
    }

    #[test]
    fn csv_dataset_with_header() {
        let text = "x1,x2,y\n1,2,0.5\n3,4,1.5\n";
        let ds = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples()[1].pattern, vec![3.0, 4.0]);
        assert_eq!(ds.samples()[1].label, 1.5);
        let headerless = Dataset::from_csv_reader("1,0\n2,1\n".as_bytes()).unwrap();
        assert_eq!(headerless.len(), 2);
        assert!(Dataset::from_csv_reader("y\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("1,2\nfoo,3\n".as_bytes()).is_err());
    }

    #[test]
    fn risk_rejects_negative_and_nan() {
        assert!(EmpiricalRisk::new(vec![-0.1]).is_err());
        assert!(EmpiricalRisk::new(vec![f64::NAN]).is_err());
        assert!(EmpiricalRisk::new(vec![f64::INFINITY]).is_ok());
    }

    #[test]
    fn risk_csv_export() {
        let s = risk(&[0.5, f64::INFINITY]).to_csv_string();
        assert_eq!(s, "risk\n5.0000000000000000e-1\ninf\n");
    }
}
