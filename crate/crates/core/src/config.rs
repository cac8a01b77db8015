//! Experiment configuration read by the command-line front end.
//!
//! Documents are TOML, or JSON when the file name ends in `.json`. Relative
//! dataset paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generalization::DatasetPrior;
use crate::measure::{counting_measure, MeasureDoc, MeasureKind, ModelSpace, ReferenceMeasure};
use crate::risk::{empirical_risk, Dataset, EmpiricalRisk, LossKind, LossSpec, PredictorKind};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub kind: Option<MeasureKind>,
    pub weights: Option<Vec<f64>>,
    /// Number of atoms for a counting measure given without weights.
    pub m: Option<usize>,
    pub coords: Option<Vec<Vec<f64>>>,
    pub cell_volume: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    /// Explicit per-atom risks; `inf` (or the string "inf" in JSON) is allowed.
    #[serde(default, with = "opt_ext_vec", skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// CSV dataset, last column the label.
    pub dataset: Option<PathBuf>,
    pub predictor: Option<PredictorKind>,
    pub loss: Option<LossKind>,
    /// Model coordinates; defaults to the measure's coordinates.
    pub coords: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub probs: Vec<f64>,
    /// One risk vector per dataset.
    pub risks: Option<Vec<Vec<f64>>>,
    /// One CSV per dataset, evaluated with the predictor and loss of `[risk]`.
    pub datasets: Option<Vec<PathBuf>>,
}

/// Log-spaced `"a:b:steps"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Text(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: Option<MeasureSpec>,
    pub risk: Option<RiskSpec>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<GridSpec>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    /// Number of posterior draws to include in a solve document.
    pub samples: Option<usize>,
    /// Reference probabilities for the Example 1 figures.
    pub q_list: Option<Vec<f64>>,
    pub prior: Option<PriorSpec>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

mod opt_ext_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    struct Wrap(#[serde(with = "crate::io::ext_real_vec")] Vec<f64>);

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(xs) => crate::io::ext_real_vec::serialize(xs, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Some(Wrap::deserialize(d)?.0))
    }
}

/// `a:b:steps`, log-spaced from `a` to `b` in the order given.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Parse(format!("lambda grid {text:?} is not of the form a:b:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    log_grid(a, b, n)
}

pub fn log_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid endpoints {a}, {b} must be positive")));
    }
    match n {
        0 => Err(Error::InvalidArgument("grid needs at least one point".into())),
        1 => Ok(vec![a]),
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            let mut g: Vec<f64> = (0..n)
                .map(|j| (la + (lb - la) * j as f64 / (n - 1) as f64).exp())
                .collect();
            g[0] = a;
            g[n - 1] = b;
            Ok(g)
        }
    }
}

impl ExperimentConfig {
    pub fn from_str_with_format(text: &str, json: bool) -> Result<Self> {
        let cfg: Self = if json {
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = Self::from_str_with_format(&text, json)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.risk {
            let sources = usize::from(r.values.is_some()) + usize::from(r.dataset.is_some());
            if sources != 1 {
                return Err(Error::InvalidArgument(
                    "risk needs exactly one source: values or dataset".into(),
                ));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda = {l} must be positive")));
            }
        }
        if self.lambda_grid.is_some() {
            self.grid()?;
        }
        if let Some(p) = &self.prior {
            let sources = usize::from(p.risks.is_some()) + usize::from(p.datasets.is_some());
            if sources != 1 {
                return Err(Error::InvalidArgument(
                    "prior needs exactly one source: risks or datasets".into(),
                ));
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// The configured grid, if any; every entry positive and finite.
    pub fn grid(&self) -> Result<Option<Vec<f64>>> {
        let g = match &self.lambda_grid {
            None => return Ok(None),
            Some(GridSpec::Text(t)) => parse_grid(t)?,
            Some(GridSpec::Values(v)) => v.clone(),
        };
        if g.is_empty() || g.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("lambda grid entries must be positive".into()));
        }
        Ok(Some(g))
    }

    pub fn build_measure(&self) -> Result<ReferenceMeasure> {
        let spec = self
            .measure
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config has no [measure] section".into()))?;
        let kind = spec.kind.unwrap_or(MeasureKind::Probability);
        if kind == MeasureKind::Counting && spec.weights.is_none() {
            let m = spec
                .m
                .ok_or_else(|| Error::InvalidArgument("counting measure needs m or weights".into()))?;
            return counting_measure(m);
        }
        ReferenceMeasure::from_doc(MeasureDoc {
            kind,
            weights: spec.weights.clone().unwrap_or_default(),
            coords: spec.coords.clone(),
            cell_volume: spec.cell_volume,
        })
    }

    fn loss_and_space(&self, spec: &RiskSpec) -> Result<(LossSpec, ModelSpace)> {
        let coords = spec
            .coords
            .clone()
            .or_else(|| self.measure.as_ref().and_then(|m| m.coords.clone()))
            .ok_or_else(|| Error::InvalidArgument("dataset risks need model coords".into()))?;
        let loss = LossSpec::builtin(
            spec.predictor.unwrap_or(PredictorKind::Linear),
            spec.loss.unwrap_or(LossKind::Squared),
        );
        Ok((loss, ModelSpace::with_coords(coords)?))
    }

    pub fn build_risk(&self) -> Result<EmpiricalRisk> {
        let spec = self
            .risk
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config has no [risk] section".into()))?;
        if let Some(v) = &spec.values {
            return EmpiricalRisk::new(v.clone());
        }
        let path = spec.dataset.as_ref().expect("validated: one risk source");
        let ds = Dataset::from_csv_path(self.resolve(path))?;
        let (loss, space) = self.loss_and_space(spec)?;
        empirical_risk(&space, &ds, &loss)
    }

    pub fn build_prior(&self) -> Result<DatasetPrior> {
        let spec = self
            .prior
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config has no [prior] section".into()))?;
        if let Some(risks) = &spec.risks {
            let risks = risks
                .iter()
                .map(|r| EmpiricalRisk::new(r.clone()))
                .collect::<Result<Vec<_>>>()?;
            return DatasetPrior::new(risks, spec.probs.clone());
        }
        let paths = spec.datasets.as_ref().expect("validated: one prior source");
        let datasets = paths
            .iter()
            .map(|p| Dataset::from_csv_path(self.resolve(p)))
            .collect::<Result<Vec<_>>>()?;
        let risk_spec = self.risk.clone().unwrap_or_default();
        let (loss, space) = self.loss_and_space(&risk_spec)?;
        DatasetPrior::from_datasets(&space, &datasets, &loss, spec.probs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.01:10:4").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!((g[0], g[3]), (0.01, 10.0));
        assert!((g[1] - 0.1).abs() < 1e-15 && (g[2] - 1.0).abs() < 1e-14);
        let d = parse_grid("2:0.5:3").unwrap();
        assert_eq!(d, vec![2.0, 1.0, 0.5]);
        assert_eq!(parse_grid("3:9:1").unwrap(), vec![3.0]);
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a:2:3").is_err());
    }

    #[test]
    fn toml_config() {
        let cfg = ExperimentConfig::from_str_with_format(
            r#"
            lambda = 1.0
            lambda_grid = "1:0.1:3"
            seed = 3
            [measure]
            kind = "probability"
            weights = [0.5, 0.5]
            [risk]
            values = [0.0, inf]
            "#,
            false,
        )
        .unwrap();
        assert_eq!(cfg.build_measure().unwrap().weights(), &[0.5, 0.5]);
        assert_eq!(cfg.build_risk().unwrap().values(), &[0.0, f64::INFINITY]);
        assert_eq!(cfg.grid().unwrap().unwrap().len(), 3);
    }

    #[test]
    fn json_config_with_infinite_risk() {
        let cfg = ExperimentConfig::from_str_with_format(
            r#"{"measure": {"kind": "counting", "m": 2}, "risk": {"values": [0.2, "inf"]},
                "lambda_grid": [1.0, 0.5]}"#,
            true,
        )
        .unwrap();
        assert_eq!(cfg.build_measure().unwrap().weights(), &[1.0, 1.0]);
        assert_eq!(cfg.build_risk().unwrap().value(1), f64::INFINITY);
    }

    #[test]
    fn config_rejections() {
        let two_sources = r#"
            [risk]
            values = [0.0]
            dataset = "x.csv"
        "#;
        assert!(ExperimentConfig::from_str_with_format(two_sources, false).is_err());
        assert!(ExperimentConfig::from_str_with_format("lambda = -1.0", false).is_err());
        assert!(ExperimentConfig::from_str_with_format("lambda_grid = [1.0, 0.0]", false).is_err());
        assert!(ExperimentConfig::from_str_with_format("bogus = 1", false).is_err());
        let cfg = ExperimentConfig::from_str_with_format("lambda = 1.0", false).unwrap();
        assert!(cfg.build_prior().is_err());
        assert!(cfg.build_measure().is_err());
    }

    #[test]
    fn dataset_risk_from_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "x,y\n1,1\n2,2\n").unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            r#"
            [measure]
            kind = "counting"
            m = 2
            [risk]
            dataset = "d.csv"
            predictor = "linear"
            loss = "squared"
            coords = [[1.0], [0.0]]
            [prior]
            probs = [0.5, 0.5]
            datasets = ["d.csv", "d.csv"]
            "#,
        )
        .unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let r = cfg.build_risk().unwrap();
        assert_eq!(r.values(), &[0.0, 2.5]);
        assert_eq!(cfg.build_prior().unwrap().risks().len(), 2);
    }
}
