//! TOML experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::q_adapted::QFunction;
use crate::scalar::C;
use crate::space::{build_lattice, WeightFunction};
use crate::suites::{KernelChoice, Lat, QChoice};

type C64 = C<f64>;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<crate::error::QsError> for ConfigError {
    fn from(e: crate::error::QsError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

/// Per-point real values: a list or `"constant:<c>"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Preset(String),
}

impl Values {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>, ConfigError> {
        match self {
            Values::List(v) if v.len() == n => Ok(v.clone()),
            Values::List(v) => Err(ConfigError::Invalid(format!("expected {n} values, got {}", v.len()))),
            Values::Preset(s) => match s.split_once(':') {
                Some(("constant", c)) => {
                    let c: f64 = c
                        .trim()
                        .parse()
                        .map_err(|_| ConfigError::Invalid(format!("bad constant in {s:?}")))?;
                    Ok(vec![c; n])
                }
                _ => Err(ConfigError::Invalid(format!("unknown preset {s:?}"))),
            },
        }
    }

    fn weight(&self, n: usize) -> Result<WeightFunction<f64>, ConfigError> {
        Ok(WeightFunction::new(self.resolve(n)?)?)
    }
}

/// A complex number written as a number or a string such as `"0.5-1.5i"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Text(String),
}

impl ComplexValue {
    pub fn value(&self) -> Result<C64, ConfigError> {
        match self {
            ComplexValue::Real(x) => Ok(C::new(*x, 0.0)),
            ComplexValue::Text(s) => parse_complex(s).map_err(ConfigError::Invalid),
        }
    }
}

fn complex_list(v: &[ComplexValue], n: usize, what: &str) -> Result<Vec<C64>, ConfigError> {
    if v.len() != n {
        return Err(ConfigError::Invalid(format!("{what} needs {n} values, got {}", v.len())));
    }
    v.iter().map(ComplexValue::value).collect()
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also with `j`).
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("cannot parse {s:?} as a complex number");
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|x| C::new(x, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| err())?,
    };
    let re = re.parse::<f64>().map_err(|_| err())?;
    Ok(C::new(re, im))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub times: Vec<f64>,
    pub weights: Values,
    pub mult_dims: Option<Vec<usize>>,
    pub initial_dim: Option<usize>,
    pub cap: Option<usize>,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lat, ConfigError> {
        let n = self.times.len();
        let w = self.weights.resolve(n)?;
        let d = match &self.mult_dims {
            Some(d) if d.len() == n => d.clone(),
            Some(d) => return Err(ConfigError::Invalid(format!("mult_dims needs {n} values, got {}", d.len()))),
            None => vec![1; n],
        };
        let spec: Vec<(f64, f64, usize)> = (0..n).map(|i| (self.times[i], w[i], d[i])).collect();
        Ok(build_lattice(&spec, self.initial_dim.unwrap_or(1), self.cap.unwrap_or(n))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub q: Values,
    pub r: Values,
    pub s: Values,
    pub p: Option<Values>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Random,
    Identity,
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandSpec {
    pub kind: KernelKind,
    pub k_ann: Option<Vec<ComplexValue>>,
    pub h_ann: Option<Vec<ComplexValue>>,
    pub k_cre: Option<Vec<ComplexValue>>,
    pub h_cre: Option<Vec<ComplexValue>>,
}

/// `Q`: `"identity"`, `"zero"`, `"phase:<p>"`, a complex constant, or a
/// per-point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Real(f64),
    Text(String),
    PerPoint(Vec<ComplexValue>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSpec {
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerSpec {
    pub levels: Option<usize>,
    pub max_moment: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub trials: Option<usize>,
    pub lattice: Option<LatticeSpec>,
    pub weights: Option<WeightsSpec>,
    pub integrand: Option<IntegrandSpec>,
    pub q: Option<QSpec>,
    pub refine: Option<RefineSpec>,
    pub wiener: Option<WienerSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: "<config>".into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds everything once so that errors surface before any suite runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError::Invalid(format!("tol must be finite and nonnegative, got {t}")));
            }
        }
        let lattice = self.lattice()?;
        if self.weights.is_some() {
            self.bound_weights(lattice.as_ref())?;
        }
        self.q_choice(lattice.as_ref())?;
        self.kernel_choice(lattice.as_ref())?;
        if let Some(l) = &lattice {
            if let QChoice::PerPoint(v) = self.q_choice(Some(l))? {
                QFunction::per_point(l, &v)?;
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Option<Lat>, ConfigError> {
        self.lattice.as_ref().map(LatticeSpec::build).transpose()
    }

    pub fn bound_weights(&self, lattice: Option<&Lat>) -> Result<Option<crate::suites::BoundWeights>, ConfigError> {
        let Some(w) = &self.weights else { return Ok(None) };
        let l = lattice.ok_or_else(|| ConfigError::Invalid("weights need a [lattice] section".into()))?;
        let n = l.len();
        let q = w.q.weight(n)?;
        q.require_class_at_least_one()?;
        Ok(Some(crate::suites::BoundWeights {
            q,
            r: w.r.weight(n)?,
            s: w.s.weight(n)?,
            p: w.p.as_ref().map(|p| p.weight(n)).transpose()?,
        }))
    }

    pub fn q_choice(&self, lattice: Option<&Lat>) -> Result<QChoice, ConfigError> {
        let Some(q) = &self.q else {
            return Ok(QChoice::Constant(C::new(1.0, 0.0)));
        };
        Ok(match q {
            QSpec::Real(x) => QChoice::Constant(C::new(*x, 0.0)),
            QSpec::Text(s) => match s.as_str() {
                "identity" => QChoice::Constant(C::new(1.0, 0.0)),
                "zero" => QChoice::Constant(C::new(0.0, 0.0)),
                _ => match s.strip_prefix("phase:") {
                    Some(p) => QChoice::Phase(
                        p.trim()
                            .parse()
                            .map_err(|_| ConfigError::Invalid(format!("bad phase in {s:?}")))?,
                    ),
                    None => QChoice::Constant(parse_complex(s).map_err(ConfigError::Invalid)?),
                },
            },
            QSpec::PerPoint(v) => {
                let l = lattice.ok_or_else(|| ConfigError::Invalid("per-point Q needs a [lattice] section".into()))?;
                QChoice::PerPoint(complex_list(v, l.len(), "q")?)
            }
        })
    }

    pub fn kernel_choice(&self, lattice: Option<&Lat>) -> Result<KernelChoice, ConfigError> {
        let Some(spec) = &self.integrand else {
            return Ok(KernelChoice::Random);
        };
        Ok(match spec.kind {
            KernelKind::Random => KernelChoice::Random,
            KernelKind::Identity => KernelChoice::Identity,
            KernelKind::Separable => {
                let l = lattice
                    .ok_or_else(|| ConfigError::Invalid("separable kernels need a [lattice] section".into()))?;
                let n = l.len();
                let one = vec![ComplexValue::Real(1.0); n];
                let get = |v: &Option<Vec<ComplexValue>>, name: &str, default: &[ComplexValue]| {
                    complex_list(v.as_deref().unwrap_or(default), n, name)
                };
                let k_ann = spec
                    .k_ann
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("separable kernels need k_ann".into()))?;
                let k_cre = spec
                    .k_cre
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("separable kernels need k_cre".into()))?;
                KernelChoice::Separable(
                    complex_list(k_ann, n, "k_ann")?,
                    get(&spec.h_ann, "h_ann", &one)?,
                    complex_list(k_cre, n, "k_cre")?,
                    get(&spec.h_cre, "h_cre", &one)?,
                )
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("1").unwrap(), C::new(1.0, 0.0));
        assert_eq!(parse_complex("-1").unwrap(), C::new(-1.0, 0.0));
        assert_eq!(parse_complex("2i").unwrap(), C::new(0.0, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), C::new(0.0, -1.0));
        assert_eq!(parse_complex("0.5-1.5i").unwrap(), C::new(0.5, -1.5));
        assert_eq!(parse_complex("1e-3+2e-1j").unwrap(), C::new(1e-3, 0.2));
        assert_eq!(parse_complex(" 1 + i ").unwrap(), C::new(1.0, 1.0));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn lattice_and_presets() {
        let cfg = ExperimentConfig::parse(
            "[lattice]\ntimes = [1.0, 2.0]\nweights = \"constant:0.5\"\n\n[weights]\nq = [1.0, 2.0]\nr = \"constant:1\"\ns = \"constant:1\"\n",
        )
        .unwrap();
        let l = cfg.lattice().unwrap().unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.weight(1), 0.5);
        assert!(cfg.bound_weights(Some(&l)).unwrap().is_some());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("[lattice]\ntimes = [2.0, 1.0]\nweights = [1.0, 1.0]\n").is_err());
        assert!(ExperimentConfig::parse("[lattice]\ntimes = [1.0]\nweights = [1.0, 1.0]\n").is_err());
        assert!(ExperimentConfig::parse("unknown = 3\n").is_err());
        assert!(ExperimentConfig::parse("q = [1.0]\n").is_err());
        assert!(ExperimentConfig::parse("tol = -1.0\n").is_err());
        assert!(ExperimentConfig::parse("q = \"phase:x\"\n").is_err());
    }

    #[test]
    fn q_presets() {
        let cfg = ExperimentConfig::parse("q = \"zero\"\n").unwrap();
        assert_eq!(cfg.q_choice(None).unwrap(), QChoice::Constant(C::new(0.0, 0.0)));
        let cfg = ExperimentConfig::parse("q = \"phase:0.25\"\n").unwrap();
        assert_eq!(cfg.q_choice(None).unwrap(), QChoice::Phase(0.25));
        let cfg = ExperimentConfig::parse("q = -1\n").unwrap();
        assert_eq!(cfg.q_choice(None).unwrap(), QChoice::Constant(C::new(-1.0, 0.0)));
    }
}
