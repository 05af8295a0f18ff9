//! Scenario files: strict JSON with one protocol and its parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::Format;
use crate::error::{Error, Result};
use crate::operators::{ModelSpec, TimeGrid};
use crate::oracle::OracleConfig;
use crate::sme::SmeScheme;
use crate::strobe::Freeze;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Strobe,
    Sme,
    Cap,
    Cd,
    Identities,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Self::Strobe => "strobe",
            Self::Sme => "sme",
            Self::Cap => "cap",
            Self::Cd => "cd",
            Self::Identities => "identities",
        }
    }
}

/// Which PVM is monitored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    /// Instantaneous eigenprojectors of H(t), ascending energy.
    #[default]
    Spectral,
    /// Fixed projectors |n><n| of the computational basis.
    Computational,
}

/// Exactly one of `steps` and `dt`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl GridSpec {
    pub fn build(&self, horizon: f64) -> Result<TimeGrid> {
        match (self.steps, self.dt) {
            (Some(n), None) => TimeGrid::new(horizon, n).map_err(|_| Error::ConfigInvalid("grid.steps".into())),
            (None, Some(dt)) => TimeGrid::with_step(horizon, dt).map_err(|_| Error::ConfigInvalid("grid.dt".into())),
            _ => Err(Error::ConfigInvalid("grid".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrobeMode {
    /// Post-selected on the protected sector at every step.
    #[default]
    Conditioned,
    /// Non-selective measurement of the whole PVM.
    Channel,
    /// One sampled record of outcomes.
    Selective,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrobeParams {
    pub mode: StrobeMode,
    pub freeze: Freeze,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmeParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub trajectories: usize,
    /// x_n per sector; x_n = n when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    pub scheme: SmeScheme,
    /// Number of evenly spaced checkpoints, the last at T.
    pub checkpoints: usize,
    /// Also integrate the unconditional equation for comparison.
    pub lindblad: bool,
}

impl Default for SmeParams {
    fn default() -> Self {
        Self {
            kappa: None,
            trajectories: 100,
            eigenvalues: None,
            scheme: SmeScheme::Kraus,
            checkpoints: 5,
            lindblad: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Per-sector absorption weights; two-sector mode when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Subtract lambda_min so the least absorbed sector does not decay.
    pub shift: bool,
}

impl Default for CapParams {
    fn default() -> Self {
        Self {
            kappa: None,
            lambdas: None,
            shift: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityParams {
    pub families: usize,
    pub min_dim: usize,
    pub max_dim: usize,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            families: 1000,
            min_dim: 2,
            max_dim: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "dt")]
    Dt,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "M")]
    M,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dt => "dt",
            Self::Kappa => "kappa",
            Self::M => "M",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Self::Dt),
            "kappa" => Ok(Self::Kappa),
            "M" => Ok(Self::M),
            _ => Err(Error::ConfigInvalid("sweep.axis".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Summary field to fit; a protocol default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub family: FamilyChoice,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
    /// Protected / target sector of the spectral family.
    #[serde(default)]
    pub sector: usize,
    /// Real amplitudes on the t = 0 sector basis (eigenvectors of H(0), or
    /// basis vectors for the computational family); the target sector's
    /// vector when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub strobe: StrobeParams,
    #[serde(default)]
    pub sme: SmeParams,
    #[serde(default)]
    pub cap: CapParams,
    #[serde(default)]
    pub identities: IdentityParams,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ScenarioConfig {
    pub fn new(protocol: Protocol) -> Self {
        Self {
            protocol: Some(protocol),
            model: None,
            family: FamilyChoice::Spectral,
            grid: GridSpec::default(),
            seed: 0,
            sector: 0,
            initial: None,
            strobe: StrobeParams::default(),
            sme: SmeParams::default(),
            cap: CapParams::default(),
            identities: IdentityParams::default(),
            oracle: OracleConfig::default(),
            output: OutputSpec::default(),
            sweep: None,
        }
    }

    pub fn with_model(mut self, model: ModelSpec) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.grid = GridSpec {
            steps: Some(steps),
            dt: None,
        };
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.grid = GridSpec {
            steps: None,
            dt: Some(dt),
        };
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            Error::ConfigInvalid(field_from_error(&path, &msg))
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn protocol(&self) -> Result<Protocol> {
        self.protocol.ok_or_else(|| Error::ConfigInvalid("protocol".into()))
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model.as_ref().ok_or_else(|| Error::ConfigInvalid("model".into()))
    }

    /// Checks that every parameter the protocol reads is present and sane.
    pub fn validate(&self) -> Result<()> {
        let invalid = |f: &str| Err(Error::ConfigInvalid(f.into()));
        let protocol = self.protocol()?;
        self.oracle
            .validate()
            .map_err(|_| Error::ConfigInvalid("oracle".into()))?;
        if protocol == Protocol::Identities {
            let p = &self.identities;
            if p.families == 0 {
                return invalid("identities.families");
            }
            if p.min_dim < 2 || p.max_dim < p.min_dim || p.max_dim > 64 {
                return invalid("identities.max_dim");
            }
            return Ok(());
        }
        let model = self.model()?;
        let horizon = model.horizon().map_err(|_| Error::ConfigInvalid("model.params.T".into()))?;
        let dim = model.dim().map_err(|e| match e {
            Error::UnknownModel(_) => Error::ConfigInvalid("model.name".into()),
            _ => Error::ConfigInvalid("model.params".into()),
        })?;
        self.grid.build(horizon)?;
        if let Some(init) = &self.initial {
            if init.len() != dim || init.iter().all(|a| *a == 0.0) || init.iter().any(|a| !a.is_finite()) {
                return invalid("initial");
            }
        }
        let kappa_ok = |k: Option<f64>| matches!(k, Some(k) if k.is_finite() && k >= 0.0);
        match protocol {
            Protocol::Sme => {
                if !kappa_ok(self.sme.kappa) {
                    return invalid("kappa");
                }
                if self.sme.trajectories == 0 {
                    return invalid("sme.trajectories");
                }
                if self.sme.checkpoints == 0 {
                    return invalid("sme.checkpoints");
                }
            }
            Protocol::Cap => {
                if !kappa_ok(self.cap.kappa) {
                    return invalid("kappa");
                }
                if let Some(l) = &self.cap.lambdas {
                    if l.iter().any(|x| !x.is_finite()) {
                        return invalid("cap.lambdas");
                    }
                }
            }
            _ => {}
        }
        if let Some(s) = &self.sweep {
            if s.values.len() < 4 {
                return invalid("sweep.values");
            }
        }
        Ok(())
    }
}

/// Field name for a serde failure at `path`: the missing / unknown key when
/// the message names one, the path otherwise.
fn field_from_error(path: &str, msg: &str) -> String {
    let named = ["missing field `", "unknown field `", "unknown variant `"]
        .iter()
        .find_map(|p| msg.split_once(p).and_then(|(_, rest)| rest.split_once('`')).map(|(f, _)| f));
    let join = |leaf: &str| {
        if path.is_empty() || path == "." {
            leaf.to_string()
        } else {
            format!("{path}.{leaf}")
        }
    };
    match named {
        Some(f) if msg.starts_with("missing field") || msg.starts_with("unknown field") => {
            if path.ends_with(f) {
                path.to_string()
            } else {
                join(f)
            }
        }
        _ if path.is_empty() || path == "." => "config".into(),
        _ => path.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STROBE: &str = r#"{
        "protocol": "strobe",
        "model": {"name": "rotating-qubit", "params": {"omega": 1.0, "T": 1.0}},
        "grid": {"steps": 100},
        "seed": 7
    }"#;

    fn field(r: Result<ScenarioConfig>) -> String {
        match r.and_then(|c| c.validate().map(|_| c)) {
            Err(Error::ConfigInvalid(f)) => f,
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_parses() {
        let c = ScenarioConfig::from_json(STROBE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.protocol().unwrap(), Protocol::Strobe);
        assert_eq!(c.seed, 7);
        assert_eq!(c.oracle.refinement, 100);
        let back = ScenarioConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn cap_without_kappa() {
        let text = STROBE.replace("\"strobe\"", "\"cap\"");
        assert_eq!(field(ScenarioConfig::from_json(&text)), "kappa");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = STROBE.replace("\"seed\": 7", "\"seed\": 7, \"bogus\": 1");
        assert_eq!(field(ScenarioConfig::from_json(&text)), "bogus");
        let text = STROBE.replace("\"steps\": 100", "\"steps\": 100, \"n\": 3");
        assert_eq!(field(ScenarioConfig::from_json(&text)), "grid.n");
    }

    #[test]
    fn bad_values_named() {
        assert_eq!(field(ScenarioConfig::from_json(&STROBE.replace("7", "-7"))), "seed");
        assert_eq!(
            field(ScenarioConfig::from_json(&STROBE.replace("\"strobe\"", "\"magic\""))),
            "protocol"
        );
        assert_eq!(
            field(ScenarioConfig::from_json(&STROBE.replace("\"steps\": 100", "\"steps\": 100, \"dt\": 0.1"))),
            "grid"
        );
        assert_eq!(
            field(ScenarioConfig::from_json(&STROBE.replace("rotating-qubit", "donut"))),
            "model.name"
        );
        assert_eq!(field(ScenarioConfig::from_json("42")), "config");
    }

    #[test]
    fn sweep_needs_four_points() {
        let mut c = ScenarioConfig::from_json(STROBE).unwrap();
        c.sweep = Some(SweepSpec {
            axis: SweepAxis::Dt,
            values: vec![0.1, 0.01, 0.001],
            metric: None,
        });
        assert!(matches!(c.validate(), Err(Error::ConfigInvalid(f)) if f == "sweep.values"));
    }
}
