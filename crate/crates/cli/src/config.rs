//! Scenario configuration: the JSON schema read by `--config` and the merge
//! with command-line flags (flags win).

use std::collections::BTreeMap;
use std::path::Path;

use bdspectral::chain::{TimeStep, DEFAULT_EPSILON_TAIL};
use bdspectral::spectral::SpectralBasis;
use bdspectral::{FamilyId, FamilySpec, SetTag, ValidatedFamily};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// `t_S` as written in a config file: a number or `"auto:theta"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepValue {
    Fixed(f64),
    Text(String),
}

impl Default for StepValue {
    fn default() -> Self {
        StepValue::Text(TimeStep::default().to_string())
    }
}

impl StepValue {
    pub fn parse(&self) -> Result<TimeStep, CliError> {
        match self {
            StepValue::Fixed(t) => Ok(TimeStep::Fixed(*t)),
            StepValue::Text(s) => Ok(s.parse()?),
        }
    }
}

impl From<TimeStep> for StepValue {
    fn from(step: TimeStep) -> Self {
        match step {
            TimeStep::Fixed(t) => StepValue::Fixed(t),
            auto => StepValue::Text(auto.to_string()),
        }
    }
}

fn default_epsilon_tail() -> f64 {
    DEFAULT_EPSILON_TAIL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: FamilyId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub set: SetTag,
    #[serde(rename = "t_S", default)]
    pub t_s: StepValue,
    #[serde(default)]
    pub lattice_cutoff: Option<usize>,
    #[serde(default = "default_epsilon_tail")]
    pub epsilon_tail: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Partial configuration as it may appear in a file; every field optional
/// so flags can supply the rest.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    family: Option<FamilyId>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(rename = "N")]
    n: Option<usize>,
    set: Option<SetTag>,
    #[serde(rename = "t_S")]
    t_s: Option<StepValue>,
    lattice_cutoff: Option<usize>,
    epsilon_tail: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SetArg {
    Basic,
    Minus,
}

impl From<SetArg> for SetTag {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Basic => SetTag::Basic,
            SetArg::Minus => SetTag::Minus,
        }
    }
}

/// Flags shared by every command that works on a chain.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Family name, e.g. `krawtchouk`, `q-meixner`, `dual-big-q-laguerre`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Lattice size of a finite family.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Which chain of a two-set family to use.
    #[arg(long, value_enum)]
    pub set: Option<SetArg>,
    /// Time step: a number or `auto:theta`.
    #[arg(long = "ts", value_name = "T_S")]
    pub t_s: Option<String>,
    /// Forced truncation point of a semi-infinite lattice.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub epsilon_tail: Option<f64>,
    #[arg(long, env = "BDSPECTRAL_SEED")]
    pub seed: Option<u64>,
    /// JSON scenario file; flags override its values.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let mut base = match &self.config {
            Some(path) => read_partial(path)?,
            None => PartialConfig::default(),
        };
        if let Some(name) = &self.family {
            base.family = Some(name.parse()?);
        }
        for (name, value) in [("p", self.p), ("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d), ("q", self.q)] {
            if let Some(v) = value {
                base.params.insert(name.to_string(), v);
            }
        }
        let family = base
            .family
            .ok_or_else(|| CliError::Usage("no family given (use --family or --config)".into()))?;
        let t_s = match &self.t_s {
            Some(s) => StepValue::from(s.parse::<TimeStep>()?),
            None => base.t_s.unwrap_or_default(),
        };
        Ok(ScenarioConfig {
            family,
            params: base.params,
            n: self.n.or(base.n),
            set: self.set.map(SetTag::from).or(base.set).unwrap_or_default(),
            t_s,
            lattice_cutoff: self.cutoff.or(base.lattice_cutoff),
            epsilon_tail: self.epsilon_tail.or(base.epsilon_tail).unwrap_or(DEFAULT_EPSILON_TAIL),
            seed: self.seed.or(base.seed).unwrap_or(0),
        })
    }
}

fn read_partial(path: &Path) -> Result<PartialConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl ScenarioConfig {
    pub fn spec(&self) -> FamilySpec {
        FamilySpec {
            family: self.family,
            params: self.params.clone(),
            n: self.n,
        }
    }

    /// The validated family whose basic chain is the one to study: the
    /// involuted family when `set` is `minus`.
    pub fn family(&self) -> Result<ValidatedFamily, CliError> {
        let fam = self.spec().validate()?;
        Ok(match self.set {
            SetTag::Basic => fam,
            SetTag::Minus => fam.involution()?,
        })
    }

    pub fn time_step(&self) -> Result<TimeStep, CliError> {
        self.t_s.parse()
    }

    pub fn basis(&self) -> Result<SpectralBasis, CliError> {
        let fam = self.family()?;
        Ok(SpectralBasis::new(&fam, self.time_step()?, self.lattice_cutoff, self.epsilon_tail)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = ScenarioConfig {
            family: FamilyId::QMeixner,
            params: [("q".to_string(), 0.5), ("b".to_string(), 0.5), ("c".to_string(), 2.0)].into(),
            n: None,
            set: SetTag::Minus,
            t_s: StepValue::Text("auto:0.25".into()),
            lattice_cutoff: Some(40),
            epsilon_tail: 1e-10,
            seed: 9,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let fixed = ScenarioConfig {
            t_s: StepValue::Fixed(0.125),
            ..cfg
        };
        let back: ScenarioConfig = serde_json::from_str(&serde_json::to_string(&fixed).unwrap()).unwrap();
        assert_eq!(back.time_step().unwrap(), TimeStep::Fixed(0.125));
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"family": "krawtchouk", "params": {"p": 0.3}, "N": 4, "seed": 5}"#).unwrap();
        let args = ScenarioArgs {
            p: Some(0.6),
            config: Some(path),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.params["p"], 0.6);
        assert_eq!(cfg.n, Some(4));
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.time_step().unwrap(), TimeStep::default());
    }

    #[test]
    fn minus_set_needs_a_two_set_family() {
        let cfg = ScenarioArgs {
            family: Some("krawtchouk".into()),
            p: Some(0.5),
            n: Some(3),
            set: Some(SetArg::Minus),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert!(matches!(cfg.family(), Err(CliError::Domain(_))));
    }
}
