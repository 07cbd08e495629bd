//! CSV and JSON writers. Numbers use the shortest decimal form that parses
//! back to the same `f64`, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::PathBuf;

use bdspectral::chain::Lattice;
use bdspectral::oracle::DenseMatrix;
use bdspectral::spectral::SpectralBasis;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::CliError;

pub fn num(v: f64) -> String {
    // Adding zero turns -0.0 into 0.0.
    format!("{:?}", v + 0.0)
}

#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Csv::default();
        csv.text.push_str(&header.join(","));
        csv.text.push('\n');
        csv
    }

    pub fn row(&mut self, label: impl std::fmt::Display, values: &[f64]) {
        let _ = write!(self.text, "{label}");
        for v in values {
            self.text.push(',');
            self.text.push_str(&num(*v));
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn distribution_csv(values: &[f64], column: &str) -> Csv {
    let mut csv = Csv::new(&["x", column]);
    for (x, v) in values.iter().enumerate() {
        csv.row(x, &[*v]);
    }
    csv
}

/// Row `x`, column `y` holds `P(x, y)`, the probability of `y -> x`.
pub fn matrix_csv(m: &DenseMatrix) -> Csv {
    let n = m.size();
    let header: Vec<String> = std::iter::once("x".to_string()).chain((0..n).map(|y| format!("y={y}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for x in 0..n {
        csv.row(x, m.row(x));
    }
    csv
}

/// Metadata written next to every data file.
#[derive(Debug, Serialize)]
pub struct Sidecar<R: Serialize> {
    pub command: String,
    pub config: ScenarioConfig,
    #[serde(rename = "t_S")]
    pub t_s: f64,
    pub lattice_len: usize,
    /// Truncation point `M`, absent on finite lattices.
    pub cutoff: Option<usize>,
    pub tail_mass: f64,
    pub residuals: R,
}

impl<R: Serialize> Sidecar<R> {
    pub fn new(command: &str, config: &ScenarioConfig, basis: &SpectralBasis, residuals: R) -> Self {
        let lattice = basis.lattice();
        Sidecar {
            command: command.to_string(),
            config: config.clone(),
            t_s: basis.t_s(),
            lattice_len: basis.len(),
            cutoff: match lattice {
                Lattice::Finite(_) => None,
                Lattice::Truncated { cutoff, .. } => Some(cutoff),
            },
            tail_mass: lattice.tail_mass(),
            residuals,
        }
    }
}

/// Destination of a command's files: a directory, or stdout (CSV) and
/// stderr (JSON) when no directory was given.
#[derive(Debug, Clone)]
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
        }
        Ok(Sink { dir })
    }

    fn write(&self, name: &str, text: &str, console: &mut dyn std::io::Write) -> Result<(), CliError> {
        match &self.dir {
            Some(dir) => {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
            }
            None => console
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e)),
        }
    }

    pub fn csv(&self, name: &str, csv: Csv) -> Result<(), CliError> {
        self.write(&format!("{name}.csv"), &csv.into_string(), &mut std::io::stdout().lock())
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serialisable report");
        text.push('\n');
        self.write(&format!("{name}.json"), &text, &mut std::io::stderr().lock())
    }
}
