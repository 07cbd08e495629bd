use std::path::PathBuf;
use std::str::FromStr;

use bdspectral::chain::{Distribution, Lattice};
use bdspectral::mirror::{build_mirror, dual_system};
use bdspectral::oracle::{chi_square, dense_power, numeric_spectrum, simulate, ChiSquare, DenseMatrix};
use bdspectral::spectral::{Evolution, SpectralBasis};
use bdspectral::FamilyId;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::{distribution_csv, matrix_csv, Csv, Sidecar, Sink};

/// Initial distribution: `delta:y`, `uniform` or `file:path`.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Delta(usize),
    Uniform,
    File(PathBuf),
}

impl FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "uniform" {
            return Ok(Initial::Uniform);
        }
        if let Some(y) = s.strip_prefix("delta:") {
            return y.parse().map(Initial::Delta).map_err(|_| format!("bad lattice point in `{s}`"));
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(Initial::File(path.into()));
        }
        Err(format!("`{s}` is not delta:y, uniform or file:path"))
    }
}

impl Initial {
    pub fn build(&self, len: usize) -> Result<Distribution, CliError> {
        match self {
            Initial::Delta(y) => Ok(Distribution::delta(len, *y)?),
            Initial::Uniform => Ok(Distribution::uniform(len)),
            Initial::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let values = parse_probabilities(&text, len)?;
                let dist = Distribution::new(values);
                dist.check(1e-9)?;
                Ok(dist)
            }
        }
    }
}

/// One probability per line, or CSV rows whose last field is the
/// probability; a non-numeric first line is taken as a header. Shorter
/// inputs are padded with zeros.
fn parse_probabilities(text: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && i == 0 => continue,
            Err(_) => return Err(CliError::Usage(format!("line {}: `{field}` is not a number", i + 1))),
        }
    }
    if values.len() > len {
        return Err(CliError::Usage(format!(
            "initial distribution has {} entries but the lattice has {len}",
            values.len()
        )));
    }
    values.resize(len, 0.0);
    Ok(values)
}

pub fn list() -> String {
    let rows: Vec<[String; 6]> = FamilyId::ALL
        .iter()
        .map(|f| {
            [
                f.name().to_string(),
                f.param_names().join(","),
                if f.is_finite() { "finite" } else { "semi-infinite" }.to_string(),
                if f.has_minus_set() { "2" } else { "1" }.to_string(),
                f.constraints().to_string(),
                f.involution_rule().unwrap_or("-").to_string(),
            ]
        })
        .collect();
    let header = ["family", "parameters", "lattice", "branches", "constraints", "involution"];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| -> String {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(cell);
            } else {
                s.push_str(&format!("{cell:<w$}  "));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(&header);
    for r in &rows {
        out.push_str(&line(&r.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    out
}

fn stationarity_residual(basis: &SpectralBasis) -> f64 {
    let pi = &basis.ops().pi;
    let lpi = basis.ops().apply_l(pi);
    lpi.values.iter().zip(&pi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Serialize)]
struct EvolutionResiduals {
    mass: f64,
    completeness: f64,
    /// Largest `|closed form - repeated application of L|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    stepping: Option<f64>,
    negative_probability: Option<(usize, f64)>,
}

fn evolution_residuals(basis: &SpectralBasis, ev: &Evolution, stepping: Option<f64>) -> EvolutionResiduals {
    EvolutionResiduals {
        mass: (ev.distribution.total() - 1.0).abs(),
        completeness: basis.completeness_residual(),
        stepping,
        negative_probability: ev.negative_probability,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum SolveMode {
    /// Stationary distribution `pi`.
    Stationary,
    /// Distribution after `--steps` steps of the discrete chain.
    Evolve {
        #[arg(long, default_value_t = 1)]
        steps: u64,
        #[arg(long, default_value = "delta:0")]
        from: Initial,
    },
    /// Matrix `P(x, y; l)` of the discrete chain.
    Transition {
        #[arg(long, default_value_t = 1)]
        steps: u64,
    },
    /// Distribution at `--time` of the continuous-time chain.
    Continuous {
        #[arg(long)]
        time: f64,
        #[arg(long, default_value = "delta:0")]
        from: Initial,
    },
}

pub fn solve(config: &ScenarioConfig, mode: &SolveMode, sink: &Sink) -> Result<(), CliError> {
    let basis = config.basis()?;
    match mode {
        SolveMode::Stationary => {
            #[derive(Serialize)]
            struct Residuals {
                stationarity: f64,
                mass: f64,
                completeness: f64,
            }
            let pi = &basis.ops().pi;
            sink.csv("stationary", distribution_csv(&pi.values, "pi"))?;
            let residuals = Residuals {
                stationarity: stationarity_residual(&basis),
                mass: (pi.total() - 1.0).abs(),
                completeness: basis.completeness_residual(),
            };
            sink.json("stationary", &Sidecar::new("solve stationary", config, &basis, residuals))
        }
        SolveMode::Evolve { steps, from } => {
            let start = from.build(basis.len())?;
            let ev = basis.evolve_discrete(&basis.expand(&start), *steps);
            let mut stepped = start;
            for _ in 0..*steps {
                stepped = basis.ops().apply_l(&stepped);
            }
            let stepping = max_abs_diff(&ev.distribution.values, &stepped.values);
            sink.csv("evolve", distribution_csv(&ev.distribution.values, "probability"))?;
            let residuals = evolution_residuals(&basis, &ev, Some(stepping));
            sink.json("evolve", &Sidecar::new("solve evolve", config, &basis, residuals))
        }
        SolveMode::Transition { steps } => {
            #[derive(Serialize)]
            struct Residuals {
                column_sum: f64,
                completeness: f64,
                dense_power: Option<f64>,
            }
            let m = basis.transition_matrix_discrete(*steps);
            let column_sum = m.column_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
            let dense = match basis.lattice() {
                Lattice::Finite(_) => {
                    let l = DenseMatrix::from_tridiagonal(&basis.ops().l_matrix());
                    Some(m.max_abs_diff(&dense_power(&l, *steps)))
                }
                Lattice::Truncated { .. } => None,
            };
            sink.csv("transition", matrix_csv(&m))?;
            let residuals = Residuals {
                column_sum,
                completeness: basis.completeness_residual(),
                dense_power: dense,
            };
            sink.json("transition", &Sidecar::new("solve transition", config, &basis, residuals))
        }
        SolveMode::Continuous { time, from } => {
            let start = from.build(basis.len())?;
            let ev = basis.evolve_continuous(&basis.expand(&start), *time)?;
            sink.csv("continuous", distribution_csv(&ev.distribution.values, "probability"))?;
            let residuals = evolution_residuals(&basis, &ev, None);
            sink.json("continuous", &Sidecar::new("solve continuous", config, &basis, residuals))
        }
    }
}

pub fn simulate_cmd(
    config: &ScenarioConfig,
    steps: u64,
    walks: u64,
    from: &Initial,
    sink: &Sink,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Residuals {
        chi_square: ChiSquare,
        tail_events: u64,
        l1_distance: f64,
        walks: u64,
        seed: u64,
    }
    let basis = config.basis()?;
    let start = match from {
        Initial::Delta(y) => *y,
        other => {
            return Err(CliError::Usage(format!(
                "simulation starts from a single point (delta:y), not {other:?}"
            )))
        }
    };
    let expected = basis
        .evolve_discrete(&basis.expand(&Distribution::delta(basis.len(), start)?), steps)
        .distribution;
    let sim = simulate(basis.ops(), start, steps, walks, config.seed)?;
    let freq = sim.frequencies();
    let test = chi_square(&freq, &expected, sim.samples)?;
    let mut csv = Csv::new(&["x", "count", "frequency", "expected"]);
    for x in 0..basis.len() {
        csv.row(x, &[sim.counts[x] as f64, freq.values[x], expected.values[x]]);
    }
    sink.csv("simulate", csv)?;
    let residuals = Residuals {
        chi_square: test,
        tail_events: sim.tail_events,
        l1_distance: freq.l1_distance(&expected),
        walks,
        seed: config.seed,
    };
    sink.json("simulate", &Sidecar::new("simulate", config, &basis, residuals))
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum MirrorMode {
    /// Table of `E(n)`, `kappa(n)`, `kappa_M(n)` and `kappa_S(n)`.
    Spectrum,
    /// Distribution after `--steps` steps of the accelerated chain `L^S`.
    Evolve {
        #[arg(long, default_value_t = 1)]
        steps: u64,
        #[arg(long, default_value = "delta:0")]
        from: Initial,
    },
}

pub fn mirror(config: &ScenarioConfig, mode: &MirrorMode, sink: &Sink) -> Result<(), CliError> {
    let basis = config.basis()?;
    let mc = build_mirror(&basis)?;
    match mode {
        MirrorMode::Spectrum => {
            #[derive(Serialize)]
            struct Residuals {
                max_odd_kappa_s: f64,
                completeness: f64,
            }
            let branch = basis.basic();
            let mut csv = Csv::new(&["n", "energy", "kappa", "kappa_m", "kappa_s"]);
            for k in 0..branch.len() {
                csv.row(k, &[branch.energies[k], branch.kappa[k], mc.kappa_m()[k], mc.kappa_s()[k]]);
            }
            sink.csv("mirror_spectrum", csv)?;
            let odd = mc.kappa_s().iter().skip(1).step_by(2).fold(0.0f64, |m, v| m.max(v.abs()));
            let residuals = Residuals {
                max_odd_kappa_s: odd,
                completeness: basis.completeness_residual(),
            };
            sink.json("mirror_spectrum", &Sidecar::new("mirror spectrum", config, &basis, residuals))
        }
        MirrorMode::Evolve { steps, from } => {
            let start = from.build(basis.len())?;
            let ev = mc.evolve_ls(&basis.expand(&start), *steps);
            let mut stepped = start;
            for _ in 0..*steps {
                stepped = mc.apply_ls(&stepped);
            }
            let stepping = max_abs_diff(&ev.distribution.values, &stepped.values);
            sink.csv("mirror_evolve", distribution_csv(&ev.distribution.values, "probability"))?;
            let residuals = evolution_residuals(&basis, &ev, Some(stepping));
            sink.json("mirror_evolve", &Sidecar::new("mirror evolve", config, &basis, residuals))
        }
    }
}

pub fn dual(config: &ScenarioConfig, sink: &Sink) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Residuals {
        /// Largest gap between the numeric spectrum of the dual chain and
        /// the eigenvalues of the original.
        spectrum: f64,
        completeness: f64,
    }
    let basis = config.basis()?;
    let dual = dual_system(&basis)?;
    let mut csv = Csv::new(&["x", "birth", "death"]);
    for x in 0..dual.len() {
        csv.row(x, &[dual.ops().birth[x], dual.ops().death[x]]);
    }
    sink.csv("dual", csv)?;
    let numeric = numeric_spectrum(&dual.ops().h_tilde())?;
    let mut energies = basis.basic().energies.clone();
    energies.sort_by(f64::total_cmp);
    let residuals = Residuals {
        spectrum: max_abs_diff(&numeric, &energies),
        completeness: dual.completeness_residual(),
    };
    sink.json("dual", &Sidecar::new("dual", config, &dual, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_parsing() {
        assert_eq!("delta:3".parse::<Initial>().unwrap(), Initial::Delta(3));
        assert_eq!("uniform".parse::<Initial>().unwrap(), Initial::Uniform);
        assert_eq!("file:a.csv".parse::<Initial>().unwrap(), Initial::File("a.csv".into()));
        assert!("delta:-1".parse::<Initial>().is_err());
        assert!("point".parse::<Initial>().is_err());
    }

    #[test]
    fn probability_files() {
        assert_eq!(parse_probabilities("x,p\n0,0.5\n1,0.5\n", 3).unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(parse_probabilities("0.25\n# note\n0.75\n", 2).unwrap(), vec![0.25, 0.75]);
        assert!(parse_probabilities("1\n0\n0\n", 2).is_err());
        assert!(parse_probabilities("0.5\nabc\n", 2).is_err());
    }

    #[test]
    fn list_has_one_row_per_family() {
        let table = list();
        assert_eq!(table.lines().count(), 16);
        let racah = table.lines().find(|l| l.starts_with("Racah")).unwrap();
        assert!(racah.contains("c=-N"));
        let meixner = table.lines().find(|l| l.starts_with("QMeixner")).unwrap();
        assert!(meixner.split_whitespace().any(|c| c == "2"));
    }
}
