//! Invariant suites behind `verify`.

use bdspectral::chain::{ChainOperators, Distribution, Lattice, TimeStep, MAX_CUTOFF};
use bdspectral::oracle::{chi_square, dense_power, numeric_spectrum, simulate, DenseMatrix, OracleReport};
use bdspectral::spectral::SpectralBasis;
use bdspectral::{SetTag, ValidatedFamily};
use serde::Serialize;

use crate::error::CliError;

pub const TOLERANCE: f64 = 1e-8;
const RESIDUAL_TOLERANCE: f64 = 1e-10;
const POWER_TOLERANCE: f64 = 1e-9;
const STATIONARITY_TOLERANCE: f64 = 1e-12;
const KAPPA_SLACK: f64 = 1e-12;
const P_VALUE_FLOOR: f64 = 1e-3;
/// Degree limit of the orthogonality sums on semi-infinite lattices.
const MAX_DEGREE: usize = 15;
const POWERS: [u64; 5] = [1, 2, 5, 10, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<OracleReport>,
}

impl Check {
    fn below(name: &'static str, value: f64, tolerance: f64, detail: String) -> Self {
        Check {
            name,
            value,
            tolerance,
            pass: value < tolerance,
            detail,
            report: None,
        }
    }

    fn with_report(mut self, report: OracleReport) -> Self {
        self.report = Some(report);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub level: Level,
    pub seed: u64,
    pub walks: u64,
    pub steps: u64,
    /// Factor applied to every `d_n^2` before the orthogonality check; a
    /// value other than one is a negative control.
    pub dn2_factor: f64,
}

pub fn run(fam: &ValidatedFamily, basis: &SpectralBasis, opts: Options) -> Result<VerifyReport, CliError> {
    let mut checks = vec![
        stationarity(basis),
        orthogonality(fam, basis, opts.dn2_factor)?,
        eigen_residual(basis),
    ];
    if let Lattice::Finite(_) = basis.lattice() {
        checks.push(series_residual(fam, basis)?);
    }
    checks.push(spectrum(fam, basis)?);
    checks.push(oracle_power(fam, basis)?);
    checks.push(identity(basis));
    checks.push(kappa_bound(basis));
    if opts.level == Level::Full {
        checks.push(monte_carlo(basis, opts)?);
    }
    Ok(VerifyReport {
        level: opts.level,
        passed: checks.iter().all(|c| c.pass),
        checks,
    })
}

fn stationarity(basis: &SpectralBasis) -> Check {
    let pi = &basis.ops().pi;
    let lpi = basis.ops().apply_l(pi);
    let r = lpi.values.iter().zip(&pi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mass = (pi.total() - 1.0).abs();
    Check::below(
        "stationarity",
        r.max(mass),
        STATIONARITY_TOLERANCE,
        format!("|L pi - pi| {r:.1e}, |mass - 1| {mass:.1e}"),
    )
}

/// `d_n^2 sum_x phi0(x)^2 P_n(x) P_m(x) = delta_nm`, with `phi0^2` from the
/// rate ratios and every product formed in log space. On semi-infinite
/// lattices the sums run past the window until every diagonal summand is
/// below `SUMMAND_FLOOR`; cross terms are bounded by the diagonal ones.
fn orthogonality(fam: &ValidatedFamily, basis: &SpectralBasis, dn2_factor: f64) -> Result<Check, CliError> {
    const SUMMAND_FLOOR: f64 = -92.0; // ln(1e-40)
    let (top_x, top_n) = match basis.lattice() {
        Lattice::Finite(n) => (n, n),
        Lattice::Truncated { .. } => (MAX_CUTOFF, MAX_DEGREE.min(basis.basic().len() - 1)),
    };
    let ln_dn2 = (0..=top_n)
        .map(|n| Ok((fam.norm_const(SetTag::Basic, n)? * dn2_factor).ln()))
        .collect::<Result<Vec<f64>, CliError>>()?;
    let mut sums = vec![vec![0.0; top_n + 1]; top_n + 1];
    let mut ln_w = 0.0;
    let mut last = 0;
    for x in 0..=top_x {
        if x > 0 {
            let (b, _) = fam.rates(SetTag::Basic, x - 1)?;
            let (_, d) = fam.rates(SetTag::Basic, x)?;
            ln_w += (b / d).ln();
        }
        let p = (0..=top_n).map(|n| fam.polynomial(SetTag::Basic, n, x)).collect::<Result<Vec<f64>, _>>()?;
        let ln_p: Vec<f64> = p.iter().map(|v| v.abs().ln()).collect();
        for n in 0..=top_n {
            for m in n..=top_n {
                if p[n] != 0.0 && p[m] != 0.0 {
                    let ln_term = ln_w + 0.5 * (ln_dn2[n] + ln_dn2[m]) + ln_p[n] + ln_p[m];
                    sums[n][m] += (p[n] * p[m]).signum() * ln_term.exp();
                }
            }
        }
        last = x;
        let largest = (0..=top_n)
            .map(|n| ln_w + ln_dn2[n] + 2.0 * ln_p[n])
            .fold(f64::NEG_INFINITY, f64::max);
        if x >= basis.len() && largest < SUMMAND_FLOOR {
            break;
        }
    }
    let mut worst = (0.0f64, 0, 0);
    for n in 0..=top_n {
        for m in n..=top_n {
            let err = (sums[n][m] - if n == m { 1.0 } else { 0.0 }).abs();
            if !(err <= worst.0) {
                worst = (err, n, m);
            }
        }
    }
    Ok(Check::below(
        "orthogonality",
        worst.0,
        TOLERANCE,
        format!("degrees 0..={top_n} over x 0..={last}, worst at (n,m)=({},{})", worst.1, worst.2),
    ))
}

/// `|H phi_n - E(n) phi_n|` on the basis vectors of every set, relative to
/// the largest rate. The last row of a truncated window is skipped.
fn eigen_residual(basis: &SpectralBasis) -> Check {
    let h = basis.ops().build_h().0;
    let rows = match basis.lattice() {
        Lattice::Finite(_) => basis.len(),
        Lattice::Truncated { .. } => basis.len() - 1,
    };
    let scale = basis.ops().max_rate.max(1.0);
    let mut worst = 0.0f64;
    for b in basis.branches() {
        for (v, e) in b.vectors.iter().zip(&b.energies) {
            let hv = h.apply(v);
            for x in 0..rows {
                worst = worst.max((hv[x] - e * v[x]).abs() / scale);
            }
        }
    }
    Check::below("eigen_residual", worst, RESIDUAL_TOLERANCE, format!("{} sets", basis.branches().count()))
}

fn series_residual(fam: &ValidatedFamily, basis: &SpectralBasis) -> Result<Check, CliError> {
    let ht = basis.ops().h_tilde();
    let mut worst = 0.0f64;
    for (k, e) in basis.basic().energies.iter().enumerate() {
        let p = (0..basis.len()).map(|x| fam.polynomial(SetTag::Basic, k, x)).collect::<Result<Vec<f64>, _>>()?;
        let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let r = ht.apply(&p).iter().zip(&p).map(|(hp, v)| (hp - e * v).abs()).fold(0.0, f64::max);
        worst = worst.max(r / scale);
    }
    Ok(Check::below(
        "series_residual",
        worst,
        RESIDUAL_TOLERANCE,
        "H~ P_n - E(n) P_n on the series polynomials".into(),
    ))
}

/// Operators on the lattice the vectors were generated on.
fn extended_operators(fam: &ValidatedFamily, basis: &SpectralBasis) -> Result<ChainOperators, CliError> {
    Ok(ChainOperators::from_family(
        fam,
        SetTag::Basic,
        TimeStep::Fixed(basis.t_s()),
        Some(basis.vector_window() - 1),
        0.0,
    )?)
}

/// Finite lattices compare the printed eigenvalues with the numeric
/// spectrum of `H~` as multisets. Semi-infinite lattices match every
/// well-separated printed eigenvalue to the nearest eigenvalue of `H` on
/// the extended lattice.
fn spectrum(fam: &ValidatedFamily, basis: &SpectralBasis) -> Result<Check, CliError> {
    match basis.lattice() {
        Lattice::Finite(_) => {
            let numeric = numeric_spectrum(&basis.ops().h_tilde())?;
            let report = OracleReport::spectra(basis.basic().energies.clone(), numeric);
            Ok(Check::below("spectrum", report.max_rel_err, TOLERANCE, "relative, as sorted multisets".into())
                .with_report(report))
        }
        Lattice::Truncated { .. } => {
            let numeric = numeric_spectrum(&extended_operators(fam, basis)?.build_h().0)?;
            let scale = basis.ops().max_rate.max(1.0);
            let min_gap = 1e-6 * scale;
            let all: Vec<f64> = basis.branches().flat_map(|b| b.energies.iter().copied()).collect();
            let mut matched = Vec::new();
            let mut worst = 0.0f64;
            for &e in &all {
                if all.iter().filter(|&&o| (o - e).abs() < min_gap).count() > 1 {
                    continue;
                }
                let nearest = numeric.iter().copied().min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs())).unwrap_or(f64::NAN);
                worst = worst.max((nearest - e).abs() / scale);
                matched.push((e, nearest));
            }
            let report = OracleReport::spectra(
                matched.iter().map(|m| m.0).collect(),
                matched.iter().map(|m| m.1).collect(),
            );
            Ok(Check::below(
                "spectrum",
                worst,
                TOLERANCE,
                format!("{} of {} printed eigenvalues resolved", matched.len(), all.len()),
            )
            .with_report(report))
        }
    }
}

/// Closed-form `P(x, y; l)` against dense powers of `L`. On a truncated
/// window the reference is `L` on the extended lattice, and each entry's
/// error is divided by `max(1, sqrt(pi(x)/pi(y)))`, the factor the
/// spectral kernel carries.
fn oracle_power(fam: &ValidatedFamily, basis: &SpectralBasis) -> Result<Check, CliError> {
    let n = basis.len();
    let l = match basis.lattice() {
        Lattice::Finite(_) => DenseMatrix::from_tridiagonal(&basis.ops().l_matrix()),
        Lattice::Truncated { .. } => DenseMatrix::from_tridiagonal(&extended_operators(fam, basis)?.l_matrix()),
    };
    let pi = &basis.ops().pi.values;
    let mut worst = (0.0f64, 0);
    let mut report = OracleReport::default();
    for ell in POWERS {
        let closed = basis.transition_matrix_discrete(ell);
        let full = dense_power(&l, ell);
        let mut reference = DenseMatrix::zeros(n);
        let mut err = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                reference[(x, y)] = full[(x, y)];
                let scale = (pi[x] / pi[y]).sqrt().max(1.0);
                err = err.max((closed[(x, y)] - full[(x, y)]).abs() / scale);
            }
        }
        if err >= worst.0 {
            worst = (err, ell);
            report = OracleReport::compare(&closed, &reference, basis.lattice().tail_mass());
        }
    }
    Ok(Check::below(
        "oracle_power",
        worst.0,
        POWER_TOLERANCE,
        format!("steps {POWERS:?}, worst at l={}", worst.1),
    )
    .with_report(report))
}

/// Zero-step kernel against the identity: the whole lattice when finite,
/// the inner two thirds of a truncated window.
fn identity(basis: &SpectralBasis) -> Check {
    let range = match basis.lattice() {
        Lattice::Finite(_) => 0..basis.len(),
        Lattice::Truncated { .. } => 0..(2 * basis.len()).div_ceil(3),
    };
    let (off, diag) = basis.identity_residuals(range.clone());
    let sets = if basis.minus().is_some() { "two-set" } else { "one-set" };
    Check::below(
        "identity",
        off.max(diag),
        TOLERANCE,
        format!("{sets} identity residual on x < {}: off-diagonal {off:.1e}, diagonal {diag:.1e}", range.end),
    )
}

fn kappa_bound(basis: &SpectralBasis) -> Check {
    let excess = basis.all_kappa().iter().map(|k| (k.abs() - 1.0).max(0.0)).fold(0.0, f64::max);
    Check::below("kappa_bound", excess, KAPPA_SLACK, "excess of |kappa| over 1".into())
}

fn monte_carlo(basis: &SpectralBasis, opts: Options) -> Result<Check, CliError> {
    let expected = basis
        .evolve_discrete(&basis.expand(&Distribution::delta(basis.len(), 0)?), opts.steps)
        .distribution;
    let sim = simulate(basis.ops(), 0, opts.steps, opts.walks, opts.seed)?;
    let test = chi_square(&sim.frequencies(), &expected, sim.samples)?;
    Ok(Check {
        name: "monte_carlo",
        value: test.p_value,
        tolerance: P_VALUE_FLOOR,
        pass: test.p_value > P_VALUE_FLOOR,
        detail: format!(
            "{} walks of {} steps from 0, seed {}, chi2 {:.2} on {} dof, {} tail events",
            opts.walks, opts.steps, opts.seed, test.statistic, test.dof, sim.tail_events
        ),
        report: Some(OracleReport {
            chi_square: Some(test),
            ..OracleReport::default()
        }),
    })
}
