//! Closed-form solutions of the chains: expansion of an initial
//! distribution, discrete and continuous time evolution, transition
//! matrices and the spectral representation of the operators.
//!
//! Eigenvalues come from the catalog. Eigenvectors are the normalised
//! `phi^_n(x) = d_n phi0(x) P_n(x)`, generated from the three-term relation
//! (see [`crate::chain::twisted_eigenvector`]). On semi-infinite lattices
//! they are generated on an extended window that holds the bulk of every
//! retained mode and then restricted to the truncation window; modes are
//! added until their weight on the window is negligible.

use serde::{Deserialize, Serialize};

use crate::catalog::{LatticeKind, SetTag, ValidatedFamily};
use crate::chain::{twisted_eigenvector, ChainOperators, Distribution, Lattice, TimeStep, Tridiagonal};
use crate::error::{Error, Result};
use crate::oracle::DenseMatrix;

/// Entries below this count as negative probabilities.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// A mode is dropped once its largest entry on the window is below this.
pub const MODE_FLOOR: f64 = 1e-17;
const MAX_MODES: usize = 2000;

/// Eigen-data belonging to one set of polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub set: SetTag,
    /// `E(n)` for the basic set, `E'(n)` for the minus set.
    pub energies: Vec<f64>,
    /// `1 - t_S * energy`.
    pub kappa: Vec<f64>,
    /// Normalisation constants `d_n^2`.
    pub dn2: Vec<f64>,
    /// `vectors[n][x]` is `phi^_n(x)` on the window.
    pub vectors: Vec<Vec<f64>>,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub c: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_minus: Option<Vec<f64>>,
}

/// An evolved distribution with the negative-entry diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub distribution: Distribution,
    /// Most negative entry `(x, value)` when it is below `-1e-10`.
    pub negative_probability: Option<(usize, f64)>,
}

impl Evolution {
    fn new(values: Vec<f64>, tail_mass: f64) -> Self {
        let negative_probability = values
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v < -NEGATIVE_TOLERANCE)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        Evolution {
            distribution: Distribution { values, tail_mass },
            negative_probability,
        }
    }
}

/// Matrices rebuilt from the eigen-data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrices {
    pub h: DenseMatrix,
    pub l_bd: DenseMatrix,
    pub l: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    family: Option<ValidatedFamily>,
    ops: ChainOperators,
    ground: Vec<f64>,
    basic: Branch,
    minus: Option<Branch>,
    completeness_residual: f64,
    vector_window: usize,
}

/// `k^power` by repeated squaring.
pub fn kappa_power(k: f64, power: u64) -> f64 {
    let mut result = 1.0;
    let mut base = k;
    let mut e = power;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        e >>= 1;
        base *= base;
    }
    result
}

fn symmetric_band(birth: &[f64], death: &[f64]) -> Tridiagonal {
    let n = birth.len();
    let b = |x: usize| if x + 1 == n { 0.0 } else { birth[x] };
    let off: Vec<f64> = (0..n - 1).map(|x| -(b(x) * death[x + 1]).sqrt()).collect();
    Tridiagonal {
        lower: off.clone(),
        diag: (0..n).map(|x| b(x) + death[x]).collect(),
        upper: off,
    }
}

impl SpectralBasis {
    /// Builds the basis of the basic chain of `fam`.
    pub fn new(fam: &ValidatedFamily, step: TimeStep, cutoff: Option<usize>, epsilon_tail: f64) -> Result<Self> {
        let ops = ChainOperators::from_family(fam, SetTag::Basic, step, cutoff, epsilon_tail)?;
        let sets: &[SetTag] = if fam.has_minus_set() {
            &[SetTag::Basic, SetTag::Minus]
        } else {
            &[SetTag::Basic]
        };
        match fam.lattice() {
            LatticeKind::Finite(n) => {
                let h = ops.build_h().0;
                let branch = |set: SetTag| -> Result<Branch> {
                    let energies = (0..=n).map(|k| fam.eigenvalue(set, k)).collect::<Result<Vec<_>>>()?;
                    let dn2 = (0..=n).map(|k| fam.norm_const(set, k)).collect::<Result<Vec<_>>>()?;
                    let vectors = energies.iter().map(|&e| twisted_eigenvector(&h, e)).collect();
                    Ok(Branch {
                        set,
                        kappa: energies.iter().map(|e| 1.0 - ops.t_s * e).collect(),
                        energies,
                        dn2,
                        vectors,
                    })
                };
                let basic = branch(SetTag::Basic)?;
                SpectralBasis::assemble(Some(fam.clone()), ops, basic, None, n + 1)
            }
            LatticeKind::SemiInfinite => {
                let window = ops.len();
                let mut extended = 2 * window + 40;
                loop {
                    let (birth, death) = fam.rate_vectors(SetTag::Basic, extended - 1)?;
                    let h = symmetric_band(&birth, &death);
                    let mut branches = Vec::new();
                    let mut settled = true;
                    for &set in sets {
                        let (branch, ok) = semi_infinite_branch(fam, set, &h, window, ops.t_s)?;
                        settled &= ok;
                        branches.push(branch);
                    }
                    if settled {
                        let mut it = branches.into_iter();
                        let basic = it.next().expect("basic branch");
                        let minus = it.next();
                        return SpectralBasis::assemble(Some(fam.clone()), ops, basic, minus, extended);
                    }
                    if extended >= crate::chain::MAX_CUTOFF {
                        return Err(Error::Unbounded { cutoff: extended });
                    }
                    extended = (2 * extended).min(crate::chain::MAX_CUTOFF);
                }
            }
        }
    }

    /// Basis of a finite chain with known eigenvalues but no catalog family
    /// (used for dual systems). `d_n^2` is read off the vectors at `x = 0`.
    pub fn from_energies(ops: ChainOperators, energies: Vec<f64>) -> Result<Self> {
        if ops.lattice.is_truncated() {
            return Err(Error::Invalid("explicit eigenvalues need a finite lattice".into()));
        }
        if energies.len() != ops.len() {
            return Err(Error::Invalid("one eigenvalue per lattice point is required".into()));
        }
        let h = ops.build_h().0;
        let vectors: Vec<Vec<f64>> = energies.iter().map(|&e| twisted_eigenvector(&h, e)).collect();
        let basic = Branch {
            set: SetTag::Basic,
            kappa: energies.iter().map(|e| 1.0 - ops.t_s * e).collect(),
            dn2: vectors.iter().map(|v| v[0] * v[0]).collect(),
            energies,
            vectors,
        };
        let n = ops.len();
        SpectralBasis::assemble(None, ops, basic, None, n)
    }

    fn assemble(
        family: Option<ValidatedFamily>,
        ops: ChainOperators,
        basic: Branch,
        minus: Option<Branch>,
        vector_window: usize,
    ) -> Result<Self> {
        let ground = ops.pi.values.iter().map(|p| p.sqrt()).collect();
        let mut basis = SpectralBasis {
            family,
            ops,
            ground,
            basic,
            minus,
            completeness_residual: 0.0,
            vector_window,
        };
        let n = basis.len();
        let (off, diag) = basis.identity_residuals(0..n);
        basis.completeness_residual = off.max(diag);
        Ok(basis)
    }

    pub fn family(&self) -> Option<&ValidatedFamily> {
        self.family.as_ref()
    }

    pub fn ops(&self) -> &ChainOperators {
        &self.ops
    }

    pub fn lattice(&self) -> Lattice {
        self.ops.lattice
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_s(&self) -> f64 {
        self.ops.t_s
    }

    pub fn basic(&self) -> &Branch {
        &self.basic
    }

    pub fn minus(&self) -> Option<&Branch> {
        self.minus.as_ref()
    }

    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        std::iter::once(&self.basic).chain(self.minus.as_ref())
    }

    /// `phi^_0(x) = sqrt(pi(x))`.
    pub fn ground(&self) -> &[f64] {
        &self.ground
    }

    /// Lattice length on which the vectors were generated (larger than the
    /// window on semi-infinite lattices).
    pub fn vector_window(&self) -> usize {
        self.vector_window
    }

    /// Largest deviation of `sum_n phi^_n(x) phi^_n(y)` (both sets) from the
    /// identity over the window.
    pub fn completeness_residual(&self) -> f64 {
        self.completeness_residual
    }

    /// Max off-diagonal and diagonal deviation of the zero-step kernel from
    /// the identity for `x, y` in `range`.
    pub fn identity_residuals(&self, range: std::ops::Range<usize>) -> (f64, f64) {
        let kernel = self.kernel_matrix(|_, _| 1.0);
        let (mut off, mut diag) = (0.0f64, 0.0f64);
        for x in range.clone() {
            for y in range.clone() {
                let want = if x == y { 1.0 } else { 0.0 };
                let err = (kernel[(x, y)] - want).abs();
                if x == y {
                    diag = diag.max(err);
                } else {
                    off = off.max(err);
                }
            }
        }
        (off, diag)
    }

    /// `c_n = sum_x phi^_n(x) / phi^_0(x) P(x)` for both sets.
    pub fn expand(&self, dist: &Distribution) -> ExpansionCoefficients {
        assert_eq!(dist.len(), self.len(), "distribution must live on the basis lattice");
        let coeffs = |b: &Branch| -> Vec<f64> {
            b.vectors
                .iter()
                .map(|v| {
                    dist.values
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p != 0.0)
                        .map(|(x, p)| v[x] / self.ground[x] * p)
                        .sum()
                })
                .collect()
        };
        ExpansionCoefficients {
            c: coeffs(&self.basic),
            c_minus: self.minus.as_ref().map(coeffs),
        }
    }

    fn combine(&self, coeffs: &ExpansionCoefficients, factor: impl Fn(&Branch, usize) -> f64) -> Evolution {
        let n = self.len();
        let mut values = vec![0.0; n];
        let mut add = |b: &Branch, c: &[f64]| {
            for (k, v) in b.vectors.iter().enumerate() {
                let w = c[k] * factor(b, k);
                if w == 0.0 {
                    continue;
                }
                for x in 0..n {
                    values[x] += w * v[x];
                }
            }
        };
        add(&self.basic, &coeffs.c);
        if let (Some(b), Some(c)) = (&self.minus, &coeffs.c_minus) {
            add(b, c);
        }
        for (x, v) in values.iter_mut().enumerate() {
            *v *= self.ground[x];
        }
        Evolution::new(values, self.ops.lattice.tail_mass())
    }

    /// `P(x; l) = phi^_0(x) sum_n c_n kappa(n)^l phi^_n(x)` (plus the minus set).
    pub fn evolve_discrete(&self, coeffs: &ExpansionCoefficients, steps: u64) -> Evolution {
        self.combine(coeffs, |b, k| kappa_power(b.kappa[k], steps))
    }

    /// `P(x; t) = phi^_0(x) sum_n c_n exp(-E(n) t) phi^_n(x)` (plus the minus set).
    pub fn evolve_continuous(&self, coeffs: &ExpansionCoefficients, t: f64) -> Result<Evolution> {
        if !(t >= 0.0) {
            return Err(Error::Invalid(format!("time {t} must be nonnegative")));
        }
        Ok(self.combine(coeffs, |b, k| (-b.energies[k] * t).exp()))
    }

    fn kernel_matrix(&self, factor: impl Fn(&Branch, usize) -> f64) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n);
        for b in self.branches() {
            for (k, v) in b.vectors.iter().enumerate() {
                let w = factor(b, k);
                if w == 0.0 {
                    continue;
                }
                for x in 0..n {
                    let wx = w * v[x];
                    if wx == 0.0 {
                        continue;
                    }
                    for y in 0..n {
                        m[(x, y)] += wx * v[y];
                    }
                }
            }
        }
        m
    }

    fn similarity(&self, mut m: DenseMatrix) -> DenseMatrix {
        let n = self.len();
        for x in 0..n {
            for y in 0..n {
                m[(x, y)] *= self.ground[x] / self.ground[y];
            }
        }
        m
    }

    /// `P(x, y; l)`, the probability of moving from `y` to `x` in `l` steps.
    pub fn transition_matrix_discrete(&self, steps: u64) -> DenseMatrix {
        self.similarity(self.kernel_matrix(|b, k| kappa_power(b.kappa[k], steps)))
    }

    /// `P(x, y; t)` for the continuous-time chain.
    pub fn transition_matrix_continuous(&self, t: f64) -> Result<DenseMatrix> {
        if !(t >= 0.0) {
            return Err(Error::Invalid(format!("time {t} must be nonnegative")));
        }
        Ok(self.similarity(self.kernel_matrix(|b, k| (-b.energies[k] * t).exp())))
    }

    /// `H`, `L_BD` and `L` rebuilt from the eigen-data.
    pub fn spectral_matrices(&self) -> SpectralMatrices {
        let h = self.kernel_matrix(|b, k| b.energies[k]);
        let mut l_bd = self.similarity(h.clone());
        let n = self.len();
        let mut l = DenseMatrix::identity(n);
        for x in 0..n {
            for y in 0..n {
                l_bd[(x, y)] = -l_bd[(x, y)];
                l[(x, y)] += self.ops.t_s * l_bd[(x, y)];
            }
        }
        SpectralMatrices { h, l_bd, l }
    }

    /// Every `kappa` value of every branch.
    pub fn all_kappa(&self) -> Vec<f64> {
        self.branches().flat_map(|b| b.kappa.iter().copied()).collect()
    }

    /// Largest `|kappa|` below one; it sets the rate of approach to `pi`.
    pub fn second_kappa(&self) -> f64 {
        self.branches()
            .flat_map(|b| b.kappa.iter().enumerate().map(move |(k, v)| (b.set, k, *v)))
            .filter(|&(set, k, _)| !(set == SetTag::Basic && k == 0))
            .map(|(_, _, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Modes of one set on a semi-infinite lattice. Returns `false` when some
/// retained mode is not negligible at the end of the extended window.
fn semi_infinite_branch(
    fam: &ValidatedFamily,
    set: SetTag,
    h: &Tridiagonal,
    window: usize,
    t_s: f64,
) -> Result<(Branch, bool)> {
    let mut branch = Branch {
        set,
        energies: Vec::new(),
        kappa: Vec::new(),
        dn2: Vec::new(),
        vectors: Vec::new(),
    };
    let mut settled = true;
    let mut quiet = 0;
    for k in 0..MAX_MODES {
        let e = fam.eigenvalue(set, k)?;
        let full = twisted_eigenvector(h, e);
        let end = full[full.len() - 1].abs();
        let v: Vec<f64> = full[..window].to_vec();
        let peak = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if peak < MODE_FLOOR {
            quiet += 1;
            if quiet == 2 {
                break;
            }
            continue;
        }
        quiet = 0;
        if end > MODE_FLOOR {
            settled = false;
        }
        branch.energies.push(e);
        branch.kappa.push(1.0 - t_s * e);
        branch.dn2.push(fam.norm_const(set, k)?);
        branch.vectors.push(v);
    }
    Ok((branch, settled))
}

/// Solver for the companion chain built from the minus-set rates; it is the
/// basis of the involuted family.
pub fn minus_chain_solver(
    fam: &ValidatedFamily,
    step: TimeStep,
    cutoff: Option<usize>,
    epsilon_tail: f64,
) -> Result<SpectralBasis> {
    SpectralBasis::new(&fam.involution()?, step, cutoff, epsilon_tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{FamilyId, FamilySpec};

    fn kraw2() -> SpectralBasis {
        let fam = FamilySpec::new(FamilyId::Krawtchouk)
            .with("p", 0.5)
            .with_n(2)
            .validate()
            .unwrap();
        SpectralBasis::new(&fam, TimeStep::Fixed(0.5), None, 1e-12).unwrap()
    }

    #[test]
    fn small_chain_examples() {
        let basis = kraw2();
        let pi = basis.ops().pi.clone();
        let c = basis.expand(&pi);
        assert!((c.c[0] - 1.0).abs() < 1e-14);
        assert!(c.c[1..].iter().all(|v| v.abs() < 1e-14));
        let delta = Distribution::delta(3, 0).unwrap();
        let c = basis.expand(&delta);
        assert!((c.c[0] - 1.0).abs() < 1e-14);
        let one = basis.evolve_discrete(&c, 1).distribution;
        for (a, b) in one.values.iter().zip([0.5, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let zero = basis.evolve_discrete(&c, 0).distribution;
        for (a, b) in zero.values.iter().zip(&delta.values) {
            assert!((a - b).abs() < 1e-14);
        }
        let id = basis.transition_matrix_discrete(0);
        assert!(id.max_abs_diff(&DenseMatrix::identity(3)) < 1e-14);
        assert_eq!(basis.basic().kappa, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn kappa_power_matches_powi() {
        for k in [-0.9, -0.3, 0.0, 0.5, 0.99] {
            for l in [0u64, 1, 2, 7, 50] {
                assert!((kappa_power(k, l) - f64::powi(k, l as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn minus_chain_needs_minus_set() {
        let fam = FamilySpec::new(FamilyId::Krawtchouk)
            .with("p", 0.5)
            .with_n(2)
            .validate()
            .unwrap();
        assert!(matches!(
            minus_chain_solver(&fam, TimeStep::default(), None, 1e-12),
            Err(Error::InvolutionUndefined(_))
        ));
    }
}
