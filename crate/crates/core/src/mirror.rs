//! Mirror-symmetric chains (`D(N-x) = B(x)`), the reflected step `L^M = L J`,
//! the accelerated chain `L^S = (L + L J) / 2`, and dual systems `J L J`.

use crate::catalog::SetTag;
use crate::chain::{ChainOperators, Distribution, Lattice, TimeStep};
use crate::error::{Error, Result};
use crate::oracle::DenseMatrix;
use crate::spectral::{kappa_power, Evolution, ExpansionCoefficients, SpectralBasis};

/// Tolerance of the rate symmetry check.
pub const MIRROR_TOLERANCE: f64 = 1e-14;
/// Relative tolerance of the parity check on series-evaluated polynomials.
pub const PARITY_TOLERANCE: f64 = 1e-9;
/// Above this size parity is checked on the basis vectors instead of the
/// series, whose cost grows as `N^3`.
const SERIES_PARITY_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorChain {
    base: SpectralBasis,
    kappa_m: Vec<f64>,
    kappa_s: Vec<f64>,
}

fn reflect(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

fn parity(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Accepts a finite chain whose rates satisfy `D(N-x) = B(x)` and whose
/// eigenvectors have parity `(-1)^n` under `x -> N-x`.
pub fn build_mirror(basis: &SpectralBasis) -> Result<MirrorChain> {
    let n = match basis.lattice() {
        Lattice::Finite(n) => n,
        Lattice::Truncated { .. } => {
            return Err(Error::Invalid("mirror chains need a finite lattice".into()))
        }
    };
    let ops = basis.ops();
    for x in 0..=n {
        let (b, d) = (ops.birth[x], ops.death[n - x]);
        if (b - d).abs() > MIRROR_TOLERANCE * b.abs().max(1.0) {
            return Err(Error::NotMirrorSymmetric {
                x,
                birth: b,
                death: d,
            });
        }
    }
    let branch = basis.basic();
    match basis.family().filter(|_| n <= SERIES_PARITY_LIMIT) {
        Some(fam) => {
            for k in 0..=n {
                let p: Vec<f64> = (0..=n)
                    .map(|x| fam.polynomial(SetTag::Basic, k, x))
                    .collect::<Result<_>>()?;
                let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for x in 0..=n {
                    if (p[n - x] - parity(k) * p[x]).abs() > PARITY_TOLERANCE * scale {
                        return Err(Error::ParityViolation { n: k, x });
                    }
                }
            }
        }
        None => {
            for (k, v) in branch.vectors.iter().enumerate() {
                for x in 0..=n {
                    if (v[n - x] - parity(k) * v[x]).abs() > PARITY_TOLERANCE {
                        return Err(Error::ParityViolation { n: k, x });
                    }
                }
            }
        }
    }
    let kappa_m = branch
        .kappa
        .iter()
        .enumerate()
        .map(|(k, v)| parity(k) * v)
        .collect();
    let kappa_s = branch
        .kappa
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { *v } else { 0.0 })
        .collect();
    Ok(MirrorChain {
        base: basis.clone(),
        kappa_m,
        kappa_s,
    })
}

impl MirrorChain {
    pub fn base(&self) -> &SpectralBasis {
        &self.base
    }

    /// `kappa_M(n) = (-1)^n kappa(n)`.
    pub fn kappa_m(&self) -> &[f64] {
        &self.kappa_m
    }

    /// `kappa_S(n)`: `kappa(n)` for even `n`, zero for odd `n`.
    pub fn kappa_s(&self) -> &[f64] {
        &self.kappa_s
    }

    /// `L^M d = L (J d)`.
    pub fn apply_lm(&self, dist: &Distribution) -> Distribution {
        let reflected = Distribution {
            values: reflect(&dist.values),
            tail_mass: dist.tail_mass,
        };
        self.base.ops().apply_l(&reflected)
    }

    /// `L^S d = (L d + L J d) / 2`.
    pub fn apply_ls(&self, dist: &Distribution) -> Distribution {
        let plain = self.base.ops().apply_l(dist);
        let mirrored = self.apply_lm(dist);
        Distribution {
            values: plain
                .values
                .iter()
                .zip(&mirrored.values)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
            tail_mass: dist.tail_mass,
        }
    }

    /// Closed-form `l`-step evolution under `L^S`.
    pub fn evolve_ls(&self, coeffs: &ExpansionCoefficients, steps: u64) -> Evolution {
        let n = self.base.len();
        let ground = self.base.ground();
        let mut values = vec![0.0; n];
        for (k, v) in self.base.basic().vectors.iter().enumerate() {
            let w = coeffs.c[k] * kappa_power(self.kappa_s[k], steps);
            if w == 0.0 {
                continue;
            }
            for x in 0..n {
                values[x] += w * v[x];
            }
        }
        let values = values.iter().zip(ground).map(|(v, g)| v * g).collect();
        Evolution {
            distribution: Distribution {
                values,
                tail_mass: 0.0,
            },
            negative_probability: None,
        }
    }

    fn reflected_columns(&self, m: &DenseMatrix) -> DenseMatrix {
        let n = m.size();
        let mut out = DenseMatrix::zeros(n);
        for x in 0..n {
            for y in 0..n {
                out[(x, y)] = m[(x, n - 1 - y)];
            }
        }
        out
    }

    /// Dense `L^M`.
    pub fn l_m_matrix(&self) -> DenseMatrix {
        self.reflected_columns(&DenseMatrix::from_tridiagonal(&self.base.ops().l_matrix()))
    }

    /// Dense `L^S`.
    pub fn l_s_matrix(&self) -> DenseMatrix {
        let l = DenseMatrix::from_tridiagonal(&self.base.ops().l_matrix());
        let lm = self.reflected_columns(&l);
        let n = l.size();
        let mut out = DenseMatrix::zeros(n);
        for x in 0..n {
            for y in 0..n {
                out[(x, y)] = 0.5 * (l[(x, y)] + lm[(x, y)]);
            }
        }
        out
    }

    /// Dense `L_BD J`. It does not generate a stochastic process and is
    /// exposed only to test its eigen-relation.
    pub fn l_bd_m_matrix(&self) -> DenseMatrix {
        self.reflected_columns(&DenseMatrix::from_tridiagonal(&self.base.ops().l_bd()))
    }
}

/// The chain `J L J` with `B^d(x) = D(N-x)` and `D^d(x) = B(N-x)`. It shares
/// the eigenvalues of the original; its eigenvectors are the reflected ones.
pub fn dual_system(basis: &SpectralBasis) -> Result<SpectralBasis> {
    let n = match basis.lattice() {
        Lattice::Finite(n) => n,
        Lattice::Truncated { .. } => {
            return Err(Error::Invalid("dual systems need a finite lattice".into()))
        }
    };
    let ops = basis.ops();
    let birth: Vec<f64> = (0..=n).map(|x| ops.death[n - x]).collect();
    let death: Vec<f64> = (0..=n).map(|x| ops.birth[n - x]).collect();
    let dual = ChainOperators::build(
        birth,
        death,
        Lattice::Finite(n),
        TimeStep::Fixed(ops.t_s),
        None,
        None,
    )?;
    SpectralBasis::from_energies(dual, basis.basic().energies.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{FamilyId, FamilySpec};

    fn kraw(p: f64, n: usize, step: TimeStep) -> SpectralBasis {
        let fam = FamilySpec::new(FamilyId::Krawtchouk)
            .with("p", p)
            .with_n(n)
            .validate()
            .unwrap();
        SpectralBasis::new(&fam, step, None, 1e-12).unwrap()
    }

    #[test]
    fn admissibility() {
        assert!(build_mirror(&kraw(0.5, 4, TimeStep::default())).is_ok());
        assert!(matches!(
            build_mirror(&kraw(0.3, 4, TimeStep::default())),
            Err(Error::NotMirrorSymmetric { x: 0, .. })
        ));
    }

    #[test]
    fn two_point_krawtchouk_reaches_pi_in_one_step() {
        let mc = build_mirror(&kraw(0.5, 2, TimeStep::Fixed(0.5))).unwrap();
        assert_eq!(mc.kappa_s(), &[1.0, 0.0, 0.0]);
        assert_eq!(mc.kappa_m()[0], 1.0);
        for start in 0..3 {
            let out = mc.apply_ls(&Distribution::delta(3, start).unwrap());
            for (a, b) in out.values.iter().zip([0.25, 0.5, 0.25]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn antisymmetric_input_is_erased() {
        let mc = build_mirror(&kraw(0.5, 6, TimeStep::default())).unwrap();
        let mut v = vec![0.0; 7];
        v[0] = 0.3;
        v[6] = -0.3;
        v[2] = 0.1;
        v[4] = -0.1;
        let out = mc.apply_ls(&Distribution::new(v));
        assert!(out.values.iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn dual_of_dual_restores_rates() {
        let basis = kraw(0.3, 5, TimeStep::default());
        let dual = dual_system(&basis).unwrap();
        assert_eq!(dual.ops().birth[0], basis.ops().death[5]);
        let back = dual_system(&dual).unwrap();
        assert_eq!(back.ops().birth, basis.ops().birth);
        assert_eq!(back.ops().death, basis.ops().death);
    }
}
