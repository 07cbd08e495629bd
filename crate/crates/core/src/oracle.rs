//! Brute-force references: dense matrix powers, dense eigen-solvers and
//! Monte-Carlo simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::chain::{ChainOperators, Distribution, Tridiagonal};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn from_tridiagonal(t: &Tridiagonal) -> Self {
        let n = t.len();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = t.lower[i];
                m[(i, i + 1)] = t.upper[i];
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.column(j).iter().sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|a-b| / max(|a|,|b|)` over entries where either exceeds `floor`.
    pub fn max_rel_diff(&self, other: &DenseMatrix, floor: f64) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a.abs().max(b.abs()) > floor)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// `m^power` by repeated squaring.
pub fn dense_power(m: &DenseMatrix, power: u64) -> DenseMatrix {
    let mut result = DenseMatrix::identity(m.size());
    let mut base = m.clone();
    let mut e = power;
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.mul(&base);
        }
    }
    result
}

/// Eigenvalues (ascending) and, optionally, orthonormal eigenvectors of a
/// symmetric tridiagonal matrix by implicit QL iteration with Wilkinson
/// shifts. `vectors[k]` is the eigenvector of `values[k]`.
pub fn symmetric_tridiagonal_eigen(
    diag: &[f64],
    off: &[f64],
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Vec<Vec<f64>>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e: Vec<f64> = off.to_vec();
    e.push(0.0);
    let mut z = if want_vectors {
        Some(DenseMatrix::identity(n))
    } else {
        None
    };
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 30 * MAX_SWEEPS {
                return Err(Error::Convergence { iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let zk1 = z[(k, i + 1)];
                        let zk = z[(k, i)];
                        z[(k, i + 1)] = s * zk + c * zk1;
                        z[(k, i)] = c * zk - s * zk1;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = z.map(|z| order.iter().map(|&k| z.column(k)).collect());
    Ok((values, vectors))
}

/// Eigenvalues (ascending) and eigenvectors of a dense symmetric matrix by
/// cyclic Jacobi rotations.
pub fn jacobi_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.size();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        let scale: f64 = (0..n).map(|i| a[(i, i)].powi(2)).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
            let values = order.iter().map(|&k| a[(k, k)]).collect();
            let vectors = order.iter().map(|&k| v.column(k)).collect();
            return Ok((values, vectors));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if sweep + 1 == MAX_SWEEPS {
            break;
        }
    }
    Err(Error::Convergence {
        iterations: MAX_SWEEPS,
    })
}

/// Sorted spectrum of a tridiagonal matrix whose off-diagonal products are
/// nonnegative (so it is similar to a symmetric one), such as `L`, `L_BD`,
/// `H~` or `H`.
pub fn numeric_spectrum(t: &Tridiagonal) -> Result<Vec<f64>> {
    let off = t
        .lower
        .iter()
        .zip(&t.upper)
        .enumerate()
        .map(|(x, (l, u))| {
            let prod = l * u;
            if prod < 0.0 {
                Err(Error::Invalid(format!("off-diagonal product negative at x={x}")))
            } else {
                Ok(prod.sqrt())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(symmetric_tridiagonal_eigen(&t.diag, &off, false)?.0)
}

/// Sorted spectrum of a dense symmetric matrix.
pub fn numeric_spectrum_dense(m: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(jacobi_eigen(m)?.0)
}

/// Empirical outcome of a batch of simulated walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub counts: Vec<u64>,
    /// Walks that stepped beyond a truncation cutoff.
    pub tail_events: u64,
    pub samples: u64,
}

impl Simulation {
    pub fn frequencies(&self) -> Distribution {
        let n = self.samples as f64;
        Distribution {
            values: self.counts.iter().map(|&c| c as f64 / n).collect(),
            tail_mass: self.tail_events as f64 / n,
        }
    }

    /// Merges another batch over the same lattice.
    pub fn merge(&mut self, other: &Simulation) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.tail_events += other.tail_events;
        self.samples += other.samples;
    }
}

/// Runs `samples` independent walks of `steps` steps from `start`. Walk `i`
/// draws from its own ChaCha stream `i` under `seed`, so results do not
/// depend on evaluation order.
pub fn simulate(ops: &ChainOperators, start: usize, steps: u64, samples: u64, seed: u64) -> Result<Simulation> {
    let n = ops.len();
    if start >= n {
        return Err(Error::Invalid(format!("start point {start} outside lattice")));
    }
    if samples == 0 {
        return Err(Error::Invalid("samples must be at least 1".into()));
    }
    let down: Vec<f64> = ops.death.iter().map(|d| ops.t_s * d).collect();
    let up_from: Vec<f64> = ops.birth.iter().map(|b| 1.0 - ops.t_s * b).collect();
    let last = ops.lattice.last();
    let mut sim = Simulation {
        counts: vec![0; n],
        tail_events: 0,
        samples,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for walk in 0..samples {
        rng.set_stream(walk);
        rng.set_word_pos(0);
        let mut x = start;
        let mut escaped = false;
        for _ in 0..steps {
            let u: f64 = rng.gen();
            if u < down[x] {
                x -= 1;
            } else if u >= up_from[x] {
                if x == last {
                    escaped = true;
                    break;
                }
                x += 1;
            }
        }
        if escaped {
            sim.tail_events += 1;
        } else {
            sim.counts[x] += 1;
        }
    }
    Ok(sim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of observed frequencies against `expected`.
/// Cells with `expected * samples < 5` are pooled into one cell; the tail
/// masses form an extra cell.
pub fn chi_square(empirical: &Distribution, expected: &Distribution, samples: u64) -> Result<ChiSquare> {
    let n = samples as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    let pairs = empirical
        .values
        .iter()
        .zip(&expected.values)
        .chain(std::iter::once((&empirical.tail_mass, &expected.tail_mass)));
    for (&obs, &exp) in pairs {
        if exp * n >= 5.0 {
            cells.push((obs * n, exp * n));
        } else {
            pooled.0 += obs * n;
            pooled.1 += exp * n;
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        cells.push(pooled);
    }
    if cells.len() < 2 {
        return Err(Error::DegenerateBins { cells: cells.len() });
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len() - 1;
    let p_value = if statistic == 0.0 {
        1.0
    } else if statistic.is_infinite() {
        0.0
    } else {
        gamma_ur(dof as f64 / 2.0, statistic / 2.0)
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
    })
}

/// Summary of a closed form compared with a brute-force reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OracleReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub tail_bound_used: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectraPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<ChiSquare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraPair {
    pub closed_form: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl OracleReport {
    pub fn compare(closed: &DenseMatrix, reference: &DenseMatrix, tail_bound: f64) -> Self {
        OracleReport {
            max_abs_err: closed.max_abs_diff(reference),
            max_rel_err: closed.max_rel_diff(reference, 1e-300),
            tail_bound_used: tail_bound,
            spectra: None,
            chi_square: None,
        }
    }

    /// Compares two spectra as sorted multisets.
    pub fn spectra(mut closed: Vec<f64>, mut numeric: Vec<f64>) -> Self {
        closed.sort_by(f64::total_cmp);
        numeric.sort_by(f64::total_cmp);
        let (mut abs, mut rel) = (0.0f64, 0.0f64);
        for (a, b) in closed.iter().zip(&numeric) {
            let d = (a - b).abs();
            abs = abs.max(d);
            rel = rel.max(d / a.abs().max(b.abs()).max(1.0));
        }
        if closed.len() != numeric.len() {
            abs = f64::INFINITY;
            rel = f64::INFINITY;
        }
        OracleReport {
            max_abs_err: abs,
            max_rel_err: rel,
            tail_bound_used: 0.0,
            spectra: Some(SpectraPair { closed_form: closed, numeric }),
            chi_square: None,
        }
    }
}
