//! Operator forms of a birth and death chain: the stochastic step `L`, the
//! generator `L_BD`, the similarity forms `H~` and `H`, and the stationary
//! distribution.

use serde::{Deserialize, Serialize};

use crate::catalog::{LatticeKind, SetTag, ValidatedFamily};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON_TAIL: f64 = 1e-12;
pub const DEFAULT_THETA: f64 = 0.5;
/// Largest window tried when truncating a semi-infinite lattice.
pub const MAX_CUTOFF: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lattice {
    Finite(usize),
    Truncated { cutoff: usize, tail_mass: f64 },
}

impl Lattice {
    /// Largest lattice point kept.
    pub fn last(&self) -> usize {
        match *self {
            Lattice::Finite(n) => n,
            Lattice::Truncated { cutoff, .. } => cutoff,
        }
    }

    pub fn len(&self) -> usize {
        self.last() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tail_mass(&self) -> f64 {
        match *self {
            Lattice::Finite(_) => 0.0,
            Lattice::Truncated { tail_mass, .. } => tail_mass,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Lattice::Truncated { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeStep {
    /// `t_S = theta / max(B+D)`.
    Auto(f64),
    Fixed(f64),
}

impl Default for TimeStep {
    fn default() -> Self {
        TimeStep::Auto(DEFAULT_THETA)
    }
}

impl std::str::FromStr for TimeStep {
    type Err = Error;

    /// Accepts `auto`, `auto:theta` or a plain positive number.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("time step `{s}` is neither `auto:theta` nor a number"));
        if s == "auto" {
            return Ok(TimeStep::Auto(DEFAULT_THETA));
        }
        if let Some(theta) = s.strip_prefix("auto:") {
            let theta: f64 = theta.parse().map_err(|_| bad())?;
            return Ok(TimeStep::Auto(theta));
        }
        s.parse().map(TimeStep::Fixed).map_err(|_| bad())
    }
}

impl std::fmt::Display for TimeStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeStep::Auto(theta) => write!(f, "auto:{theta:?}"),
            TimeStep::Fixed(t) => write!(f, "{t:?}"),
        }
    }
}

/// A probability vector over the kept lattice window plus the mass beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub values: Vec<f64>,
    pub tail_mass: f64,
}

impl Distribution {
    pub fn new(values: Vec<f64>) -> Self {
        Distribution {
            values,
            tail_mass: 0.0,
        }
    }

    pub fn delta(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::Invalid(format!("start point {at} outside lattice of size {len}")));
        }
        let mut values = vec![0.0; len];
        values[at] = 1.0;
        Ok(Distribution::new(values))
    }

    pub fn uniform(len: usize) -> Self {
        Distribution::new(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() + self.tail_mass
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            + (self.tail_mass - other.tail_mass).abs()
    }

    /// Checks nonnegativity and unit mass within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if let Some(x) = self.values.iter().position(|v| !(*v >= -tol)) {
            return Err(Error::Invalid(format!("negative probability at x={x}")));
        }
        if (self.total() - 1.0).abs() > tol {
            return Err(Error::Invalid(format!("total mass {} differs from 1", self.total())));
        }
        Ok(())
    }
}

/// Tridiagonal matrix in band form: `lower[x]` is entry `(x+1, x)` and
/// `upper[x]` is entry `(x, x+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row == col + 1 {
            self.lower[col]
        } else if col == row + 1 {
            self.upper[row]
        } else {
            0.0
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(v.len(), n, "vector length must match the matrix");
        (0..n)
            .map(|x| {
                let mut s = self.diag[x] * v[x];
                if x > 0 {
                    s += self.lower[x - 1] * v[x - 1];
                }
                if x + 1 < n {
                    s += self.upper[x] * v[x + 1];
                }
                s
            })
            .collect()
    }

    /// Column sums, used to check stochasticity and conservation.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|y| {
                let mut s = self.diag[y];
                if y > 0 {
                    s += self.upper[y - 1];
                }
                if y + 1 < n {
                    s += self.lower[y];
                }
                s
            })
            .collect()
    }
}

/// Upper bidiagonal factor `A` with `H = A^T A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bidiagonal {
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bidiagonal {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|x| {
                let mut s = self.diag[x] * v[x];
                if x + 1 < n {
                    s += self.upper[x] * v[x + 1];
                }
                s
            })
            .collect()
    }

    /// `A^T A` as a tridiagonal matrix.
    pub fn gram(&self) -> Tridiagonal {
        let n = self.diag.len();
        let diag = (0..n)
            .map(|x| {
                let above = if x > 0 { self.upper[x - 1].powi(2) } else { 0.0 };
                self.diag[x].powi(2) + above
            })
            .collect();
        let off: Vec<f64> = (0..n.saturating_sub(1))
            .map(|x| self.diag[x] * self.upper[x])
            .collect();
        Tridiagonal {
            lower: off.clone(),
            diag,
            upper: off,
        }
    }
}

/// A birth and death chain on a finite or truncated lattice.
///
/// `birth` and `death` hold the true rates on `0..=last`; on a truncated
/// lattice the operators reflect at the cutoff (the birth rate at the last
/// point is treated as zero) while simulation keeps the true rate and records
/// escapes as tail events.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOperators {
    pub lattice: Lattice,
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub t_s: f64,
    pub max_rate: f64,
    /// Ground-state amplitude `phi0(x)`, with `phi0(0) = 1`.
    pub phi0: Vec<f64>,
    pub pi: Distribution,
}

/// `max (B+D)` over the lattice, including the limit at infinity on
/// truncated lattices.
pub fn max_total_rate(birth: &[f64], death: &[f64], lattice: &Lattice, limit: Option<f64>) -> Result<f64> {
    if birth.iter().chain(death).any(|r| !(*r >= 0.0)) {
        return Err(Error::Invalid("rates must be nonnegative".into()));
    }
    let totals: Vec<f64> = birth.iter().zip(death).map(|(b, d)| b + d).collect();
    let window = totals.iter().copied().fold(0.0, f64::max);
    let max = match lattice {
        Lattice::Finite(_) => window,
        Lattice::Truncated { cutoff, .. } => match limit {
            Some(limit) => window.max(limit),
            None => {
                let m = totals.len();
                if m >= 2 && totals[m - 1] > totals[m - 2] * (1.0 + 1e-9) {
                    return Err(Error::Unbounded { cutoff: *cutoff });
                }
                window * 1.05
            }
        },
    };
    if max <= 0.0 {
        return Err(Error::Invalid("all rates vanish".into()));
    }
    Ok(max)
}

/// `phi0(x)^2` as the running product of `B(y)/D(y+1)`.
fn running_weights(birth: &[f64], death: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(birth.len());
    w.push(1.0);
    for x in 1..birth.len() {
        w.push(w[x - 1] * birth[x - 1] / death[x]);
    }
    w
}

impl ChainOperators {
    /// Builds the operators from explicit rate vectors.
    ///
    /// `rate_limit` is `lim B+D` for a truncated lattice when known. `pi`
    /// defaults to the normalised `phi0^2` over the window; `norm` overrides
    /// the normalising constant `d_0^2` so the window plus tail sums to one.
    pub fn build(
        birth: Vec<f64>,
        death: Vec<f64>,
        lattice: Lattice,
        step: TimeStep,
        rate_limit: Option<f64>,
        norm: Option<f64>,
    ) -> Result<Self> {
        if birth.len() != lattice.len() || death.len() != lattice.len() {
            return Err(Error::Invalid("rate vectors must cover the lattice".into()));
        }
        if death[0] != 0.0 {
            return Err(Error::Invalid("D(0) must vanish".into()));
        }
        if let Lattice::Finite(n) = lattice {
            if birth[n] != 0.0 {
                return Err(Error::Invalid("B(N) must vanish on a finite lattice".into()));
            }
        }
        let last = lattice.last();
        if let Some(x) = (0..last).find(|&x| birth[x] <= 0.0) {
            return Err(Error::DivisionByZero { x });
        }
        if let Some(x) = (1..=last).find(|&x| death[x] <= 0.0) {
            return Err(Error::Invalid(format!("death rate vanishes at interior point x={x}")));
        }
        let max_rate = max_total_rate(&birth, &death, &lattice, rate_limit)?;
        let t_s = match step {
            TimeStep::Auto(theta) => {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(Error::Invalid(format!("auto step factor {theta} outside (0,1)")));
                }
                theta / max_rate
            }
            TimeStep::Fixed(t) => {
                if !(t > 0.0) {
                    return Err(Error::Invalid(format!("time step {t} must be positive")));
                }
                if t * max_rate >= 1.0 {
                    return Err(Error::StepTooLarge {
                        t_s: t,
                        product: t * max_rate,
                    });
                }
                t
            }
        };
        let weights = running_weights(&birth, &death);
        let phi0 = weights.iter().map(|w| w.sqrt()).collect();
        let d0 = norm.unwrap_or_else(|| 1.0 / weights.iter().sum::<f64>());
        let pi = Distribution {
            values: weights.iter().map(|w| d0 * w).collect(),
            tail_mass: lattice.tail_mass(),
        };
        Ok(ChainOperators {
            lattice,
            birth,
            death,
            t_s,
            max_rate,
            phi0,
            pi,
        })
    }

    /// Builds the chain of `fam` for the given set: the basic chain, or the
    /// companion chain with the minus-set rates. Semi-infinite lattices are
    /// truncated at the first cutoff where the stationary tail drops below
    /// `epsilon_tail` and `B+D` has settled within 1% of its limit.
    pub fn from_family(
        fam: &ValidatedFamily,
        set: SetTag,
        step: TimeStep,
        cutoff: Option<usize>,
        epsilon_tail: f64,
    ) -> Result<Self> {
        match fam.lattice() {
            LatticeKind::Finite(n) => {
                let (birth, death) = fam.rate_vectors(set, n)?;
                let d0 = if set == SetTag::Basic {
                    Some(fam.norm_const(SetTag::Basic, 0)?)
                } else {
                    None
                };
                ChainOperators::build(birth, death, Lattice::Finite(n), step, None, d0)
            }
            LatticeKind::SemiInfinite => {
                let limit = fam.rate_limit(set)?;
                let d0 = fam.norm_const(set, 0)?;
                let (m, tail) = choose_cutoff(fam, set, d0, limit, cutoff, epsilon_tail)?;
                let (birth, death) = fam.rate_vectors(set, m)?;
                let lattice = Lattice::Truncated {
                    cutoff: m,
                    tail_mass: tail,
                };
                ChainOperators::build(birth, death, lattice, step, limit, Some(d0))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Birth rate as seen by the operators (zero at a truncation cutoff).
    pub fn operator_birth(&self, x: usize) -> f64 {
        if x == self.lattice.last() {
            0.0
        } else {
            self.birth[x]
        }
    }

    fn band(&self, scale: f64, shift: f64) -> Tridiagonal {
        let n = self.len();
        let lower = (0..n - 1).map(|x| scale * self.operator_birth(x)).collect();
        let upper = (0..n - 1).map(|x| scale * self.death[x + 1]).collect();
        let diag = (0..n)
            .map(|x| shift - scale * (self.operator_birth(x) + self.death[x]))
            .collect();
        Tridiagonal { lower, diag, upper }
    }

    /// One-step transition matrix `L = I + t_S L_BD`.
    pub fn l_matrix(&self) -> Tridiagonal {
        self.band(self.t_s, 1.0)
    }

    /// Generator `L_BD`.
    pub fn l_bd(&self) -> Tridiagonal {
        self.band(1.0, 0.0)
    }

    /// `H~` with diagonal `B+D`, `H~(x,x+1) = -B(x)`, `H~(x,x-1) = -D(x)`.
    pub fn h_tilde(&self) -> Tridiagonal {
        let n = self.len();
        Tridiagonal {
            lower: (1..n).map(|x| -self.death[x]).collect(),
            diag: (0..n).map(|x| self.operator_birth(x) + self.death[x]).collect(),
            upper: (0..n - 1).map(|x| -self.operator_birth(x)).collect(),
        }
    }

    /// Symmetric form `H = Phi^-1 (-L_BD) Phi` and its factor `A`.
    pub fn build_h(&self) -> (Tridiagonal, Bidiagonal) {
        let n = self.len();
        let off: Vec<f64> = (0..n - 1)
            .map(|x| -(self.operator_birth(x) * self.death[x + 1]).sqrt())
            .collect();
        let h = Tridiagonal {
            lower: off.clone(),
            diag: (0..n).map(|x| self.operator_birth(x) + self.death[x]).collect(),
            upper: off,
        };
        let a = Bidiagonal {
            diag: (0..n).map(|x| self.operator_birth(x).sqrt()).collect(),
            upper: (0..n - 1).map(|x| -self.death[x + 1].sqrt()).collect(),
        };
        (h, a)
    }

    fn check_len(&self, dist: &Distribution) {
        assert_eq!(dist.len(), self.len(), "distribution must live on the chain's lattice");
    }

    pub fn apply_l(&self, dist: &Distribution) -> Distribution {
        self.check_len(dist);
        Distribution {
            values: self.l_matrix().apply(&dist.values),
            tail_mass: dist.tail_mass,
        }
    }

    /// Generator action; entries sum to zero.
    pub fn apply_lbd(&self, dist: &Distribution) -> Vec<f64> {
        self.check_len(dist);
        self.l_bd().apply(&dist.values)
    }

    /// Unit eigenvector of `H` for eigenvalue `e`; see [`twisted_eigenvector`].
    pub fn symmetric_eigenvector(&self, e: f64) -> Vec<f64> {
        twisted_eigenvector(&self.build_h().0, e)
    }

    /// Solves `H~ P = E P` forward from `P(0) = 1`.
    pub fn eigenvector_by_recurrence(&self, e: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let birth: Vec<f64> = (0..n).map(|x| self.operator_birth(x)).collect();
        eigenvector_by_recurrence(&birth, &self.death, e)
    }
}

fn choose_cutoff(
    fam: &ValidatedFamily,
    set: SetTag,
    d0: f64,
    limit: Option<f64>,
    forced: Option<usize>,
    epsilon_tail: f64,
) -> Result<(usize, f64)> {
    let limit = limit.expect("semi-infinite families provide a rate limit");
    // pi(x) for x = 0.. by running product, extended until it underflows so
    // the tail beyond any candidate cutoff is summed explicitly.
    let mut pi = vec![d0];
    let mut totals = Vec::new();
    let mut prev = fam.rate_vectors(set, 0)?;
    totals.push(prev.0[0] + prev.1[0]);
    let mut x = 0;
    while x < MAX_CUTOFF {
        let cur = fam.rates(set, x + 1)?;
        let next = pi[x] * prev.0[0] / cur.1;
        totals.push(cur.0 + cur.1);
        pi.push(next);
        prev = (vec![cur.0], vec![cur.1]);
        x += 1;
        let settled = (totals[x] - limit).abs() <= 0.01 * limit.abs();
        if next < 1e-300 && settled && forced.map_or(true, |m| x > m) {
            break;
        }
    }
    let mut tails = vec![0.0; pi.len()];
    for x in (0..pi.len() - 1).rev() {
        tails[x] = tails[x + 1] + pi[x + 1];
    }
    if let Some(m) = forced {
        if m >= pi.len() {
            return Err(Error::Invalid(format!("cutoff {m} exceeds the largest window {MAX_CUTOFF}")));
        }
        return Ok((m, tails[m]));
    }
    (1..pi.len())
        .find(|&m| tails[m] < epsilon_tail && (totals[m] - limit).abs() <= 0.01 * limit.abs())
        .map(|m| (m, tails[m]))
        .ok_or(Error::Unbounded { cutoff: MAX_CUTOFF })
}

/// Generates `P(x)` from `P(0) = 1` using rows `0..len-1` of
/// `B(x)(P(x)-P(x+1)) + D(x)(P(x)-P(x-1)) = E P(x)`.
pub fn eigenvector_by_recurrence(birth: &[f64], death: &[f64], e: f64) -> Result<Vec<f64>> {
    let n = birth.len();
    let mut p = Vec::with_capacity(n);
    p.push(1.0);
    for x in 0..n.saturating_sub(1) {
        if birth[x] == 0.0 {
            return Err(Error::DivisionByZero { x });
        }
        let down = if x > 0 { death[x] * (p[x] - p[x - 1]) } else { 0.0 };
        p.push(p[x] + (down - e * p[x]) / birth[x]);
    }
    Ok(p)
}

/// Unit eigenvector of a symmetric tridiagonal matrix for a known
/// eigenvalue `e`, with a nonnegative first component.
///
/// The three-term relation is solved in ratio form from both ends
/// (`(H - e) = L D L^T` forward and `U D U^T` backward) and joined at the
/// index where the twisted pivot is smallest, so each half is only run in the
/// direction where it does not amplify rounding errors. Components are
/// carried as log-magnitude and sign, so values far below the bulk of the
/// vector underflow to zero instead of spoiling its normalisation.
pub fn twisted_eigenvector(h: &Tridiagonal, e: f64) -> Vec<f64> {
    let n = h.len();
    if n == 1 {
        return vec![1.0];
    }
    let b = &h.upper;
    let scale = h.diag.iter().map(|d| d.abs()).fold(e.abs(), f64::max).max(f64::MIN_POSITIVE);
    let guard = |p: f64| if p == 0.0 { f64::EPSILON * scale } else { p };
    let shifted: Vec<f64> = h.diag.iter().map(|d| d - e).collect();

    let mut fwd = vec![0.0; n];
    fwd[0] = guard(shifted[0]);
    for i in 1..n {
        fwd[i] = guard(shifted[i] - b[i - 1] * b[i - 1] / fwd[i - 1]);
    }
    let mut bwd = vec![0.0; n];
    bwd[n - 1] = guard(shifted[n - 1]);
    for i in (0..n - 1).rev() {
        bwd[i] = guard(shifted[i] - b[i] * b[i] / bwd[i + 1]);
    }
    let twist = (0..n)
        .min_by(|&i, &j| {
            let g = |k: usize| (fwd[k] + bwd[k] - shifted[k]).abs();
            g(i).total_cmp(&g(j))
        })
        .unwrap_or(0);

    let mut log = vec![0.0; n];
    let mut sign = vec![1.0; n];
    for i in (0..twist).rev() {
        let ratio = -b[i] / fwd[i];
        log[i] = log[i + 1] + ratio.abs().ln();
        sign[i] = sign[i + 1] * ratio.signum();
    }
    for i in twist + 1..n {
        let ratio = -b[i - 1] / bwd[i];
        log[i] = log[i - 1] + ratio.abs().ln();
        sign[i] = sign[i - 1] * ratio.signum();
    }
    let top = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = top + 0.5 * log.iter().map(|l| (2.0 * (l - top)).exp()).sum::<f64>().ln();
    let flip = sign[0];
    (0..n).map(|i| flip * sign[i] * (log[i] - norm).exp()).collect()
}

/// Residual of the last row, `|D(x)(P(x)-P(x-1)) - E P(x)|` at the final
/// point, where the reflecting boundary removes the birth term.
pub fn last_row_residual(death: &[f64], e: f64, p: &[f64]) -> f64 {
    let x = p.len() - 1;
    let down = if x > 0 { death[x] * (p[x] - p[x - 1]) } else { 0.0 };
    (down - e * p[x]).abs()
}
