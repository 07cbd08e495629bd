//! Finite products and terminating (basic) hypergeometric series.
//!
//! Every polynomial in the catalog is a terminating `rFs` or `rφs`. Terms are
//! generated by multiplicative update of the previous term. The alternating
//! sums lose digits quickly at `q` close to one and at large degree, so the
//! working precision is raised until the cancellation is covered.

use crate::error::PoleError;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

/// Rising factorial `(a)_k = a (a+1) ... (a+k-1)`.
pub fn pochhammer(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (a + j as f64))
}

/// Finite q-shifted factorial `(a;q)_k = prod_{j<k} (1 - a q^j)`.
pub fn q_pochhammer(a: f64, q: f64, k: usize) -> f64 {
    let mut acc = 1.0;
    let mut aq = a;
    for _ in 0..k {
        acc *= 1.0 - aq;
        aq *= q;
    }
    acc
}

/// Product of several finite q-shifted factorials sharing `q` and `k`.
pub fn q_pochhammer_many(params: &[f64], q: f64, k: usize) -> f64 {
    params.iter().map(|&a| q_pochhammer(a, q, k)).product()
}

/// Factors below this magnitude leave `1 - a q^j` unchanged in double precision.
const INF_PRODUCT_CUTOFF: f64 = 1.0 / (1u64 << 60) as f64;
const INF_PRODUCT_MAX_FACTORS: usize = 1 << 20;

/// Infinite q-shifted factorial `(a;q)_inf`, truncated once `|a q^j| < 2^-60`.
pub fn q_pochhammer_inf(a: f64, q: f64) -> Result<f64, NonConvergence> {
    if !(0.0..1.0).contains(&q) {
        return Err(NonConvergence { a, q });
    }
    let mut acc = 1.0;
    let mut aq = a;
    for _ in 0..INF_PRODUCT_MAX_FACTORS {
        if aq.abs() < INF_PRODUCT_CUTOFF {
            return Ok(acc);
        }
        acc *= 1.0 - aq;
        aq *= q;
    }
    Err(NonConvergence { a, q })
}

/// `ln |(a;q)_inf|` together with the sign of the product.
pub fn ln_q_pochhammer_inf(a: f64, q: f64) -> Result<(f64, f64), NonConvergence> {
    if !(0.0..1.0).contains(&q) {
        return Err(NonConvergence { a, q });
    }
    let mut log = 0.0;
    let mut sign = 1.0;
    let mut aq = a;
    for _ in 0..INF_PRODUCT_MAX_FACTORS {
        if aq.abs() < INF_PRODUCT_CUTOFF {
            return Ok((log, sign));
        }
        let f = 1.0 - aq;
        log += f.abs().ln();
        sign *= f.signum();
        aq *= q;
    }
    Err(NonConvergence { a, q })
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("infinite q-product did not converge for a={a}, q={q}")]
pub struct NonConvergence {
    pub a: f64,
    pub q: f64,
}

/// Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// A terminating ordinary hypergeometric series `rFs(num; den | z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpec {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub argument: f64,
    /// Termination index: at most `order + 1` terms are summed.
    pub order: usize,
}

/// A parameter `coeff * q^exp` of a basic hypergeometric series.
///
/// Keeping the integer exponent separate makes factors such as
/// `1 - q^{-x} q^x` vanish exactly instead of up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParam {
    pub coeff: f64,
    pub exp: i64,
}

impl QParam {
    pub fn new(coeff: f64, exp: i64) -> Self {
        QParam { coeff, exp }
    }

    /// `q^exp` exactly.
    pub fn pow(exp: i64) -> Self {
        QParam { coeff: 1.0, exp }
    }

    pub fn value(self, q: f64) -> f64 {
        self.coeff * qpow(q, self.exp)
    }
}

/// A terminating basic hypergeometric series `rφs(num; den | q; z)` in the
/// Gasper-Rahman normalisation, including the `[(-1)^k q^{k(k-1)/2}]^{1+s-r}`
/// factor (nontrivial only for `s < r - 1`, e.g. `2φ0`).
#[derive(Debug, Clone, PartialEq)]
pub struct QSeriesSpec {
    pub numerator: Vec<QParam>,
    pub denominator: Vec<QParam>,
    pub argument: QParam,
    pub q: f64,
    pub order: usize,
}

pub(crate) fn qpow(q: f64, e: i64) -> f64 {
    if e >= i32::MIN as i64 && e <= i32::MAX as i64 {
        q.powi(e as i32)
    } else {
        q.powf(e as f64)
    }
}

type Big = FBig<HalfEven, 2>;

/// Working precision cap of the multi-precision pass, in bits.
const MAX_BITS: usize = 1 << 14;
/// Bits of relative accuracy asked of a series value.
const TARGET_BITS: f64 = 44.0;

/// Arithmetic used by the term recursions: plain `f64`, or binary floats
/// with a fixed number of bits.
trait Arith {
    type V: Clone;
    fn lit(&self, v: f64) -> Self::V;
    fn qpow(&self, q: f64, e: i64) -> Self::V;
    fn add(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn div(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn is_zero(&self, a: &Self::V) -> bool;
    fn to_f64(&self, a: &Self::V) -> f64;
}

struct Double;

impl Arith for Double {
    type V = f64;
    fn lit(&self, v: f64) -> f64 {
        v
    }
    fn qpow(&self, q: f64, e: i64) -> f64 {
        qpow(q, e)
    }
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn sub(&self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn div(&self, a: &f64, b: &f64) -> f64 {
        a / b
    }
    fn is_zero(&self, a: &f64) -> bool {
        *a == 0.0
    }
    fn to_f64(&self, a: &f64) -> f64 {
        *a
    }
}

struct Multi {
    bits: usize,
}

impl Arith for Multi {
    type V = Big;
    fn lit(&self, v: f64) -> Big {
        Big::try_from(v).expect("finite series parameter").with_precision(self.bits).value()
    }
    fn qpow(&self, q: f64, e: i64) -> Big {
        self.lit(q).powi(e.into())
    }
    fn add(&self, a: &Big, b: &Big) -> Big {
        a + b
    }
    fn sub(&self, a: &Big, b: &Big) -> Big {
        a - b
    }
    fn mul(&self, a: &Big, b: &Big) -> Big {
        a * b
    }
    fn div(&self, a: &Big, b: &Big) -> Big {
        a / b
    }
    fn is_zero(&self, a: &Big) -> bool {
        a.repr().is_zero()
    }
    fn to_f64(&self, a: &Big) -> f64 {
        a.to_f64().value()
    }
}

/// Sum of a series and the largest `|term|` met on the way.
struct Partial {
    value: f64,
    largest: f64,
}

impl Partial {
    /// Bits needed so that the cancellation between terms still leaves
    /// `TARGET_BITS` of the result.
    fn bits_needed(&self, terms: usize) -> usize {
        let lost = if self.value == 0.0 {
            f64::INFINITY
        } else {
            (self.largest / self.value.abs()).log2().max(0.0)
        };
        let bits = lost + TARGET_BITS + ((terms + 1) as f64).log2();
        if bits.is_finite() {
            bits.ceil() as usize
        } else {
            usize::MAX
        }
    }
}

// Terminating alternating sums can cancel by many orders of magnitude once
// the degree and the lattice grow. A double-precision pass measures the
// cancellation; when it eats the result, the sum is redone with enough bits
// to cover it.
fn adaptive(terms: usize, eval: impl Fn(Option<&Multi>) -> Result<Partial, PoleError>) -> Result<f64, PoleError> {
    let mut partial = eval(None)?;
    let mut bits = 53;
    loop {
        let need = partial.bits_needed(terms);
        if need <= bits || bits >= MAX_BITS {
            return Ok(partial.value);
        }
        bits = need.saturating_add(16).max(2 * bits).min(MAX_BITS);
        partial = eval(Some(&Multi { bits }))?;
        if partial.value == 0.0 {
            return Ok(0.0);
        }
    }
}

fn sum_ordinary<A: Arith>(ar: &A, spec: &SeriesSpec) -> Result<Partial, PoleError> {
    let one = ar.lit(1.0);
    let argument = ar.lit(spec.argument);
    let mut term = one.clone();
    let mut total = one;
    let mut largest = 1.0f64;
    for k in 0..spec.order {
        let kv = ar.lit(k as f64);
        let mut num = ar.lit(1.0);
        for &a in &spec.numerator {
            num = ar.mul(&num, &ar.add(&ar.lit(a), &kv));
        }
        if ar.is_zero(&num) {
            break;
        }
        let mut den = ar.lit(k as f64 + 1.0);
        for (i, &b) in spec.denominator.iter().enumerate() {
            let f = ar.add(&ar.lit(b), &kv);
            if ar.is_zero(&f) {
                return Err(PoleError {
                    parameter: i,
                    term: k + 1,
                });
            }
            den = ar.mul(&den, &f);
        }
        term = ar.mul(&ar.div(&ar.mul(&term, &num), &den), &argument);
        total = ar.add(&total, &term);
        largest = largest.max(ar.to_f64(&term).abs());
    }
    Ok(Partial {
        value: ar.to_f64(&total),
        largest,
    })
}

/// `1 - coeff q^{exp + j}`, exactly zero when it should be.
fn q_factor<A: Arith>(ar: &A, p: QParam, q: f64, j: usize) -> A::V {
    let e = p.exp + j as i64;
    if p.coeff == 1.0 && e == 0 {
        ar.lit(0.0)
    } else {
        ar.sub(&ar.lit(1.0), &ar.mul(&ar.lit(p.coeff), &ar.qpow(q, e)))
    }
}

fn sum_basic<A: Arith>(ar: &A, spec: &QSeriesSpec) -> Result<Partial, PoleError> {
    let q = spec.q;
    let r = spec.numerator.len() as i64;
    let s = spec.denominator.len() as i64;
    let extra_power = 1 + s - r;
    let argument = ar.mul(&ar.lit(spec.argument.coeff), &ar.qpow(q, spec.argument.exp));
    let one = ar.lit(1.0);
    let mut term = one.clone();
    let mut total = one;
    let mut largest = 1.0f64;
    for k in 0..spec.order {
        let mut num = ar.lit(1.0);
        for &a in &spec.numerator {
            num = ar.mul(&num, &q_factor(ar, a, q, k));
        }
        if ar.is_zero(&num) {
            break;
        }
        let mut den = ar.sub(&ar.lit(1.0), &ar.qpow(q, k as i64 + 1));
        for (i, &b) in spec.denominator.iter().enumerate() {
            let f = q_factor(ar, b, q, k);
            if ar.is_zero(&f) {
                return Err(PoleError {
                    parameter: i,
                    term: k + 1,
                });
            }
            den = ar.mul(&den, &f);
        }
        let mut ratio = ar.mul(&ar.div(&num, &den), &argument);
        if extra_power != 0 {
            // ratio of [(-1)^k q^{k(k-1)/2}]^{extra} between k+1 and k
            let step = ar.qpow(q, k as i64 * extra_power);
            ratio = ar.mul(&ratio, &step);
            if extra_power % 2 != 0 {
                ratio = ar.sub(&ar.lit(0.0), &ratio);
            }
        }
        term = ar.mul(&term, &ratio);
        total = ar.add(&total, &term);
        largest = largest.max(ar.to_f64(&term).abs());
    }
    Ok(Partial {
        value: ar.to_f64(&total),
        largest,
    })
}

/// Sums a terminating `rFs`. Stops at the first vanishing numerator factor or
/// after `order + 1` terms.
pub fn hyper_terminating(spec: &SeriesSpec) -> Result<f64, PoleError> {
    adaptive(spec.order, |multi| match multi {
        None => sum_ordinary(&Double, spec),
        Some(m) => sum_ordinary(m, spec),
    })
}

/// Sums a terminating `rφs`.
pub fn q_hyper_terminating(spec: &QSeriesSpec) -> Result<f64, PoleError> {
    adaptive(spec.order, |multi| match multi {
        None => sum_basic(&Double, spec),
        Some(m) => sum_basic(m, spec),
    })
}
