//! The fifteen exactly solvable families.
//!
//! Each family provides birth and death rates, eigenvalues, the sinusoidal
//! coordinate, ground-state weights, normalisation constants and the
//! eigenpolynomials in closed form. The four families on `Z>=0` whose
//! polynomials are not complete on their own also carry a second ("minus")
//! set, reached through a parameter involution.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{
    hyper_terminating, ln_q_pochhammer_inf, pochhammer, q_hyper_terminating, q_pochhammer,
    q_pochhammer_many, qpow, QParam, QSeriesSpec, SeriesSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyId {
    Krawtchouk,
    Hahn,
    DualHahn,
    Racah,
    AffineQKrawtchouk,
    QKrawtchouk,
    QuantumQKrawtchouk,
    QHahn,
    DualQHahn,
    QRacah,
    AlSalamCarlitzII,
    QMeixner,
    QCharlier,
    DualBigQJacobi,
    DualBigQLaguerre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    Finite(usize),
    SemiInfinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SetTag {
    #[default]
    Basic,
    Minus,
}

impl FamilyId {
    pub const ALL: [FamilyId; 15] = [
        FamilyId::Krawtchouk,
        FamilyId::Hahn,
        FamilyId::DualHahn,
        FamilyId::Racah,
        FamilyId::AffineQKrawtchouk,
        FamilyId::QKrawtchouk,
        FamilyId::QuantumQKrawtchouk,
        FamilyId::QHahn,
        FamilyId::DualQHahn,
        FamilyId::QRacah,
        FamilyId::AlSalamCarlitzII,
        FamilyId::QMeixner,
        FamilyId::QCharlier,
        FamilyId::DualBigQJacobi,
        FamilyId::DualBigQLaguerre,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Krawtchouk => "Krawtchouk",
            FamilyId::Hahn => "Hahn",
            FamilyId::DualHahn => "DualHahn",
            FamilyId::Racah => "Racah",
            FamilyId::AffineQKrawtchouk => "AffineQKrawtchouk",
            FamilyId::QKrawtchouk => "QKrawtchouk",
            FamilyId::QuantumQKrawtchouk => "QuantumQKrawtchouk",
            FamilyId::QHahn => "QHahn",
            FamilyId::DualQHahn => "DualQHahn",
            FamilyId::QRacah => "QRacah",
            FamilyId::AlSalamCarlitzII => "AlSalamCarlitzII",
            FamilyId::QMeixner => "QMeixner",
            FamilyId::QCharlier => "QCharlier",
            FamilyId::DualBigQJacobi => "DualBigQJacobi",
            FamilyId::DualBigQLaguerre => "DualBigQLaguerre",
        }
    }

    /// Case-insensitive lookup ignoring `-`, `_` and spaces, so `q-charlier`,
    /// `qcharlier` and `QCharlier` all resolve.
    pub fn parse(s: &str) -> Option<FamilyId> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let key = key.replace("ii", "2");
        FamilyId::ALL.into_iter().find(|f| {
            f.name().to_ascii_lowercase().replace("ii", "2") == key
        })
    }

    pub fn is_finite(self) -> bool {
        (self as usize) < FamilyId::AlSalamCarlitzII as usize
    }

    pub fn has_minus_set(self) -> bool {
        matches!(
            self,
            FamilyId::QMeixner
                | FamilyId::QCharlier
                | FamilyId::DualBigQJacobi
                | FamilyId::DualBigQLaguerre
        )
    }

    /// Free parameters, in the order they are validated. `N` is listed for
    /// finite families.
    pub fn param_names(self) -> &'static [&'static str] {
        use FamilyId::*;
        match self {
            Krawtchouk => &["p", "N"],
            Hahn | DualHahn => &["a", "b", "N"],
            Racah => &["d", "b", "a", "N"],
            AffineQKrawtchouk | QKrawtchouk | QuantumQKrawtchouk => &["q", "p", "N"],
            QHahn | DualQHahn => &["q", "a", "b", "N"],
            QRacah => &["q", "d", "b", "a", "N"],
            AlSalamCarlitzII | QCharlier => &["q", "a"],
            QMeixner => &["q", "b", "c"],
            DualBigQJacobi => &["q", "a", "b", "c"],
            DualBigQLaguerre => &["q", "a", "b"],
        }
    }

    /// Human-readable parameter domain.
    pub fn constraints(self) -> &'static str {
        use FamilyId::*;
        match self {
            Krawtchouk => "0<p<1",
            Hahn | DualHahn => "a>0, b>0",
            Racah => "c=-N (derived), a>=b, d>0, a>N+d, 0<b<1+d",
            AffineQKrawtchouk => "0<q<1, 0<p<1/q",
            QKrawtchouk => "0<q<1, p>0",
            QuantumQKrawtchouk => "0<q<1, p>q^-N",
            QHahn | DualQHahn => "0<q<1, 0<a<1, 0<b<1",
            QRacah => "0<q<1, c=q^-N (derived), a<=b, 0<d<1, 0<a<q^N d, qd<b<1",
            AlSalamCarlitzII => "0<q<1, 0<a<1/q",
            QMeixner => "0<q<1, 0<b<1/q, c>0",
            QCharlier => "0<q<1, a>0",
            DualBigQJacobi => "0<q<1, 0<a<1/q, 0<b<1/q, c<0",
            DualBigQLaguerre => "0<q<1, 0<a<1/q, b<0",
        }
    }

    /// Parameter substitution exchanging the basic and minus objects.
    pub fn involution_rule(self) -> Option<&'static str> {
        use FamilyId::*;
        match self {
            QMeixner => Some("(b,c) -> (-bc, 1/c)"),
            QCharlier => Some("a -> 1/a"),
            DualBigQJacobi => Some("(a,b,c) -> (c, ab/c, a)"),
            DualBigQLaguerre => Some("(a,b) -> (b,a)"),
            _ => None,
        }
    }

    /// Overall sign picked up by rates and eigenvalues when the basic
    /// formulas are evaluated at involuted parameters.
    fn involution_sign(self) -> f64 {
        match self {
            FamilyId::DualBigQJacobi | FamilyId::DualBigQLaguerre => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for FamilyId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FamilyId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        FamilyId::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown family `{s}`")))
    }
}

impl std::str::FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::parse(s).ok_or_else(|| Error::Invalid(format!("unknown family `{s}`")))
    }
}

/// User-facing description of a family instance, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: FamilyId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl FamilySpec {
    pub fn new(family: FamilyId) -> Self {
        FamilySpec {
            family,
            params: BTreeMap::new(),
            n: None,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn lattice(&self) -> LatticeKind {
        if self.family.is_finite() {
            LatticeKind::Finite(self.n.unwrap_or(0))
        } else {
            LatticeKind::SemiInfinite
        }
    }

    pub fn has_minus_set(&self) -> bool {
        self.family.has_minus_set()
    }

    pub fn validate(&self) -> Result<ValidatedFamily> {
        validate(self)
    }
}

/// Numeric parameter values; unused slots stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Coeffs {
    p: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    q: f64,
    n: usize,
}

impl Coeffs {
    fn qp(&self, e: i64) -> f64 {
        qpow(self.q, e)
    }

    fn ni(&self) -> i64 {
        self.n as i64
    }

    /// `dt = a+b+c-d-1` (Racah) or `abc/(dq)` (q-Racah).
    fn d_tilde(&self, id: FamilyId) -> f64 {
        match id {
            FamilyId::Racah => self.a + self.b + self.c - self.d - 1.0,
            FamilyId::QRacah => self.a * self.b * self.c / (self.d * self.q),
            _ => f64::NAN,
        }
    }
}

/// A family instance whose parameters passed validation.
///
/// `involuted` records that the involution has been applied an odd number of
/// times; parameters are stored as validated and mapped on demand, so a
/// double involution is an exact identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedFamily {
    spec: FamilySpec,
    coeffs: Coeffs,
    involuted: bool,
}

pub fn validate(spec: &FamilySpec) -> Result<ValidatedFamily> {
    use FamilyId::*;
    let id = spec.family;
    let get = |name: &str| -> Result<f64> {
        let v = *spec
            .params
            .get(name)
            .ok_or_else(|| Error::param(name, "required parameter is missing"))?;
        if !v.is_finite() {
            return Err(Error::param(name, "value must be finite"));
        }
        Ok(v)
    };
    let mut k = Coeffs::default();
    for &name in id.param_names() {
        match name {
            "N" => {
                let n = spec
                    .n
                    .ok_or_else(|| Error::param("N", "finite families need N >= 1"))?;
                if n == 0 || n > 2000 {
                    return Err(Error::param("N", "1 <= N <= 2000"));
                }
                k.n = n;
            }
            "q" => {
                k.q = get("q")?;
                if !(k.q > 0.0 && k.q < 1.0) {
                    return Err(Error::param("q", "0<q<1"));
                }
            }
            "p" => k.p = get("p")?,
            "a" => k.a = get("a")?,
            "b" => k.b = get("b")?,
            "c" => k.c = get("c")?,
            "d" => k.d = get("d")?,
            _ => unreachable!(),
        }
        check_range(id, name, &k)?;
    }
    if let Some(extra) = spec
        .params
        .keys()
        .find(|key| !id.param_names().contains(&key.as_str()) && key.as_str() != "c")
    {
        return Err(Error::param(extra, format!("not a parameter of {id}")));
    }
    match id {
        Racah => {
            let c = -(k.n as f64);
            if let Some(&given) = spec.params.get("c") {
                if given != c {
                    return Err(Error::param("c", "c = -N is derived from N"));
                }
            }
            k.c = c;
        }
        QRacah => {
            let c = qpow(k.q, -(k.n as i64));
            if let Some(&given) = spec.params.get("c") {
                if (given - c).abs() > 1e-12 * c {
                    return Err(Error::param("c", "c = q^-N is derived from N"));
                }
            }
            k.c = c;
        }
        QMeixner | DualBigQJacobi => {}
        _ => {
            if spec.params.contains_key("c") {
                return Err(Error::param("c", format!("not a parameter of {id}")));
            }
        }
    }
    if !id.is_finite() && spec.n.is_some() {
        return Err(Error::param("N", format!("{id} lives on a semi-infinite lattice")));
    }
    Ok(ValidatedFamily {
        spec: spec.clone(),
        coeffs: k,
        involuted: false,
    })
}

/// Checks the constraint attached to `name` once it (and everything listed
/// before it) has been read.
fn check_range(id: FamilyId, name: &str, k: &Coeffs) -> Result<()> {
    use FamilyId::*;
    let fail = |c: &str| Err(Error::param(name, c));
    let nf = k.n as f64;
    match (id, name) {
        (Krawtchouk, "p") if !(k.p > 0.0 && k.p < 1.0) => fail("0<p<1"),
        (Hahn | DualHahn, "a") if k.a <= 0.0 => fail("a>0"),
        (Hahn | DualHahn, "b") if k.b <= 0.0 => fail("b>0"),
        (Racah, "d") if k.d <= 0.0 => fail("d>0"),
        (Racah, "b") if !(k.b > 0.0 && k.b < 1.0 + k.d) => fail("0<b<1+d"),
        (Racah, "a") if k.a < k.b => fail("a>=b"),
        (Racah, "N") if k.a <= nf + k.d => Err(Error::param("a", "a>N+d")),
        (AffineQKrawtchouk, "p") if !(k.p > 0.0 && k.p < 1.0 / k.q) => fail("0<p<1/q"),
        (QKrawtchouk, "p") if k.p <= 0.0 => fail("p>0"),
        (QuantumQKrawtchouk, "N") if k.p <= k.qp(-k.ni()) => Err(Error::param("p", "p>q^-N")),
        (QHahn | DualQHahn, "a") if !(k.a > 0.0 && k.a < 1.0) => fail("0<a<1"),
        (QHahn | DualQHahn, "b") if !(k.b > 0.0 && k.b < 1.0) => fail("0<b<1"),
        (QRacah, "d") if !(k.d > 0.0 && k.d < 1.0) => fail("0<d<1"),
        (QRacah, "b") if !(k.b > k.q * k.d && k.b < 1.0) => fail("qd<b<1"),
        (QRacah, "a") if k.a > k.b => fail("a<=b"),
        (QRacah, "N") if !(k.a > 0.0 && k.a < k.qp(k.ni()) * k.d) => {
            Err(Error::param("a", "0<a<q^N d"))
        }
        (AlSalamCarlitzII, "a") if !(k.a > 0.0 && k.a < 1.0 / k.q) => fail("0<a<1/q"),
        (QMeixner, "b") if !(k.b > 0.0 && k.b < 1.0 / k.q) => fail("0<b<1/q"),
        (QMeixner, "c") if k.c <= 0.0 => fail("c>0"),
        (QCharlier, "a") if k.a <= 0.0 => fail("a>0"),
        (DualBigQJacobi | DualBigQLaguerre, "a") if !(k.a > 0.0 && k.a < 1.0 / k.q) => {
            fail("0<a<1/q")
        }
        (DualBigQJacobi, "b") if !(k.b > 0.0 && k.b < 1.0 / k.q) => fail("0<b<1/q"),
        (DualBigQJacobi, "c") if k.c >= 0.0 => fail("c<0"),
        (DualBigQLaguerre, "b") if k.b >= 0.0 => fail("b<0"),
        _ => Ok(()),
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn q_binom(n: usize, k: usize, q: f64) -> f64 {
    q_pochhammer(q, q, n) / (q_pochhammer(q, q, k) * q_pochhammer(q, q, n - k))
}

/// Accumulates a product as `sign * exp(log)`.
#[derive(Debug, Clone, Copy)]
struct LogProduct {
    log: f64,
    sign: f64,
}

impl LogProduct {
    fn one() -> Self {
        LogProduct { log: 0.0, sign: 1.0 }
    }

    fn mul(&mut self, f: f64) {
        self.log += f.abs().ln();
        self.sign *= f.signum();
    }

    fn div(&mut self, f: f64) {
        self.log -= f.abs().ln();
        self.sign *= f.signum();
    }

    fn mul_qpoch(&mut self, a: f64, q: f64, n: usize) {
        let mut aq = a;
        for _ in 0..n {
            self.mul(1.0 - aq);
            aq *= q;
        }
    }

    fn div_qpoch(&mut self, a: f64, q: f64, n: usize) {
        let mut aq = a;
        for _ in 0..n {
            self.div(1.0 - aq);
            aq *= q;
        }
    }

    fn mul_qpoch_inf(&mut self, a: f64, q: f64) {
        let (l, s) = ln_q_pochhammer_inf(a, q).expect("q validated in (0,1)");
        self.log += l;
        self.sign *= s;
    }

    fn div_qpoch_inf(&mut self, a: f64, q: f64) {
        let (l, s) = ln_q_pochhammer_inf(a, q).expect("q validated in (0,1)");
        self.log -= l;
        self.sign *= s;
    }

    fn value(self) -> f64 {
        self.sign * self.log.exp()
    }
}

// Closed forms of the basic objects, evaluated at given coefficients.

fn basic_rates(id: FamilyId, k: &Coeffs, x: usize) -> (f64, f64) {
    use FamilyId::*;
    let xf = x as f64;
    let xi = x as i64;
    let nf = k.n as f64;
    let (a, b, c, d, p) = (k.a, k.b, k.c, k.d, k.p);
    let qx = k.qp(xi);
    match id {
        Krawtchouk => (p * (nf - xf), (1.0 - p) * xf),
        Hahn => ((xf + a) * (nf - xf), xf * (b + nf - xf)),
        DualHahn => {
            if x == 0 {
                return (a * nf / (a + b), 0.0);
            }
            let s = a + b;
            let birth = (xf + a) * (xf + s - 1.0) * (nf - xf) / ((2.0 * xf - 1.0 + s) * (2.0 * xf + s));
            let death = xf * (xf + b - 1.0) * (xf + s + nf - 1.0) / ((2.0 * xf - 2.0 + s) * (2.0 * xf - 1.0 + s));
            (birth, death)
        }
        Racah => {
            let birth = -(xf + a) * (xf + b) * (xf + c) * (xf + d) / ((2.0 * xf + d) * (2.0 * xf + 1.0 + d));
            if x == 0 {
                return (birth, 0.0);
            }
            let death = -(xf + d - a) * (xf + d - b) * (xf + d - c) * xf / ((2.0 * xf - 1.0 + d) * (2.0 * xf + d));
            (birth, death)
        }
        AffineQKrawtchouk => {
            let top = k.qp(xi - k.ni());
            ((top - 1.0) * (1.0 - p * qx * k.q), p * top * (1.0 - qx))
        }
        QKrawtchouk => (k.qp(xi - k.ni()) - 1.0, p * (1.0 - qx)),
        QuantumQKrawtchouk => (
            qx * (k.qp(xi - k.ni()) - 1.0) / p,
            (1.0 - qx) * (1.0 - k.qp(xi - k.ni() - 1) / p),
        ),
        QHahn => (
            (1.0 - a * qx) * (k.qp(xi - k.ni()) - 1.0),
            a / k.q * (1.0 - qx) * (k.qp(xi - k.ni()) - b),
        ),
        DualQHahn => {
            let ab = a * b;
            let top = k.qp(xi - k.ni()) - 1.0;
            if x == 0 {
                return (top * (1.0 - a) / (1.0 - ab), 0.0);
            }
            let birth = top * (1.0 - a * qx) * (1.0 - ab * k.qp(xi - 1))
                / ((1.0 - ab * k.qp(2 * xi - 1)) * (1.0 - ab * k.qp(2 * xi)));
            let death = a * k.qp(xi - k.ni() - 1) * (1.0 - qx) * (1.0 - ab * k.qp(xi + k.ni() - 1))
                * (1.0 - b * k.qp(xi - 1))
                / ((1.0 - ab * k.qp(2 * xi - 2)) * (1.0 - ab * k.qp(2 * xi - 1)));
            (birth, death)
        }
        QRacah => {
            let dt = k.d_tilde(id);
            let birth = -(1.0 - a * qx) * (1.0 - b * qx) * (1.0 - k.qp(xi - k.ni())) * (1.0 - d * qx)
                / ((1.0 - d * k.qp(2 * xi)) * (1.0 - d * k.qp(2 * xi + 1)));
            if x == 0 {
                return (birth, 0.0);
            }
            let death = -dt * (1.0 - d * qx / a) * (1.0 - d * qx / b) * (1.0 - d * k.qp(xi + k.ni())) * (1.0 - qx)
                / ((1.0 - d * k.qp(2 * xi - 1)) * (1.0 - d * k.qp(2 * xi)));
            (birth, death)
        }
        AlSalamCarlitzII => (a * qx * qx * k.q, (1.0 - qx) * (1.0 - a * qx)),
        QMeixner => (c * qx * (1.0 - b * qx * k.q), (1.0 - qx) * (1.0 + b * c * qx)),
        QCharlier => (a * qx, 1.0 - qx),
        DualBigQJacobi => {
            let q = k.q;
            let ab = a * b;
            if x == 0 {
                let birth = -c * q * (1.0 - a * q) * (1.0 - ab / c * q) / (1.0 - ab * q * q);
                return (birth, 0.0);
            }
            let q1 = qx * q;
            let birth = -c * q1 * (1.0 - a * q1) * (1.0 - ab * q1) * (1.0 - ab / c * q1)
                / ((1.0 - ab * qx * q1) * (1.0 - ab * q1 * q1));
            let death = a * q * (1.0 - qx) * (1.0 - b * qx) * (1.0 - c * qx)
                / ((1.0 - ab * qx * qx) * (1.0 - ab * qx * q1));
            (birth, death)
        }
        DualBigQLaguerre => {
            let q1 = qx * k.q;
            (-b * q1 * (1.0 - a * q1), a * k.q * (1.0 - qx) * (1.0 - b * qx))
        }
    }
}

/// Printed rates of the companion chain built from the minus set.
fn minus_rates(id: FamilyId, k: &Coeffs, x: usize) -> (f64, f64) {
    use FamilyId::*;
    let (a, b, c, q) = (k.a, k.b, k.c, k.q);
    let qx = k.qp(x as i64);
    match id {
        QMeixner => (qx * (1.0 + b * c * qx * q) / c, (1.0 - qx) * (1.0 - b * qx)),
        QCharlier => (qx / a, 1.0 - qx),
        DualBigQJacobi => {
            let ab = a * b;
            if x == 0 {
                return (a * q * (1.0 - b * q) * (1.0 - c * q) / (1.0 - ab * q * q), 0.0);
            }
            let q1 = qx * q;
            let birth = a * q1 * (1.0 - b * q1) * (1.0 - ab * q1) * (1.0 - c * q1)
                / ((1.0 - ab * qx * q1) * (1.0 - ab * q1 * q1));
            let death = -c * q * (1.0 - qx) * (1.0 - a * qx) * (1.0 - ab / c * qx)
                / ((1.0 - ab * qx * qx) * (1.0 - ab * qx * q1));
            (birth, death)
        }
        DualBigQLaguerre => {
            let q1 = qx * q;
            (a * q1 * (1.0 - b * q1), -b * q * (1.0 - qx) * (1.0 - a * qx))
        }
        _ => unreachable!("single-set family"),
    }
}

/// `lim_{x->inf} B(x)+D(x)` for semi-infinite families.
fn basic_rate_limit(id: FamilyId, k: &Coeffs) -> f64 {
    use FamilyId::*;
    match id {
        AlSalamCarlitzII | QMeixner | QCharlier => 1.0,
        DualBigQJacobi | DualBigQLaguerre => k.a * k.q,
        _ => f64::NAN,
    }
}

fn minus_rate_limit(id: FamilyId, k: &Coeffs) -> f64 {
    use FamilyId::*;
    match id {
        QMeixner | QCharlier => 1.0,
        DualBigQJacobi => -k.c * k.q,
        DualBigQLaguerre => -k.b * k.q,
        _ => f64::NAN,
    }
}

fn basic_energy(id: FamilyId, k: &Coeffs, n: usize) -> f64 {
    use FamilyId::*;
    let nf = n as f64;
    let ni = n as i64;
    let qn = k.qp(ni);
    match id {
        Krawtchouk | DualHahn => nf,
        Hahn => nf * (nf + k.a + k.b - 1.0),
        Racah => nf * (nf + k.d_tilde(id)),
        AffineQKrawtchouk | DualQHahn => k.qp(-ni) - 1.0,
        QKrawtchouk => (k.qp(-ni) - 1.0) * (1.0 + k.p * qn),
        QuantumQKrawtchouk | AlSalamCarlitzII | QMeixner | QCharlier => 1.0 - qn,
        QHahn => (k.qp(-ni) - 1.0) * (1.0 - k.a * k.b * k.qp(ni - 1)),
        QRacah => (k.qp(-ni) - 1.0) * (1.0 - k.d_tilde(id) * qn),
        DualBigQJacobi | DualBigQLaguerre => k.a * k.q * (1.0 - qn),
    }
}

/// Second branch `E'(n)`: eigenvalues of the minus vectors in the basic chain.
fn second_energy(id: FamilyId, k: &Coeffs, n: usize) -> f64 {
    use FamilyId::*;
    let qn = k.qp(n as i64);
    match id {
        QMeixner => 1.0 + k.c * qn,
        QCharlier => 1.0 + k.a * qn,
        DualBigQJacobi => k.q * (k.a - k.c * qn),
        DualBigQLaguerre => k.q * (k.a - k.b * qn),
        _ => unreachable!("single-set family"),
    }
}

/// Eigenvalues of the companion (minus) chain: `E(n)` on the minus vectors
/// and `E^(+)'(n)` on the basic vectors.
fn minus_chain_energy(id: FamilyId, k: &Coeffs, set: SetTag, n: usize) -> f64 {
    use FamilyId::*;
    let qn = k.qp(n as i64);
    match (id, set) {
        (QMeixner | QCharlier, SetTag::Basic) => 1.0 - qn,
        (QMeixner, SetTag::Minus) => 1.0 + qn / k.c,
        (QCharlier, SetTag::Minus) => 1.0 + qn / k.a,
        (DualBigQJacobi, SetTag::Basic) => -k.c * k.q * (1.0 - qn),
        (DualBigQJacobi, SetTag::Minus) => k.q * (-k.c + k.a * qn),
        (DualBigQLaguerre, SetTag::Basic) => -k.b * k.q * (1.0 - qn),
        (DualBigQLaguerre, SetTag::Minus) => k.q * (-k.b + k.a * qn),
        _ => unreachable!("single-set family"),
    }
}

fn eta_value(id: FamilyId, k: &Coeffs, x: usize) -> f64 {
    use FamilyId::*;
    let xf = x as f64;
    let xi = x as i64;
    let inv = k.qp(-xi) - 1.0;
    match id {
        Krawtchouk | Hahn => xf,
        DualHahn => xf * (xf + k.a + k.b - 1.0),
        Racah => xf * (xf + k.d),
        AffineQKrawtchouk | QKrawtchouk | QuantumQKrawtchouk | QHahn | AlSalamCarlitzII
        | QMeixner | QCharlier | DualBigQLaguerre => inv,
        DualQHahn => inv * (1.0 - k.a * k.b * k.qp(xi - 1)),
        QRacah => inv * (1.0 - k.d * k.qp(xi)),
        DualBigQJacobi => inv * (1.0 - k.a * k.b * k.qp(xi + 1)),
    }
}

fn basic_weight_closed(id: FamilyId, k: &Coeffs, x: usize) -> f64 {
    use FamilyId::*;
    let xf = x as f64;
    let xi = x as i64;
    let n = k.n;
    let (a, b, c, d, p, q) = (k.a, k.b, k.c, k.d, k.p, k.q);
    let tri = k.qp(xi * (xi - 1) / 2);
    match id {
        Krawtchouk => binom(n, x) * (p / (1.0 - p)).powi(x as i32),
        Hahn => binom(n, x) * pochhammer(a, x) * pochhammer(b, n - x) / pochhammer(b, n),
        DualHahn => {
            let s = a + b;
            let ratio = if x == 0 {
                1.0
            } else {
                (2.0 * xf + s - 1.0) / (xf + s - 1.0)
            };
            binom(n, x) * pochhammer(a, x) / pochhammer(b, x) * ratio * pochhammer(s, n)
                / pochhammer(xf + s, n)
        }
        Racah => {
            let num = pochhammer(a, x) * pochhammer(b, x) * pochhammer(c, x) * pochhammer(d, x);
            let den = pochhammer(1.0 + d - a, x)
                * pochhammer(1.0 + d - b, x)
                * pochhammer(1.0 + d - c, x)
                * pochhammer(1.0, x);
            num / den * (2.0 * xf + d) / d
        }
        AffineQKrawtchouk => {
            q_binom(n, x, q) * q_pochhammer(p * q, q, x) / (p * q).powi(x as i32)
        }
        QKrawtchouk => q_binom(n, x, q) * p.powi(-(x as i32)) * k.qp(xi * (xi - 1) / 2 - xi * n as i64),
        QuantumQKrawtchouk => {
            q_binom(n, x, q) * p.powi(-(x as i32)) * k.qp(xi * (xi - 1 - n as i64))
                / q_pochhammer(k.qp(-(n as i64)) / p, q, x)
        }
        QHahn => {
            q_binom(n, x, q) * q_pochhammer(a, q, x) * q_pochhammer(b, q, n - x)
                / (q_pochhammer(b, q, n) * a.powi(x as i32))
        }
        DualQHahn => {
            let ab = a * b;
            let t = if x == 0 {
                1.0
            } else {
                q_pochhammer(ab, q, x - 1) * (1.0 - ab * k.qp(2 * xi - 1))
            };
            q_binom(n, x, q) * q_pochhammer(a, q, x) * t
                / (q_pochhammer_many(&[ab * k.qp(n as i64), b], q, x) * a.powi(x as i32))
        }
        QRacah => {
            let dt = k.d_tilde(id);
            let num = q_pochhammer_many(&[a, b, c, d], q, x);
            let den = q_pochhammer_many(&[d * q / a, d * q / b, d * q / c, q], q, x);
            num / den / dt.powi(x as i32) * (1.0 - d * k.qp(2 * xi)) / (1.0 - d)
        }
        AlSalamCarlitzII => {
            a.powi(x as i32) * k.qp(xi * xi) / q_pochhammer_many(&[q, a * q], q, x)
        }
        QMeixner => {
            q_pochhammer(b * q, q, x) / q_pochhammer_many(&[q, -b * c * q], q, x)
                * c.powi(x as i32)
                * tri
        }
        QCharlier => a.powi(x as i32) * tri / q_pochhammer(q, q, x),
        DualBigQJacobi => {
            let ab = a * b;
            let ratio = if x == 0 {
                1.0
            } else {
                (1.0 - ab * k.qp(2 * xi + 1)) / (1.0 - ab * k.qp(xi + 1))
            };
            tri / (-a / c).powi(x as i32) * q_pochhammer(ab / c * q, q, x) / q_pochhammer(c * q, q, x)
                * ratio
                * q_pochhammer_many(&[a * q, ab * q * q], q, x)
                / q_pochhammer_many(&[q, b * q], q, x)
        }
        DualBigQLaguerre => {
            tri / (-a / b).powi(x as i32) / q_pochhammer(b * q, q, x) * q_pochhammer(a * q, q, x)
                / q_pochhammer(q, q, x)
        }
    }
}

fn minus_weight_closed(id: FamilyId, k: &Coeffs, x: usize) -> f64 {
    use FamilyId::*;
    let xi = x as i64;
    let (a, b, c, q) = (k.a, k.b, k.c, k.q);
    let tri = k.qp(xi * (xi - 1) / 2);
    match id {
        QMeixner => {
            q_pochhammer(-b * c * q, q, x) / q_pochhammer_many(&[q, b * q], q, x)
                * c.powi(-(x as i32))
                * tri
        }
        QCharlier => a.powi(-(x as i32)) * tri / q_pochhammer(q, q, x),
        DualBigQJacobi => {
            let ab = a * b;
            let ratio = if x == 0 {
                1.0
            } else {
                (1.0 - ab * k.qp(2 * xi + 1)) / (1.0 - ab * k.qp(xi + 1))
            };
            tri / (-c / a).powi(x as i32) * q_pochhammer(b * q, q, x) / q_pochhammer(a * q, q, x)
                * ratio
                * q_pochhammer_many(&[ab * q * q, c * q], q, x)
                / q_pochhammer_many(&[q, ab / c * q], q, x)
        }
        DualBigQLaguerre => {
            tri / (-b / a).powi(x as i32) * q_pochhammer(b * q, q, x)
                / (q_pochhammer(a * q, q, x) * q_pochhammer(q, q, x))
        }
        _ => unreachable!("single-set family"),
    }
}

fn basic_norm(id: FamilyId, k: &Coeffs, n: usize) -> f64 {
    use FamilyId::*;
    let nf = n as f64;
    let ni = n as i64;
    let big_n = k.n;
    let big_ni = big_n as i64;
    let (a, b, c, d, p, q) = (k.a, k.b, k.c, k.d, k.p, k.q);
    match id {
        Krawtchouk => {
            binom(big_n, n) * (p / (1.0 - p)).powi(n as i32) * (1.0 - p).powi(big_n as i32)
        }
        Hahn => {
            let s = a + b;
            let ratio = if n == 0 {
                1.0
            } else {
                (2.0 * nf + s - 1.0) / (nf + s - 1.0)
            };
            binom(big_n, n) * pochhammer(a, n) / pochhammer(b, n) * ratio * pochhammer(s, big_n)
                / pochhammer(nf + s, big_n)
                * pochhammer(b, big_n)
                / pochhammer(s, big_n)
        }
        DualHahn => {
            binom(big_n, n) * pochhammer(a, n) * pochhammer(b, big_n - n) / pochhammer(b, big_n)
                * pochhammer(b, big_n)
                / pochhammer(a + b, big_n)
        }
        Racah => {
            let dt = k.d_tilde(id);
            let t = if n == 0 {
                1.0
            } else {
                (2.0 * nf + dt) * pochhammer(dt + 1.0, n - 1)
            };
            let head = pochhammer(a, n) * pochhammer(b, n) * pochhammer(c, n) * t
                / (pochhammer(1.0 + dt - a, n)
                    * pochhammer(1.0 + dt - b, n)
                    * pochhammer(1.0 + dt - c, n)
                    * pochhammer(1.0, n));
            let sign = if big_n % 2 == 0 { 1.0 } else { -1.0 };
            let tail = sign
                * pochhammer(1.0 + d - a, big_n)
                * pochhammer(1.0 + d - b, big_n)
                * pochhammer(1.0 + d - c, big_n)
                / (pochhammer(dt + 1.0, big_n) * pochhammer(d + 1.0, 2 * big_n));
            head * tail
        }
        AffineQKrawtchouk => {
            q_binom(big_n, n, q) * q_pochhammer(p * q, q, n) / (p * q).powi(n as i32)
                * (p * q).powi(big_n as i32)
        }
        QKrawtchouk => {
            let head = q_binom(big_n, n, q) * q_pochhammer(-p, q, n)
                / (q_pochhammer(-p * k.qp(big_ni + 1), q, n)
                    * p.powi(n as i32)
                    * k.qp(ni * (ni + 1) / 2))
                * (1.0 + p * k.qp(2 * ni))
                / (1.0 + p);
            head * p.powi(big_n as i32) * k.qp(big_ni * (big_ni + 1) / 2)
                / q_pochhammer(-p * q, q, big_n)
        }
        QuantumQKrawtchouk => {
            q_binom(big_n, n, q) * p.powi(-(n as i32)) * k.qp(-big_ni * ni)
                / q_pochhammer(k.qp(-ni) / p, q, n)
                * q_pochhammer(k.qp(-big_ni) / p, q, big_n)
        }
        QHahn => {
            let ab = a * b;
            let t = if n == 0 {
                1.0
            } else {
                q_pochhammer(ab, q, n - 1) * (1.0 - ab * k.qp(2 * ni - 1))
            };
            q_binom(big_n, n, q) * q_pochhammer(a, q, n) * t
                / (q_pochhammer_many(&[ab * k.qp(big_ni), b], q, n) * a.powi(n as i32))
                * q_pochhammer(b, q, big_n)
                * a.powi(big_n as i32)
                / q_pochhammer(ab, q, big_n)
        }
        DualQHahn => {
            q_binom(big_n, n, q) * q_pochhammer(a, q, n) * q_pochhammer(b, q, big_n - n)
                / (q_pochhammer(b, q, big_n) * a.powi(n as i32))
                * q_pochhammer(b, q, big_n)
                * a.powi(big_n as i32)
                / q_pochhammer(a * b, q, big_n)
        }
        QRacah => {
            let dt = k.d_tilde(id);
            let t = if n == 0 {
                1.0
            } else {
                q_pochhammer(dt * q, q, n - 1) * (1.0 - dt * k.qp(2 * ni))
            };
            let head = q_pochhammer_many(&[a, b, c], q, n) * t
                / (q_pochhammer_many(&[dt * q / a, dt * q / b, dt * q / c, q], q, n)
                    * d.powi(n as i32));
            let sign = if big_n % 2 == 0 { 1.0 } else { -1.0 };
            let tail = sign
                * q_pochhammer_many(&[d * q / a, d * q / b, d * q / c], q, big_n)
                * dt.powi(big_n as i32)
                * k.qp(big_ni * (big_ni + 1) / 2)
                / (q_pochhammer(dt * q, q, big_n) * q_pochhammer(d * q, q, 2 * big_n));
            head * tail
        }
        AlSalamCarlitzII => {
            let mut lp = LogProduct::one();
            lp.log += nf * (a * q).ln();
            lp.div_qpoch(q, q, n);
            lp.mul_qpoch_inf(a * q, q);
            lp.value()
        }
        QMeixner => {
            let mut lp = LogProduct::one();
            lp.log += nf * q.ln();
            lp.mul_qpoch(b * q, q, n);
            lp.div_qpoch(q, q, n);
            lp.div_qpoch(-q / c, q, n);
            lp.mul_qpoch_inf(-b * c * q, q);
            lp.div_qpoch_inf(-c, q);
            lp.value()
        }
        QCharlier => {
            let mut lp = LogProduct::one();
            lp.log += nf * q.ln();
            lp.div_qpoch(q, q, n);
            lp.div_qpoch(-q / a, q, n);
            lp.div_qpoch_inf(-a, q);
            lp.value()
        }
        DualBigQJacobi => {
            let mut lp = LogProduct::one();
            lp.log += nf * q.ln();
            lp.mul_qpoch(a * q, q, n);
            lp.mul_qpoch(a * b / c * q, q, n);
            lp.div_qpoch(q, q, n);
            lp.div_qpoch(a / c * q, q, n);
            lp.mul_qpoch_inf(b * q, q);
            lp.mul_qpoch_inf(c * q, q);
            lp.div_qpoch_inf(a * b * q * q, q);
            lp.div_qpoch_inf(c / a, q);
            lp.value()
        }
        DualBigQLaguerre => {
            let mut lp = LogProduct::one();
            lp.log += nf * q.ln();
            lp.mul_qpoch(a * q, q, n);
            lp.div_qpoch(q, q, n);
            lp.div_qpoch(a / b * q, q, n);
            lp.mul_qpoch_inf(b * q, q);
            lp.div_qpoch_inf(b / a, q);
            lp.value()
        }
    }
}

fn minus_norm(id: FamilyId, k: &Coeffs, n: usize) -> f64 {
    use FamilyId::*;
    let nf = n as f64;
    let (a, b, c, q) = (k.a, k.b, k.c, k.q);
    match id {
        QMeixner | QCharlier => basic_norm(id, &involute(id, k), n),
        DualBigQJacobi => {
            let mut lp = LogProduct::one();
            lp.log += nf * q.ln();
            lp.mul_qpoch(b * q, q, n);
            lp.mul_qpoch(c * q, q, n);
            lp.div_qpoch(q, q, n);
            lp.div_qpoch(c / a * q, q, n);
            lp.mul_qpoch_inf(a * q, q);
            lp.mul_qpoch_inf(a * b / c * q, q);
            lp.div_qpoch_inf(a * b * q * q, q);
            lp.div_qpoch_inf(a / c, q);
            lp.value()
        }
        DualBigQLaguerre => {
            let mut lp = LogProduct::one();
            lp.log += nf * q.ln();
            lp.mul_qpoch(b * q, q, n);
            lp.div_qpoch(q, q, n);
            lp.div_qpoch(b / a * q, q, n);
            lp.mul_qpoch_inf(a * q, q);
            lp.div_qpoch_inf(a / b, q);
            lp.value()
        }
        _ => unreachable!("single-set family"),
    }
}

fn basic_polynomial(id: FamilyId, k: &Coeffs, n: usize, x: usize) -> Result<f64> {
    use FamilyId::*;
    let nf = n as f64;
    let xf = x as f64;
    let ni = n as i64;
    let xi = x as i64;
    let big_nf = k.n as f64;
    let big_ni = k.n as i64;
    let (a, b, d, p, q) = (k.a, k.b, k.d, k.p, k.q);
    let ordinary = |numerator: Vec<f64>, denominator: Vec<f64>, argument: f64| {
        hyper_terminating(&SeriesSpec {
            numerator,
            denominator,
            argument,
            order: n,
        })
    };
    let basic = |numerator: Vec<QParam>, denominator: Vec<QParam>, argument: QParam| {
        q_hyper_terminating(&QSeriesSpec {
            numerator,
            denominator,
            argument,
            q,
            order: n,
        })
    };
    let qn = QParam::pow(-ni);
    let qx = QParam::pow(-xi);
    let value = match id {
        Krawtchouk => ordinary(vec![-nf, -xf], vec![-big_nf], 1.0 / p),
        Hahn => ordinary(vec![-nf, nf + a + b - 1.0, -xf], vec![a, -big_nf], 1.0),
        DualHahn => ordinary(vec![-nf, xf + a + b - 1.0, -xf], vec![a, -big_nf], 1.0),
        Racah => {
            let dt = k.d_tilde(id);
            ordinary(vec![-nf, nf + dt, -xf, xf + d], vec![a, b, k.c], 1.0)
        }
        AffineQKrawtchouk => basic(
            vec![qn, qx, QParam::new(0.0, 0)],
            vec![QParam::new(p, 1), QParam::pow(-big_ni)],
            QParam::pow(1),
        ),
        QKrawtchouk => basic(
            vec![qn, qx, QParam::new(-p, ni)],
            vec![QParam::pow(-big_ni), QParam::new(0.0, 0)],
            QParam::pow(1),
        ),
        QuantumQKrawtchouk => basic(vec![qn, qx], vec![QParam::pow(-big_ni)], QParam::new(p, ni + 1)),
        QHahn => basic(
            vec![qn, QParam::new(a * b, ni - 1), qx],
            vec![QParam::new(a, 0), QParam::pow(-big_ni)],
            QParam::pow(1),
        ),
        DualQHahn => basic(
            vec![qn, QParam::new(a * b, xi - 1), qx],
            vec![QParam::new(a, 0), QParam::pow(-big_ni)],
            QParam::pow(1),
        ),
        QRacah => basic(
            vec![qn, QParam::new(a * b / d, ni - big_ni - 1), qx, QParam::new(d, xi)],
            vec![QParam::new(a, 0), QParam::new(b, 0), QParam::pow(-big_ni)],
            QParam::pow(1),
        ),
        AlSalamCarlitzII => basic(vec![qn, qx], vec![], QParam::new(1.0 / a, ni)),
        QMeixner => basic(vec![qn, qx], vec![QParam::new(b, 1)], QParam::new(-1.0 / k.c, ni + 1)),
        QCharlier => basic(vec![qn, qx], vec![QParam::new(0.0, 0)], QParam::new(-1.0 / a, ni + 1)),
        DualBigQJacobi => {
            let c = k.c;
            basic(
                vec![qn, QParam::new(a * b, xi + 1), qx],
                vec![QParam::new(a, 1), QParam::new(a * b / c, 1)],
                QParam::new(a / c, ni + 1),
            )
        }
        DualBigQLaguerre => basic(vec![qn, qx], vec![QParam::new(a, 1)], QParam::new(a / b, ni + 1)),
    }?;
    Ok(value)
}

fn minus_polynomial(id: FamilyId, k: &Coeffs, n: usize, x: usize) -> Result<f64> {
    use FamilyId::*;
    let ni = n as i64;
    let (a, b, c, q) = (k.a, k.b, k.c, k.q);
    let basic = |numerator: Vec<QParam>, denominator: Vec<QParam>, argument: QParam| {
        q_hyper_terminating(&QSeriesSpec {
            numerator,
            denominator,
            argument,
            q,
            order: n,
        })
    };
    let qn = QParam::pow(-ni);
    let qx = QParam::pow(-(x as i64));
    let value = match id {
        QMeixner => basic(vec![qn, qx], vec![QParam::new(-b * c, 1)], QParam::new(-c, ni + 1)),
        QCharlier => basic(vec![qn, qx], vec![QParam::new(0.0, 0)], QParam::new(-a, ni + 1)),
        DualBigQJacobi => basic(
            vec![qn, QParam::new(a * b, x as i64 + 1), qx],
            vec![QParam::new(b, 1), QParam::new(c, 1)],
            QParam::new(c / a, ni + 1),
        ),
        DualBigQLaguerre => basic(vec![qn, qx], vec![QParam::new(b, 1)], QParam::new(b / a, ni + 1)),
        _ => unreachable!("single-set family"),
    }?;
    Ok(value)
}

fn involute(id: FamilyId, k: &Coeffs) -> Coeffs {
    use FamilyId::*;
    let mut m = *k;
    match id {
        QMeixner => {
            m.b = -k.b * k.c;
            m.c = 1.0 / k.c;
        }
        QCharlier => m.a = 1.0 / k.a,
        DualBigQJacobi => {
            m.a = k.c;
            m.b = k.a * k.b / k.c;
            m.c = k.a;
        }
        DualBigQLaguerre => {
            m.a = k.b;
            m.b = k.a;
        }
        _ => unreachable!("single-set family"),
    }
    m
}

impl ValidatedFamily {
    pub fn id(&self) -> FamilyId {
        self.spec.family
    }

    /// The specification as validated (before any involution).
    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn is_involuted(&self) -> bool {
        self.involuted
    }

    pub fn lattice(&self) -> LatticeKind {
        self.spec.lattice()
    }

    pub fn has_minus_set(&self) -> bool {
        self.id().has_minus_set()
    }

    /// Number of lattice points for finite families.
    pub fn size(&self) -> Option<usize> {
        match self.lattice() {
            LatticeKind::Finite(n) => Some(n),
            LatticeKind::SemiInfinite => None,
        }
    }

    /// Effective parameter values, after the involution when applied.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let k = self.effective();
        let mut out = BTreeMap::new();
        for &name in self.id().param_names() {
            let v = match name {
                "p" => k.p,
                "a" => k.a,
                "b" => k.b,
                "c" => k.c,
                "d" => k.d,
                "q" => k.q,
                "N" => continue,
                _ => unreachable!(),
            };
            out.insert(name.to_string(), v);
        }
        if matches!(self.id(), FamilyId::Racah | FamilyId::QRacah) {
            out.insert("c".to_string(), k.c);
        }
        out
    }

    /// The q-Meixner instance `b = 0, c = a` that this q-Charlier family is the
    /// restriction of. It sits on the boundary of the q-Meixner domain, so it
    /// cannot be reached through `validate`.
    pub fn q_meixner_boundary(&self) -> Result<ValidatedFamily> {
        if self.id() != FamilyId::QCharlier {
            return Err(Error::Invalid(format!("{} is not q-Charlier", self.id())));
        }
        let a = self.coeffs.a;
        let spec = FamilySpec::new(FamilyId::QMeixner)
            .with("q", self.coeffs.q)
            .with("b", 0.0)
            .with("c", a);
        Ok(ValidatedFamily {
            spec,
            coeffs: Coeffs {
                q: self.coeffs.q,
                b: 0.0,
                c: a,
                ..Coeffs::default()
            },
            involuted: self.involuted,
        })
    }

    /// Returns the family with the basic and minus objects exchanged.
    pub fn involution(&self) -> Result<ValidatedFamily> {
        if !self.has_minus_set() {
            return Err(Error::InvolutionUndefined(self.id().to_string()));
        }
        Ok(ValidatedFamily {
            spec: self.spec.clone(),
            coeffs: self.coeffs,
            involuted: !self.involuted,
        })
    }

    fn effective(&self) -> Coeffs {
        if self.involuted {
            involute(self.id(), &self.coeffs)
        } else {
            self.coeffs
        }
    }

    fn check_set(&self, set: SetTag) -> Result<()> {
        if set == SetTag::Minus && !self.has_minus_set() {
            return Err(Error::InvolutionUndefined(self.id().to_string()));
        }
        Ok(())
    }

    fn check_x(&self, x: usize) -> Result<()> {
        match self.size() {
            Some(n) if x > n => Err(Error::Invalid(format!("x={x} outside lattice 0..={n}"))),
            _ => Ok(()),
        }
    }

    fn sign(&self) -> f64 {
        if self.involuted {
            self.id().involution_sign()
        } else {
            1.0
        }
    }

    /// Birth and death rates `(B(x), D(x))` of the basic chain, or of the
    /// companion chain built from the minus set.
    pub fn rates(&self, set: SetTag, x: usize) -> Result<(f64, f64)> {
        self.check_set(set)?;
        self.check_x(x)?;
        Ok(self.rates_unchecked(set, x))
    }

    pub(crate) fn rates_unchecked(&self, set: SetTag, x: usize) -> (f64, f64) {
        let id = self.id();
        let k = self.effective();
        let s = self.sign();
        let (b, d) = match set {
            SetTag::Basic => basic_rates(id, &k, x),
            SetTag::Minus => minus_rates(id, &k, x),
        };
        (s * b, s * d)
    }

    /// Birth and death vectors over `0..=upto`.
    pub fn rate_vectors(&self, set: SetTag, upto: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_set(set)?;
        self.check_x(upto)?;
        Ok((0..=upto).map(|x| self.rates_unchecked(set, x)).unzip())
    }

    /// `lim B(x)+D(x)` as `x -> inf`; `None` on finite lattices.
    pub fn rate_limit(&self, set: SetTag) -> Result<Option<f64>> {
        self.check_set(set)?;
        if self.id().is_finite() {
            return Ok(None);
        }
        let k = self.effective();
        let v = match set {
            SetTag::Basic => basic_rate_limit(self.id(), &k),
            SetTag::Minus => minus_rate_limit(self.id(), &k),
        };
        Ok(Some(self.sign() * v))
    }

    /// `E(n)` (Basic) or the second branch `E'(n)` (Minus) of this chain.
    pub fn eigenvalue(&self, set: SetTag, n: usize) -> Result<f64> {
        self.check_set(set)?;
        self.check_x(n)?;
        let k = self.effective();
        let v = match set {
            SetTag::Basic => basic_energy(self.id(), &k, n),
            SetTag::Minus => second_energy(self.id(), &k, n),
        };
        Ok(self.sign() * v)
    }

    /// Eigenvalues of the companion chain in their printed form: `E(n)` on
    /// the minus vectors (`set = Basic`) and `E^(+)'(n)` on the basic vectors
    /// (`set = Minus`). Evaluated at the validated parameters, ignoring any
    /// involution, so it can be compared with `involution()?.eigenvalue(..)`.
    pub fn companion_eigenvalue(&self, set: SetTag, n: usize) -> Result<f64> {
        if !self.has_minus_set() {
            return Err(Error::InvolutionUndefined(self.id().to_string()));
        }
        Ok(minus_chain_energy(self.id(), &self.coeffs, set, n))
    }

    /// Sinusoidal coordinate `eta(x)`.
    pub fn eta(&self, x: usize) -> Result<f64> {
        self.check_x(x)?;
        Ok(eta_value(self.id(), &self.effective(), x))
    }

    /// Squared ground-state weight `phi0(x)^2`, built as the running product
    /// of `B(y)/D(y+1)`.
    pub fn weight(&self, set: SetTag, x: usize) -> Result<f64> {
        self.check_set(set)?;
        self.check_x(x)?;
        Ok(self.weights_unchecked(set, x)[x])
    }

    pub(crate) fn weights_unchecked(&self, set: SetTag, upto: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(upto + 1);
        let mut w = 1.0;
        out.push(w);
        let mut prev = self.rates_unchecked(set, 0);
        for x in 1..=upto {
            let cur = self.rates_unchecked(set, x);
            w *= prev.0 / cur.1;
            out.push(w);
            prev = cur;
        }
        out
    }

    /// Signed ground-state amplitude: `phi0(x) > 0` for the basic set and
    /// `(-1)^x phi0^(-)(x) > 0` for the minus set.
    pub fn signed_ground(&self, set: SetTag, x: usize) -> Result<f64> {
        let w = self.weight(set, x)?;
        let sign = if set == SetTag::Minus && x % 2 == 1 { -1.0 } else { 1.0 };
        Ok(sign * w.sqrt())
    }

    /// The printed closed form of `phi0(x)^2`, independent of the rates.
    pub fn weight_closed_form(&self, set: SetTag, x: usize) -> Result<f64> {
        self.check_set(set)?;
        self.check_x(x)?;
        let k = self.effective();
        Ok(match set {
            SetTag::Basic => basic_weight_closed(self.id(), &k, x),
            SetTag::Minus => minus_weight_closed(self.id(), &k, x),
        })
    }

    /// Normalisation constant `d_n^2` (or `d_n^(-)2`).
    pub fn norm_const(&self, set: SetTag, n: usize) -> Result<f64> {
        self.check_set(set)?;
        self.check_x(n)?;
        let k = self.effective();
        Ok(match set {
            SetTag::Basic => basic_norm(self.id(), &k, n),
            SetTag::Minus => minus_norm(self.id(), &k, n),
        })
    }

    /// Eigenpolynomial `P_n(eta(x))` from its hypergeometric series.
    pub fn polynomial(&self, set: SetTag, n: usize, x: usize) -> Result<f64> {
        self.check_set(set)?;
        self.check_x(n)?;
        self.check_x(x)?;
        let k = self.effective();
        match set {
            SetTag::Basic => basic_polynomial(self.id(), &k, n, x),
            SetTag::Minus => minus_polynomial(self.id(), &k, n, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kraw(p: f64, n: usize) -> ValidatedFamily {
        FamilySpec::new(FamilyId::Krawtchouk)
            .with("p", p)
            .with_n(n)
            .validate()
            .unwrap()
    }

    pub(crate) fn samples() -> Vec<ValidatedFamily> {
        use FamilyId::*;
        let specs = vec![
            FamilySpec::new(Krawtchouk).with("p", 0.3).with_n(6),
            FamilySpec::new(Hahn).with("a", 1.5).with("b", 2.5).with_n(6),
            FamilySpec::new(DualHahn).with("a", 1.5).with("b", 0.7).with_n(6),
            FamilySpec::new(Racah).with("a", 9.0).with("b", 0.8).with("d", 0.6).with_n(6),
            FamilySpec::new(AffineQKrawtchouk).with("q", 0.6).with("p", 0.8).with_n(6),
            FamilySpec::new(QKrawtchouk).with("q", 0.6).with("p", 0.8).with_n(6),
            FamilySpec::new(QuantumQKrawtchouk).with("q", 0.8).with("p", 5.0).with_n(6),
            FamilySpec::new(QHahn).with("q", 0.7).with("a", 0.4).with("b", 0.6).with_n(6),
            FamilySpec::new(DualQHahn).with("q", 0.7).with("a", 0.4).with("b", 0.6).with_n(6),
            FamilySpec::new(QRacah)
                .with("q", 0.8)
                .with("a", 0.1)
                .with("b", 0.6)
                .with("d", 0.5)
                .with_n(6),
        ];
        specs.into_iter().map(|s| s.validate().unwrap()).collect()
    }

    #[test]
    fn closed_enumeration() {
        assert_eq!(FamilyId::ALL.len(), 15);
        let finite = FamilyId::ALL.iter().filter(|f| f.is_finite()).count();
        assert_eq!(finite, 10);
        let two_set: Vec<_> = FamilyId::ALL.iter().filter(|f| f.has_minus_set()).collect();
        assert_eq!(two_set.len(), 4);
        for f in FamilyId::ALL {
            assert_eq!(FamilyId::parse(f.name()), Some(f));
        }
        assert_eq!(FamilyId::parse("q-charlier"), Some(FamilyId::QCharlier));
        assert_eq!(FamilyId::parse("al-salam-carlitz-2"), Some(FamilyId::AlSalamCarlitzII));
    }

    #[test]
    fn validation_examples() {
        assert!(FamilySpec::new(FamilyId::Krawtchouk)
            .with("p", 0.5)
            .with_n(2)
            .validate()
            .is_ok());
        let err = FamilySpec::new(FamilyId::Krawtchouk)
            .with("p", 1.0)
            .validate()
            .unwrap_err();
        assert!(matches!(err, Error::Param { ref param, .. } if param == "p"));
        let err = FamilySpec::new(FamilyId::QRacah)
            .with("q", 0.5)
            .with("d", 0.5)
            .with("b", 0.25)
            .with("a", 0.01)
            .with_n(3)
            .validate()
            .unwrap_err();
        assert!(matches!(err, Error::Param { ref param, .. } if param == "b"));
        let err = FamilySpec::new(FamilyId::Racah)
            .with("a", 3.0)
            .with("b", 0.5)
            .with("d", 1.0)
            .with_n(4)
            .validate()
            .unwrap_err();
        assert!(matches!(err, Error::Param { ref param, .. } if param == "a"));
        let err = FamilySpec::new(FamilyId::QCharlier)
            .with("q", 0.5)
            .with("a", 1.0)
            .with_n(3)
            .validate()
            .unwrap_err();
        assert!(matches!(err, Error::Param { ref param, .. } if param == "N"));
    }

    #[test]
    fn krawtchouk_small_values() {
        let f = kraw(0.5, 2);
        assert_eq!(f.rates(SetTag::Basic, 0).unwrap(), (1.0, 0.0));
        assert_eq!(f.rates(SetTag::Basic, 2).unwrap(), (0.0, 1.0));
        let w: Vec<f64> = (0..3).map(|x| f.weight(SetTag::Basic, x).unwrap()).collect();
        assert_eq!(w, vec![1.0, 2.0, 1.0]);
        assert_eq!(f.norm_const(SetTag::Basic, 0).unwrap(), 0.25);
        assert_eq!(f.norm_const(SetTag::Basic, 1).unwrap(), 0.5);
        let p1: Vec<f64> = (0..3).map(|x| f.polynomial(SetTag::Basic, 1, x).unwrap()).collect();
        assert_eq!(p1, vec![1.0, 0.0, -1.0]);
        assert!(f.rates(SetTag::Minus, 0).is_err());
        assert!(f.polynomial(SetTag::Basic, 3, 0).is_err());
    }

    #[test]
    fn printed_eigenvalues_and_eta() {
        let hahn = FamilySpec::new(FamilyId::Hahn)
            .with("a", 1.5)
            .with("b", 2.0)
            .with_n(5)
            .validate()
            .unwrap();
        assert_eq!(hahn.eigenvalue(SetTag::Basic, 3).unwrap(), 3.0 * (3.0 + 2.5));
        let qm = FamilySpec::new(FamilyId::QMeixner)
            .with("q", 0.5)
            .with("b", 0.5)
            .with("c", 2.0)
            .validate()
            .unwrap();
        assert_eq!(qm.eigenvalue(SetTag::Minus, 0).unwrap(), 3.0);
        let dh = FamilySpec::new(FamilyId::DualHahn)
            .with("a", 1.5)
            .with("b", 2.0)
            .with_n(5)
            .validate()
            .unwrap();
        assert_eq!(dh.eta(3).unwrap(), 3.0 * (3.0 + 2.5));
        let qr = FamilySpec::new(FamilyId::QRacah)
            .with("q", 0.5)
            .with("d", 0.5)
            .with("b", 0.4)
            .with("a", 0.02)
            .with_n(3)
            .validate()
            .unwrap();
        let x = 2;
        let expect = (0.5f64.powi(-2) - 1.0) * (1.0 - 0.5 * 0.25);
        assert!((qr.eta(x).unwrap() - expect).abs() < 1e-15);
        for f in samples() {
            assert_eq!(f.eta(0).unwrap(), 0.0);
            assert_eq!(f.eigenvalue(SetTag::Basic, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn rates_nonnegative_with_reflecting_ends() {
        for f in samples() {
            let n = f.size().unwrap();
            let (b, d) = f.rate_vectors(SetTag::Basic, n).unwrap();
            assert_eq!(d[0], 0.0, "{}", f.id());
            assert_eq!(b[n], 0.0, "{}", f.id());
            for x in 0..n {
                assert!(b[x] > 0.0, "{} B({x})={}", f.id(), b[x]);
            }
            for x in 1..=n {
                assert!(d[x] > 0.0, "{} D({x})={}", f.id(), d[x]);
            }
        }
    }

    #[test]
    fn weights_match_closed_forms() {
        for f in samples() {
            for x in 0..=f.size().unwrap() {
                let prod = f.weight(SetTag::Basic, x).unwrap();
                let closed = f.weight_closed_form(SetTag::Basic, x).unwrap();
                assert!(
                    ((prod - closed) / closed).abs() < 1e-11,
                    "{} x={x}: {prod} vs {closed}",
                    f.id()
                );
            }
        }
    }

    #[test]
    fn d0_normalises_weights_on_finite_lattices() {
        for f in samples() {
            let n = f.size().unwrap();
            let total: f64 = (0..=n).map(|x| f.weight(SetTag::Basic, x).unwrap()).sum();
            let d0 = f.norm_const(SetTag::Basic, 0).unwrap();
            assert!((total * d0 - 1.0).abs() < 1e-12, "{}: {}", f.id(), total * d0);
        }
    }

    #[test]
    fn involution_is_an_involution() {
        let qc = FamilySpec::new(FamilyId::QCharlier)
            .with("q", 0.5)
            .with("a", 0.8)
            .validate()
            .unwrap();
        let inv = qc.involution().unwrap();
        assert_eq!(inv.params()["a"], 1.0 / 0.8);
        assert_eq!(inv.involution().unwrap(), qc);
        let dbql = FamilySpec::new(FamilyId::DualBigQLaguerre)
            .with("q", 0.5)
            .with("a", 0.7)
            .with("b", -0.4)
            .validate()
            .unwrap();
        let inv = dbql.involution().unwrap();
        assert_eq!(inv.params()["a"], -0.4);
        assert_eq!(inv.params()["b"], 0.7);
        assert!(matches!(
            kraw(0.5, 3).involution(),
            Err(Error::InvolutionUndefined(_))
        ));
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = FamilySpec::new(FamilyId::Hahn)
            .with("a", 1.0)
            .with("b", 2.0)
            .with_n(4);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"Hahn","params":{"a":1.0,"b":2.0},"N":4}"#);
        let back: FamilySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let loose: FamilySpec =
            serde_json::from_str(r#"{"family":"q-charlier","params":{"a":0.8,"q":0.5}}"#).unwrap();
        assert_eq!(loose.family, FamilyId::QCharlier);
    }
}
