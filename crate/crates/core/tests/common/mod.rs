#![allow(dead_code)]

use bdspectral::{FamilyId, FamilySpec, ValidatedFamily};

pub fn spec(id: FamilyId, n: Option<usize>, params: &[(&str, f64)]) -> FamilySpec {
    let mut s = FamilySpec::new(id);
    for &(k, v) in params {
        s = s.with(k, v);
    }
    s.n = n;
    s
}

/// One representative instance per family.
pub fn representatives(n: usize) -> Vec<ValidatedFamily> {
    use FamilyId::*;
    let nf = n as f64;
    let specs = vec![
        spec(Krawtchouk, Some(n), &[("p", 0.3)]),
        spec(Hahn, Some(n), &[("a", 1.5), ("b", 2.5)]),
        spec(DualHahn, Some(n), &[("a", 1.5), ("b", 0.7)]),
        spec(Racah, Some(n), &[("a", nf + 3.0), ("b", 0.8), ("d", 0.6)]),
        spec(AffineQKrawtchouk, Some(n), &[("q", 0.7), ("p", 0.8)]),
        spec(QKrawtchouk, Some(n), &[("q", 0.7), ("p", 0.8)]),
        spec(QuantumQKrawtchouk, Some(n), &[("q", 0.8), ("p", 1.5 * 0.8f64.powi(-(n as i32)))]),
        spec(QHahn, Some(n), &[("q", 0.7), ("a", 0.4), ("b", 0.6)]),
        spec(DualQHahn, Some(n), &[("q", 0.7), ("a", 0.4), ("b", 0.6)]),
        spec(
            QRacah,
            Some(n),
            &[("q", 0.8), ("d", 0.5), ("b", 0.6), ("a", 0.3 * 0.8f64.powi(n as i32))],
        ),
        spec(AlSalamCarlitzII, None, &[("q", 0.5), ("a", 0.8)]),
        spec(QMeixner, None, &[("q", 0.5), ("b", 0.6), ("c", 1.5)]),
        spec(QCharlier, None, &[("q", 0.5), ("a", 0.8)]),
        spec(DualBigQJacobi, None, &[("q", 0.5), ("a", 0.7), ("b", 0.6), ("c", -0.8)]),
        spec(DualBigQLaguerre, None, &[("q", 0.5), ("a", 0.7), ("b", -0.6)]),
    ];
    specs.into_iter().map(|s| s.validate().expect("valid representative")).collect()
}

/// Three parameter points for every finite family. The quantum
/// q-Krawtchouk points keep `q` near one: at small `q` its stationary
/// distribution spans dozens of decades and the spectral kernel loses the
/// corresponding digits.
pub fn finite_grid(n: usize) -> Vec<ValidatedFamily> {
    use FamilyId::*;
    let nf = n as f64;
    let qn = |q: f64| q.powi(n as i32);
    let specs = vec![
        spec(Krawtchouk, Some(n), &[("p", 0.3)]),
        spec(Krawtchouk, Some(n), &[("p", 0.5)]),
        spec(Krawtchouk, Some(n), &[("p", 0.8)]),
        spec(Hahn, Some(n), &[("a", 1.5), ("b", 2.5)]),
        spec(Hahn, Some(n), &[("a", 0.5), ("b", 0.5)]),
        spec(Hahn, Some(n), &[("a", 3.0), ("b", 1.2)]),
        spec(DualHahn, Some(n), &[("a", 1.5), ("b", 0.7)]),
        spec(DualHahn, Some(n), &[("a", 0.5), ("b", 2.0)]),
        spec(DualHahn, Some(n), &[("a", 4.0), ("b", 0.3)]),
        spec(Racah, Some(n), &[("a", nf + 3.0), ("b", 0.8), ("d", 0.6)]),
        spec(Racah, Some(n), &[("a", nf + 1.5), ("b", 1.2), ("d", 0.5)]),
        spec(Racah, Some(n), &[("a", 2.0 * nf + 4.0), ("b", 0.3), ("d", 1.0)]),
        spec(AffineQKrawtchouk, Some(n), &[("q", 0.7), ("p", 0.8)]),
        spec(AffineQKrawtchouk, Some(n), &[("q", 0.5), ("p", 1.5)]),
        spec(AffineQKrawtchouk, Some(n), &[("q", 0.9), ("p", 0.3)]),
        spec(QKrawtchouk, Some(n), &[("q", 0.7), ("p", 0.8)]),
        spec(QKrawtchouk, Some(n), &[("q", 0.5), ("p", 2.0)]),
        spec(QKrawtchouk, Some(n), &[("q", 0.9), ("p", 0.3)]),
        spec(QuantumQKrawtchouk, Some(n), &[("q", 0.9), ("p", 1.5 / qn(0.9))]),
        spec(QuantumQKrawtchouk, Some(n), &[("q", 0.95), ("p", 1.2 / qn(0.95))]),
        spec(QuantumQKrawtchouk, Some(n), &[("q", 0.9), ("p", 3.0 / qn(0.9))]),
        spec(QHahn, Some(n), &[("q", 0.7), ("a", 0.4), ("b", 0.6)]),
        spec(QHahn, Some(n), &[("q", 0.5), ("a", 0.2), ("b", 0.9)]),
        spec(QHahn, Some(n), &[("q", 0.9), ("a", 0.8), ("b", 0.3)]),
        spec(DualQHahn, Some(n), &[("q", 0.7), ("a", 0.4), ("b", 0.6)]),
        spec(DualQHahn, Some(n), &[("q", 0.5), ("a", 0.2), ("b", 0.9)]),
        spec(DualQHahn, Some(n), &[("q", 0.9), ("a", 0.8), ("b", 0.3)]),
        spec(QRacah, Some(n), &[("q", 0.8), ("d", 0.5), ("b", 0.6), ("a", 0.3 * qn(0.8))]),
        spec(QRacah, Some(n), &[("q", 0.5), ("d", 0.8), ("b", 0.7), ("a", 0.4 * qn(0.5))]),
        spec(QRacah, Some(n), &[("q", 0.9), ("d", 0.3), ("b", 0.5), ("a", 0.15 * qn(0.9))]),
    ];
    specs.into_iter().map(|s| s.validate().expect("valid grid point")).collect()
}
