mod common;

use bdspectral::{SetTag, ValidatedFamily};
use common::representatives;

const WINDOW: usize = 120;

fn top(f: &ValidatedFamily) -> usize {
    f.size().unwrap_or(WINDOW)
}

fn sets(f: &ValidatedFamily) -> Vec<SetTag> {
    if f.has_minus_set() {
        vec![SetTag::Basic, SetTag::Minus]
    } else {
        vec![SetTag::Basic]
    }
}

/// Normalised vector `d_n phi0(x) P_n(x)`, with the alternating sign on the
/// minus set.
fn normalised(f: &ValidatedFamily, set: SetTag, n: usize) -> Vec<f64> {
    let dn = f.norm_const(set, n).unwrap().sqrt();
    (0..=top(f))
        .map(|x| {
            let g = f.signed_ground(set, x).unwrap();
            if g == 0.0 {
                0.0
            } else {
                dn * g * f.polynomial(set, n, x).unwrap()
            }
        })
        .collect()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[test]
fn running_product_weights_agree_with_closed_forms() {
    for f in representatives(8) {
        for set in sets(&f) {
            for x in 0..=top(&f).min(40) {
                let prod = f.weight(set, x).unwrap();
                let closed = f.weight_closed_form(set, x).unwrap();
                if closed.abs() < 1e-280 {
                    assert!(prod.abs() < 1e-270);
                    continue;
                }
                let rel = ((prod - closed) / closed).abs();
                assert!(rel < 1e-10, "{} {set:?} x={x}: {prod:e} vs {closed:e}", f.id());
            }
        }
    }
}

#[test]
fn polynomials_solve_the_difference_equation() {
    for f in representatives(8) {
        for set in sets(&f) {
            let e_of = |n| match set {
                SetTag::Basic => f.eigenvalue(SetTag::Basic, n).unwrap(),
                SetTag::Minus => f.companion_eigenvalue(SetTag::Basic, n).unwrap(),
            };
            for n in 0..6 {
                let p = |x| f.polynomial(set, n, x).unwrap();
                for x in 0..top(&f).min(30) {
                    let (b, d) = f.rates(set, x).unwrap();
                    let lhs = b * (p(x) - p(x + 1)) + if x > 0 { d * (p(x) - p(x - 1)) } else { 0.0 };
                    let rhs = e_of(n) * p(x);
                    let scale = 1.0 + rhs.abs() + b.abs() * p(x + 1).abs();
                    assert!(
                        (lhs - rhs).abs() < 1e-9 * scale,
                        "{} {set:?} n={n} x={x}: {lhs} vs {rhs}",
                        f.id()
                    );
                }
            }
        }
    }
}

#[test]
fn eigenvectors_are_orthonormal() {
    for f in representatives(8) {
        let modes = f.size().map_or(12, |n| n + 1);
        let vecs: Vec<(SetTag, usize, Vec<f64>)> = sets(&f)
            .into_iter()
            .flat_map(|s| (0..modes).map(move |n| (s, n)))
            .map(|(s, n)| (s, n, normalised(&f, s, n)))
            .collect();
        for (s1, n1, u) in &vecs {
            for (s2, n2, v) in &vecs {
                let expect = if (s1, n1) == (s2, n2) { 1.0 } else { 0.0 };
                let got = dot(u, v);
                assert!(
                    (got - expect).abs() < 1e-9,
                    "{} <{s1:?}{n1},{s2:?}{n2}> = {got}",
                    f.id()
                );
            }
        }
    }
}

#[test]
fn minus_vectors_have_second_branch_eigenvalues() {
    for f in representatives(8).into_iter().filter(|f| f.has_minus_set()) {
        for n in 0..6 {
            let v = normalised(&f, SetTag::Minus, n);
            let e = f.eigenvalue(SetTag::Minus, n).unwrap();
            for x in 0..40 {
                let (b, d) = f.rates(SetTag::Basic, x).unwrap();
                let (b_prev, _) = if x > 0 { f.rates(SetTag::Basic, x - 1).unwrap() } else { (0.0, 0.0) };
                let (_, d_next) = f.rates(SetTag::Basic, x + 1).unwrap();
                let mut hv = (b + d) * v[x] - (b * d_next).sqrt() * v[x + 1];
                if x > 0 {
                    hv -= (b_prev * d).sqrt() * v[x - 1];
                }
                assert!((hv - e * v[x]).abs() < 1e-10, "{} n={n} x={x}", f.id());
            }
        }
    }
}

#[test]
fn involution_exchanges_basic_and_minus_objects() {
    for f in representatives(8).into_iter().filter(|f| f.has_minus_set()) {
        let g = f.involution().unwrap();
        assert_eq!(g.involution().unwrap(), f);
        for x in 0..20 {
            let (b1, d1) = f.rates(SetTag::Minus, x).unwrap();
            let (b2, d2) = g.rates(SetTag::Basic, x).unwrap();
            assert!((b1 - b2).abs() < 1e-13 && (d1 - d2).abs() < 1e-13, "{} x={x}", f.id());
        }
        for n in 0..10 {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
            assert!(close(
                g.eigenvalue(SetTag::Basic, n).unwrap(),
                f.companion_eigenvalue(SetTag::Basic, n).unwrap()
            ));
            assert!(close(
                g.eigenvalue(SetTag::Minus, n).unwrap(),
                f.companion_eigenvalue(SetTag::Minus, n).unwrap()
            ));
            assert!(close(
                g.norm_const(SetTag::Basic, n).unwrap(),
                f.norm_const(SetTag::Minus, n).unwrap()
            ));
            assert!(close(
                g.norm_const(SetTag::Minus, n).unwrap(),
                f.norm_const(SetTag::Basic, n).unwrap()
            ));
            for x in 0..10 {
                assert!(close(
                    g.polynomial(SetTag::Basic, n, x).unwrap(),
                    f.polynomial(SetTag::Minus, n, x).unwrap()
                ));
            }
        }
    }
}

#[test]
fn normalisation_sums_to_one_including_minus_weight() {
    for f in representatives(8) {
        let total: f64 = (0..=top(&f)).map(|x| f.weight(SetTag::Basic, x).unwrap()).sum();
        let d0 = f.norm_const(SetTag::Basic, 0).unwrap();
        assert!((d0 * total - 1.0).abs() < 1e-11, "{}: {}", f.id(), d0 * total);
    }
}
