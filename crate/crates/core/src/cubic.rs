//! Real roots of polynomials up to degree three.

use std::f64::consts::PI;

/// Real roots of `a c³ + b c² + d c + e`, ascending, with leading
/// coefficients that vanish relative to the rest treated as zero.
pub fn real_roots(a: f64, b: f64, d: f64, e: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(d.abs()).max(e.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = if a.abs() <= 1e-14 * scale {
        quadratic_roots(b, d, e)
    } else {
        monic_cubic_roots(b / a, d / a, e / a)
    };
    for r in roots.iter_mut() {
        *r = polish(*r, a, b, d, e);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    roots
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    // Avoid cancellation in the smaller root.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

fn monic_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    // Depressed form u³ + p u + q with c = u - b/3.
    let shift = b / 3.0;
    let p = c - b * shift;
    let q = 2.0 * shift * shift * shift - shift * c + d;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if disc > 0.0 {
        let s = disc.sqrt();
        let a = -half_q + if half_q >= 0.0 { -s } else { s };
        let u1 = a.cbrt();
        let u = if u1 == 0.0 { 0.0 } else { u1 - third_p / u1 };
        vec![u - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        // Three real roots (two may coincide): trigonometric form.
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

fn polish(mut r: f64, a: f64, b: f64, d: f64, e: f64) -> f64 {
    let eval = |x: f64| ((a * x + b) * x + d) * x + e;
    for _ in 0..3 {
        let f = eval(r);
        let df = (3.0 * a * r + 2.0 * b) * r + d;
        if df == 0.0 || f == 0.0 {
            break;
        }
        let next = r - f / df;
        if eval(next).abs() < f.abs() {
            r = next;
        } else {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn expand(r: [f64; 3], lead: f64) -> (f64, f64, f64, f64) {
        let [x, y, z] = r;
        (
            lead,
            -lead * (x + y + z),
            lead * (x * y + y * z + x * z),
            -lead * x * y * z,
        )
    }

    #[test]
    fn three_distinct_roots() {
        let (a, b, c, d) = expand([-0.5, 0.25, 0.9], 4.0);
        let r = real_roots(a, b, c, d);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-0.5, 0.25, 0.9]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn single_real_root() {
        // (c - 2)(c² + 1)
        let r = real_roots(1.0, -2.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_orders() {
        let r = real_roots(0.0, 1.0, 0.0, -4.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-15 && (r[1] - 2.0).abs() < 1e-15);
        assert_eq!(real_roots(0.0, 0.0, 2.0, -1.0), vec![0.5]);
        assert!(real_roots(0.0, 1.0, 0.0, 1.0).is_empty());
        assert!(real_roots(0.0, 0.0, 0.0, 0.0).is_empty());
    }

    #[test]
    fn double_root() {
        // (c - 1)² (c + 2)
        let r = real_roots(1.0, 0.0, -3.0, 2.0);
        assert!(r.iter().any(|x| (x - 1.0).abs() < 1e-7));
        assert!(r.iter().any(|x| (x + 2.0).abs() < 1e-12));
    }

    #[test]
    fn tiny_leading_coefficient() {
        // Nearly linear: 1e-6 c³ + c - 0.3
        let r = real_roots(1e-6, 0.0, 1.0, -0.3);
        assert_eq!(r.len(), 1);
        let x = r[0];
        assert!((1e-6 * x * x * x + x - 0.3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn recovers_planted_roots(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, lead in 0.1f64..10.0) {
            let (a, b, c, d) = expand([x, y, z], lead);
            let roots = real_roots(a, b, c, d);
            for want in [x, y, z] {
                let best = roots.iter().map(|r| (r - want).abs()).fold(f64::INFINITY, f64::min);
                // Clustered roots are only determined to ~sqrt(eps).
                let gap = [x, y, z].iter().filter(|&&o| o != want).map(|o| (o - want).abs()).fold(1.0f64, f64::min);
                prop_assert!(best < 1e-9 / gap.max(1e-6) + 1e-12 || best < 1e-6);
            }
        }
    }
}
