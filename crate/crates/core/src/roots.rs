//! Real polynomial roots and bracketed scalar root finding.

use std::f64::consts::PI;

/// Roots closer than this are reported once.
pub const ROOT_MERGE_TOL: f64 = 1e-9;

/// Real roots of `c3 x³ + c2 x² + c1 x + c0`, in increasing order.
///
/// Complex roots are omitted and roots closer than [`ROOT_MERGE_TOL`] are
/// collapsed into one. Each root is polished by a few Newton steps on the
/// original coefficients. If `c3 == 0` the lower-degree polynomial is solved.
pub fn cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    if c3 == 0.0 {
        return quadratic_roots(c2, c1, c0);
    }
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;

    // x = t - b/3 turns the monic cubic into t³ + pt + q.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    let scale = half_q * half_q + third_p.abs().powi(3);

    let mut raw = Vec::with_capacity(3);
    if p == 0.0 && q == 0.0 {
        raw.push(-shift);
    } else if disc <= 1e-14 * scale {
        // Three real roots (possibly repeated): trigonometric form.
        let m = 2.0 * (-third_p).max(0.0).sqrt();
        if m == 0.0 {
            raw.push(-(q.cbrt()) - shift);
        } else {
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            for k in 0..3 {
                raw.push(m * (phi - 2.0 * PI * k as f64 / 3.0).cos() - shift);
            }
        }
    } else {
        let sq = disc.sqrt();
        let u = (-half_q + sq).cbrt();
        let v = (-half_q - sq).cbrt();
        raw.push(u + v - shift);
    }

    let poly = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let dpoly = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    let mut roots: Vec<f64> = raw.into_iter().map(|x| newton_polish(x, poly, dpoly)).collect();
    roots.sort_by(f64::total_cmp);
    collapse(roots)
}

/// Real roots of `a x² + b x + c` in increasing order.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // Avoid cancellation: compute the larger-magnitude root first.
    let s = disc.sqrt();
    let big = -0.5 * (b + b.signum() * s);
    let mut roots = if big == 0.0 {
        vec![0.0]
    } else {
        vec![big / a, c / big]
    };
    roots.sort_by(f64::total_cmp);
    collapse(roots)
}

fn newton_polish(mut x: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    let mut fx = f(x);
    for _ in 0..60 {
        if fx == 0.0 {
            break;
        }
        let slope = df(x);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = x - fx / slope;
        let f_next = f(next);
        if !(f_next.abs() < fx.abs()) {
            break;
        }
        x = next;
        fx = f_next;
    }
    x
}

fn collapse(roots: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(roots.len());
    let mut count = 0usize;
    for r in roots {
        match out.last_mut() {
            Some(last) if (r - *last).abs() < ROOT_MERGE_TOL => {
                count += 1;
                *last += (r - *last) / count as f64;
            }
            _ => {
                out.push(r);
                count = 1;
            }
        }
    }
    out
}

/// Brent's method on a sign-changing bracket `[a, b]`.
///
/// Returns `None` when `f(a)` and `f(b)` share a sign.
pub fn brent(f: impl Fn(f64) -> f64, a: f64, b: f64, xtol: f64, max_iter: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let step = (hi - lo) / cells as f64;
        for k in 0..cells {
            let (mut a, mut b) = (lo + k as f64 * step, lo + (k + 1) as f64 * step);
            let (fa, fb) = (f(a), f(b));
            if fa.signum() == fb.signum() {
                continue;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m).signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }

    #[test]
    fn fishtail_at_elliptic_energy_has_double_root() {
        // -X³ - 6X² = -X²(X + 6)
        let r = cubic_roots(-1.0, -6.0, 0.0, 0.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 6.0).abs() < 1e-12);
        assert!(r[1].abs() < 1e-12);
    }

    #[test]
    fn odd_cubic() {
        let r = cubic_roots(1.0, 0.0, -1.0, 0.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn fishtail_interior_energy_matches_bisection() {
        let e = -16.0;
        let poly = |x: f64| -x * x * x - 6.0 * x * x + e + 32.0;
        let oracle = bisect_sign_changes(poly, -6.0, 4.0, 1000);
        let r = cubic_roots(-1.0, -6.0, 0.0, e + 32.0);
        assert_eq!(r.len(), 3);
        assert_eq!(oracle.len(), 3);
        for (got, want) in r.iter().zip(&oracle) {
            assert!(*got > -6.0 && *got < 4.0);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(poly(*got).abs() <= 1e-9 * got.abs().powi(3).max(1.0));
        }
    }

    #[test]
    fn one_real_root() {
        // x³ + x + 1 has a single real root near -0.6823
        let r = cubic_roots(1.0, 0.0, 1.0, 1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 0.682_327_803_828_019_3).abs() < 1e-14);
    }

    #[test]
    fn degenerate_leading_coefficient() {
        assert_eq!(cubic_roots(0.0, 1.0, 0.0, -4.0), vec![-2.0, 2.0]);
        assert!(cubic_roots(0.0, 1.0, 0.0, 4.0).is_empty());
    }

    #[test]
    fn brent_finds_cos_root() {
        let r = brent(f64::cos, 1.0, 2.0, 1e-14, 100).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
        assert!(brent(f64::cos, 2.0, 3.0, 1e-14, 100).is_none());
    }

    #[test]
    fn triple_root_collapses() {
        // (x - 1)³
        let r = cubic_roots(1.0, -3.0, 3.0, -1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-5);
    }
}
