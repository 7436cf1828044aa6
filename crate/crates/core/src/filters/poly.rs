//! Real univariate polynomials on a closed interval: evaluation, real-root
//! isolation and exact extrema via critical points.

/// Coefficients in ascending powers.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn degree(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0.0)
}

const BISECT_TOL: f64 = 1e-12;
const BISECT_MAX: usize = 200;

/// Real roots in `[lo, hi]`, ascending. Roots of the derivative split the
/// interval into monotone pieces; each sign change is bisected.
pub fn real_roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let Some(deg) = degree(coeffs) else {
        return Vec::new();
    };
    let p = &coeffs[..=deg];
    match deg {
        0 => Vec::new(),
        1 => {
            let r = -p[0] / p[1];
            if (lo..=hi).contains(&r) {
                vec![r]
            } else {
                Vec::new()
            }
        }
        _ => {
            let mut knots = vec![lo];
            knots.extend(real_roots_in(&derivative(p), lo, hi));
            knots.push(hi);
            let mut roots = Vec::new();
            for w in knots.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (eval(p, a), eval(p, b));
                if fa == 0.0 {
                    push_unique(&mut roots, a);
                } else if fa * fb < 0.0 {
                    push_unique(&mut roots, bisect(p, a, b, fa));
                }
            }
            if eval(p, hi) == 0.0 {
                push_unique(&mut roots, hi);
            }
            roots
        }
    }
}

fn push_unique(roots: &mut Vec<f64>, r: f64) {
    if roots.last().is_none_or(|&last| r > last) {
        roots.push(r);
    }
}

fn bisect(p: &[f64], mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    let scale = 1.0_f64.max(a.abs()).max(b.abs());
    for _ in 0..BISECT_MAX {
        let m = 0.5 * (a + b);
        if (b - a) <= BISECT_TOL * scale || m == a || m == b {
            return m;
        }
        let fm = eval(p, m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// `max_{λ∈[lo,hi]} |p(λ)|` and the smallest maximiser.
pub fn max_abs_on(coeffs: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut candidates = vec![lo];
    candidates.extend(real_roots_in(&derivative(coeffs), lo, hi));
    candidates.push(hi);
    let mut best = (eval(coeffs, lo).abs(), lo);
    for &x in &candidates[1..] {
        let v = eval(coeffs, x).abs();
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner() {
        assert_eq!(eval(&[1.0, 2.0], 1.0), 3.0);
        assert_eq!(eval(&[1.0, 2.0], -1.0), -1.0);
        assert!((eval(&[0.5, -0.3, 0.1], 2.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cubic_roots() {
        // (x - 0.5)(x + 0.25)(x - 0.9)
        let p = [0.1125, 0.1, -1.15, 1.0];
        let r = real_roots_in(&p, -1.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-0.25, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        }
    }

    #[test]
    fn extrema_of_quadratic() {
        let (m, at) = max_abs_on(&[-0.5, 0.0, 1.0], -1.0, 1.0);
        assert!((m - 0.5).abs() < 1e-15);
        assert_eq!(at, -1.0);
        let (m, _) = max_abs_on(&[3.0], -1.0, 1.0);
        assert_eq!(m, 3.0);
    }
}
