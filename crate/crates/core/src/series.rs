//! Float series with controlled remainders: `Σ_{k≥a} k^{-s} q^k`, plus the
//! root-bracketing helpers used by the tilt solver.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A sum together with a bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub error: f64,
}

impl Bounded {
    pub const ZERO: Bounded = Bounded {
        value: 0.0,
        error: 0.0,
    };

    pub fn scale(self, c: f64) -> Bounded {
        Bounded {
            value: self.value * c,
            error: self.error * c.abs(),
        }
    }

    pub fn add(self, o: Bounded) -> Bounded {
        Bounded {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

/// Number of terms summed explicitly before switching to the Euler–Maclaurin
/// remainder.
const DIRECT_TERMS: usize = 10_000;

/// `q` values this close above 1 are treated as exactly 1.
const ONE_SLACK: f64 = 1e-12;

/// `Σ_{k≥start} k^{-s} q^k` for `start ≥ 1`, `q > 0`.
pub fn power_geometric_sum(s: f64, q: f64, start: usize) -> Result<Bounded> {
    assert!(start >= 1, "power_geometric_sum needs start >= 1");
    if q <= 0.0 {
        return Ok(Bounded::ZERO);
    }
    if q > 1.0 + ONE_SLACK {
        return Err(Error::Divergent(format!(
            "sum of k^-{s} q^k with q = {q} > 1"
        )));
    }
    let lambda = if q >= 1.0 { 0.0 } else { -q.ln() };
    if lambda == 0.0 && s <= 1.0 {
        return Err(Error::Divergent(format!(
            "sum of k^-{s} diverges (exponent must exceed 1)"
        )));
    }
    if lambda > 0.0 && (s == 0.0 || s == -1.0 || s == -2.0) {
        return Ok(geometric_closed_form(-s as u32, q, start));
    }

    let term = |k: f64| (-s * k.ln() - lambda * k).exp();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    let end = start + DIRECT_TERMS;
    for k in start..end {
        let t = term(k as f64);
        let y = t - comp;
        let z = sum + y;
        comp = (z - sum) - y;
        sum = z;
        if lambda > 0.0 && k > start + 8 {
            // Term ratios beyond k are at most r.
            let r = (-lambda).exp() * if s < 0.0 { (1.0 + 1.0 / k as f64).powf(-s) } else { 1.0 };
            if r < 1.0 {
                let rem = t * r / (1.0 - r);
                if rem <= 1e-17 * sum || rem == 0.0 {
                    return Ok(Bounded {
                        value: sum,
                        error: rem + 1e-16 * sum,
                    });
                }
            }
        }
    }
    let rem = euler_maclaurin_tail(s, lambda, end as f64)?;
    Ok(Bounded {
        value: sum + rem.value,
        error: rem.error + 2e-16 * (sum + rem.value),
    })
}

/// `Σ_{k≥a} k^j q^k` for `j ≤ 2`, `0 < q < 1`.
fn geometric_closed_form(j: u32, q: f64, a: usize) -> Bounded {
    let a_f = a as f64;
    let om = 1.0 - q;
    // Σ_{m≥0} m^i q^m
    let m0 = 1.0 / om;
    let m1 = q / (om * om);
    let m2 = q * (1.0 + q) / (om * om * om);
    let base = q.powf(a_f);
    let v = match j {
        0 => m0,
        1 => a_f * m0 + m1,
        _ => a_f * a_f * m0 + 2.0 * a_f * m1 + m2,
    };
    let value = base * v;
    Bounded {
        value,
        error: 1e-15 * value,
    }
}

/// `Σ_{k≥N} k^{-s} e^{-λk}` by Euler–Maclaurin at the (large) point `N`.
fn euler_maclaurin_tail(s: f64, lambda: f64, n: f64) -> Result<Bounded> {
    // B_{2j} / (2j)!
    const COEF: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let integral = power_exp_integral(s, lambda, n)?;
    let f = |m: usize| derivative(s, lambda, n, m);
    let mut value = integral.value + 0.5 * f(0);
    let mut last = 0.0;
    for (j, c) in COEF.iter().enumerate().take(4) {
        last = c * f(2 * j + 1);
        value -= last;
    }
    let next = (COEF[4] * f(9)).abs();
    Ok(Bounded {
        value,
        error: integral.error + next + 1e-3 * last.abs().min(next.max(1e-300)),
    })
}

/// `d^m/dx^m [x^{-s} e^{-λx}]` at `x`.
fn derivative(s: f64, lambda: f64, x: f64, m: usize) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut rising = 1.0; // (s)_i
    for i in 0..=m {
        if i > 0 {
            binom = binom * (m + 1 - i) as f64 / i as f64;
            rising *= s + (i - 1) as f64;
        }
        let sign_i = if i % 2 == 0 { 1.0 } else { -1.0 };
        let lam_pow = if m - i == 0 {
            1.0
        } else {
            (-lambda).powi((m - i) as i32)
        };
        if lam_pow == 0.0 {
            continue;
        }
        total += binom * sign_i * rising * x.powf(-s - i as f64) * lam_pow;
    }
    total * (-lambda * x).exp()
}

/// `∫_N^∞ x^{-s} e^{-λx} dx`.
fn power_exp_integral(s: f64, lambda: f64, n: f64) -> Result<Bounded> {
    if lambda == 0.0 {
        let v = n.powf(1.0 - s) / (s - 1.0);
        return Ok(Bounded {
            value: v,
            error: 1e-15 * v,
        });
    }
    // x = N e^v turns the integrand into exp((1-s)v - λN(e^v - 1)), which
    // is log-concave with at most one interior maximum.
    let a = lambda * n;
    let log_h = |v: f64| (1.0 - s) * v - a * v.exp_m1();
    let v_star = if s < 1.0 {
        ((1.0 - s) / a).ln().max(0.0)
    } else {
        0.0
    };
    let peak = log_h(v_star);
    let mut end = v_star + 1.0;
    while log_h(end) > peak - 80.0 {
        end = v_star + 2.0 * (end - v_star);
        if end > 1e4 {
            return Err(Error::Divergent("integral bracket did not close".into()));
        }
    }
    let h = |v: f64| (log_h(v) - peak).exp();
    let mut panels = 8usize;
    let mut prev = composite_gauss(&h, 0.0, end, panels);
    loop {
        panels *= 2;
        let cur = composite_gauss(&h, 0.0, end, panels);
        let diff = (cur - prev).abs();
        if diff <= 1e-15 * cur.abs() || panels >= 1 << 14 {
            let scale = n.powf(1.0 - s) * (peak - a).exp();
            return Ok(Bounded {
                value: cur * scale,
                error: (diff + 1e-15 * cur.abs()) * scale,
            });
        }
        prev = cur;
    }
}

fn gauss_legendre_20() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(20))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                let wi = 2.0 / ((1.0 - z * z) * pp * pp);
                x[i] = -z;
                x[n - 1 - i] = z;
                w[i] = wi;
                w[n - 1 - i] = wi;
                break;
            }
        }
    }
    (x, w)
}

fn composite_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre_20();
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            acc += wi * f(mid + 0.5 * width * xi);
        }
        total += acc * 0.5 * width;
    }
    total
}

/// Bisection for a sign change of `f` on `[lo, hi]` with `f(lo) < 0 ≤ f(hi)`,
/// to relative width `rel_tol`.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= rel_tol * hi.abs() {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZETA3: f64 = 1.202_056_903_159_594_2;
    const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

    #[test]
    fn zeta_values() {
        let z3 = power_geometric_sum(3.0, 1.0, 1).unwrap();
        assert!((z3.value - ZETA3).abs() < 1e-14, "{z3:?}");
        assert!(z3.error < 1e-14);
        let z2 = power_geometric_sum(2.0, 1.0, 1).unwrap();
        assert!((z2.value - ZETA2).abs() < 1e-13, "{z2:?}");
        let tail = power_geometric_sum(4.0, 1.0, 5).unwrap();
        let direct: f64 = (1..5).map(|k| (k as f64).powi(-4)).sum();
        let z4 = std::f64::consts::PI.powi(4) / 90.0;
        assert!((tail.value - (z4 - direct)).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        assert!(power_geometric_sum(1.0, 1.0, 1).is_err());
        assert!(power_geometric_sum(3.0, 1.01, 1).is_err());
    }

    #[test]
    fn geometric_forms() {
        let q: f64 = 0.7;
        for j in 0..3u32 {
            let exact = geometric_closed_form(j, q, 3).value;
            let direct: f64 = (3..2000).map(|k| (k as f64).powi(j as i32) * q.powi(k)).sum();
            assert!((exact - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn polylog_near_one() {
        // Li_3(q) for q close to 1 exercises the quadrature remainder.
        let q: f64 = 1.0 - 1e-6;
        let v = power_geometric_sum(3.0, q, 1).unwrap();
        // Li_3(1 - e) ≈ ζ(3) - e ζ(2) + O(e^2 log e)
        let approx = ZETA3 - 1e-6 * ZETA2;
        assert!((v.value - approx).abs() < 1e-10, "{} vs {}", v.value, approx);
        let slow = power_geometric_sum(1.5, 0.999, 1).unwrap();
        let brute: f64 = (1..200_000).map(|k| (k as f64).powf(-1.5) * 0.999f64.powi(k)).sum();
        assert!((slow.value - brute).abs() < 1e-12, "{} vs {}", slow.value, brute);
    }

    #[test]
    fn quadrature_rule_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }
}
