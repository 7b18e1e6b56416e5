//! Laws encoding `𝓛_A(τ)`.
//!
//! * `0 ∈ A`: the A-nodes of a GW(p) tree form a GW tree with offspring law
//!   `p^A`, whose generating function is `g^A = a / (1 − b)` with
//!   `a(z) = Σ_{k∈A} p(k) z^k` and `b(z) = Σ_{k∉A} p(k) z^{k−1}`.
//! * `0 ∉ A`: the A-nodes form a forest of `N` GW trees with offspring law
//!   `p^A = law of Σ_{k≤Z'} N_k`, `Z' ~ (X | X ∈ A)`; `N` counts the A-marked
//!   leaves of a GW(p̃) tree, where `p̃` moves the mass of `A` onto 0.

use serde::Serialize;

use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::scalar::{to_json_value, Scalar};

/// Work budget (inner-loop iterations) for the triangular recursions.
const WORK_LIMIT: f64 = 4e9;

/// A truncated pmf on `0..=max` with its missing mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<T> {
    pub masses: Vec<T>,
    pub tail_mass: T,
}

impl<T: Scalar> Pmf<T> {
    pub fn from_masses(masses: Vec<T>) -> Self {
        let total = crate::scalar::sum(&masses);
        let mut tail_mass = T::one() - total;
        if !T::is_exact() && tail_mass < T::zero() {
            tail_mass = T::zero();
        }
        Pmf { masses, tail_mass }
    }

    pub fn get(&self, k: usize) -> T {
        self.masses.get(k).cloned().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Mean of the head (a lower bound for the true mean).
    pub fn head_mean(&self) -> T {
        self.masses
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, m)| acc + T::from_usize(k) * m.clone())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "masses": self.masses.iter().map(to_json_value).collect::<Vec<_>>(),
            "tail_mass": to_json_value(&self.tail_mass),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `A = ℕ`: plain total progeny.
    All,
    ZeroInA,
    ZeroNotInA,
}

impl Regime {
    pub fn of(a: &DegreeSet) -> Regime {
        if a.is_all() {
            Regime::All
        } else if a.contains_zero() {
            Regime::ZeroInA
        } else {
            Regime::ZeroNotInA
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedLawBundle<T: Scalar> {
    pub regime: Regime,
    /// `p^A` (the offspring law of the projected tree or forest).
    pub pa: Pmf<T>,
    /// `p̃`, only when `0 ∉ A`.
    pub tilde: Option<OffspringLaw<T>>,
    /// Law of `L`, only when `0 ∉ A`.
    pub leaf: Option<Pmf<T>>,
    /// Law of `N`, only when `0 ∉ A`.
    pub n_law: Option<Pmf<T>>,
}

impl<T: Scalar> DerivedLawBundle<T> {
    pub fn new(law: &OffspringLaw<T>, a: &DegreeSet, max_n: usize) -> Result<Self> {
        match Regime::of(a) {
            Regime::All => Ok(DerivedLawBundle {
                regime: Regime::All,
                pa: Pmf::from_masses(law.pmf_prefix(max_n)),
                tilde: None,
                leaf: None,
                n_law: None,
            }),
            Regime::ZeroInA => Ok(DerivedLawBundle {
                regime: Regime::ZeroInA,
                pa: derive_zero_in(law, a, max_n)?,
                tilde: None,
                leaf: None,
                n_law: None,
            }),
            Regime::ZeroNotInA => derive_zero_not_in(law, a, max_n),
        }
    }

    /// Law of the number of forest roots; `δ_1` when `0 ∈ A`.
    pub fn roots(&self) -> Pmf<T> {
        match &self.n_law {
            Some(n) => n.clone(),
            None => Pmf::from_masses(vec![T::zero(), T::one()]),
        }
    }
}

/// `p^A` on `0..=max_k`, for `0 ∈ A`.
pub fn derive_zero_in<T: Scalar>(law: &OffspringLaw<T>, a: &DegreeSet, max_k: usize) -> Result<Pmf<T>> {
    if !a.contains_zero() {
        return Err(Error::Precondition("derive_zero_in needs 0 in A".into()));
    }
    let p_a = law.mass_of(a)?;
    if p_a.is_zero() {
        return Err(Error::ZeroProbability("p(A) = 0".into()));
    }
    let a_coef: Vec<T> = (0..=max_k)
        .map(|k| if a.contains(k) { law.pmf(k) } else { T::zero() })
        .collect();
    // b_i = p(i+1) 1_{A^c}(i+1)
    let b: Vec<T> = (0..=max_k)
        .map(|i| if a.contains(i + 1) { T::zero() } else { law.pmf(i + 1) })
        .collect();
    let b_nonzero: Vec<usize> = (1..=max_k).filter(|&i| !b[i].is_zero()).collect();
    let denom = T::one() - b[0].clone();
    let mut h: Vec<T> = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        let mut acc = a_coef[k].clone();
        for &i in &b_nonzero {
            if i > k {
                break;
            }
            acc = acc + b[i].clone() * h[k - i].clone();
        }
        h.push(acc / denom.clone());
    }
    Ok(Pmf::from_masses(h))
}

/// The bundle `(p̃, L, N, p^A)` for `0 ∉ A`.
pub fn derive_zero_not_in<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    max_n: usize,
) -> Result<DerivedLawBundle<T>> {
    if a.contains_zero() {
        return Err(Error::Precondition("derive_zero_not_in needs 0 outside A".into()));
    }
    let p_a = law.mass_of(a)?;
    if p_a.is_zero() {
        return Err(Error::ZeroProbability("p(A) = 0".into()));
    }
    let tilde = tilde_law(law, a, &p_a);
    let leaf = leaf_law(&tilde, max_n)?;
    let n_law = n_law(law, a, &p_a, &tilde, max_n)?;
    let pa = compound_over_a(law, a, &p_a, &n_law, max_n)?;
    Ok(DerivedLawBundle {
        regime: Regime::ZeroNotInA,
        pa,
        tilde: Some(tilde),
        leaf: Some(leaf),
        n_law: Some(n_law),
    })
}

/// `p̃(0) = p(0) + p(A)`, `p̃(k) = p(k) 1_{k∉A}` otherwise.
fn tilde_law<T: Scalar>(law: &OffspringLaw<T>, a: &DegreeSet, p_a: &T) -> OffspringLaw<T> {
    let explicit = match law.tail() {
        Some(_) => law.head().len().max(a.stable_from()),
        None => law.head().len(),
    };
    let mut head: Vec<T> = (0..explicit)
        .map(|k| if a.contains(k) { T::zero() } else { law.pmf(k) })
        .collect();
    head[0] = head[0].clone() + p_a.clone();
    let tail = if a.eventually_contains() {
        None
    } else {
        law.tail().copied()
    };
    OffspringLaw::from_parts_unchecked(head, tail)
}

/// Law of the number of leaves of a GW(p̃) tree on `0..=max_n`, from
/// `f = p̃(0) z + Σ_{k≥1} p̃(k) f^k` one coefficient at a time.
fn leaf_law<T: Scalar>(tilde: &OffspringLaw<T>, max_n: usize) -> Result<Pmf<T>> {
    let k_max = tilde.support_bound().map_or(max_n, |b| b.saturating_sub(1).min(max_n));
    if (max_n as f64).powi(2) * k_max as f64 / 2.0 > WORK_LIMIT {
        return Err(Error::TooLarge(format!("leaf law up to {max_n}")));
    }
    if k_max == 0 {
        // p̃ = δ_0: a single leaf.
        let mut masses = vec![T::zero(); max_n.max(1) + 1];
        masses[1] = T::one();
        return Ok(Pmf::from_masses(masses));
    }
    let pt: Vec<T> = (0..=k_max).map(|k| tilde.pmf(k)).collect();
    let denom = T::one() - pt.get(1).cloned().unwrap_or_else(T::zero);
    // pow[k][n] = [z^n] f^k for k ≥ 1; pow[0] unused.
    let mut pow: Vec<Vec<T>> = vec![vec![T::zero(); max_n + 1]; k_max + 1];
    for n in 1..=max_n {
        let mut acc = if n == 1 { pt[0].clone() } else { T::zero() };
        for k in 2..=k_max.min(n) {
            let mut c = T::zero();
            for i in 1..=(n + 1 - k) {
                let fi = &pow[1][i];
                let rest = &pow[k - 1][n - i];
                if !fi.is_zero() && !rest.is_zero() {
                    c = c + fi.clone() * rest.clone();
                }
            }
            if !pt[k].is_zero() {
                acc = acc + pt[k].clone() * c.clone();
            }
            pow[k][n] = c;
        }
        pow[1][n] = acc / denom.clone();
    }
    let mut masses = pow.swap_remove(1);
    masses[0] = T::zero();
    Ok(Pmf::from_masses(masses))
}

/// Law of `N` on `0..=max_n`.
fn n_law<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    p_a: &T,
    tilde: &OffspringLaw<T>,
    max_n: usize,
) -> Result<Pmf<T>> {
    let degenerate = tilde.support_bound().is_some_and(|b| b <= 2);
    if degenerate {
        // p̃ on {0, 1}: N ~ Bernoulli(p(A) / (p(0) + p(A))).
        let q = p_a.clone() / (law.pmf(0) + p_a.clone());
        let mut m = vec![T::one() - q.clone()];
        if max_n >= 1 {
            m.push(q);
        }
        return Ok(Pmf::from_masses(m));
    }
    if T::is_exact() {
        return Err(Error::NeedsFloat(
            "the law of N involves the root of a polynomial equation".into(),
        ));
    }
    let pf = law.to_f64_law();
    let tf = tilde.to_f64_law();
    let v = n_law_f64(&pf, &tf, p_a.to_f64(), a, max_n)?;
    Ok(Pmf::from_masses(
        v.into_iter()
            .map(|x| T::from_f64_lossy(x).expect("float backend"))
            .collect(),
    ))
}

/// `u = p(0) + p(A) z + h(u)`, `h(u) = Σ_{k≥1} p̃(k) u^k`, expanded around
/// the smallest fixed point `u_0 = u(0)`.
fn n_law_f64(
    law: &OffspringLaw<f64>,
    tilde: &OffspringLaw<f64>,
    p_a: f64,
    _a: &DegreeSet,
    max_n: usize,
) -> Result<Vec<f64>> {
    let p0 = law.pmf(0);
    let u0 = smallest_fixed_point(tilde, p0)?;
    let r_max = match tilde.support_bound() {
        Some(b) => b.saturating_sub(1).min(max_n),
        None => max_n,
    };
    if (max_n as f64).powi(2) * r_max as f64 / 2.0 > WORK_LIMIT {
        return Err(Error::TooLarge(format!("law of N up to {max_n}")));
    }
    let c = taylor_coefficients(tilde, u0, r_max)?;
    let denom = 1.0 - c[1];
    // pow[r][n] = [z^n] v^r
    let mut pow: Vec<Vec<f64>> = vec![vec![0.0; max_n + 1]; r_max.max(1) + 1];
    for n in 1..=max_n {
        let mut acc = if n == 1 { p_a } else { 0.0 };
        for r in 2..=r_max.min(n) {
            let mut s = 0.0;
            for i in 1..=(n + 1 - r) {
                s += pow[1][i] * pow[r - 1][n - i];
            }
            pow[r][n] = s;
            acc += c[r] * s;
        }
        pow[1][n] = acc / denom;
    }
    let mut v = pow.swap_remove(1);
    v[0] = u0;
    Ok(v)
}

/// Smallest `u ∈ [0, 1]` with `u = p0 + Σ_{k≥1} p̃(k) u^k` (Newton from 0).
fn smallest_fixed_point(tilde: &OffspringLaw<f64>, p0: f64) -> Result<f64> {
    let h = |u: f64| -> Result<(f64, f64)> {
        // Σ_{k≥1} p̃(k) u^k and its derivative
        let m = tilde.moments(&DegreeSet::all(), &u)?;
        let v = m.g - tilde.pmf(0);
        Ok((v, m.g_prime))
    };
    let mut u = p0;
    for _ in 0..200 {
        let (hv, hd) = if u == 0.0 { (0.0, tilde.pmf(1)) } else { h(u)? };
        let f = p0 + hv - u;
        let d = hd - 1.0;
        let next = u - f / d;
        if !next.is_finite() {
            break;
        }
        if (next - u).abs() <= 1e-16 * next.abs().max(1e-300) {
            return Ok(next);
        }
        u = next;
    }
    if u.is_finite() && (0.0..1.0).contains(&u) {
        Ok(u)
    } else {
        Err(Error::RootFinding("fixed point for the law of N".into()))
    }
}

/// `c_r = Σ_{k≥max(r,1)} p̃(k) C(k, r) u0^{k−r}` for `r = 0..=r_max`.
fn taylor_coefficients(tilde: &OffspringLaw<f64>, u0: f64, r_max: usize) -> Result<Vec<f64>> {
    let bound = tilde.support_bound();
    let mut out = vec![0.0; r_max + 1];
    for (r, slot) in out.iter_mut().enumerate() {
        let start = r.max(1);
        // term(k) = C(k, r) u0^{k−r}
        let mut coef = if r == 0 { u0 } else { 1.0 };
        let mut sum = 0.0;
        let mut k = start;
        loop {
            if bound.is_some_and(|b| k >= b) {
                break;
            }
            let t = tilde.pmf(k) * coef;
            sum += t;
            // C(k+1, r) u0^{k+1−r} = C(k, r) u0^{k−r} · (k+1)/(k+1−r) · u0
            coef *= (k + 1) as f64 / (k + 1 - r) as f64 * u0;
            k += 1;
            if bound.is_none() && k > start + 16 {
                let ratio = u0 * (k + 1) as f64 / (k + 1 - r) as f64;
                if ratio < 1.0 && coef / (1.0 - ratio) <= 1e-18 * sum.abs() {
                    break;
                }
                if k > 50_000_000 {
                    return Err(Error::TailTolerance {
                        what: "Taylor coefficient of the law of N".into(),
                        remainder: coef,
                    });
                }
            }
        }
        *slot = sum;
    }
    Ok(out)
}

/// Law of `Σ_{k≤Z'} N_k` with `Z' ~ (X | X ∈ A)`, on `0..=max_n`.
fn compound_over_a<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    p_a: &T,
    n_law: &Pmf<T>,
    max_n: usize,
) -> Result<Pmf<T>> {
    let nl: Vec<T> = (0..=max_n).map(|k| n_law.get(k)).collect();
    let mut out = vec![T::zero(); max_n + 1];
    let mut power = vec![T::zero(); max_n + 1]; // law of N_1 + … + N_z
    power[0] = T::one();
    let bound = law.support_bound();
    let mut remaining = p_a.clone(); // P(X ∈ A, X ≥ z)
    let mut z = 0usize;
    loop {
        if bound.is_some_and(|b| z >= b) {
            break;
        }
        let pz = if a.contains(z) { law.pmf(z) } else { T::zero() };
        if !pz.is_zero() {
            let w = pz.clone() / p_a.clone();
            for (o, q) in out.iter_mut().zip(&power) {
                if !q.is_zero() {
                    *o = o.clone() + w.clone() * q.clone();
                }
            }
            remaining = remaining - pz;
        }
        if bound.is_none() {
            // P(M_z ≤ max_n) · P(Z' > z) bounds everything not yet added.
            let reach = crate::scalar::sum(&power).to_f64();
            if reach * remaining.to_f64() / p_a.to_f64() < 1e-16 {
                break;
            }
            if z > 10_000_000 {
                return Err(Error::TailTolerance {
                    what: "compound law over A".into(),
                    remainder: reach,
                });
            }
        }
        power = crate::walk::convolve_truncated(&power, &nl, max_n + 1);
        z += 1;
    }
    Ok(Pmf::from_masses(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_traits::{One, Zero};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn binary_zero_set_is_geometric() {
        let p = OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap();
        let pa = derive_zero_in(&p, &DegreeSet::finite([0]), 12).unwrap();
        for k in 0..=12 {
            assert_eq!(pa.get(k), q(1, 1 << (k + 1)));
        }
    }

    #[test]
    fn mean_identity_for_zero_set() {
        let p = OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap();
        // p^A has geometric tails, so a long head pins the mean down
        let pa = derive_zero_in(&p.to_f64_law(), &DegreeSet::finite([0]), 400).unwrap();
        assert!((pa.head_mean() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn binary_two_bundle() {
        let p = OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap();
        let b = derive_zero_not_in(&p, &DegreeSet::finite([2]), 6).unwrap();
        assert_eq!(b.tilde.as_ref().unwrap().head(), &[Rational::one()]);
        assert_eq!(b.leaf.as_ref().unwrap().get(1), Rational::one());
        assert_eq!(b.n_law.as_ref().unwrap().masses, vec![q(1, 2), q(1, 2)]);
        assert_eq!(b.pa.masses[..3], [q(1, 4), q(1, 2), q(1, 4)]);
        assert!(b.pa.tail_mass.is_zero());
        let p = OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap();
        let b = derive_zero_not_in(&p, &DegreeSet::finite([2]), 4).unwrap();
        assert_eq!(b.pa.masses[..3], [q(9, 25), q(12, 25), q(4, 25)]);
    }

    #[test]
    fn leaf_count_mean() {
        // p = {0: 1/2, 1: 1/6, 2: 1/6, 3: 1/6}, A = {1}: p̃ = {0: 2/3, 2: 1/6, 3: 1/6}
        let p = OffspringLaw::from_strs(&["1/2", "1/6", "1/6", "1/6"]).unwrap();
        let a = DegreeSet::finite([1]);
        let b = derive_zero_not_in(&p.to_f64_law(), &a, 3000).unwrap();
        let leaf = b.leaf.unwrap();
        // E[L] = (p(0) + p(A)) / (1 − E[X 1_{X∉A}]) = (2/3) / (1 − 5/6) = 4
        assert!((leaf.head_mean() - 4.0).abs() < 1e-6, "{}", leaf.head_mean());
        // N | L is binomial with parameter p(A)/(p(0)+p(A)) = 1/4
        let n = b.n_law.unwrap();
        assert!((n.head_mean() - 1.0).abs() < 1e-6);
        // rational laws with such a p̃ need floats
        assert_eq!(
            derive_zero_not_in(&p, &a, 5).unwrap_err().kind(),
            "needs_float"
        );
    }
}
