//! Offspring laws, their generating functions and the tilt `p_{A,θ}`.
//!
//! A law is an explicit head `p(0..K)` plus, for float laws only, an analytic
//! tail `p(k) = C k^{-β} r^k` for `k ≥ K`. Geometric tails are the `β = 0`
//! case, pure power laws the `r = 1` case.

mod classify;
mod descriptor;

pub use classify::{
    conditional_mean_scan, Classification, CriterionCheck, PStar, TiltDomain, Verdict,
    ZeroEnvelope,
};
pub use descriptor::{AnyLaw, LawDescriptor, TailDescriptor};

use serde::{Deserialize, Serialize};

use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use crate::series::{power_geometric_sum, Bounded};

/// Tolerance on the total mass of float laws.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Relative tolerance demanded of every analytic tail sum.
pub const TAIL_TOLERANCE: f64 = 1e-14;

/// `p(k) = coeff · k^{-exponent} · ratio^k` beyond the head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub coeff: f64,
    pub exponent: f64,
    pub ratio: f64,
}

impl Tail {
    pub fn at(&self, k: usize) -> f64 {
        let k = k as f64;
        (self.coeff.ln() - self.exponent * k.ln() + k * self.ratio.ln()).exp()
    }

    /// `Σ_{k≥from} k^j θ^k p(k)` for `j ∈ {0, 1}`.
    fn weighted_sum(&self, from: usize, theta: f64, j: u32) -> Result<Bounded> {
        let q = self.ratio * theta;
        let s = self.exponent - j as f64;
        let b = power_geometric_sum(s, q, from.max(1))?;
        Ok(b.scale(self.coeff))
    }
}

/// A probability law on ℕ.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw<T: Scalar> {
    head: Vec<T>,
    tail: Option<Tail>,
}

/// Sums entering the tilt, at a fixed `θ` and set `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    /// `E[θ^X 1_A]`
    pub in_a: T,
    /// `E[θ^X 1_{A^c}]`
    pub out_a: T,
    /// `E[X θ^{X-1} 1_{A^c}]`
    pub x_out_a: T,
    /// `E[X θ^X 1_A]`
    pub x_in_a: T,
    pub g: T,
    pub g_prime: T,
}

/// The tilted law together with its normalizer `c_A(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltResult<T: Scalar> {
    pub law: OffspringLaw<T>,
    pub theta: T,
    pub normalizer: T,
}

impl<T: Scalar> OffspringLaw<T> {
    /// A finitely supported law. The masses must sum to one (exactly for the
    /// rational backend).
    pub fn from_pmf(head: Vec<T>) -> Result<Self> {
        let law = OffspringLaw { head, tail: None }.trimmed();
        law.check_masses()?;
        let total = crate::scalar::sum(&law.head);
        if !mass_is_one(&total) {
            return Err(Error::InvalidLaw(format!("masses sum to {total}, not 1")));
        }
        Ok(law)
    }

    pub(crate) fn from_parts_unchecked(head: Vec<T>, tail: Option<Tail>) -> Self {
        let law = OffspringLaw { head, tail };
        if law.tail.is_none() {
            law.trimmed()
        } else {
            law
        }
    }

    fn trimmed(mut self) -> Self {
        while self.head.len() > 1 && self.head.last().is_some_and(|x| x.is_zero()) {
            self.head.pop();
        }
        self
    }

    fn check_masses(&self) -> Result<()> {
        if self.head.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        for (k, m) in self.head.iter().enumerate() {
            if *m < T::zero() || !m.to_f64().is_finite() {
                return Err(Error::InvalidLaw(format!("p({k}) = {m} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn head(&self) -> &[T] {
        &self.head
    }

    pub fn tail(&self) -> Option<&Tail> {
        self.tail.as_ref()
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    /// One past the largest supported degree, if the support is finite.
    pub fn support_bound(&self) -> Option<usize> {
        match self.tail {
            Some(_) => None,
            None => Some(self.head.len()),
        }
    }

    /// Radius of convergence of the generating function.
    pub fn radius(&self) -> f64 {
        match &self.tail {
            None => f64::INFINITY,
            Some(t) => 1.0 / t.ratio,
        }
    }

    pub fn pmf(&self, k: usize) -> T {
        if k < self.head.len() {
            return self.head[k].clone();
        }
        match &self.tail {
            None => T::zero(),
            Some(t) => float_to::<T>(t.at(k)),
        }
    }

    /// `p(0), …, p(m)`.
    pub fn pmf_prefix(&self, m: usize) -> Vec<T> {
        (0..=m).map(|k| self.pmf(k)).collect()
    }

    /// Degrees with positive mass below `bound`.
    pub fn support_below(&self, bound: usize) -> Vec<usize> {
        (0..bound).filter(|&k| !self.pmf(k).is_zero()).collect()
    }

    pub fn is_exact() -> bool {
        T::is_exact()
    }

    /// `Σ_{j≥k} p(j)`.
    pub fn mass_from(&self, k: usize) -> Result<T> {
        self.power_sum_from(k, 0)
    }

    /// `Σ_{j≥k} j p(j)`.
    pub fn moment1_from(&self, k: usize) -> Result<T> {
        self.power_sum_from(k, 1)
    }

    fn power_sum_from(&self, k: usize, j: u32) -> Result<T> {
        let mut acc = T::zero();
        for i in k..self.head.len() {
            let w = if j == 0 { T::one() } else { T::from_usize(i) };
            acc = acc + w * self.head[i].clone();
        }
        if let Some(t) = &self.tail {
            let from = k.max(self.head.len());
            let b = t.weighted_sum(from, 1.0, j)?;
            check_tail(&b, "tail moment")?;
            acc = acc + float_to::<T>(b.value);
        }
        Ok(acc)
    }

    /// `E[(X − ℓ)₊ 1_{X ≥ k}]`.
    pub fn excess_mean(&self, ell: usize, k: usize) -> Result<T> {
        let m = k.max(ell + 1);
        Ok(self.moment1_from(m)? - T::from_usize(ell) * self.mass_from(m)?)
    }

    /// `p(A)`.
    pub fn mass_of(&self, a: &DegreeSet) -> Result<T> {
        Ok(self.moments(a, &T::one())?.in_a)
    }

    pub fn mean(&self) -> Result<T> {
        self.moment1_from(0)
    }

    /// Checks `p(0) > 0` and `p(0) + p(1) < 1`.
    pub fn validate_gw(&self) -> Result<()> {
        let p0 = self.pmf(0);
        let p1 = self.pmf(1);
        if p0.is_zero() {
            return Err(Error::InvalidLaw("p(0) must be positive".into()));
        }
        if !(p0 + p1 < T::one()) {
            return Err(Error::InvalidLaw("p(0) + p(1) must be below 1".into()));
        }
        Ok(())
    }

    /// The six sums of the tilt at `θ`.
    ///
    /// Divergent first moments are reported as `+∞` (float laws only);
    /// divergent masses are errors.
    pub fn moments(&self, a: &DegreeSet, theta: &T) -> Result<Moments<T>> {
        if *theta <= T::zero() {
            return Err(Error::ThetaOutsideDomain {
                theta: theta.to_f64(),
                reason: "theta must be positive".into(),
            });
        }
        let explicit = match &self.tail {
            Some(_) => self.head.len().max(a.stable_from()),
            None => self.head.len(),
        };
        let mut in_a = T::zero();
        let mut out_a = T::zero();
        let mut x_out = T::zero(); // E[X θ^X 1_{A^c}], divided by θ at the end
        let mut x_in = T::zero();
        let mut pw = T::one();
        for k in 0..explicit {
            let pk = self.pmf(k);
            if !pk.is_zero() {
                let w = pw.clone() * pk;
                let kw = T::from_usize(k) * w.clone();
                if a.contains(k) {
                    in_a = in_a + w;
                    x_in = x_in + kw;
                } else {
                    out_a = out_a + w;
                    x_out = x_out + kw;
                }
            }
            pw = pw * theta.clone();
        }
        if let Some(t) = &self.tail {
            let th = theta.to_f64();
            let mass = t.weighted_sum(explicit, th, 0)?;
            check_tail(&mass, "tilted tail mass")?;
            let first = match t.weighted_sum(explicit, th, 1) {
                Ok(b) => {
                    check_tail(&b, "tilted tail moment")?;
                    b.value
                }
                Err(Error::Divergent(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            if a.eventually_contains() {
                in_a = in_a + float_to::<T>(mass.value);
                x_in = x_in + float_to::<T>(first);
            } else {
                out_a = out_a + float_to::<T>(mass.value);
                x_out = x_out + float_to::<T>(first);
            }
        }
        let x_out_a = x_out / theta.clone();
        let g = in_a.clone() + out_a.clone();
        let g_prime = x_out_a.clone() + x_in.clone() / theta.clone();
        Ok(Moments {
            in_a,
            out_a,
            x_out_a,
            x_in_a: x_in,
            g,
            g_prime,
        })
    }

    /// `c_A(θ)`, checking both domain conditions.
    pub fn normalizer(&self, a: &DegreeSet, theta: &T) -> Result<T> {
        let m = match self.moments(a, theta) {
            Ok(m) => m,
            Err(Error::Divergent(why)) => {
                return Err(Error::ThetaOutsideDomain {
                    theta: theta.to_f64(),
                    reason: format!("E[theta^X] is infinite ({why})"),
                })
            }
            Err(e) => return Err(e),
        };
        normalizer_from(&m, theta)
    }

    /// `p_{A,θ}`.
    pub fn tilt(&self, a: &DegreeSet, theta: &T) -> Result<TiltResult<T>> {
        let c = self.normalizer(a, theta)?;
        let explicit = match &self.tail {
            Some(_) => self.head.len().max(a.stable_from()),
            None => self.head.len(),
        };
        let inv = T::one() / theta.clone();
        let mut head = Vec::with_capacity(explicit);
        let mut pw = T::one();
        for k in 0..explicit {
            let pk = self.pmf(k);
            let v = if a.contains(k) {
                c.clone() * pw.clone() * pk
            } else {
                pw.clone() * inv.clone() * pk
            };
            head.push(v);
            pw = pw * theta.clone();
        }
        let tail = self.tail.map(|t| {
            let th = theta.to_f64();
            let factor = if a.eventually_contains() {
                c.to_f64()
            } else {
                1.0 / th
            };
            let mut ratio = t.ratio * th;
            if (ratio - 1.0).abs() < 1e-12 {
                ratio = 1.0;
            }
            Tail {
                coeff: t.coeff * factor,
                exponent: t.exponent,
                ratio,
            }
        });
        Ok(TiltResult {
            law: OffspringLaw::from_parts_unchecked(head, tail),
            theta: theta.clone(),
            normalizer: c,
        })
    }

    /// Mean of `p_{A,θ}`.
    pub fn tilted_mean(&self, a: &DegreeSet, theta: &T) -> Result<T> {
        let m = self.moments(a, theta)?;
        let c = normalizer_from(&m, theta)?;
        Ok(m.x_out_a + c * m.x_in_a)
    }

    /// `k p(k) / μ`.
    pub fn size_biased(&self) -> Result<OffspringLaw<T>> {
        let mu = self.mean()?;
        if mu.is_zero() {
            return Err(Error::Precondition("size-biasing needs a positive mean".into()));
        }
        let head = self
            .head
            .iter()
            .enumerate()
            .map(|(k, p)| T::from_usize(k) * p.clone() / mu.clone())
            .collect();
        let mu_f = mu.to_f64();
        let tail = self.tail.map(|t| Tail {
            coeff: t.coeff / mu_f,
            exponent: t.exponent - 1.0,
            ratio: t.ratio,
        });
        Ok(OffspringLaw::from_parts_unchecked(head, tail))
    }

    /// The law with generating function `G(cz)/G(c)`.
    pub fn shifted_family(&self, c: &T) -> Result<OffspringLaw<T>> {
        if *c <= T::zero() || *c >= T::one() {
            return Err(Error::Precondition(format!("c = {c} must lie in (0, 1)")));
        }
        let gc = self.moments(&DegreeSet::all(), c)?.g;
        let mut head = Vec::with_capacity(self.head.len());
        let mut pw = T::one();
        for p in &self.head {
            head.push(p.clone() * pw.clone() / gc.clone());
            pw = pw * c.clone();
        }
        let gc_f = gc.to_f64();
        let c_f = c.to_f64();
        let tail = self.tail.map(|t| Tail {
            coeff: t.coeff / gc_f,
            exponent: t.exponent,
            ratio: t.ratio * c_f,
        });
        Ok(OffspringLaw::from_parts_unchecked(head, tail))
    }

    /// The same law in floating point.
    pub fn to_f64_law(&self) -> OffspringLaw<f64> {
        OffspringLaw {
            head: self.head.iter().map(|x| x.to_f64()).collect(),
            tail: self.tail,
        }
    }

    /// Total mass, including the analytic tail.
    pub fn total_mass(&self) -> Result<T> {
        self.mass_from(0)
    }
}

impl OffspringLaw<f64> {
    /// A float law with an analytic tail starting right after `head`. When
    /// `coeff` is `None` it is chosen so that the masses sum to one.
    pub fn with_tail(head: Vec<f64>, coeff: Option<f64>, exponent: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidLaw(format!("tail ratio {ratio} must lie in (0, 1]")));
        }
        if ratio == 1.0 && exponent <= 2.0 {
            return Err(Error::InvalidLaw(format!(
                "power-law exponent {exponent} must exceed 2 for a finite mean"
            )));
        }
        if !exponent.is_finite() {
            return Err(Error::InvalidLaw("tail exponent must be finite".into()));
        }
        let head_sum: f64 = head.iter().sum();
        let from = head.len().max(1);
        let mut head = head;
        if head.is_empty() {
            head.push(0.0);
        }
        let unit = Tail {
            coeff: 1.0,
            exponent,
            ratio,
        };
        let base = unit.weighted_sum(from, 1.0, 0)?;
        check_tail(&base, "tail normalization")?;
        let coeff = match coeff {
            Some(c) => c,
            None => (1.0 - head_sum) / base.value,
        };
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(Error::InvalidLaw(format!(
                "tail coefficient {coeff} must be positive (head mass {head_sum})"
            )));
        }
        let law = OffspringLaw {
            head,
            tail: Some(Tail {
                coeff,
                exponent,
                ratio,
            }),
        };
        law.check_masses()?;
        let total = law.total_mass()?;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("masses sum to {total}, not 1")));
        }
        Ok(law)
    }
}

impl OffspringLaw<Rational> {
    /// Parses masses such as `"1/2"` or `"0.6"`.
    pub fn from_strs(masses: &[&str]) -> Result<Self> {
        let head = masses
            .iter()
            .map(|s| {
                crate::scalar::parse_rational(s)
                    .ok_or_else(|| Error::InvalidLaw(format!("cannot parse {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pmf(head)
    }
}

fn mass_is_one<T: Scalar>(total: &T) -> bool {
    if T::is_exact() {
        total.is_one()
    } else {
        (total.to_f64() - 1.0).abs() <= MASS_TOLERANCE
    }
}

fn normalizer_from<T: Scalar>(m: &Moments<T>, theta: &T) -> Result<T> {
    if m.in_a.is_zero() {
        return Err(Error::ZeroProbability("p(A) = 0".into()));
    }
    let slack = theta.clone() - m.out_a.clone();
    let tol = if T::is_exact() { 0.0 } else { 1e-14 * theta.to_f64() };
    if slack.to_f64() < -tol {
        return Err(Error::ThetaOutsideDomain {
            theta: theta.to_f64(),
            reason: "E[theta^X 1_{A^c}] exceeds theta".into(),
        });
    }
    let slack = if slack < T::zero() { T::zero() } else { slack };
    Ok(slack / (theta.clone() * m.in_a.clone()))
}

fn check_tail(b: &Bounded, what: &str) -> Result<()> {
    if b.error > TAIL_TOLERANCE * b.value.abs() + 1e-300 {
        return Err(Error::TailTolerance {
            what: what.to_string(),
            remainder: b.error,
        });
    }
    Ok(())
}

fn float_to<T: Scalar>(x: f64) -> T {
    T::from_f64_lossy(x).expect("analytic tails only exist on float laws")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn binary() -> OffspringLaw<Rational> {
        OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap()
    }

    #[test]
    fn finite_moments() {
        let m = binary().moments(&DegreeSet::finite([0]), &Rational::one()).unwrap();
        assert_eq!(
            (m.in_a, m.out_a, m.x_out_a, m.x_in_a, m.g, m.g_prime),
            (q(1, 2), q(1, 2), q(1, 1), q(0, 1), q(1, 1), q(1, 1))
        );
        let p = OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap();
        let m = p.moments(&DegreeSet::all(), &Rational::one()).unwrap();
        assert_eq!((m.g, m.g_prime), (q(1, 1), q(4, 5)));
    }

    #[test]
    fn tilt_of_binary_over_all() {
        let theta = q(3, 2);
        let r = binary().tilt(&DegreeSet::all(), &theta).unwrap();
        // c = 1/g(θ) = 2/(1+θ²)
        assert_eq!(r.normalizer, q(2, 1) / (q(1, 1) + theta.clone() * theta.clone()));
        let total = crate::scalar::sum(r.law.head());
        assert!(total.is_one());
        assert_eq!(r.law.pmf(1), q(0, 1));
    }

    #[test]
    fn tilt_at_one_is_identity() {
        for a in [DegreeSet::finite([0]), DegreeSet::finite([2]), DegreeSet::all()] {
            let r = binary().tilt(&a, &Rational::one()).unwrap();
            assert!(r.normalizer.is_one());
            assert_eq!(r.law, binary());
        }
    }

    #[test]
    fn outside_domain_is_reported() {
        // A = {0}: E[θ^X 1_{A^c}] = θ²/2 > θ once θ > 2.
        let err = binary().tilt(&DegreeSet::finite([0]), &q(3, 1)).unwrap_err();
        assert_eq!(err.kind(), "theta_outside_domain");
        assert!(binary().tilt(&DegreeSet::finite([0]), &q(2, 1)).is_ok());
    }

    #[test]
    fn power_tail_moments() {
        // p(0) = 1/2, p(k) = k^-3 / (2ζ(3))
        let zeta3 = 1.202_056_903_159_594_2_f64;
        let p = OffspringLaw::with_tail(vec![0.5], None, 3.0, 1.0).unwrap();
        assert!((p.tail().unwrap().coeff - 0.5 / zeta3).abs() < 1e-15);
        let m = p.moments(&DegreeSet::all(), &1.0).unwrap();
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((m.g_prime - zeta2 / (2.0 * zeta3)).abs() < 1e-12);
        assert!((m.g - 1.0).abs() < 1e-13);
        assert!((p.mean().unwrap() - zeta2 / (2.0 * zeta3)).abs() < 1e-12);
    }

    #[test]
    fn tilted_float_law_keeps_unit_mass() {
        let p = OffspringLaw::with_tail(vec![0.6, 0.1], None, 1.5, 0.5).unwrap();
        for a in ["0", "N", "geq:3,except:5", "1,4"] {
            let a: DegreeSet = a.parse().unwrap();
            let r = p.tilt(&a, &1.3).unwrap();
            assert!((r.law.total_mass().unwrap() - 1.0).abs() < 1e-12, "{a}");
        }
    }

    #[test]
    fn size_biased_binary() {
        let s = binary().size_biased().unwrap();
        assert_eq!(s.head(), &[q(0, 1), q(0, 1), q(1, 1)]);
    }

    #[test]
    fn shifted_family_algebra() {
        let g = OffspringLaw::from_strs(&["1/2", "1/2"]).unwrap();
        let s = g.shifted_family(&q(1, 2)).unwrap();
        assert_eq!(s.head(), &[q(2, 3), q(1, 3)]);
        // tilting back by 1/c over ℕ recovers G
        let back = s.tilt(&DegreeSet::all(), &q(2, 1)).unwrap();
        assert_eq!(back.law, g);
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(OffspringLaw::from_strs(&["1/2", "1/3"]).is_err());
        assert!(OffspringLaw::<f64>::from_pmf(vec![0.5, -0.1, 0.6]).is_err());
        assert!(OffspringLaw::with_tail(vec![0.5], None, 2.0, 1.0).is_err());
        let p = OffspringLaw::from_strs(&["1/2", "1/2"]).unwrap();
        assert!(p.validate_gw().is_err());
    }
}
