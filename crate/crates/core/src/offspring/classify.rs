//! The tilt domain `I_A`, the critical tilt and the generic / non-generic
//! verdict. Root finding always runs in floating point.

use serde::Serialize;

use super::OffspringLaw;
use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::bisect;

/// Tolerance for "the mean equals one".
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

const GRID: usize = 64;
const REFINE: usize = 8;

/// `I_A = [lower, upper]` (the upper end possibly open or infinite).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltDomain {
    pub lower: f64,
    pub upper: f64,
    pub upper_attained: bool,
}

impl TiltDomain {
    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lower
            && theta > 0.0
            && (theta < self.upper || (theta == self.upper && self.upper_attained))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Generic { theta_c: f64 },
    NonGeneric { theta_star: f64 },
}

impl Verdict {
    pub fn theta(&self) -> f64 {
        match *self {
            Verdict::Generic { theta_c } => theta_c,
            Verdict::NonGeneric { theta_star } => theta_star,
        }
    }

    pub fn is_generic(&self) -> bool {
        matches!(self, Verdict::Generic { .. })
    }
}

/// The `E[Y | Y ∈ A]` route to the verdict, available when `1 < ρ < ∞` and
/// `g'(ρ) < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionCheck {
    pub conditional_mean: f64,
    pub threshold: f64,
    pub non_generic: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    #[serde(flatten)]
    pub verdict: Verdict,
    /// `μ(p_{A,θ})` at the returned `θ`.
    pub mean_at_theta: f64,
    pub mean: f64,
    pub critical: bool,
    pub domain: TiltDomain,
    pub criterion: Option<CriterionCheck>,
}

/// `p*_A`: the law itself when critical, else its tilt at the verdict's `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PStar<T: Scalar> {
    pub classification: Classification,
    pub law: OffspringLaw<f64>,
    /// Available when no tilt was needed.
    pub exact: Option<OffspringLaw<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroEnvelope {
    pub n0: usize,
    /// `(n, E[Y | Y ∈ {0} ∪ {k ≥ n}])` over the scanned range.
    pub values: Vec<(usize, f64)>,
}

impl<T: Scalar> OffspringLaw<T> {
    pub fn tilt_domain(&self, a: &DegreeSet) -> Result<TiltDomain> {
        self.to_f64_law().domain_f64(a)
    }

    pub fn critical_tilt(&self, a: &DegreeSet) -> Result<Option<f64>> {
        Ok(match self.classify(a)?.verdict {
            Verdict::Generic { theta_c } => Some(theta_c),
            Verdict::NonGeneric { .. } => None,
        })
    }

    pub fn classify(&self, a: &DegreeSet) -> Result<Classification> {
        self.validate_gw()?;
        self.to_f64_law().classify_f64(a)
    }

    pub fn p_star(&self, a: &DegreeSet) -> Result<PStar<T>> {
        let classification = self.classify(a)?;
        let theta = classification.verdict.theta();
        let float = self.to_f64_law();
        if theta == 1.0 {
            return Ok(PStar {
                classification,
                law: float,
                exact: Some(self.clone()),
            });
        }
        let law = float.tilt(a, &theta)?.law;
        Ok(PStar {
            classification,
            law,
            exact: None,
        })
    }

    /// The maximizer of `n ↦ E[Y | Y ∈ {0} ∪ {k ≥ n}]` with `Y ~ p_{ℕ,ρ}`.
    pub fn zero_envelope(&self) -> Result<ZeroEnvelope> {
        let p = self.to_f64_law();
        let rho = p.radius();
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::Precondition("zero_envelope needs 1 < rho < inf".into()));
        }
        let m = p.moments(&DegreeSet::all(), &rho)?;
        if !(m.g_prime < 1.0) {
            return Err(Error::Precondition("zero_envelope needs g'(rho) < 1".into()));
        }
        let y = p.tilt(&DegreeSet::all(), &rho)?.law;
        conditional_mean_scan(&y, y.head().len() + 64)
    }
}

/// `E[Y | Y ∈ {0} ∪ {k ≥ n}]` for `n = 1..=n_max`, and its maximizer.
pub fn conditional_mean_scan(y: &OffspringLaw<f64>, n_max: usize) -> Result<ZeroEnvelope> {
    let p0 = y.pmf(0);
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max.max(1) {
        let mass = p0 + y.mass_from(n)?;
        values.push((n, y.moment1_from(n)? / mass));
    }
    let n0 = values
        .iter()
        .fold((1, f64::NEG_INFINITY), |best, &(n, v)| if v > best.1 { (n, v) } else { best })
        .0;
    Ok(ZeroEnvelope { n0, values })
}

impl OffspringLaw<f64> {
    /// `φ(θ) = E[θ^X 1_{A^c}] − θ`; `+∞` where the sum diverges.
    fn phi(&self, a: &DegreeSet, theta: f64) -> Result<f64> {
        match self.moments(a, &theta) {
            Ok(m) => Ok(m.out_a - theta),
            Err(Error::Divergent(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Whether `E[θ^X 1_A]` is finite.
    fn in_a_finite(&self, a: &DegreeSet, theta: f64) -> Result<bool> {
        let Some(t) = self.tail() else {
            return Ok(true);
        };
        if !a.eventually_contains() {
            return Ok(true);
        }
        let start = self.head().len().max(a.stable_from()).max(1);
        match t.weighted_sum(start, theta, 0) {
            Ok(_) => Ok(true),
            Err(Error::Divergent(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    fn domain_f64(&self, a: &DegreeSet) -> Result<TiltDomain> {
        if self.mass_of(a)? <= 0.0 {
            return Err(Error::ZeroProbability("p(A) = 0".into()));
        }
        let lower = if a.contains_zero() || self.pmf(0) == 0.0 {
            0.0
        } else {
            bisect(|t| Ok(-self.phi(a, t)?), 0.0, 1.0, 1e-15)?
        };
        let rho = self.radius();
        let out_beyond_one = (2..self.head().len()).any(|k| !a.contains(k) && self.pmf(k) > 0.0)
            || (self.tail().is_some() && !a.eventually_contains());
        if rho.is_infinite() {
            if !out_beyond_one {
                return Ok(TiltDomain {
                    lower,
                    upper: f64::INFINITY,
                    upper_attained: false,
                });
            }
            let mut hi = 2.0;
            while self.phi(a, hi)? <= 0.0 {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::RootFinding("tilt domain does not close".into()));
                }
            }
            let upper = bisect(|t| self.phi(a, t), 1.0, hi, 1e-15)?;
            return Ok(TiltDomain {
                lower,
                upper,
                upper_attained: true,
            });
        }
        let at_rho = self.phi(a, rho)?;
        if at_rho <= 0.0 {
            return Ok(TiltDomain {
                lower,
                upper: rho,
                upper_attained: self.in_a_finite(a, rho)?,
            });
        }
        let upper = bisect(|t| self.phi(a, t), 1.0, rho, 1e-15)?;
        Ok(TiltDomain {
            lower,
            upper,
            upper_attained: true,
        })
    }

    /// `μ(p_{A,θ}) − 1`, `+∞` when the tilted mean diverges.
    fn excess(&self, a: &DegreeSet, theta: f64) -> Result<f64> {
        let v = self.tilted_mean(a, &theta)? - 1.0;
        if v.is_nan() {
            return Err(Error::RootFinding(format!("mean is not finite at theta = {theta}")));
        }
        Ok(v)
    }

    fn classify_f64(&self, a: &DegreeSet) -> Result<Classification> {
        let mean = self.mean()?;
        if mean > 1.0 + CRITICAL_TOLERANCE {
            return Err(Error::Precondition(format!(
                "supercritical law (mean {mean}) is not supported"
            )));
        }
        let domain = self.domain_f64(a)?;
        let criterion = self.criterion(a)?;
        let done = |verdict: Verdict, mean_at_theta: f64, critical: bool| {
            let criterion = criterion.map(|c| CriterionCheck {
                agrees: c.agrees_with(&verdict),
                ..c
            });
            Ok(Classification {
                verdict,
                mean_at_theta,
                mean,
                critical,
                domain,
                criterion,
            })
        };
        if (mean - 1.0).abs() <= CRITICAL_TOLERANCE {
            return done(Verdict::Generic { theta_c: 1.0 }, mean, true);
        }
        let top = domain.upper;
        if top <= 1.0 {
            return done(Verdict::NonGeneric { theta_star: 1.0 }, mean, false);
        }
        // Find some θ with μ − 1 ≥ 0, or settle the non-generic case.
        let hi = if top.is_infinite() {
            let mut t = 2.0;
            while self.excess(a, t)? < 0.0 {
                t *= 2.0;
                if t > 1e300 {
                    return Err(Error::RootFinding("no critical tilt found".into()));
                }
            }
            t
        } else if domain.upper_attained {
            let h = self.excess(a, top)?;
            if h < -CRITICAL_TOLERANCE {
                return done(Verdict::NonGeneric { theta_star: top }, h + 1.0, false);
            }
            if h.abs() <= CRITICAL_TOLERANCE {
                return done(Verdict::Generic { theta_c: top }, h + 1.0, false);
            }
            top
        } else {
            // Open at ρ: a root exists below, approach the endpoint.
            let mut j = 1;
            loop {
                let t = top * (1.0 - 0.5f64.powi(j));
                if self.excess(a, t)? >= 0.0 {
                    break t;
                }
                j += 1;
                if j > 60 {
                    return Err(Error::RootFinding("mean stays below 1 near rho".into()));
                }
            }
        };
        let (lo, hi) = self.bracket(a, 1.0, hi)?;
        let theta_c = bisect(|t| self.excess(a, t), lo, hi, 1e-16)?;
        let at = self.excess(a, theta_c)? + 1.0;
        done(Verdict::Generic { theta_c }, at, false)
    }

    /// Scans `(lo, hi]` for the sign change of `μ − 1`, refining once when
    /// rounding noise produces several.
    fn bracket(&self, a: &DegreeSet, lo: f64, hi: f64) -> Result<(f64, f64)> {
        for points in [GRID, GRID * REFINE] {
            let grid: Vec<f64> = (0..=points)
                .map(|i| lo + (hi - lo) * i as f64 / points as f64)
                .collect();
            let signs = grid
                .iter()
                .map(|&t| Ok(self.excess(a, t)? >= 0.0))
                .collect::<Result<Vec<bool>>>()?;
            let changes: Vec<usize> = (1..signs.len()).filter(|&i| signs[i] != signs[i - 1]).collect();
            if changes.len() == 1 {
                let i = changes[0];
                return Ok((grid[i - 1], grid[i]));
            }
        }
        Err(Error::RootFinding(
            "mean crosses 1 more than once on the refined grid".into(),
        ))
    }

    fn criterion(&self, a: &DegreeSet) -> Result<Option<CriterionCheck>> {
        let rho = self.radius();
        if !(rho > 1.0 && rho.is_finite()) {
            return Ok(None);
        }
        let m = match self.moments(&DegreeSet::all(), &rho) {
            Ok(m) => m,
            Err(Error::Divergent(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !(m.g_prime < 1.0) || !(m.g < rho) {
            return Ok(None);
        }
        let y = self.tilt(&DegreeSet::all(), &rho)?.law;
        let ym = y.moments(a, &1.0)?;
        let conditional_mean = ym.x_in_a / ym.in_a;
        let threshold = (rho - rho * m.g_prime) / (rho - m.g);
        Ok(Some(CriterionCheck {
            conditional_mean,
            threshold,
            non_generic: conditional_mean < threshold,
            agrees: true,
        }))
    }
}

impl CriterionCheck {
    fn agrees_with(&self, verdict: &Verdict) -> bool {
        // On the boundary both answers are numerically defensible.
        let near = (self.conditional_mean - self.threshold).abs() <= 1e-9 * self.threshold.abs().max(1.0);
        near || self.non_generic != verdict.is_generic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn binary_critical_tilt_over_all() {
        let p = OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap();
        let c = p.classify(&DegreeSet::all()).unwrap();
        let t = c.verdict.theta();
        assert!(c.verdict.is_generic());
        assert!((t - 1.5f64.sqrt()).abs() < 1e-12, "{t}");
        assert!((c.mean_at_theta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn critical_law_needs_no_tilt() {
        let p = OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap();
        for a in ["0", "2", "N"] {
            let s = p.p_star(&a.parse().unwrap()).unwrap();
            assert_eq!(s.classification.verdict, Verdict::Generic { theta_c: 1.0 });
            assert_eq!(s.exact.as_ref(), Some(&p));
        }
    }

    #[test]
    fn heavy_tail_is_non_generic() {
        let p = OffspringLaw::with_tail(vec![0.5], None, 3.0, 1.0).unwrap();
        for a in ["N", "0", "1,2", "geq:3"] {
            let a: DegreeSet = a.parse().unwrap();
            let c = p.classify(&a).unwrap();
            assert_eq!(c.verdict, Verdict::NonGeneric { theta_star: 1.0 });
            assert!(p.critical_tilt(&a).unwrap().is_none());
        }
    }

    #[test]
    fn domain_of_binary() {
        let p = OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap();
        let d = p.tilt_domain(&DegreeSet::all()).unwrap();
        assert!(d.upper.is_infinite());
        let d = p.tilt_domain(&DegreeSet::finite([0])).unwrap();
        assert!((d.upper - 2.0).abs() < 1e-12 && d.upper_attained && d.lower == 0.0);
        // 0 ∉ A: θ²/2 + 1/2 ≤ θ only at θ = 1 for A = {2}? No: A^c = {0}.
        let d = p.tilt_domain(&DegreeSet::finite([2])).unwrap();
        assert!((d.lower - 0.5).abs() < 1e-12);
        assert!(d.contains(0.75) && !d.contains(0.25));
    }

    #[test]
    fn geometric_tail_non_generic_for_zero() {
        // ρ = 2 with g'(ρ) < 1 thanks to a steep power factor.
        let p = OffspringLaw::with_tail(vec![0.7], None, 6.0, 0.5).unwrap();
        let c = p.classify(&DegreeSet::finite([0])).unwrap();
        assert!(!c.verdict.is_generic());
        assert_eq!(c.verdict.theta(), 2.0);
        let chk = c.criterion.unwrap();
        assert!(chk.agrees && chk.non_generic);
        // For a large singleton the criterion flips to generic.
        let c = p.classify(&DegreeSet::finite([40])).unwrap();
        assert!(c.verdict.is_generic());
        assert!(c.criterion.unwrap().agrees);
    }

    #[test]
    fn envelope_scan_is_unimodal() {
        let y = OffspringLaw::<Rational>::from_strs(&["1/2", "0", "1/2"])
            .unwrap()
            .to_f64_law();
        let env = conditional_mean_scan(&y, 3).unwrap();
        // A_1 = ℕ gives 1, A_2 = {0,2} gives 1, A_3 = {0} gives 0.
        assert_eq!(env.values, vec![(1, 1.0), (2, 1.0), (3, 0.0)]);
        assert!(env.n0 == 1 || env.n0 == 2);
    }
}
