//! Random-walk tables and the probabilities built on them: Dwass's formula,
//! the ratios δ, the strong-ratio quantities, `P(L_A(τ) = n)` and exact
//! conditional probabilities of `T_+(t, x, k)` given `L_A(τ) = n`.

use serde::Serialize;

use crate::degree_set::DegreeSet;
use crate::derived::{DerivedLawBundle, Regime};
use crate::error::{Error, Result};
use crate::limit::d_weight;
use crate::offspring::OffspringLaw;
use crate::scalar::Scalar;
use crate::tree::TPlusEvent;

/// First `len` coefficients of `a * b`.
pub fn convolve_truncated<T: Scalar>(a: &[T], b: &[T], len: usize) -> Vec<T> {
    T::convolve_truncated(a, b, len)
}

/// `P(S_n = m)` for `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkTable<T> {
    pub n: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> WalkTable<T> {
    /// `P(S_n = m)`, zero for negative or out-of-table `m`.
    pub fn at(&self, m: i64) -> T {
        if m < 0 {
            return T::zero();
        }
        self.values.get(m as usize).cloned().unwrap_or_else(T::zero)
    }
}

/// Exact law of `S_n` on `0..=m_max`. Only `increments[0..=m_max]` matter.
pub fn walk_pmf<T: Scalar>(increments: &[T], n: usize, m_max: usize) -> WalkTable<T> {
    let len = m_max + 1;
    let inc: Vec<T> = (0..len)
        .map(|k| increments.get(k).cloned().unwrap_or_else(T::zero))
        .collect();
    let support = inc.iter().filter(|x| !x.is_zero()).count().max(1);
    let mut identity = vec![T::zero(); len];
    identity[0] = T::one();
    if n == 0 {
        return WalkTable { n, values: identity };
    }
    let sequential = n as f64 * len as f64 * support as f64;
    let squaring = 2.0 * (usize::BITS - n.leading_zeros()) as f64 * (len as f64).powi(2) / 2.0;
    let values = if sequential <= squaring {
        let mut row = identity;
        for _ in 0..n {
            row = convolve_truncated(&row, &inc, len);
        }
        row
    } else {
        let mut result: Option<Vec<T>> = None;
        let mut base = inc;
        let mut e = n;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => convolve_truncated(&r, &base, len),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = convolve_truncated(&base, &base, len);
        }
        result.expect("n > 0")
    };
    WalkTable { n, values }
}

/// Support lattice `offset + period·ℤ` of an increment law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lattice {
    pub offset: usize,
    pub period: usize,
}

impl Lattice {
    pub fn of<T: Scalar>(increments: &[T]) -> Lattice {
        let support: Vec<usize> = (0..increments.len())
            .filter(|&k| !increments[k].is_zero())
            .collect();
        let offset = support.first().copied().unwrap_or(0);
        let period = support
            .iter()
            .fold(0usize, |g, &k| num_integer::gcd(g, k - offset));
        Lattice { offset, period }
    }

    /// Whether `S_n = value` is compatible with the lattice.
    pub fn admits(&self, n: usize, value: i64) -> bool {
        let base = (n * self.offset) as i64;
        if value < base {
            return false;
        }
        self.period == 0 && value == base || self.period > 0 && (value - base) % self.period as i64 == 0
    }

    /// [`Error::OffLattice`] unless [`Lattice::admits`] holds.
    pub fn check(&self, what: &str, n: usize, value: i64) -> Result<()> {
        if self.admits(n, value) {
            Ok(())
        } else {
            Err(self.off_lattice(what, n, value))
        }
    }

    fn off_lattice(&self, what: &str, n: usize, value: i64) -> Error {
        let base = (n * self.offset) as i64;
        let residue = if self.period == 0 {
            0
        } else {
            (value - base).rem_euclid(self.period as i64) as usize
        };
        Error::OffLattice {
            what: what.to_string(),
            n,
            period: self.period,
            residue,
        }
    }
}

/// `P_k(|τ| = n) = (k/n) P(S_n = n − k)`.
pub fn dwass<T: Scalar>(law: &OffspringLaw<T>, k: usize, n: usize) -> T {
    if k == 0 {
        return if n == 0 { T::one() } else { T::zero() };
    }
    if k > n {
        return T::zero();
    }
    let inc = law.pmf_prefix(n - k);
    let row = walk_pmf(&inc, n, n - k);
    T::from_usize(k) / T::from_usize(n) * row.at((n - k) as i64)
}

fn ratio_denominator<T: Scalar>(row: &WalkTable<T>, lattice: &Lattice, n: usize, target: i64, what: &str) -> Result<T> {
    let d = row.at(target);
    if d.is_zero() {
        if !lattice.admits(n, target) {
            return Err(lattice.off_lattice(what, n, target));
        }
        return Err(Error::ZeroProbability(format!("{what}: P(S_{n} = {target}) = 0")));
    }
    Ok(d)
}

/// `P(S_{n−m} = n − k) / P(S_n = n)`.
pub fn srlp_ratio<T: Scalar>(increments: &[T], n: usize, m: i64, k: i64) -> Result<T> {
    let steps = n as i64 - m;
    if steps < 0 {
        return Err(Error::Precondition(format!("n − m = {steps} is negative")));
    }
    let lattice = Lattice::of(&increments[..increments.len().min(n + 1)]);
    let top = n.max((n as i64 - k).max(0) as usize);
    let den_row = walk_pmf(increments, n, n);
    let den = ratio_denominator(&den_row, &lattice, n, n as i64, "srlp ratio")?;
    let num_row = walk_pmf(increments, steps as usize, top);
    Ok(num_row.at(n as i64 - k) / den)
}

/// Which of the two δ ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeltaOrder {
    /// weight `p(j)`
    Zero,
    /// weight `j p(j)`
    One,
}

impl DeltaOrder {
    pub fn from_int(order: u8) -> Result<Self> {
        match order {
            0 => Ok(DeltaOrder::Zero),
            1 => Ok(DeltaOrder::One),
            o => Err(Error::Precondition(format!("order must be 0 or 1, not {o}"))),
        }
    }

    fn weight<T: Scalar>(self, j: usize) -> T {
        match self {
            DeltaOrder::Zero => T::one(),
            DeltaOrder::One => T::from_usize(j),
        }
    }
}

/// `δ_n(k, ℓ) = Σ_{j≥k} w(j) p(j) P(S_n = n + ℓ − j) / P(S_n = n)` with the
/// walk driven by `p` itself.
pub fn delta<T: Scalar>(law: &OffspringLaw<T>, order: DeltaOrder, n: usize, k: usize, ell: i64) -> Result<T> {
    let top = (n as i64 + ell).max(n as i64) as usize;
    let inc = law.pmf_prefix(top);
    let row = walk_pmf(&inc, n, top);
    let lattice = Lattice::of(&inc);
    let den = ratio_denominator(&row, &lattice, n, n as i64, "delta")?;
    let mut acc = T::zero();
    let j_max = n as i64 + ell;
    if j_max >= k as i64 {
        for j in k..=(j_max as usize) {
            let pj = law.pmf(j);
            if pj.is_zero() {
                continue;
            }
            let w = row.at(n as i64 + ell - j as i64);
            if !w.is_zero() {
                acc = acc + order.weight::<T>(j) * pj * w;
            }
        }
    }
    Ok(acc / den)
}

/// Limit of [`delta`] (and of its A-variant): `Σ_{j≥k} p(j)` for order 0,
/// `1 − μ + Σ_{j≥k} j p(j)` for order 1.
pub fn delta_limit<T: Scalar>(law: &OffspringLaw<T>, order: DeltaOrder, k: usize) -> Result<T> {
    match order {
        DeltaOrder::Zero => law.mass_from(k),
        DeltaOrder::One => Ok(T::one() - law.mean()? + law.moment1_from(k)?),
    }
}

/// Everything needed to evaluate probabilities of `L_A(τ)`.
#[derive(Debug, Clone)]
pub struct LaWalk<T: Scalar> {
    law: OffspringLaw<T>,
    a: DegreeSet,
    bundle: DerivedLawBundle<T>,
    max_n: usize,
    increments: Vec<T>,
    lattice: Lattice,
}

impl<T: Scalar> LaWalk<T> {
    /// Prepares derived laws up to index `max_n`; every query must keep its
    /// `n` at or below it.
    pub fn new(law: &OffspringLaw<T>, a: &DegreeSet, max_n: usize) -> Result<Self> {
        let bundle = DerivedLawBundle::new(law, a, max_n + 1)?;
        let increments = bundle.pa.masses.clone();
        let lattice = Lattice::of(&increments);
        Ok(LaWalk {
            law: law.clone(),
            a: a.clone(),
            bundle,
            max_n,
            increments,
            lattice,
        })
    }

    pub fn regime(&self) -> Regime {
        self.bundle.regime
    }

    pub fn law(&self) -> &OffspringLaw<T> {
        &self.law
    }

    pub fn set(&self) -> &DegreeSet {
        &self.a
    }

    pub fn bundle(&self) -> &DerivedLawBundle<T> {
        &self.bundle
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.max_n {
            return Err(Error::Precondition(format!(
                "n = {n} exceeds the prepared range {}",
                self.max_n
            )));
        }
        Ok(())
    }

    fn row(&self, steps: usize, m_max: usize) -> WalkTable<T> {
        walk_pmf(&self.increments, steps, m_max)
    }

    fn n_law(&self) -> Vec<T> {
        self.bundle.roots().masses
    }

    fn indicator(&self, j: usize) -> usize {
        usize::from(self.a.contains(j))
    }

    /// `P(L_A(τ) = n)`.
    pub fn prob_la(&self, n: usize) -> Result<T> {
        self.prob_la_forest(1, n)
    }

    /// `P_j(L_A = n)` for a forest of `j` independent trees.
    pub fn prob_la_forest(&self, j: usize, n: usize) -> Result<T> {
        self.check_n(n)?;
        if j == 0 {
            return Ok(if n == 0 { T::one() } else { T::zero() });
        }
        let row = if n > 0 { Some(self.row(n, n)) } else { None };
        let mut w = WSeq::new(self.n_law(), n);
        for _ in 1..j {
            w.advance();
        }
        Ok(self.forest_from(j, n, row.as_ref(), &w))
    }

    /// `P_i(L_A = big_m)` from a prepared row of `S_{big_m}` and `w_i`.
    fn forest_from(&self, i: usize, big_m: usize, row: Option<&WalkTable<T>>, w: &WSeq<T>) -> T {
        if i == 0 {
            return if big_m == 0 { T::one() } else { T::zero() };
        }
        match self.regime() {
            Regime::All | Regime::ZeroInA => {
                if big_m == 0 || i > big_m {
                    return T::zero();
                }
                let row = row.expect("row for positive M");
                T::from_usize(i) / T::from_usize(big_m) * row.at((big_m - i) as i64)
            }
            Regime::ZeroNotInA => {
                if big_m == 0 {
                    return self.n_law().first().cloned().unwrap_or_else(T::zero).powi(i);
                }
                let row = row.expect("row for positive M");
                let mut acc = T::zero();
                for (c, wc) in w.current().iter().enumerate().take(big_m + 1) {
                    if wc.is_zero() {
                        continue;
                    }
                    let s = row.at((big_m - c) as i64);
                    if !s.is_zero() {
                        acc = acc + wc.clone() * s;
                    }
                }
                T::from_usize(i) / T::from_usize(big_m) * acc
            }
        }
    }

    /// `P(τ ∈ T_+(t, x, k) | L_A(τ) = n)`.
    pub fn conditional_tplus(&self, n: usize, event: &TPlusEvent) -> Result<T> {
        self.check_n(n)?;
        let den = self.prob_la(n)?;
        if den.is_zero() {
            return Err(Error::ZeroProbability(format!("P(L_A = {n}) = 0")));
        }
        Ok(self.joint_tplus(n, event)? / den)
    }

    /// `P(τ ∈ T_+(t, x, k), L_A(τ) = n)`.
    pub fn joint_tplus(&self, n: usize, event: &TPlusEvent) -> Result<T> {
        self.check_n(n)?;
        let t = &event.t;
        let node = t.find_or_err(&event.x)?;
        let ell = t.degree(node);
        let d = d_weight(&self.law, t, &event.x)?;
        if d.is_zero() {
            return Ok(T::zero());
        }
        let la_t = t.l_a(&self.a);
        let m = la_t - self.indicator(ell);
        if m > n {
            return Ok(T::zero());
        }
        // Remaining budget for the extra forest, by whether j ∈ A.
        let budget = [n - m, (n - m).wrapping_sub(1)];
        let rows: Vec<Option<WalkTable<T>>> = budget
            .iter()
            .map(|&b| (b != usize::MAX && b > 0).then(|| self.row(b, b)))
            .collect();
        let j0 = ell.max(event.k);
        let zero_out = self.regime() == Regime::ZeroNotInA;
        let mut w = WSeq::new(self.n_law(), n - m);
        for _ in 0..j0.saturating_sub(ell).saturating_sub(1) * usize::from(zero_out) {
            w.advance();
        }
        let bound = self.law.support_bound();
        let mut acc = T::zero();
        let mut j = j0;
        loop {
            if bound.is_some_and(|b| j >= b) {
                break;
            }
            let i = j - ell;
            if zero_out && j > j0 && i >= 2 {
                w.advance();
            }
            let which = self.indicator(j);
            let big_m = budget[which];
            let pj = self.law.pmf(j);
            if big_m != usize::MAX && !pj.is_zero() {
                let f = self.forest_from(i, big_m, rows[which].as_ref(), &w);
                if !f.is_zero() {
                    acc = acc + pj * f;
                }
            }
            j += 1;
            // Each tree carries at least one A-node unless 0 ∉ A.
            match self.regime() {
                Regime::All | Regime::ZeroInA => {
                    if j - ell > n - m {
                        break;
                    }
                }
                Regime::ZeroNotInA => {
                    if bound.is_none() {
                        let reach = crate::scalar::sum(w.m_law()).to_f64();
                        let rest = self.law.mass_from(j)?.to_f64();
                        if reach * rest <= 1e-17 * acc.to_f64().abs() || reach * rest == 0.0 {
                            break;
                        }
                        if j > 50_000_000 {
                            return Err(Error::TailTolerance {
                                what: "degree sum of the conditional probability".into(),
                                remainder: reach * rest,
                            });
                        }
                    }
                }
            }
        }
        Ok(d * acc)
    }

    // ---- appendix quantities, 0 ∈ A -------------------------------------

    fn require(&self, zero_in: bool) -> Result<()> {
        let ok = match self.regime() {
            Regime::All | Regime::ZeroInA => zero_in,
            Regime::ZeroNotInA => !zero_in,
        };
        if ok {
            Ok(())
        } else if zero_in {
            Err(Error::Precondition("this quantity needs 0 in A".into()))
        } else {
            Err(Error::Precondition("this quantity needs 0 outside A".into()))
        }
    }

    /// `n/n_j · P(S_{n_j} = n_j + ℓ − j)` summed against `weight(j) p(j)`.
    fn nj_sum(&self, n: usize, k: usize, ell: i64, weight: impl Fn(usize) -> T) -> Result<T> {
        let rows = [self.row(n, (n as i64 + ell).max(0) as usize), self.row(n - 1, (n as i64 + ell).max(0) as usize)];
        let mut acc = T::zero();
        let j_max = n as i64 + ell;
        if j_max < k as i64 {
            return Ok(acc);
        }
        for j in k..=(j_max as usize) {
            let pj = self.law.pmf(j);
            if pj.is_zero() {
                continue;
            }
            let which = self.indicator(j);
            let nj = n - which;
            let s = rows[which].at(nj as i64 + ell - j as i64);
            if s.is_zero() {
                continue;
            }
            acc = acc + weight(j) * pj * T::from_usize(n) / T::from_usize(nj) * s;
        }
        Ok(acc)
    }

    /// `δ^{0,A}` / `δ^{1,A}`; the walk is driven by `p^A`.
    pub fn delta_a(&self, order: DeltaOrder, n: usize, k: usize, ell: i64) -> Result<T> {
        self.require(true)?;
        self.check_n(n + ell.max(0) as usize)?;
        if n < 2 {
            return Err(Error::Precondition("n must be at least 2".into()));
        }
        let den_row = self.row(n, n);
        let den = ratio_denominator(&den_row, &self.lattice, n, n as i64, "delta_A")?;
        Ok(self.nj_sum(n, k, ell, |j| order.weight(j))? / den)
    }

    /// Both sides of `E[(n/n_X) X 1{X + S_{n_X} = n_X + ℓ}] =
    /// ℓ E[(n/n_X) 1{…}] − (ℓ − 1) P(S_n = n + ℓ − 1)`.
    pub fn sx_check(&self, n: usize, ell: i64) -> Result<(T, T)> {
        self.require(true)?;
        self.check_n(n + ell.max(0) as usize)?;
        if n < 2 {
            return Err(Error::Precondition("n must be at least 2".into()));
        }
        let lhs = self.nj_sum(n, 0, ell, |j| T::from_usize(j))?;
        let plain = self.nj_sum(n, 0, ell, |_| T::one())?;
        let tail = self.row(n, (n as i64 + ell).max(0) as usize).at(n as i64 + ell - 1);
        let rhs = T::from_int(ell) * plain - T::from_int(ell - 1) * tail;
        Ok((lhs, rhs))
    }

    // ---- appendix quantities, 0 ∉ A -------------------------------------

    /// `E[N 1{S_n + N = n}]`; also `n P(L_A = n)`.
    fn n_weighted(&self, steps: usize, target: i64, w: &[T]) -> T {
        if target < 0 {
            return T::zero();
        }
        let row = self.row(steps, target as usize);
        let mut acc = T::zero();
        for (c, wc) in w.iter().enumerate().take(target as usize + 1) {
            if !wc.is_zero() {
                acc = acc + wc.clone() * row.at(target - c as i64);
            }
        }
        acc
    }

    fn n_weighted_den(&self, n: usize) -> Result<T> {
        let w = WSeq::new(self.n_law(), n);
        let den = self.n_weighted(n, n as i64, w.current());
        if den.is_zero() {
            return Err(Error::ZeroProbability(format!("E[N 1(S_{n} + N = {n})] = 0")));
        }
        Ok(den)
    }

    /// `E[N 1{S_{n−m} + N + M_r = n − k}] / E[N 1{S_n + N = n}]`.
    pub fn weighted_ratio(&self, n: usize, m: i64, k: i64, with_m: usize) -> Result<T> {
        self.require(false)?;
        self.check_n(n.max((n as i64 - k).max(0) as usize))?;
        let steps = n as i64 - m;
        if steps < 0 {
            return Err(Error::Precondition("n − m must be non-negative".into()));
        }
        let den = self.n_weighted_den(n)?;
        let mut w = WSeq::new(self.n_law(), n.max((n as i64 - k).max(0) as usize));
        for _ in 0..with_m {
            w.advance();
        }
        let num = self.n_weighted(steps as usize, n as i64 - k, w.current());
        Ok(num / den)
    }

    /// `B_{n,ℓ} = Σ_{j>ℓ} p(j)(j−ℓ)(n/n_j) E[N 1{S_{n_j} + M_{j−1−ℓ} + N = n_j}]
    /// / E[N 1{S_n + N = n}]`.
    pub fn b_nl(&self, n: usize, ell: i64) -> Result<T> {
        self.require(false)?;
        self.check_n(n)?;
        if n < 2 {
            return Err(Error::Precondition("n must be at least 2".into()));
        }
        let den = self.n_weighted_den(n)?;
        let rows = [self.row(n, n), self.row(n - 1, n)];
        let j0 = (ell + 1).max(0) as usize;
        let mut w = WSeq::new(self.n_law(), n);
        // w currently holds w_1; we need w_{j−ℓ}.
        for _ in 1..(j0 as i64 - ell) {
            w.advance();
        }
        let bound = self.law.support_bound();
        let mut acc = T::zero();
        let mut j = j0;
        loop {
            if bound.is_some_and(|b| j >= b) {
                break;
            }
            if j > j0 {
                w.advance();
            }
            let pj = self.law.pmf(j);
            if !pj.is_zero() {
                let which = self.indicator(j);
                let nj = n - which;
                let mut e = T::zero();
                for (c, wc) in w.current().iter().enumerate().take(nj + 1) {
                    if !wc.is_zero() {
                        e = e + wc.clone() * rows[which].at((nj - c) as i64);
                    }
                }
                if !e.is_zero() {
                    acc = acc + pj * T::from_int(j as i64 - ell) * T::from_usize(n) / T::from_usize(nj) * e;
                }
            }
            j += 1;
            if bound.is_none() {
                let reach = crate::scalar::sum(w.m_law()).to_f64();
                let rest = self.law.moment1_from(j)?.to_f64() + ell.unsigned_abs() as f64 * self.law.mass_from(j)?.to_f64();
                if reach * rest * n as f64 <= 1e-17 * acc.to_f64().abs() {
                    break;
                }
                if j > 50_000_000 {
                    return Err(Error::TailTolerance {
                        what: "B_{n,l} degree sum".into(),
                        remainder: reach * rest,
                    });
                }
            }
        }
        Ok(acc / den)
    }

    /// Limit of `B_{n,ℓ}`: `1 − ℓ` for `ℓ ≤ 0`, `1 − μ + E[(X − ℓ)₊]` above.
    pub fn b_nl_limit(&self, ell: i64) -> Result<T> {
        if ell <= 0 {
            Ok(T::from_int(1 - ell))
        } else {
            Ok(T::one() - self.law.mean()? + self.law.excess_mean(ell as usize, 0)?)
        }
    }
}

/// The sequence `w_i(c) = E[N 1{N + M_{i−1} = c}]`, `i = 1, 2, …`, on
/// `c ≤ len − 1`.
struct WSeq<T> {
    n_law: Vec<T>,
    weighted: Vec<T>,
    m_law: Vec<T>,
    w: Vec<T>,
    len: usize,
}

impl<T: Scalar> WSeq<T> {
    fn new(n_law: Vec<T>, max_c: usize) -> Self {
        let len = max_c + 1;
        let n_law: Vec<T> = (0..len)
            .map(|k| n_law.get(k).cloned().unwrap_or_else(T::zero))
            .collect();
        let weighted: Vec<T> = n_law
            .iter()
            .enumerate()
            .map(|(k, x)| T::from_usize(k) * x.clone())
            .collect();
        let mut m_law = vec![T::zero(); len];
        m_law[0] = T::one();
        let w = weighted.clone();
        WSeq {
            n_law,
            weighted,
            m_law,
            w,
            len,
        }
    }

    /// `w_i` → `w_{i+1}`.
    fn advance(&mut self) {
        self.m_law = convolve_truncated(&self.m_law, &self.n_law, self.len);
        self.w = convolve_truncated(&self.weighted, &self.m_law, self.len);
    }

    fn current(&self) -> &[T] {
        &self.w
    }

    /// Law of `M_{i−1}` (truncated), for tail bounds.
    fn m_law(&self) -> &[T] {
        &self.m_law
    }
}
