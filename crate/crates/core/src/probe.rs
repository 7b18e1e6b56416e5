//! Convergence experiments: exact conditional probabilities of `T_+` events
//! against the limit-tree values, tilt invariance of the conditioning, and
//! Monte Carlo distances on small windows.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};
use crate::limit::{condensation_tplus, kesten_tplus, LimitKind, LimitLaw};
use crate::offspring::{Classification, LawDescriptor, OffspringLaw};
use crate::sampler::{batch, ConditionedSampler, SampleConfig, Target};
use crate::scalar::{Backend, Rational, Scalar};
use crate::tree::{TPlusEvent, Tree};
use crate::walk::LaWalk;

/// A probability in whichever backend produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum Num {
    Exact(Rational),
    Float(f64),
}

impl Num {
    pub fn from_scalar<T: Scalar>(x: &T) -> Num {
        match x.as_rational() {
            Some(r) => Num::Exact(r),
            None => Num::Float(x.to_f64()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Exact(r) => crate::scalar::ratio_to_f64(r),
            Num::Float(x) => *x,
        }
    }

    /// `|a − b|`, exact when both are.
    pub fn distance(&self, other: &Num) -> Num {
        match (self, other) {
            (Num::Exact(a), Num::Exact(b)) => {
                let d = a - b;
                Num::Exact(if d < Rational::from_int(0) { -d } else { d })
            }
            _ => Num::Float((self.to_f64() - other.to_f64()).abs()),
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Exact(r) => write!(f, "{r}"),
            Num::Float(x) => write!(f, "{x:?}"),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Num::Exact(r) => s.serialize_str(&r.to_string()),
            Num::Float(x) => s.serialize_f64(*x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub n: usize,
    pub event: TPlusEvent,
    pub conditional: Num,
    pub limit: Num,
    pub gap: Num,
}

/// Condensation and Kesten values of one event for a critical `p*_A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCheck {
    pub event: TPlusEvent,
    pub condensation: Num,
    pub kesten: Num,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub law: LawDescriptor,
    pub set: String,
    pub backend: Backend,
    pub classification: Classification,
    /// `p*_A`, whose limit tree gives the limit column.
    pub limit_law: LawDescriptor,
    pub grid: Vec<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeTable {
    pub manifest: Manifest,
    pub rows: Vec<ProbeRow>,
    pub critical: Option<Vec<CriticalCheck>>,
}

impl ProbeTable {
    pub const CSV_HEADER: &'static str = "n,event,conditional,limit,gap";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},\"{}\",{},{},{}\n", r.n, r.event, r.conditional, r.limit, r.gap));
        }
        out
    }

    /// Rows of one event, by increasing `n`.
    pub fn column(&self, event: &TPlusEvent) -> Vec<&ProbeRow> {
        self.rows.iter().filter(|r| &r.event == event).collect()
    }
}

/// Limit values of the events under `p*_A`, exact when no tilt was needed.
fn limit_values<T: Scalar>(p_star: &crate::offspring::PStar<T>, events: &[TPlusEvent]) -> Result<Vec<Num>> {
    events
        .iter()
        .map(|e| match &p_star.exact {
            Some(law) => condensation_tplus(law, &e.t, &e.x, e.k).map(|v| Num::from_scalar(&v)),
            None => condensation_tplus(&p_star.law, &e.t, &e.x, e.k).map(Num::Float),
        })
        .collect()
}

/// Exact `P(τ ∈ T_+(t, x, k) | L_A(τ) = n)` for every event and `n`, next to
/// the value for the limit tree of `p*_A`. The conditioning is
/// tilt-invariant, so conditionals are computed with `p` itself.
pub fn convergence_table<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    events: &[TPlusEvent],
    grid: &[usize],
) -> Result<ProbeTable> {
    let p_star = law.p_star(a)?;
    let limits = limit_values(&p_star, events)?;
    let max_n = grid.iter().copied().max().unwrap_or(1);
    let walk = LaWalk::new(law, a, max_n)?;
    let jobs: Vec<(usize, usize)> = (0..events.len())
        .flat_map(|e| grid.iter().map(move |&n| (e, n)))
        .collect();
    let values: Vec<Result<Num>> = jobs
        .par_iter()
        .map(|&(e, n)| walk.conditional_tplus(n, &events[e]).map(|v| Num::from_scalar(&v)))
        .collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for ((e, n), v) in jobs.into_iter().zip(values) {
        let conditional = v?;
        let gap = conditional.distance(&limits[e]);
        rows.push(ProbeRow {
            n,
            event: events[e].clone(),
            conditional,
            limit: limits[e].clone(),
            gap,
        });
    }
    let critical = if p_star.classification.critical {
        Some(critical_checks(law, events)?)
    } else {
        None
    };
    Ok(ProbeTable {
        manifest: Manifest {
            law: law.to_descriptor(),
            set: a.to_string(),
            backend: T::BACKEND,
            classification: p_star.classification.clone(),
            limit_law: p_star.law.to_descriptor(),
            grid: grid.to_vec(),
            seed: None,
        },
        rows,
        critical,
    })
}

fn critical_checks<T: Scalar>(law: &OffspringLaw<T>, events: &[TPlusEvent]) -> Result<Vec<CriticalCheck>> {
    events
        .iter()
        .map(|e| {
            let c = condensation_tplus(law, &e.t, &e.x, e.k)?;
            let k = kesten_tplus(law, &e.t, &e.x, e.k)?;
            let agree = if T::is_exact() {
                c == k
            } else {
                (c.to_f64() - k.to_f64()).abs() <= 1e-12
            };
            Ok(CriticalCheck {
                event: e.clone(),
                condensation: Num::from_scalar(&c),
                kesten: Num::from_scalar(&k),
                agree,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltInvarianceReport {
    pub tree: Tree,
    pub n: usize,
    /// `(θ, P(τ_{A,θ} = t | L_A = n))`
    pub values: Vec<(Num, Num)>,
    pub invariant: bool,
    /// Grid points whose value differs from the first one.
    pub discrepancies: Vec<Num>,
}

/// `P(τ_{A,θ} = t | L_A(τ_{A,θ}) = n)` across a grid of tilts.
pub fn tilt_invariance<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    t: &Tree,
    thetas: &[T],
    n: usize,
) -> Result<TiltInvarianceReport> {
    let mut values = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let tilted = law.tilt(a, theta)?.law;
        let v = if t.l_a(a) == n {
            let walk = LaWalk::new(&tilted, a, n)?;
            let den = walk.prob_la(n)?;
            if den.is_zero() {
                return Err(Error::ZeroProbability(format!("P(L_A = {n}) = 0")));
            }
            crate::limit::tree_probability(&tilted, t) / den
        } else {
            T::zero()
        };
        values.push((theta.clone(), v));
    }
    let same = |x: &T, y: &T| {
        if T::is_exact() {
            x == y
        } else {
            (x.to_f64() - y.to_f64()).abs() <= 1e-12 * y.to_f64().abs().max(1e-300)
        }
    };
    let discrepancies: Vec<Num> = values
        .iter()
        .skip(1)
        .filter(|(_, v)| !same(v, &values[0].1))
        .map(|(th, _)| Num::from_scalar(th))
        .collect();
    Ok(TiltInvarianceReport {
        tree: t.clone(),
        n,
        invariant: discrepancies.is_empty(),
        discrepancies,
        values: values
            .iter()
            .map(|(th, v)| (Num::from_scalar(th), Num::from_scalar(v)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvEstimate {
    pub estimate: f64,
    /// Sum over atoms of Wilson half-widths at 95%, halved like the distance.
    pub half_width: f64,
    pub samples: usize,
    pub attempts: u64,
    pub atoms: usize,
}

const Z95: f64 = 1.959_963_984_540_054;

fn wilson_half_width(hat: f64, n: f64) -> f64 {
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (hat * (1.0 - hat) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Total variation between the shape of `r_{h,∞}` of `τ` given `L_A(τ) = n`
/// (by rejection sampling) and that of the limit tree of `p*_A`.
pub fn tv_window<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    n: usize,
    h: usize,
    samples: usize,
    cfg: &SampleConfig,
) -> Result<TvEstimate> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is needed".into()));
    }
    let p_star = law.p_star(a)?;
    let kind = if p_star.classification.critical {
        LimitKind::Kesten
    } else {
        LimitKind::Condensation
    };
    let exact = LimitLaw::new(p_star.law.clone(), kind)?.window_law(h)?;
    let sampler = ConditionedSampler::new(law, a, Target::Exactly(n), cfg)?;
    let draws = batch(cfg, samples, |rng| {
        sampler.sample(rng).map(|c| (c.tree.restrict(h).shape().clone(), c.attempts))
    });
    let mut counts: BTreeMap<Tree, usize> = BTreeMap::new();
    let mut attempts = 0;
    for d in draws {
        let (shape, tries) = d?;
        attempts += tries;
        *counts.entry(shape).or_default() += 1;
    }
    let total = samples as f64;
    let mut atoms: Vec<&Tree> = exact.keys().chain(counts.keys()).collect();
    atoms.sort();
    atoms.dedup();
    let mut tv = 0.0;
    let mut hw = 0.0;
    for t in &atoms {
        let hat = counts.get(*t).copied().unwrap_or(0) as f64 / total;
        let q = exact.get(*t).copied().unwrap_or(0.0);
        tv += (hat - q).abs();
        if h > 0 {
            hw += wilson_half_width(hat, total);
        }
    }
    Ok(TvEstimate {
        estimate: tv / 2.0,
        half_width: hw / 2.0,
        samples,
        attempts,
        atoms: atoms.len(),
    })
}
