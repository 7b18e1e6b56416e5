//! Random generation: plain GW trees, trees conditioned on `L_A` by
//! rejection, and windows of the two limit trees.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). A run is identified by a
//! 64-bit seed; sample `i` of a batch uses the stream `i` of the generator
//! seeded with `seed_from_u64(seed)`, so batches do not depend on the thread
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};
use crate::limit::LimitKind;
use crate::offspring::OffspringLaw;
use crate::scalar::Scalar;
use crate::tree::{visible_children, DegreeTag, Tree, WindowedTree};

pub const DEFAULT_MAX_NODES: usize = 1_000_000;
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub max_nodes: usize,
    pub max_attempts: u64,
    pub window: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            seed: 0,
            max_nodes: DEFAULT_MAX_NODES,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            window: 3,
        }
    }
}

impl SampleConfig {
    pub fn with_seed(seed: u64) -> Self {
        SampleConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 || self.max_attempts == 0 {
            return Err(Error::Precondition("sampling caps must be positive".into()));
        }
        Ok(())
    }

    /// The generator for stream `stream` of this seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// `count` independent draws, draw `i` from stream `i`; computed in parallel,
/// returned in order.
pub fn batch<R, F>(cfg: &SampleConfig, count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut ChaCha8Rng) -> R + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(&mut cfg.rng(i as u64)))
        .collect()
}

/// Exact sampler for a law on ℕ: inversion on the head, rejection from a
/// geometric or Pareto envelope on the analytic tail.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    cumulative: Vec<f64>,
    last: usize,
    tail: Option<TailSampler>,
}

#[derive(Debug, Clone)]
struct TailSampler {
    start: usize,
    exponent: f64,
    envelope: Envelope,
}

#[derive(Debug, Clone)]
enum Envelope {
    /// Proposal `∝ q^k` on `k ≥ start`; accept with `h(k)/h_max`,
    /// `h(k) = k^{-β}(r/q)^k`.
    Geometric { q: f64, log_ratio: f64, log_h_max: f64 },
    /// `r = 1`: proposal `⌊Y⌋`, `Y` Pareto(β − 1) on `[start, ∞)`.
    Pareto,
}

impl DiscreteSampler {
    pub fn new(law: &OffspringLaw<f64>) -> Result<Self> {
        let head = law.head();
        let mut cumulative = Vec::with_capacity(head.len());
        let mut acc = 0.0;
        for &p in head {
            acc += p;
            cumulative.push(acc);
        }
        let last = head.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let tail = match law.tail() {
            None => None,
            Some(t) => {
                let start = head.len().max(1);
                let beta = t.exponent;
                let r = t.ratio;
                let envelope = if r >= 1.0 {
                    if beta <= 1.0 {
                        return Err(Error::InvalidLaw("tail is not summable".into()));
                    }
                    Envelope::Pareto
                } else {
                    // Polynomially growing factors need a flatter proposal.
                    let q = if beta >= 0.0 { r } else { r.sqrt() };
                    let log_ratio = (r / q).ln();
                    let log_h = |k: f64| -beta * k.ln() + k * log_ratio;
                    let mut log_h_max = log_h(start as f64);
                    if beta < 0.0 && log_ratio < 0.0 {
                        let k_star = beta / log_ratio;
                        for k in [k_star.floor(), k_star.ceil()] {
                            if k >= start as f64 {
                                log_h_max = log_h_max.max(log_h(k));
                            }
                        }
                    }
                    Envelope::Geometric {
                        q,
                        log_ratio,
                        log_h_max,
                    }
                };
                Some(TailSampler {
                    start,
                    exponent: beta,
                    envelope,
                })
            }
        };
        Ok(DiscreteSampler {
            cumulative,
            last,
            tail,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let head_mass = self.cumulative.last().copied().unwrap_or(0.0);
        match &self.tail {
            Some(t) if u >= head_mass => t.sample(rng),
            _ => {
                let i = self.cumulative.partition_point(|&c| c <= u);
                i.min(self.last)
            }
        }
    }
}

impl TailSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let start = self.start as f64;
        loop {
            match self.envelope {
                Envelope::Geometric {
                    q,
                    log_ratio,
                    log_h_max,
                } => {
                    let k = if q <= 0.0 {
                        self.start
                    } else {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        let jump = (u.ln() / q.ln()).floor();
                        if !jump.is_finite() || jump > 1e15 {
                            continue;
                        }
                        self.start + jump as usize
                    };
                    let kf = k as f64;
                    let log_h = -self.exponent * kf.ln() + kf * log_ratio;
                    let v: f64 = rng.random();
                    if v.ln() <= log_h - log_h_max {
                        return k;
                    }
                }
                Envelope::Pareto => {
                    let a = self.exponent - 1.0;
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let y = start * u.powf(-1.0 / a);
                    if !(y < 1e15) {
                        continue;
                    }
                    let k = y.floor();
                    // Target k^{-β}, proposal ∫_k^{k+1} y^{-β}; the ratio is
                    // decreasing in k, so its value at `start` bounds it.
                    let ratio = |k: f64| k.powf(-self.exponent) / pareto_cell(k, self.exponent);
                    let v: f64 = rng.random();
                    if v * ratio(start) <= ratio(k) {
                        return k as usize;
                    }
                }
            }
        }
    }
}

/// `∫_k^{k+1} y^{-β} dy`.
fn pareto_cell(k: f64, beta: f64) -> f64 {
    let a = beta - 1.0;
    // k^{-a}(1 − (1 + 1/k)^{-a}) / a, written to avoid cancellation.
    k.powf(-a) * (-(-a * (1.0 / k).ln_1p()).exp_m1()) / a
}

/// A GW tree with the given degree sampler, or [`Error::CapExceeded`].
pub fn sample_gw_with<R: Rng + ?Sized>(sampler: &DiscreteSampler, max_nodes: usize, rng: &mut R) -> Result<Tree> {
    let mut degrees = Vec::new();
    let mut pending: usize = 1;
    while pending > 0 {
        if degrees.len() >= max_nodes {
            return Err(Error::CapExceeded { cap: max_nodes });
        }
        let d = sampler.sample(rng);
        degrees.push(d);
        pending = pending - 1 + d;
        if pending > max_nodes {
            return Err(Error::CapExceeded { cap: max_nodes });
        }
    }
    Ok(Tree::from_degrees_unchecked(degrees))
}

fn check_gw<T: Scalar>(law: &OffspringLaw<T>) -> Result<OffspringLaw<f64>> {
    let f = law.to_f64_law();
    if f.mean()? > 1.0 + 1e-12 {
        return Err(Error::Precondition("supercritical laws are not sampled".into()));
    }
    Ok(f)
}

/// One GW tree from stream 0 of the configured seed.
pub fn sample_gw<T: Scalar>(law: &OffspringLaw<T>, cfg: &SampleConfig) -> Result<Tree> {
    cfg.validate()?;
    let sampler = DiscreteSampler::new(&check_gw(law)?)?;
    sample_gw_with(&sampler, cfg.max_nodes, &mut cfg.rng(0))
}

/// Conditioning event on `L_A(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "n")]
pub enum Target {
    Exactly(usize),
    AtLeast(usize),
}

impl Target {
    pub fn accepts(&self, la: usize) -> bool {
        match *self {
            Target::Exactly(n) => la == n,
            Target::AtLeast(n) => la >= n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditioned {
    pub tree: Tree,
    pub attempts: u64,
}

/// Rejection sampler for a fixed law and set, reusable across draws.
#[derive(Debug, Clone)]
pub struct ConditionedSampler {
    sampler: DiscreteSampler,
    a: DegreeSet,
    target: Target,
    max_nodes: usize,
    max_attempts: u64,
}

impl ConditionedSampler {
    pub fn new<T: Scalar>(law: &OffspringLaw<T>, a: &DegreeSet, target: Target, cfg: &SampleConfig) -> Result<Self> {
        cfg.validate()?;
        let f = check_gw(law)?;
        f.validate_gw()?;
        Ok(ConditionedSampler {
            sampler: DiscreteSampler::new(&f)?,
            a: a.clone(),
            target,
            max_nodes: cfg.max_nodes,
            max_attempts: cfg.max_attempts,
        })
    }

    /// One proposal; `None` when rejected. Proposals whose `L_A` already
    /// overshoots an exact target are abandoned early.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<Tree>> {
        let limit = match self.target {
            Target::Exactly(n) => n,
            Target::AtLeast(_) => usize::MAX,
        };
        let mut degrees = Vec::new();
        let mut pending: usize = 1;
        let mut la = 0usize;
        while pending > 0 {
            if degrees.len() >= self.max_nodes || pending > self.max_nodes {
                return Err(Error::CapExceeded { cap: self.max_nodes });
            }
            let d = self.sampler.sample(rng);
            if self.a.contains(d) {
                la += 1;
                if la > limit {
                    return Ok(None);
                }
            }
            degrees.push(d);
            pending = pending - 1 + d;
        }
        Ok(self
            .target
            .accepts(la)
            .then(|| Tree::from_degrees_unchecked(degrees)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Conditioned> {
        for attempt in 1..=self.max_attempts {
            if let Some(tree) = self.propose(rng)? {
                return Ok(Conditioned {
                    tree,
                    attempts: attempt,
                });
            }
        }
        Err(Error::AttemptsExhausted {
            attempts: self.max_attempts,
            accepted: 0,
            rate: 0.0,
        })
    }
}

/// One conditioned tree from stream 0.
pub fn sample_conditioned<T: Scalar>(
    law: &OffspringLaw<T>,
    a: &DegreeSet,
    target: Target,
    cfg: &SampleConfig,
) -> Result<Conditioned> {
    ConditionedSampler::new(law, a, target, cfg)?.sample(&mut cfg.rng(0))
}

/// A limit-tree window and its visible special nodes, root first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinedWindow {
    pub tree: WindowedTree,
    pub spine: Vec<usize>,
}

/// Sampler for windows `r_{h,∞}` of a limit tree.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    kind: LimitKind,
    normal: DiscreteSampler,
    biased: DiscreteSampler,
    /// Probability that a special node has infinitely many children.
    infinite: f64,
    window: usize,
}

impl LimitSampler {
    pub fn new<T: Scalar>(law: &OffspringLaw<T>, kind: LimitKind, window: usize) -> Result<Self> {
        let f = check_gw(law)?;
        let mu = f.mean()?;
        if mu <= 0.0 {
            return Err(Error::Precondition("limit trees need μ > 0".into()));
        }
        let infinite = match kind {
            LimitKind::Kesten => 0.0,
            LimitKind::Condensation => (1.0 - mu).max(0.0),
        };
        Ok(LimitSampler {
            kind,
            normal: DiscreteSampler::new(&f)?,
            biased: DiscreteSampler::new(&f.size_biased()?)?,
            infinite,
            window,
        })
    }

    pub fn kind(&self) -> LimitKind {
        self.kind
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WindowedTree {
        self.sample_with_spine(rng).tree
    }

    /// A window together with the preorder indices of its special nodes.
    pub fn sample_with_spine<R: Rng + ?Sized>(&self, rng: &mut R) -> SpinedWindow {
        let mut degrees = Vec::new();
        let mut tags = Vec::new();
        let mut spine = Vec::new();
        self.grow(true, 0, rng, &mut degrees, &mut tags, &mut spine);
        SpinedWindow {
            tree: WindowedTree::new_unchecked(self.window, Tree::from_degrees_unchecked(degrees), tags),
            spine,
        }
    }

    fn grow<R: Rng + ?Sized>(
        &self,
        special: bool,
        depth: usize,
        rng: &mut R,
        degrees: &mut Vec<usize>,
        tags: &mut Vec<DegreeTag>,
        spine: &mut Vec<usize>,
    ) {
        if special {
            spine.push(degrees.len());
        }
        let h = self.window;
        // `None` is an infinite degree.
        let degree = if special {
            let u: f64 = rng.random();
            if u < self.infinite {
                None
            } else {
                Some(self.biased.sample(rng))
            }
        } else {
            Some(self.normal.sample(rng))
        };
        let visible = visible_children(depth, degree.unwrap_or(usize::MAX), h);
        let (tag, special_child) = match degree {
            None => (DegreeTag::Infinite, None),
            Some(k) => {
                let tag = if visible == k {
                    DegreeTag::Finite(k)
                } else {
                    DegreeTag::TruncatedAtWindow
                };
                let pick = (special && k > 0).then(|| rng.random_range(0..k));
                (tag, pick)
            }
        };
        degrees.push(visible);
        tags.push(tag);
        for i in 0..visible {
            self.grow(special_child == Some(i), depth + 1, rng, degrees, tags, spine);
        }
    }
}

/// One window of `τ*(p)`, from stream 0.
pub fn sample_condensation<T: Scalar>(law: &OffspringLaw<T>, cfg: &SampleConfig) -> Result<WindowedTree> {
    if law.to_f64_law().mean()? >= 1.0 {
        return Err(Error::Precondition("the condensation tree needs μ < 1".into()));
    }
    Ok(LimitSampler::new(law, LimitKind::Condensation, cfg.window)?.sample(&mut cfg.rng(0)))
}

/// One window of Kesten's tree, from stream 0.
pub fn sample_kesten<T: Scalar>(law: &OffspringLaw<T>, cfg: &SampleConfig) -> Result<WindowedTree> {
    Ok(LimitSampler::new(law, LimitKind::Kesten, cfg.window)?.sample(&mut cfg.rng(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn binary() -> OffspringLaw<Rational> {
        OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap()
    }

    #[test]
    fn discrete_sampler_frequencies() {
        let law = OffspringLaw::from_pmf(vec![0.2, 0.5, 0.3]).unwrap();
        let s = DiscreteSampler::new(&law).unwrap();
        let mut rng = SampleConfig::with_seed(1).rng(0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[s.sample(&mut rng)] += 1;
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = law.pmf(k);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * sd, "k = {k}");
        }
    }

    #[test]
    fn tail_samplers_match_masses() {
        let zeta3 = 1.202_056_903_159_594_2;
        let cases = [
            OffspringLaw::with_tail(vec![0.5], None, 3.0, 1.0).unwrap(),
            OffspringLaw::with_tail(vec![0.5], None, 0.0, 0.5).unwrap(),
            OffspringLaw::with_tail(vec![0.5, 0.1], None, -1.5, 0.6).unwrap(),
        ];
        let n = 200_000;
        for law in &cases {
            let s = DiscreteSampler::new(law).unwrap();
            let mut rng = SampleConfig::with_seed(7).rng(3);
            let mut counts = vec![0usize; 12];
            for _ in 0..n {
                let k = s.sample(&mut rng);
                if k < counts.len() {
                    counts[k] += 1;
                }
            }
            for (k, &c) in counts.iter().enumerate() {
                let p = law.pmf(k);
                let sd = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
                assert!((c as f64 / n as f64 - p).abs() < 4.5 * sd, "{law:?} k = {k}");
            }
        }
        assert!((cases[0].pmf(1) - 0.5 / zeta3).abs() < 1e-15);
    }

    #[test]
    fn gw_samples() {
        let cfg = SampleConfig::with_seed(42);
        let leafy = OffspringLaw::from_strs(&["1"]).unwrap();
        assert_eq!(sample_gw(&leafy, &cfg).unwrap(), Tree::leaf());
        let a = sample_gw(&binary(), &cfg).unwrap();
        let b = sample_gw(&binary(), &cfg).unwrap();
        assert_eq!(a, b);
        let tiny = SampleConfig {
            max_nodes: 1,
            ..cfg
        };
        let r: Vec<_> = batch(&tiny, 64, |rng| {
            sample_gw_with(&DiscreteSampler::new(&binary().to_f64_law()).unwrap(), 1, rng)
        });
        assert!(r.iter().any(|x| matches!(x, Err(Error::CapExceeded { .. }))));
    }

    #[test]
    fn conditioned_samples() {
        let cfg = SampleConfig::with_seed(5);
        let s = sample_conditioned(&binary(), &DegreeSet::finite([0]), Target::Exactly(2), &cfg).unwrap();
        assert_eq!(s.tree, "(()())".parse().unwrap());
        let s = sample_conditioned(&binary(), &DegreeSet::all(), Target::Exactly(1), &cfg).unwrap();
        assert_eq!(s.tree, Tree::leaf());
        let s = sample_conditioned(&binary(), &DegreeSet::finite([0]), Target::AtLeast(4), &cfg).unwrap();
        assert!(s.tree.l_a(&DegreeSet::finite([0])) >= 4);
    }

    #[test]
    fn limit_windows() {
        let sub = OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap();
        let cfg = SampleConfig {
            window: 3,
            ..SampleConfig::with_seed(9)
        };
        let sampler = LimitSampler::new(&sub, LimitKind::Condensation, 3).unwrap();
        for w in batch(&cfg, 2000, |rng| sampler.sample(rng)) {
            assert!(w.infinite_count() <= 1);
            WindowedTree::new(3, w.shape().clone(), w.tags().to_vec()).unwrap();
        }
        let k = sample_kesten(&binary(), &cfg).unwrap();
        assert!(k.shape().len() >= 4);
        assert!(sample_condensation(&binary(), &cfg).is_err());
    }
}
