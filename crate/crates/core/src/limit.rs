//! Closed-form probabilities of the two limit trees: the condensation tree
//! `τ*(p)` (special nodes draw from `k p(k)` plus an atom `1 − μ` at
//! infinity) and Kesten's tree `τ^S(p)` (special nodes draw from `k p(k)/μ`).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::scalar::Scalar;
use crate::tree::{NodeLabel, Tree};

/// Which limit tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Condensation,
    Kesten,
}

/// `P(τ = t) = ∏_u p(k_u(t))`.
pub fn tree_probability<T: Scalar>(law: &OffspringLaw<T>, t: &Tree) -> T {
    let mut acc = T::one();
    for &k in t.degrees() {
        acc = acc * law.pmf(k);
    }
    acc
}

/// `D(t, x) = ∏_{u ∈ t, u ≠ x} p(k_u(t))`.
pub fn d_weight<T: Scalar>(law: &OffspringLaw<T>, t: &Tree, x: &NodeLabel) -> Result<T> {
    let xi = t.find_or_err(x)?;
    let mut acc = T::one();
    for (u, &k) in t.degrees().iter().enumerate() {
        if u != xi {
            acc = acc * law.pmf(k);
        }
    }
    Ok(acc)
}

/// `D(t, x)` by its definition, `P(τ = S^x(t))/p(0) · P_{k_x}(τ = F_x(t))`:
/// the tree cut at `x`, and the forest of subtrees hanging below `x`.
pub fn d_weight_by_cut<T: Scalar>(law: &OffspringLaw<T>, t: &Tree, x: &NodeLabel) -> Result<T> {
    let xi = t.find_or_err(x)?;
    let p0 = law.pmf(0);
    if p0.is_zero() {
        return Err(Error::InvalidLaw("p(0) must be positive".into()));
    }
    let size = t.subtree_size(xi);
    let mut cut = t.degrees().to_vec();
    cut.drain(xi + 1..xi + size);
    cut[xi] = 0;
    let cut = Tree::from_degrees(cut)?;
    let mut forest = T::one();
    for c in t.children(xi) {
        forest = forest * tree_probability(law, &t.subtree(c));
    }
    Ok(tree_probability(law, &cut) / p0 * forest)
}

fn require_subcritical<T: Scalar>(law: &OffspringLaw<T>) -> Result<T> {
    let mu = law.mean()?;
    if mu > T::one() {
        return Err(Error::Precondition("the offspring law is supercritical".into()));
    }
    Ok(mu)
}

/// `P(τ* ∈ T_+(t, x, k)) = D(t, x)(1 − μ + E[(X − k_x(t))₊ 1_{X ≥ k}])`.
///
/// For `μ = 1` this is also the Kesten value.
pub fn condensation_tplus<T: Scalar>(law: &OffspringLaw<T>, t: &Tree, x: &NodeLabel, k: usize) -> Result<T> {
    let mu = require_subcritical(law)?;
    let ell = t.degree(t.find_or_err(x)?);
    Ok(d_weight(law, t, x)? * (T::one() - mu + law.excess_mean(ell, k)?))
}

/// `P(τ* ∈ T(t, x), k_x(τ*) = ∞) = (1 − μ) P(τ = t)/p(0)` for a leaf `x`.
pub fn condensation_graft_infinite<T: Scalar>(law: &OffspringLaw<T>, t: &Tree, x: &NodeLabel) -> Result<T> {
    let mu = require_subcritical(law)?;
    require_leaf(t, x)?;
    Ok((T::one() - mu) * d_weight(law, t, x)?)
}

/// `P(τ^S ∈ T(t, x)) = P(τ = t)/(μ^{|x|} p(0))` for a leaf `x`.
pub fn kesten_graft<T: Scalar>(law: &OffspringLaw<T>, t: &Tree, x: &NodeLabel) -> Result<T> {
    require_leaf(t, x)?;
    kesten_tplus(law, t, x, 0)
}

/// `P(τ^S ∈ T_+(t, x, k)) = D(t, x) μ^{−|x|−1} E[(X − k_x(t))₊ 1_{X ≥ k}]`:
/// the spine runs through `x` into one of the grafted children.
pub fn kesten_tplus<T: Scalar>(law: &OffspringLaw<T>, t: &Tree, x: &NodeLabel, k: usize) -> Result<T> {
    let mu = require_subcritical(law)?;
    if mu.is_zero() {
        return Err(Error::Precondition("Kesten's tree needs μ > 0".into()));
    }
    let ell = t.degree(t.find_or_err(x)?);
    let scale = mu.powi(x.depth() + 1);
    Ok(d_weight(law, t, x)? * law.excess_mean(ell, k)? / scale)
}

fn require_leaf(t: &Tree, x: &NodeLabel) -> Result<()> {
    if t.degree(t.find_or_err(x)?) != 0 {
        return Err(Error::Precondition(format!("{x} is not a leaf of {t}")));
    }
    Ok(())
}

/// A limit tree of a given law.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitLaw<T: Scalar> {
    pub law: OffspringLaw<T>,
    pub kind: LimitKind,
}

/// Largest window accepted by [`LimitLaw::window_law`].
pub const MAX_WINDOW: usize = 4;
const MAX_ATOMS: usize = 1 << 20;

type Dist<T> = BTreeMap<Tree, T>;

impl<T: Scalar> LimitLaw<T> {
    pub fn new(law: OffspringLaw<T>, kind: LimitKind) -> Result<Self> {
        let mu = require_subcritical(&law)?;
        if kind == LimitKind::Kesten && mu.is_zero() {
            return Err(Error::Precondition("Kesten's tree needs μ > 0".into()));
        }
        Ok(LimitLaw { law, kind })
    }

    /// Law of a special node's degree on `0..=max_k`, and its mass at
    /// infinity.
    pub fn special_law(&self, max_k: usize) -> Result<(Vec<T>, T)> {
        let mu = self.law.mean()?;
        let biased: Vec<T> = (0..=max_k).map(|k| T::from_usize(k) * self.law.pmf(k)).collect();
        Ok(match self.kind {
            LimitKind::Condensation => (biased, T::one() - mu),
            LimitKind::Kesten => (biased.into_iter().map(|x| x / mu.clone()).collect(), T::zero()),
        })
    }

    pub fn tplus(&self, t: &Tree, x: &NodeLabel, k: usize) -> Result<T> {
        match self.kind {
            LimitKind::Condensation => condensation_tplus(&self.law, t, x, k),
            LimitKind::Kesten => kesten_tplus(&self.law, t, x, k),
        }
    }

    /// Exact law of the shape of `r_{h,∞}` of the limit tree. Atoms are node
    /// sets; degree tags are not part of the key.
    pub fn window_law(&self, h: usize) -> Result<Dist<T>> {
        if h > MAX_WINDOW {
            return Err(Error::TooLarge(format!("window {h} exceeds {MAX_WINDOW}")));
        }
        let leaf = || Dist::from([(Tree::leaf(), T::one())]);
        let mu = self.law.mean()?;
        let (bulk, special_rest) = match self.kind {
            LimitKind::Condensation => (T::one(), T::one() - mu.clone()),
            LimitKind::Kesten => (mu.clone(), T::zero()),
        };
        // Normal and special laws at the generation below the current one.
        let mut normal = leaf();
        let mut special = leaf();
        for _depth in (0..h).rev() {
            let mut next_normal = Dist::new();
            for k in 0..h {
                let pk = self.law.pmf(k);
                if !pk.is_zero() {
                    let kids = vec![&normal; k];
                    add_product(&mut next_normal, &kids, pk)?;
                }
            }
            let big = self.law.mass_from(h)?;
            if !big.is_zero() {
                add_product(&mut next_normal, &vec![&normal; h], big)?;
            }

            let mut next_special = Dist::new();
            for k in 1..=h {
                let pk = self.law.pmf(k);
                if pk.is_zero() {
                    continue;
                }
                for i in 0..k {
                    let mut kids = vec![&normal; k];
                    kids[i] = &special;
                    add_product(&mut next_special, &kids, pk.clone() / bulk.clone())?;
                }
            }
            let beyond = self.law.mass_from(h + 1)?;
            if !beyond.is_zero() {
                for i in 0..h {
                    let mut kids = vec![&normal; h];
                    kids[i] = &special;
                    add_product(&mut next_special, &kids, beyond.clone() / bulk.clone())?;
                }
            }
            // Special child outside the window, or infinite degree.
            let hidden = self.law.excess_mean(h, 0)? / bulk.clone() + special_rest.clone();
            if !hidden.is_zero() && h > 0 {
                add_product(&mut next_special, &vec![&normal; h], hidden)?;
            }
            normal = next_normal;
            special = next_special;
        }
        Ok(special)
    }
}

/// Adds `weight · ⊗ kids` (root with the given ordered child laws) to `out`.
fn add_product<T: Scalar>(out: &mut Dist<T>, kids: &[&Dist<T>], weight: T) -> Result<()> {
    let mut partial: Vec<(Vec<Tree>, T)> = vec![(Vec::new(), weight)];
    for d in kids {
        if partial.len().saturating_mul(d.len()) > MAX_ATOMS {
            return Err(Error::TooLarge("window law has too many atoms".into()));
        }
        let mut next = Vec::with_capacity(partial.len() * d.len());
        for (prefix, w) in &partial {
            for (t, q) in d.iter() {
                let mut v = prefix.clone();
                v.push(t.clone());
                next.push((v, w.clone() * q.clone()));
            }
        }
        partial = next;
    }
    for (children, w) in partial {
        let t = Tree::from_children(&children);
        let slot = out.entry(t).or_insert_with(T::zero);
        *slot = slot.clone() + w;
    }
    if out.len() > MAX_ATOMS {
        return Err(Error::TooLarge("window law has too many atoms".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_traits::One;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn sub() -> OffspringLaw<Rational> {
        OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap()
    }

    fn cherry() -> Tree {
        "(()())".parse().unwrap()
    }

    #[test]
    fn d_weights() {
        let p = sub();
        let t = cherry();
        assert_eq!(d_weight(&p, &Tree::leaf(), &NodeLabel::root()).unwrap(), q(1, 1));
        assert_eq!(d_weight(&p, &t, &"1".parse().unwrap()).unwrap(), q(6, 25));
        assert_eq!(d_weight(&p, &t, &NodeLabel::root()).unwrap(), q(9, 25));
        for x in t.labels() {
            assert_eq!(d_weight(&p, &t, &x).unwrap(), d_weight_by_cut(&p, &t, &x).unwrap());
        }
    }

    #[test]
    fn condensation_values() {
        let p = sub();
        let root = NodeLabel::root();
        assert!(condensation_tplus(&p, &Tree::leaf(), &root, 0).unwrap().is_one());
        assert!(condensation_tplus(&p, &Tree::leaf(), &root, 1).unwrap().is_one());
        let one: NodeLabel = "1".parse().unwrap();
        assert_eq!(condensation_tplus(&p, &cherry(), &one, 0).unwrap(), q(6, 25));
        assert_eq!(condensation_graft_infinite(&p, &Tree::leaf(), &root).unwrap(), q(1, 5));
        assert_eq!(condensation_graft_infinite(&p, &cherry(), &one).unwrap(), q(6, 125));
        assert!(condensation_graft_infinite(&p, &cherry(), &root).is_err());
    }

    #[test]
    fn kesten_values() {
        let one: NodeLabel = "1".parse().unwrap();
        assert!(kesten_graft(&sub(), &Tree::leaf(), &NodeLabel::root()).unwrap().is_one());
        assert_eq!(kesten_graft(&sub(), &cherry(), &one).unwrap(), q(3, 10));
        let crit = OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap();
        let k = kesten_graft(&crit, &cherry(), &one).unwrap();
        assert_eq!(k, q(1, 4));
        assert_eq!(k, condensation_tplus(&crit, &cherry(), &one, 0).unwrap());
    }

    #[test]
    fn window_laws() {
        let w = LimitLaw::new(sub(), LimitKind::Condensation).unwrap();
        let one = w.window_law(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.get(&"(())".parse::<Tree>().unwrap()), Some(&q(1, 1)));
        let zero = w.window_law(0).unwrap();
        assert_eq!(zero.get(&Tree::leaf()), Some(&q(1, 1)));
        for kind in [LimitKind::Condensation, LimitKind::Kesten] {
            let w = LimitLaw::new(sub(), kind).unwrap();
            for h in 1..=3 {
                let total: Rational = w.window_law(h).unwrap().values().cloned().sum();
                assert!(total.is_one(), "{kind:?} h = {h}");
            }
        }
        assert!(w.window_law(5).is_err());
    }
}
