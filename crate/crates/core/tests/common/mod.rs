//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use gwlimits_core::{DegreeSet, OffspringLaw, Rational, Scalar, TPlusEvent, Tree};

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

pub fn binary() -> OffspringLaw<Rational> {
    OffspringLaw::from_strs(&["1/2", "0", "1/2"]).unwrap()
}

pub fn sub_binary() -> OffspringLaw<Rational> {
    OffspringLaw::from_strs(&["3/5", "0", "2/5"]).unwrap()
}

/// Calls `f` on every preorder degree sequence of a forest of `roots` trees
/// with exactly `size` nodes and degrees in `support`.
pub fn for_each_forest(support: &[usize], roots: usize, size: usize, f: &mut impl FnMut(&[usize])) {
    fn go(support: &[usize], pending: usize, size: usize, word: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        let left = size - word.len();
        if pending == 0 {
            if left == 0 {
                f(word);
            }
            return;
        }
        // each pending node still needs a slot
        if pending > left {
            return;
        }
        for &d in support {
            word.push(d);
            go(support, pending - 1 + d, size, word, f);
            word.pop();
        }
    }
    go(support, roots, size, &mut Vec::new(), f);
}

/// `P_k(|τ| = n)` by listing every forest.
pub fn forest_size_probability(law: &OffspringLaw<Rational>, k: usize, n: usize) -> Rational {
    let support: Vec<usize> = law.support_below(law.head().len());
    // The weight depends only on the degree counts; tally those first.
    let mut tally: HashMap<Vec<usize>, u64> = HashMap::new();
    let top = support.iter().copied().max().unwrap_or(0);
    for_each_forest(&support, k, n, &mut |w| {
        let mut counts = vec![0; top + 1];
        for &d in w {
            counts[d] += 1;
        }
        *tally.entry(counts).or_default() += 1;
    });
    tally.into_iter().fold(q(0, 1), |acc, (counts, m)| {
        let weight = counts
            .iter()
            .enumerate()
            .fold(Rational::from_int(m as i64), |w, (d, &c)| w * law.pmf(d).powi(c));
        acc + weight
    })
}

/// Every tree with at most `max_size` nodes and degrees in the support.
pub fn all_trees(law: &OffspringLaw<Rational>, max_size: usize) -> Vec<(Tree, Rational)> {
    let support: Vec<usize> = law.support_below(law.head().len());
    let mut out = Vec::new();
    for size in 1..=max_size {
        for_each_forest(&support, 1, size, &mut |w| {
            let p = w.iter().fold(q(1, 1), |acc, &d| acc * law.pmf(d));
            out.push((Tree::from_degrees(w.to_vec()).unwrap(), p));
        });
    }
    out
}

/// `P(τ ∈ T_+(t, x, k) | L_A(τ) = n)` by listing every tree with
/// `L_A = n`; `max_size` must bound the size of such trees.
pub fn conditional_by_enumeration(
    law: &OffspringLaw<Rational>,
    a: &DegreeSet,
    n: usize,
    max_size: usize,
    event: &TPlusEvent,
) -> Rational {
    let mut num = q(0, 1);
    let mut den = q(0, 1);
    for (t, p) in all_trees(law, max_size) {
        if t.l_a(a) != n {
            continue;
        }
        if t.in_t_plus(&event.t, &event.x, event.k).unwrap() {
            num += p.clone();
        }
        den += p;
    }
    num / den
}
