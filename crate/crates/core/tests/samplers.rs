mod common;

use common::{binary, sub_binary};
use gwlimits_core::sampler::{batch, sample_conditioned, ConditionedSampler, LimitSampler};
use gwlimits_core::{DegreeSet, DegreeTag, LaWalk, LimitKind, SampleConfig, TPlusEvent, Target};

#[test]
fn conditioned_trees_meet_the_target() {
    let cfg = SampleConfig::with_seed(3);
    let a = DegreeSet::finite([0]);
    let s = ConditionedSampler::new(&binary(), &a, Target::Exactly(5), &cfg).unwrap();
    for c in batch(&cfg, 200, |rng| s.sample(rng)) {
        let c = c.unwrap();
        assert_eq!(c.tree.l_a(&a), 5);
        assert!(c.attempts >= 1);
    }
    let c = sample_conditioned(&sub_binary(), &DegreeSet::all(), Target::AtLeast(3), &cfg).unwrap();
    assert!(c.tree.len() >= 3);
}

#[test]
fn conditioned_frequencies_match_the_exact_conditional() {
    let samples = 20_000;
    let cfg = SampleConfig::with_seed(11);
    let a = DegreeSet::finite([0]);
    let n = 4;
    let ev: TPlusEvent = "(()())|1|2".parse().unwrap();
    let s = ConditionedSampler::new(&binary(), &a, Target::Exactly(n), &cfg).unwrap();
    let hits = batch(&cfg, samples, |rng| s.sample(rng).unwrap().tree.in_t_plus(&ev.t, &ev.x, ev.k).unwrap())
        .into_iter()
        .filter(|&b| b)
        .count();
    let exact = LaWalk::new(&binary(), &a, n).unwrap().conditional_tplus(n, &ev).unwrap();
    let p = exact.numer().to_string().parse::<f64>().unwrap() / exact.denom().to_string().parse::<f64>().unwrap();
    let hat = hits as f64 / samples as f64;
    let sd = (p * (1.0 - p) / samples as f64).sqrt();
    assert!((hat - p).abs() <= 4.0 * sd, "{hat} vs {p}");
}

#[test]
fn too_few_attempts_is_an_error() {
    let cfg = SampleConfig {
        max_attempts: 1,
        ..SampleConfig::with_seed(5)
    };
    let r = sample_conditioned(&sub_binary(), &DegreeSet::all(), Target::Exactly(41), &cfg);
    assert!(r.is_err());
}

#[test]
fn condensation_windows_have_at_most_one_infinite_node() {
    let cfg = SampleConfig::with_seed(21);
    let s = LimitSampler::new(&sub_binary(), LimitKind::Condensation, 3).unwrap();
    let draws = batch(&cfg, 2_000, |rng| s.sample_with_spine(rng));
    let mut with_inf = 0;
    for d in &draws {
        let inf = d.tree.infinite_count();
        assert!(inf <= 1);
        if inf == 1 {
            with_inf += 1;
            let last = *d.spine.last().unwrap();
            assert_eq!(d.tree.tag(last), DegreeTag::Infinite);
        }
    }
    // μ = 4/5: the first special node is infinite with probability 1/5.
    assert!(with_inf > 300);
    // Same seed, same windows.
    let again = batch(&cfg, 2_000, |rng| s.sample_with_spine(rng));
    assert_eq!(draws, again);
}

#[test]
fn kesten_windows_reach_the_boundary() {
    let s = LimitSampler::new(&binary(), LimitKind::Kesten, 3).unwrap();
    let w = batch(&SampleConfig::with_seed(1), 50, |rng| s.sample(rng));
    assert!(w.iter().all(|t| t.infinite_count() == 0 && t.shape().height_inf() >= 3));
}
