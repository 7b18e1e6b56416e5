use std::fs;
use std::path::Path;

use gwlimits_core::limit::LimitKind;
use gwlimits_core::offspring::LawDescriptor;
use gwlimits_core::probe::convergence_table;
use gwlimits_core::projection::{project_forest, project_ta};
use gwlimits_core::sampler::{batch, sample_gw_with, ConditionedSampler, DiscreteSampler, LimitSampler};
use gwlimits_core::scalar::{parse_rational, to_json_value};
use gwlimits_core::walk::{delta, delta_limit, dwass, srlp_ratio};
use gwlimits_core::{
    AnyLaw, DegreeSet, DeltaOrder, LaWalk, Lattice, OffspringLaw, Rational, SampleConfig, Scalar, TPlusEvent, Target, Tree,
};
use serde_json::{json, Value};

use crate::{Command, Failure, Format, ProbeArgs, ProjectKind, SampleArgs, SampleKind};

/// Numbers given on the command line, in the law's backend.
trait Arg: Scalar {
    fn parse_arg(s: &str) -> Option<Self>;
}

impl Arg for Rational {
    fn parse_arg(s: &str) -> Option<Self> {
        parse_rational(s)
    }
}

impl Arg for f64 {
    fn parse_arg(s: &str) -> Option<Self> {
        s.trim()
            .parse()
            .ok()
            .or_else(|| parse_rational(s).map(|r| gwlimits_core::scalar::ratio_to_f64(&r)))
    }
}

/// Runs `$body` with `$l` bound to the law in its own backend.
macro_rules! with_law {
    ($law:expr, $l:ident => $body:expr) => {
        match $law {
            AnyLaw::Exact($l) => $body,
            AnyLaw::Float($l) => $body,
        }
    };
}

pub fn run(cmd: Command) -> Result<String, Failure> {
    match cmd {
        Command::Classify { law, set } => {
            let a = parse_set(&set)?;
            let c = with_law!(read_law(&law)?, l => l.classify(&a)?);
            pretty(&c)
        }
        Command::Tilt { law, set, theta } => {
            let a = parse_set(&set)?;
            with_law!(read_law(&law)?, l => tilt(&l, &a, &theta))
        }
        Command::Pstar { law, set } => {
            let a = parse_set(&set)?;
            let p = with_law!(read_law(&law)?, l => {
                let p = l.p_star(&a)?;
                json!({
                    "classification": p.classification,
                    "law": p.law.to_descriptor(),
                    "exact": p.exact.map(|e| e.to_descriptor()),
                })
            });
            pretty(&p)
        }
        Command::Sample(args) => sample(args),
        Command::Project { kind, tree, set } => {
            let t = parse_tree(&tree)?;
            let a = parse_set(&set)?;
            match kind {
                ProjectKind::TA => pretty(&project_ta(&t, &a)?),
                ProjectKind::Forest => pretty(&project_forest(&t, &a)?),
            }
        }
        Command::Dwass { law, k, n } => {
            let v = with_law!(read_law(&law)?, l => {
                let inc = l.pmf_prefix(n + 1);
                Lattice::of(&inc).check("dwass", n, n as i64 - k as i64)?;
                to_json_value(&dwass(&l, k, n))
            });
            pretty(&v)
        }
        Command::Srlp { law, n, m, k } => {
            let v = with_law!(read_law(&law)?, l => {
                let inc = l.pmf_prefix(n + m.unsigned_abs() as usize + k.unsigned_abs() as usize + 1);
                to_json_value(&srlp_ratio(&inc, n, m, k)?)
            });
            pretty(&v)
        }
        Command::Delta {
            law,
            order,
            n,
            k,
            ell,
            set,
        } => {
            let order = DeltaOrder::from_int(order)?;
            let a = set.as_deref().map(parse_set).transpose()?;
            let v = with_law!(read_law(&law)?, l => {
                let value = match &a {
                    None => delta(&l, order, n, k, ell)?,
                    Some(a) => LaWalk::new(&l, a, n)?.delta_a(order, n, k, ell)?,
                };
                json!({"value": to_json_value(&value), "limit": to_json_value(&delta_limit(&l, order, k)?)})
            });
            pretty(&v)
        }
        Command::Bnl { law, set, n, ell } => {
            let a = parse_set(&set)?;
            let v = with_law!(read_law(&law)?, l => {
                let w = LaWalk::new(&l, &a, n)?;
                json!({"value": to_json_value(&w.b_nl(n, ell)?), "limit": to_json_value(&w.b_nl_limit(ell)?)})
            });
            pretty(&v)
        }
        Command::Probe(args) => probe(args),
    }
}

fn tilt<T: Arg>(law: &OffspringLaw<T>, a: &DegreeSet, theta: &str) -> Result<String, Failure> {
    let theta = T::parse_arg(theta).ok_or_else(|| Failure::Usage(format!("cannot read θ = {theta:?}")))?;
    let r = law.tilt(a, &theta)?;
    // A law file plus two extra fields, so the output feeds back into the
    // other subcommands.
    let mut v = serde_json::to_value(r.law.to_descriptor()).expect("descriptor serializes");
    v["theta"] = to_json_value(&r.theta);
    v["normalizer"] = to_json_value(&r.normalizer);
    pretty(&v)
}

fn sample(args: SampleArgs) -> Result<String, Failure> {
    let law = read_law(&args.law)?;
    let mut cfg = SampleConfig {
        window: args.window,
        ..SampleConfig::with_seed(args.seed)
    };
    if let Some(m) = args.max_nodes {
        cfg.max_nodes = m;
    }
    if let Some(m) = args.max_attempts {
        cfg.max_attempts = m;
    }
    cfg.validate()?;
    let items: Vec<(String, Value)> = match args.kind {
        SampleKind::Gw => {
            let sampler = DiscreteSampler::new(&law.to_f64_law())?;
            let trees = batch(&cfg, args.count, |rng| sample_gw_with(&sampler, cfg.max_nodes, rng));
            trees
                .into_iter()
                .map(|t| t.map(|t| (t.to_paren(), json!({"tree": t.to_paren(), "size": t.len()}))))
                .collect::<Result<_, _>>()?
        }
        SampleKind::Conditioned => {
            let a = parse_set(args.set.as_deref().ok_or_else(|| usage("conditioned sampling needs --set"))?)?;
            let n = args.n.ok_or_else(|| usage("conditioned sampling needs --n"))?;
            let target = if args.at_least {
                Target::AtLeast(n)
            } else {
                Target::Exactly(n)
            };
            let s = with_law!(&law, l => ConditionedSampler::new(l, &a, target, &cfg)?);
            batch(&cfg, args.count, |rng| s.sample(rng))
                .into_iter()
                .map(|c| {
                    c.map(|c| {
                        let v = json!({
                            "tree": c.tree.to_paren(),
                            "size": c.tree.len(),
                            "l_a": c.tree.l_a(&a),
                            "attempts": c.attempts,
                        });
                        (c.tree.to_paren(), v)
                    })
                })
                .collect::<Result<_, _>>()?
        }
        SampleKind::Kesten | SampleKind::Condense => {
            let kind = if args.kind == SampleKind::Kesten {
                LimitKind::Kesten
            } else {
                LimitKind::Condensation
            };
            let s = with_law!(&law, l => LimitSampler::new(l, kind, args.window)?);
            batch(&cfg, args.count, |rng| s.sample(rng))
                .into_iter()
                .map(|w| (w.to_string(), serde_json::to_value(&w).expect("window serializes")))
                .collect()
        }
    };
    Ok(match args.format {
        Format::Paren => items.into_iter().map(|(p, _)| p + "\n").collect(),
        Format::Json => {
            let values: Vec<Value> = items.into_iter().map(|(_, v)| v).collect();
            serde_json::to_string_pretty(&values).expect("values serialize")
        }
    })
}

fn probe(args: ProbeArgs) -> Result<String, Failure> {
    let a = parse_set(&args.set)?;
    let law = read_law(&args.law)?;
    let text = read_file(&args.events)?;
    let events = parse_events(&text)?;
    if events.is_empty() {
        return Err(usage("the events file lists no events"));
    }
    let mut table = with_law!(&law, l => convergence_table(l, &a, &events, &args.grid)?);
    table.manifest.seed = args.seed;
    let csv = table.to_csv();
    let manifest = serde_json::to_string_pretty(&json!({
        "manifest": table.manifest,
        "critical": table.critical,
    }))
    .expect("manifest serializes");
    if let Some(path) = &args.manifest {
        write_file(path, &manifest)?;
    }
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            Ok(if args.manifest.is_some() { String::new() } else { manifest })
        }
        None => Ok(csv),
    }
}

fn parse_events(text: &str) -> Result<Vec<TPlusEvent>, Failure> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<TPlusEvent>().map_err(|e| usage(&format!("event {l:?}: {e}"))))
        .collect()
}

fn usage(msg: &str) -> Failure {
    Failure::Usage(msg.to_owned())
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_law(path: &Path) -> Result<AnyLaw, Failure> {
    let text = read_file(path)?;
    let d: LawDescriptor =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(AnyLaw::from_descriptor(&d)?)
}

fn parse_set(s: &str) -> Result<DegreeSet, Failure> {
    s.parse::<DegreeSet>().map_err(|e| Failure::Usage(e.to_string()))
}

fn parse_tree(s: &str) -> Result<Tree, Failure> {
    s.parse::<Tree>().map_err(|e| Failure::Usage(e.to_string()))
}

fn pretty<S: serde::Serialize>(v: &S) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(v).expect("output serializes"))
}
