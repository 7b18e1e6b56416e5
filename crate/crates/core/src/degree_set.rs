//! The conditioning set of out-degrees.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A subset of ℕ of the form `listed ∪ {k ≥ from}` minus `except`.
///
/// This covers finite sets, co-finite sets, all of ℕ and the sets
/// `{0} ∪ {k ≥ n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DegreeSet {
    listed: BTreeSet<usize>,
    from: Option<usize>,
    except: BTreeSet<usize>,
}

impl DegreeSet {
    pub fn finite<I: IntoIterator<Item = usize>>(elements: I) -> Self {
        DegreeSet {
            listed: elements.into_iter().collect(),
            from: None,
            except: BTreeSet::new(),
        }
        .normalized()
    }

    /// All of ℕ.
    pub fn all() -> Self {
        DegreeSet {
            listed: BTreeSet::new(),
            from: Some(0),
            except: BTreeSet::new(),
        }
    }

    pub fn at_least(n: usize) -> Self {
        DegreeSet {
            listed: BTreeSet::new(),
            from: Some(n),
            except: BTreeSet::new(),
        }
    }

    /// ℕ minus a finite set.
    pub fn complement_of<I: IntoIterator<Item = usize>>(excluded: I) -> Self {
        DegreeSet {
            listed: BTreeSet::new(),
            from: Some(0),
            except: excluded.into_iter().collect(),
        }
        .normalized()
    }

    /// `{0} ∪ {k ≥ n}`.
    pub fn zero_and_at_least(n: usize) -> Self {
        let mut s = Self::at_least(n);
        s.listed.insert(0);
        s.normalized()
    }

    pub fn with(mut self, k: usize) -> Self {
        self.except.remove(&k);
        self.listed.insert(k);
        self.normalized()
    }

    pub fn without(mut self, k: usize) -> Self {
        self.listed.remove(&k);
        if self.from.is_some_and(|f| k >= f) {
            self.except.insert(k);
        }
        self.normalized()
    }

    fn normalized(mut self) -> Self {
        if let Some(mut f) = self.from {
            while self.except.remove(&f) {
                f += 1;
            }
            self.from = Some(f);
            self.listed.retain(|&k| k < f);
            self.except.retain(|&k| k >= f);
        } else {
            self.except.clear();
        }
        self
    }

    pub fn contains(&self, k: usize) -> bool {
        if self.listed.contains(&k) {
            return true;
        }
        match self.from {
            Some(f) => k >= f && !self.except.contains(&k),
            None => false,
        }
    }

    pub fn is_all(&self) -> bool {
        self.from == Some(0) && self.except.is_empty()
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0)
    }

    /// Index from which membership no longer changes.
    pub fn stable_from(&self) -> usize {
        let a = self.listed.iter().next_back().map_or(0, |&k| k + 1);
        let b = self.except.iter().next_back().map_or(0, |&k| k + 1);
        let c = self.from.unwrap_or(0);
        a.max(b).max(c)
    }

    /// Membership for all `k ≥ stable_from()`.
    pub fn eventually_contains(&self) -> bool {
        self.from.is_some()
    }

    /// Elements below `bound`.
    pub fn elements_below(&self, bound: usize) -> impl Iterator<Item = usize> + '_ {
        (0..bound).filter(move |&k| self.contains(k))
    }
}

impl fmt::Display for DegreeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("N");
        }
        let mut parts: Vec<String> = Vec::new();
        if !self.listed.is_empty() {
            parts.push(
                self.listed
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        if let Some(from) = self.from {
            let mut s = format!("geq:{from}");
            if !self.except.is_empty() {
                s.push_str(",except:");
                s.push_str(
                    &self
                        .except
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>()
                        .join(":"),
                );
            }
            parts.push(s);
        }
        if parts.is_empty() {
            return f.write_str("{}");
        }
        f.write_str(&parts.join("+"))
    }
}

/// Parses the command-line syntax: `"0,2"`, `"N"`, `"geq:3"`,
/// `"geq:3,except:5"` (several exceptions separated by `:`), `"0+geq:8"`.
impl FromStr for DegreeSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "N" || s == "all" {
            return Ok(DegreeSet::all());
        }
        let bad = |why: &str| Error::InvalidSet(format!("{s:?}: {why}"));
        let mut set = DegreeSet::finite([]);
        for part in s.split('+') {
            let part = part.trim();
            if let Some(rest) = part.strip_prefix("geq:") {
                let (from, except) = match rest.split_once(",except:") {
                    Some((a, b)) => (a, Some(b)),
                    None => (rest, None),
                };
                let from: usize = from.trim().parse().map_err(|_| bad("bad geq bound"))?;
                if set.from.is_some() {
                    return Err(bad("at most one geq clause"));
                }
                set.from = Some(from);
                if let Some(except) = except {
                    for e in except.split([':', ',']) {
                        let e: usize = e.trim().parse().map_err(|_| bad("bad exception"))?;
                        set.except.insert(e);
                    }
                }
            } else {
                for e in part.split(',') {
                    let e = e.trim();
                    if e.is_empty() {
                        continue;
                    }
                    let k: usize = e.parse().map_err(|_| bad("bad element"))?;
                    set.listed.insert(k);
                }
            }
        }
        let set = set.normalized();
        if set.listed.is_empty() && set.from.is_none() {
            return Err(bad("empty set"));
        }
        Ok(set)
    }
}
