//! Truncation selectors for the retained index set `𝒮`.
//!
//! Textual form: clauses joined by `&`, all of which must hold.
//!
//! | clause      | keeps                                          |
//! |-------------|------------------------------------------------|
//! | `order<=d`  | indices with `d(k) ≤ d`                        |
//! | `abs>=t`    | indices with `|ĥ(k)| ≥ t`                       |
//! | `top=N`     | the `N` largest stored `|ĥ(k)|` (ties: lexicographic `k`) |
//! | `all`       | everything                                     |
//! | `none`      | nothing                                        |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measure::MultiIndex;
use crate::spectral::SparseFourierModel;

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    MaxOrder(usize),
    MinAbs(f64),
    Top(usize),
    Explicit(BTreeSet<MultiIndex>),
    All,
    Nothing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    clauses: Vec<Clause>,
}

impl Selector {
    pub fn new(clauses: Vec<Clause>) -> Self {
        Selector { clauses }
    }

    pub fn all() -> Self {
        Selector::new(vec![Clause::All])
    }

    pub fn none() -> Self {
        Selector::new(vec![Clause::Nothing])
    }

    pub fn max_order(d: usize) -> Self {
        Selector::new(vec![Clause::MaxOrder(d)])
    }

    pub fn explicit(indices: impl IntoIterator<Item = MultiIndex>) -> Self {
        Selector::new(vec![Clause::Explicit(indices.into_iter().collect())])
    }

    pub fn and(mut self, clause: Clause) -> Self {
        self.clauses.push(clause);
        self
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Binds coefficient-dependent clauses to `model`.
    pub fn resolve<'a>(&'a self, model: &'a SparseFourierModel) -> ResolvedSelector<'a> {
        let top = self.clauses.iter().find_map(|c| match c {
            Clause::Top(n) => Some(*n),
            _ => None,
        });
        let top_set = top.map(|n| {
            let mut ranked: Vec<(&MultiIndex, f64)> = model.entries().collect();
            ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(b.0)));
            ranked
                .into_iter()
                .take(n)
                .map(|(k, _)| k.clone())
                .collect::<BTreeSet<_>>()
        });
        ResolvedSelector {
            selector: self,
            model,
            top_set,
        }
    }
}

/// A selector bound to a model; membership is defined for every multi-index,
/// stored or not (unstored indices have coefficient 0).
pub struct ResolvedSelector<'a> {
    selector: &'a Selector,
    model: &'a SparseFourierModel,
    top_set: Option<BTreeSet<MultiIndex>>,
}

impl ResolvedSelector<'_> {
    pub fn contains(&self, k: &MultiIndex) -> bool {
        self.selector.clauses.iter().all(|c| match c {
            Clause::MaxOrder(d) => k.order() <= *d,
            Clause::MinAbs(t) => self.model.coefficient(k).abs() >= *t,
            Clause::Top(_) => self.top_set.as_ref().is_some_and(|s| s.contains(k)),
            Clause::Explicit(set) => set.contains(k),
            Clause::All => true,
            Clause::Nothing => false,
        })
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut clauses = Vec::new();
        for raw in s.split('&') {
            let c = raw.trim();
            let bad = || Error::Parameter(format!("cannot parse selector clause `{c}`"));
            let clause = if c == "all" {
                Clause::All
            } else if c == "none" {
                Clause::Nothing
            } else if let Some(v) = c.strip_prefix("order<=") {
                Clause::MaxOrder(v.trim().parse().map_err(|_| bad())?)
            } else if let Some(v) = c.strip_prefix("abs>=") {
                let t: f64 = v.trim().parse().map_err(|_| bad())?;
                if !t.is_finite() || t < 0.0 {
                    return Err(bad());
                }
                Clause::MinAbs(t)
            } else if let Some(v) = c.strip_prefix("top=") {
                Clause::Top(v.trim().parse().map_err(|_| bad())?)
            } else {
                return Err(bad());
            };
            clauses.push(clause);
        }
        if clauses.iter().filter(|c| matches!(c, Clause::Top(_))).count() > 1 {
            return Err(Error::Parameter("at most one `top=` clause".into()));
        }
        Ok(Selector::new(clauses))
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, c) in self.clauses.iter().enumerate() {
            if j > 0 {
                write!(f, "&")?;
            }
            match c {
                Clause::MaxOrder(d) => write!(f, "order<={d}")?,
                Clause::MinAbs(t) => write!(f, "abs>={t}")?,
                Clause::Top(n) => write!(f, "top={n}")?,
                Clause::Explicit(set) => write!(f, "explicit[{}]", set.len())?,
                Clause::All => write!(f, "all")?,
                Clause::Nothing => write!(f, "none")?,
            }
        }
        Ok(())
    }
}
