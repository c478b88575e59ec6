//! Per-version call graph rule mining.
//!
//! A version's call graph becomes a transaction database of procedure-name
//! sets, frequent itemsets are mined level-wise (Apriori candidate generation
//! with downward-closure pruning), and association rules `X -> Y` are read off
//! every frequent itemset. Support counting intersects per-item transaction
//! bitsets, so a candidate's support is a popcount and candidates can be
//! counted in parallel without affecting the result.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CallGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("minimum support must lie in (0, 1], got {0}")]
    InvalidMinSupport(f64),
    #[error("minimum confidence must lie in [0, 1], got {0}")]
    InvalidMinConfidence(f64),
    #[error("maximum itemset size must be at least 1")]
    InvalidMaxSize,
    #[error("frequent itemset table is not downward closed: missing {0}")]
    MalformedInput(Itemset),
}

/// How a call graph is cut into transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TransactionScheme {
    /// One transaction per calling procedure: itself plus its callees.
    #[default]
    CallerNeighborhood,
    /// One transaction per module: its calling procedures plus their callees.
    ModuleScoped,
}

impl TransactionScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            TransactionScheme::CallerNeighborhood => "caller",
            TransactionScheme::ModuleScoped => "module",
        }
    }
}

impl fmt::Display for TransactionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sorted, duplicate-free set of procedure names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Itemset(Vec<String>);

impl Itemset {
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v: Vec<String> = items.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        Itemset(v)
    }

    pub fn items(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: &str) -> bool {
        self.0.binary_search_by(|x| x.as_str().cmp(item)).is_ok()
    }

    pub fn is_subset(&self, other: &Itemset) -> bool {
        self.0.iter().all(|x| other.contains(x))
    }

    pub fn union(&self, other: &Itemset) -> Itemset {
        Itemset::new(self.0.iter().chain(&other.0).cloned())
    }

    /// Comma-joined names.
    pub fn joined(&self) -> String {
        self.0.join(",")
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.join(", "))
    }
}

/// Transactions of one version, with items interned as dense ids.
#[derive(Debug, Clone)]
pub struct TransactionDb {
    pub version_label: String,
    pub scheme: TransactionScheme,
    items: Vec<String>,
    transactions: Vec<Vec<u32>>,
}

impl TransactionDb {
    /// Build from explicit name sets. Empty transactions are skipped.
    pub fn from_transactions<T, S>(version_label: &str, transactions: T) -> Self
    where
        T: IntoIterator,
        T::Item: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let raw: Vec<BTreeSet<String>> = transactions
            .into_iter()
            .map(|t| t.into_iter().map(Into::into).collect())
            .filter(|t: &BTreeSet<String>| !t.is_empty())
            .collect();
        let items: Vec<String> = raw
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let id: HashMap<&str, u32> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let transactions = raw.iter().map(|t| t.iter().map(|s| id[s.as_str()]).collect()).collect();
        TransactionDb {
            version_label: version_label.to_string(),
            scheme: TransactionScheme::CallerNeighborhood,
            items,
            transactions,
        }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Transactions as name sets, in construction order.
    pub fn transactions(&self) -> impl Iterator<Item = Itemset> + '_ {
        self.transactions
            .iter()
            .map(|t| Itemset::new(t.iter().map(|&i| self.items[i as usize].clone())))
    }

    pub fn distinct_items(&self) -> usize {
        self.items.len()
    }
}

pub fn build_transactions(cg: &CallGraph, scheme: TransactionScheme) -> TransactionDb {
    let sets: Vec<BTreeSet<usize>> = match scheme {
        TransactionScheme::CallerNeighborhood => (0..cg.node_count())
            .filter(|&p| !cg.callees(p).is_empty())
            .map(|p| std::iter::once(p).chain(cg.callees(p).iter().copied()).collect())
            .collect(),
        TransactionScheme::ModuleScoped => {
            let mut by_module: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
            for p in (0..cg.node_count()).filter(|&p| !cg.callees(p).is_empty()) {
                let t = by_module.entry(cg.module(p)).or_default();
                t.insert(p);
                t.extend(cg.callees(p));
            }
            by_module.into_values().collect()
        }
    };
    let mut db = TransactionDb::from_transactions(
        cg.version_label(),
        sets.iter()
            .map(|t| t.iter().map(|&p| cg.name(p).to_string()).collect::<Vec<_>>()),
    );
    db.scheme = scheme;
    db
}

/// Frequent itemsets with their absolute transaction counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequentItemsets {
    pub transaction_count: usize,
    pub counts: BTreeMap<Itemset, usize>,
    /// Set when the database had no transactions.
    pub empty_database: bool,
}

impl FrequentItemsets {
    /// Assemble from explicit counts, e.g. a table produced elsewhere.
    pub fn from_counts(transaction_count: usize, counts: BTreeMap<Itemset, usize>) -> Self {
        FrequentItemsets {
            transaction_count,
            empty_database: transaction_count == 0,
            counts,
        }
    }

    pub fn support(&self, itemset: &Itemset) -> Option<f64> {
        self.counts
            .get(itemset)
            .map(|&c| c as f64 / self.transaction_count as f64)
    }

    pub fn supports(&self) -> BTreeMap<Itemset, f64> {
        self.counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.transaction_count as f64))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Support fraction test shared by mining and any caller that re-derives it.
pub fn meets_support(count: usize, transactions: usize, min_sup: f64) -> bool {
    transactions > 0 && count as f64 / transactions as f64 >= min_sup
}

fn check_min_sup(min_sup: f64) -> Result<(), MiningError> {
    if min_sup > 0.0 && min_sup <= 1.0 {
        Ok(())
    } else {
        Err(MiningError::InvalidMinSupport(min_sup))
    }
}

#[derive(Clone)]
struct Bitset(Vec<u64>);

impl Bitset {
    fn zeros(bits: usize) -> Self {
        Bitset(vec![0; bits.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bitset) -> Bitset {
        Bitset(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Level-wise frequent itemset mining up to `max_size` items.
pub fn mine_frequent_itemsets(
    db: &TransactionDb,
    min_sup: f64,
    max_size: usize,
) -> Result<FrequentItemsets, MiningError> {
    check_min_sup(min_sup)?;
    if max_size == 0 {
        return Err(MiningError::InvalidMaxSize);
    }
    let n = db.len();
    if n == 0 {
        return Ok(FrequentItemsets::from_counts(0, BTreeMap::new()));
    }

    let mut tidsets = vec![Bitset::zeros(n); db.items.len()];
    for (tid, t) in db.transactions.iter().enumerate() {
        for &item in t {
            tidsets[item as usize].set(tid);
        }
    }

    // Level 1. Each level keeps (sorted item ids, tidset) for its frequent sets.
    let mut level: Vec<(Vec<u32>, Bitset)> = tidsets
        .iter()
        .enumerate()
        .filter(|(_, ts)| meets_support(ts.count(), n, min_sup))
        .map(|(i, ts)| (vec![i as u32], ts.clone()))
        .collect();
    let mut found: Vec<(Vec<u32>, usize)> = level.iter().map(|(s, ts)| (s.clone(), ts.count())).collect();

    for _size in 2..=max_size {
        if level.len() < 2 {
            break;
        }
        let frequent: HashSet<&[u32]> = level.iter().map(|(s, _)| s.as_slice()).collect();
        // Join sets sharing all but the last item; `level` is sorted lexicographically.
        let mut candidates = Vec::new();
        for i in 0..level.len() {
            let (a, ta) = &level[i];
            let prefix = &a[..a.len() - 1];
            for (b, _) in level[i + 1..].iter() {
                if &b[..b.len() - 1] != prefix {
                    break;
                }
                let mut c = a.clone();
                c.push(*b.last().unwrap());
                let all_subsets_frequent = (0..c.len() - 2).all(|skip| {
                    let sub: Vec<u32> = c
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &x)| x)
                        .collect();
                    frequent.contains(sub.as_slice())
                });
                if all_subsets_frequent {
                    candidates.push((c, ta));
                }
            }
        }
        let next: Vec<(Vec<u32>, Bitset)> = candidates
            .into_par_iter()
            .filter_map(|(c, ta)| {
                let ts = ta.and(&tidsets[*c.last().unwrap() as usize]);
                meets_support(ts.count(), n, min_sup).then_some((c, ts))
            })
            .collect();
        found.extend(next.iter().map(|(s, ts)| (s.clone(), ts.count())));
        level = next;
    }

    let counts = found
        .into_iter()
        .map(|(ids, c)| (Itemset::new(ids.iter().map(|&i| db.items[i as usize].clone())), c))
        .collect();
    Ok(FrequentItemsets::from_counts(n, counts))
}

/// One interesting rule `antecedent -> consequent` in a single version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallGraphRule {
    pub antecedent: Itemset,
    pub consequent: Itemset,
    pub support: f64,
    pub confidence: f64,
}

impl fmt::Display for CallGraphRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} (sup {:.4}, conf {:.4})",
            self.antecedent, self.consequent, self.support, self.confidence
        )
    }
}

/// Emit every `X -> Z \ X` over frequent itemsets `Z` with `|Z| >= 2` whose
/// confidence `count(Z) / count(X)` reaches `min_conf`. Rules come out sorted
/// by (antecedent, consequent).
pub fn generate_rules(frequent: &FrequentItemsets, min_conf: f64) -> Result<Vec<CallGraphRule>, MiningError> {
    if !(0.0..=1.0).contains(&min_conf) {
        return Err(MiningError::InvalidMinConfidence(min_conf));
    }
    let n = frequent.transaction_count as f64;
    let mut rules = Vec::new();
    for (z, &z_count) in frequent.counts.iter().filter(|(z, _)| z.len() >= 2) {
        let items = z.items();
        let k = items.len();
        for mask in 1..(1u64 << k) - 1 {
            let pick = |inside: bool| {
                Itemset(
                    (0..k)
                        .filter(|&i| (mask >> i & 1 == 1) == inside)
                        .map(|i| items[i].clone())
                        .collect(),
                )
            };
            let antecedent = pick(true);
            let x_count = *frequent
                .counts
                .get(&antecedent)
                .ok_or_else(|| MiningError::MalformedInput(antecedent.clone()))?;
            let confidence = z_count as f64 / x_count as f64;
            if confidence >= min_conf {
                rules.push(CallGraphRule {
                    consequent: pick(false),
                    antecedent,
                    support: z_count as f64 / n,
                    confidence,
                });
            }
        }
    }
    rules.sort_by(|a, b| (&a.antecedent, &a.consequent).cmp(&(&b.antecedent, &b.consequent)));
    Ok(rules)
}

/// Thresholds for one version's rule mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleThresholds {
    pub min_sup: f64,
    pub min_conf: f64,
    pub max_itemset: usize,
    pub scheme: TransactionScheme,
}

impl Default for RuleThresholds {
    fn default() -> Self {
        RuleThresholds {
            min_sup: 0.4,
            min_conf: 0.8,
            max_itemset: 4,
            scheme: TransactionScheme::CallerNeighborhood,
        }
    }
}

/// Transactions, frequent itemsets and rules for one call graph.
pub fn mine_version(cg: &CallGraph, thresholds: &RuleThresholds) -> Result<Vec<CallGraphRule>, MiningError> {
    if !(0.0..=1.0).contains(&thresholds.min_conf) {
        return Err(MiningError::InvalidMinConfidence(thresholds.min_conf));
    }
    let db = build_transactions(cg, thresholds.scheme);
    let frequent = mine_frequent_itemsets(&db, thresholds.min_sup, thresholds.max_itemset)?;
    generate_rules(&frequent, thresholds.min_conf)
}
