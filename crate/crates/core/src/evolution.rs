//! Evolution rules across a version series.
//!
//! Per-version rules are merged by their canonical key into evolution rules
//! that remember in which versions they were interesting. The stable subset
//! keeps rules whose stability (number of such versions) reaches `minStab`.
//! Stable rules can be viewed as a transitivity digraph over procedures or as a
//! Hasse diagram of the itemsets they mention.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;
use thiserror::Error;

use crate::rules::{CallGraphRule, Itemset, RuleThresholds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("minimum stability fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("minimum stability count {count} must lie in 1..={series_length}")]
    InvalidCount { count: usize, series_length: usize },
}

/// `antecedent -> consequent` with both sides sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RuleKey {
    pub antecedent: Itemset,
    pub consequent: Itemset,
}

impl RuleKey {
    pub fn of(rule: &CallGraphRule) -> Self {
        RuleKey {
            antecedent: rule.antecedent.clone(),
            consequent: rule.consequent.clone(),
        }
    }

    pub fn items(&self) -> Itemset {
        self.antecedent.union(&self.consequent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleMeasure {
    pub support: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionRule {
    pub key: RuleKey,
    /// Versions (series order) in which the rule was interesting.
    pub per_version: Vec<(String, RuleMeasure)>,
}

impl EvolutionRule {
    pub fn stability(&self) -> usize {
        self.per_version.len()
    }

    pub fn mean_support(&self) -> f64 {
        self.per_version.iter().map(|(_, m)| m.support).sum::<f64>() / self.stability() as f64
    }

    pub fn mean_confidence(&self) -> f64 {
        self.per_version.iter().map(|(_, m)| m.confidence).sum::<f64>() / self.stability() as f64
    }

    pub fn versions(&self) -> impl Iterator<Item = &str> {
        self.per_version.iter().map(|(v, _)| v.as_str())
    }
}

/// Report order: stability desc, mean support desc, then key.
fn report_order(a: &EvolutionRule, b: &EvolutionRule) -> std::cmp::Ordering {
    b.stability()
        .cmp(&a.stability())
        .then(b.mean_support().total_cmp(&a.mean_support()))
        .then_with(|| a.key.cmp(&b.key))
}

/// Merge per-version rules (given in series order) into distinct evolution rules.
pub fn aggregate_cgers(per_version_rules: &[(String, Vec<CallGraphRule>)]) -> Vec<EvolutionRule> {
    let mut merged: BTreeMap<RuleKey, Vec<(String, RuleMeasure)>> = BTreeMap::new();
    for (version, rules) in per_version_rules {
        for r in rules {
            let slot = merged.entry(RuleKey::of(r)).or_default();
            // A version contributes at most once per key.
            if slot.last().map(|(v, _)| v) != Some(version) {
                slot.push((
                    version.clone(),
                    RuleMeasure {
                        support: r.support,
                        confidence: r.confidence,
                    },
                ));
            }
        }
    }
    let mut out: Vec<EvolutionRule> = merged
        .into_iter()
        .map(|(key, per_version)| EvolutionRule { key, per_version })
        .collect();
    out.sort_by(report_order);
    out
}

/// Minimum stability as an absolute version count or a fraction of the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MinStability {
    Count(usize),
    Fraction(f64),
}

impl MinStability {
    /// Fractions resolve to `ceil(fraction * series_length)`.
    pub fn resolve(self, series_length: usize) -> Result<usize, StabilityError> {
        match self {
            MinStability::Count(count) => {
                if count == 0 || count > series_length {
                    Err(StabilityError::InvalidCount { count, series_length })
                } else {
                    Ok(count)
                }
            }
            MinStability::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(StabilityError::InvalidFraction(f));
                }
                // Guard against 0.6 * 5 = 3.0000000000000004 style rounding.
                let scaled = f * series_length as f64;
                let nearest = scaled.round();
                let count = if (scaled - nearest).abs() < 1e-9 {
                    nearest
                } else {
                    scaled.ceil()
                };
                Ok((count as usize).max(1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableRuleSet {
    pub rules: Vec<EvolutionRule>,
    pub min_stability: MinStability,
    pub resolved_min_stability: usize,
    pub thresholds: Option<RuleThresholds>,
}

pub fn filter_stable(
    rules: &[EvolutionRule],
    min_stab: MinStability,
    series_length: usize,
) -> Result<StableRuleSet, StabilityError> {
    let resolved = min_stab.resolve(series_length)?;
    let mut kept: Vec<EvolutionRule> = rules.iter().filter(|r| r.stability() >= resolved).cloned().collect();
    kept.sort_by(report_order);
    Ok(StableRuleSet {
        rules: kept,
        min_stability: min_stab,
        resolved_min_stability: resolved,
        thresholds: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionCounts {
    pub version: String,
    /// Rules interesting in this version.
    pub cgr_total: usize,
    /// Distinct keys among them.
    pub cger_distinct: usize,
    /// Those whose key is stable over the series.
    pub stable: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountSummary {
    pub per_version: Vec<VersionCounts>,
    pub overall: VersionCounts,
}

pub fn count_summary(
    per_version_rules: &[(String, Vec<CallGraphRule>)],
    cgers: &[EvolutionRule],
    stable: &StableRuleSet,
) -> CountSummary {
    let stable_keys: BTreeSet<&RuleKey> = stable.rules.iter().map(|r| &r.key).collect();
    let per_version: Vec<VersionCounts> = per_version_rules
        .iter()
        .map(|(version, rules)| {
            let keys: BTreeSet<RuleKey> = rules.iter().map(RuleKey::of).collect();
            VersionCounts {
                version: version.clone(),
                cgr_total: rules.len(),
                cger_distinct: keys.len(),
                stable: keys.iter().filter(|k| stable_keys.contains(k)).count(),
            }
        })
        .collect();
    let overall = VersionCounts {
        version: "ALL".into(),
        cgr_total: per_version.iter().map(|c| c.cgr_total).sum(),
        cger_distinct: cgers.len(),
        stable: stable.rules.len(),
    };
    CountSummary { per_version, overall }
}

/// Procedure digraph built from the singleton-antecedent stable rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitivityGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    /// Maximal simple paths with at least one edge.
    pub chains: Vec<Vec<String>>,
    /// Set when chain enumeration hit [`MAX_CHAINS`].
    pub chains_truncated: bool,
    /// Strongly connected components, largest first.
    pub components: Vec<Vec<String>>,
}

pub const MAX_CHAINS: usize = 10_000;

pub fn build_transitivity_graph(stable: &StableRuleSet) -> TransitivityGraph {
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for r in &stable.rules {
        nodes.extend(r.key.items().items().iter().cloned());
        if let [x] = r.key.antecedent.items() {
            for y in r.key.consequent.items() {
                edges.insert((x.clone(), y.clone()));
            }
        }
    }
    let nodes: Vec<String> = nodes.into_iter().collect();
    let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut graph: DiGraph<(), ()> = DiGraph::new();
    let ids: Vec<NodeIndex> = nodes.iter().map(|_| graph.add_node(())).collect();
    let mut succ = vec![Vec::new(); nodes.len()];
    for (u, v) in &edges {
        let (u, v) = (index[u.as_str()], index[v.as_str()]);
        graph.add_edge(ids[u], ids[v], ());
        succ[u].push(v);
    }

    let mut components: Vec<Vec<String>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut names: Vec<String> = c.iter().map(|n| nodes[n.index()].clone()).collect();
            names.sort();
            names
        })
        .collect();
    components.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    // A maximal chain cannot be extended at its end (every successor already on
    // the path) nor at its start (every predecessor already on the path).
    let mut pred = vec![Vec::new(); nodes.len()];
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            pred[v].push(u);
        }
    }
    let mut chains = Vec::new();
    let mut truncated = false;
    let mut path = Vec::new();
    let mut on_path = vec![false; nodes.len()];
    for start in 0..nodes.len() {
        if succ[start].is_empty() {
            continue;
        }
        path.push(start);
        on_path[start] = true;
        extend_chains(&succ, &pred, &mut path, &mut on_path, &mut chains, &mut truncated);
        on_path[start] = false;
        path.pop();
        if truncated {
            break;
        }
    }
    let chains = chains
        .into_iter()
        .map(|c: Vec<usize>| c.into_iter().map(|i| nodes[i].clone()).collect())
        .collect();

    TransitivityGraph {
        nodes,
        edges: edges.into_iter().collect(),
        chains,
        chains_truncated: truncated,
        components,
    }
}

fn extend_chains(
    succ: &[Vec<usize>],
    pred: &[Vec<usize>],
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    chains: &mut Vec<Vec<usize>>,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    let last = *path.last().unwrap();
    let mut extended = false;
    for &next in &succ[last] {
        if on_path[next] {
            continue;
        }
        extended = true;
        path.push(next);
        on_path[next] = true;
        extend_chains(succ, pred, path, on_path, chains, truncated);
        on_path[next] = false;
        path.pop();
    }
    let start_closed = pred[path[0]].iter().all(|&p| on_path[p]);
    if !extended && path.len() >= 2 && start_closed {
        if chains.len() >= MAX_CHAINS {
            *truncated = true;
            return;
        }
        chains.push(path.clone());
    }
}

/// Hasse diagram over rule itemsets ordered by inclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lattice {
    pub nodes: Vec<Itemset>,
    /// Covering pairs `(smaller, larger)` as indices into `nodes`.
    pub edges: Vec<(usize, usize)>,
}

pub fn build_lattice(stable: &StableRuleSet) -> Lattice {
    let mut set: BTreeSet<Itemset> = BTreeSet::new();
    for r in &stable.rules {
        set.insert(r.key.antecedent.clone());
        set.insert(r.key.items());
    }
    let mut nodes: Vec<Itemset> = set.into_iter().collect();
    nodes.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let proper = |a: &Itemset, b: &Itemset| a.len() < b.len() && a.is_subset(b);
    let mut edges = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate() {
            if !proper(a, b) {
                continue;
            }
            let covered = nodes.iter().any(|c| proper(a, c) && proper(c, b));
            if !covered {
                edges.push((i, j));
            }
        }
    }
    Lattice { nodes, edges }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn transitivity_to_dot(t: &TransitivityGraph) -> String {
    let mut out = String::from("// edges from stable rules with a single-procedure antecedent\n");
    for c in &t.components {
        let _ = writeln!(out, "// scc: {}", c.join(", "));
    }
    for c in &t.chains {
        let _ = writeln!(out, "// chain: {}", c.join(" -> "));
    }
    if t.chains_truncated {
        let _ = writeln!(out, "// chains truncated at {MAX_CHAINS}");
    }
    out.push_str("digraph transitivity {\n");
    for n in &t.nodes {
        let _ = writeln!(out, "  {};", dot_quote(n));
    }
    for (u, v) in &t.edges {
        let _ = writeln!(out, "  {} -> {};", dot_quote(u), dot_quote(v));
    }
    out.push_str("}\n");
    out
}

pub fn lattice_to_dot(l: &Lattice) -> String {
    let mut out = String::from("// itemset lattice, edges are covering relations of inclusion\ndigraph lattice {\n");
    for (i, n) in l.nodes.iter().enumerate() {
        let _ = writeln!(out, "  n{i} [label={}];", dot_quote(&n.to_string()));
    }
    for (a, b) in &l.edges {
        let _ = writeln!(out, "  n{a} -> n{b};");
    }
    out.push_str("}\n");
    out
}
