//! Immutable call graph data model shared by every pipeline.
//!
//! A [`CallGraph`] is a simple directed graph over procedures. Procedures are
//! stored sorted by name and addressed by dense indices, so analytics can work
//! on `usize` node ids while reports still print names. Recursive calls
//! (self-loops) are accepted but only counted; they never enter the edge set.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("graph `{0}` declares no procedures")]
    EmptyGraph(String),
    #[error("invalid name `{0}`: names must be non-empty and contain no whitespace or `#`")]
    InvalidName(String),
    #[error("procedure `{name}` declared in module `{first}` and again in `{second}`")]
    ConflictingModule {
        name: String,
        first: String,
        second: String,
    },
    #[error("call pair references undeclared procedure `{0}`")]
    UnknownProcedure(String),
    #[error("version series `{0}` contains no graphs")]
    EmptySeries(String),
    #[error("version label `{0}` appears more than once")]
    DuplicateVersion(String),
}

/// Whether `s` is usable as a procedure, module or version name in the native format.
pub fn is_valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '#')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Procedure {
    pub name: String,
    pub module: String,
}

impl Procedure {
    pub fn new(name: impl Into<String>, module: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        let module = module.into();
        for s in [&name, &module] {
            if !is_valid_name(s) {
                return Err(ModelError::InvalidName(s.clone()));
            }
        }
        Ok(Self { name, module })
    }
}

/// A directed caller -> callee edge, borrowed from its owning graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallPair<'a> {
    pub caller: &'a str,
    pub callee: &'a str,
}

impl fmt::Display for CallPair<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.caller, self.callee)
    }
}

/// Incremental constructor for [`CallGraph`].
///
/// Duplicate procedure declarations with the same module are accepted; duplicate
/// call pairs collapse. Edges may be added before their endpoints are declared,
/// endpoint resolution happens in [`CallGraphBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct CallGraphBuilder {
    version_label: String,
    modules: HashMap<String, String>,
    calls: BTreeSet<(String, String)>,
}

impl CallGraphBuilder {
    pub fn new(version_label: impl Into<String>) -> Self {
        Self {
            version_label: version_label.into(),
            ..Default::default()
        }
    }

    pub fn procedure(&mut self, name: &str, module: &str) -> Result<&mut Self, ModelError> {
        let p = Procedure::new(name, module)?;
        match self.modules.get(&p.name) {
            Some(existing) if *existing != p.module => {
                return Err(ModelError::ConflictingModule {
                    name: p.name,
                    first: existing.clone(),
                    second: p.module,
                })
            }
            Some(_) => {}
            None => {
                self.modules.insert(p.name, p.module);
            }
        }
        Ok(self)
    }

    pub fn call(&mut self, caller: &str, callee: &str) -> Result<&mut Self, ModelError> {
        for s in [caller, callee] {
            if !is_valid_name(s) {
                return Err(ModelError::InvalidName(s.to_string()));
            }
        }
        self.calls.insert((caller.to_string(), callee.to_string()));
        Ok(self)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.modules.contains_key(name)
    }

    pub fn module_of(&self, name: &str) -> Option<&str> {
        self.modules.get(name).map(String::as_str)
    }

    pub fn build(self) -> Result<CallGraph, ModelError> {
        if self.modules.is_empty() {
            return Err(ModelError::EmptyGraph(self.version_label));
        }
        let mut procedures: Vec<Procedure> = self
            .modules
            .into_iter()
            .map(|(name, module)| Procedure { name, module })
            .collect();
        procedures.sort();
        let index: HashMap<String, usize> = procedures
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();

        let mut edges = Vec::with_capacity(self.calls.len());
        let mut self_loops = Vec::new();
        for (caller, callee) in &self.calls {
            let (Some(&u), Some(&v)) = (index.get(caller), index.get(callee)) else {
                let missing = if index.contains_key(caller) { callee } else { caller };
                return Err(ModelError::UnknownProcedure(missing.clone()));
            };
            if u == v {
                self_loops.push(u);
            } else {
                edges.push((u, v));
            }
        }
        edges.sort_unstable();

        let mut out_adj = vec![Vec::new(); procedures.len()];
        let mut in_adj = vec![Vec::new(); procedures.len()];
        for &(u, v) in &edges {
            out_adj[u].push(v);
            in_adj[v].push(u);
        }
        for list in &mut in_adj {
            list.sort_unstable();
        }

        Ok(CallGraph {
            version_label: self.version_label,
            procedures,
            index,
            edges,
            out_adj,
            in_adj,
            self_loops,
        })
    }
}

/// One version's call graph.
#[derive(Debug, Clone)]
pub struct CallGraph {
    version_label: String,
    procedures: Vec<Procedure>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    self_loops: Vec<usize>,
}

impl PartialEq for CallGraph {
    fn eq(&self, other: &Self) -> bool {
        self.version_label == other.version_label
            && self.procedures == other.procedures
            && self.edges == other.edges
            && self.self_loops == other.self_loops
    }
}

impl Eq for CallGraph {}

impl CallGraph {
    pub fn builder(version_label: impl Into<String>) -> CallGraphBuilder {
        CallGraphBuilder::new(version_label)
    }

    pub fn version_label(&self) -> &str {
        &self.version_label
    }

    /// Procedures sorted by name; a procedure's position is its node index.
    pub fn procedures(&self) -> &[Procedure] {
        &self.procedures
    }

    pub fn node_count(&self) -> usize {
        self.procedures.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn self_loop_count(&self) -> usize {
        self.self_loops.len()
    }

    /// Procedures that call themselves; kept out of [`CallGraph::edges`].
    pub fn self_loops(&self) -> impl Iterator<Item = &str> + '_ {
        self.self_loops.iter().map(move |&v| self.name(v))
    }

    pub fn name(&self, node: usize) -> &str {
        &self.procedures[node].name
    }

    pub fn module(&self, node: usize) -> &str {
        &self.procedures[node].module
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Edges as `(caller, callee)` node indices, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted callee indices of `node`.
    pub fn callees(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    /// Sorted caller indices of `node`.
    pub fn callers(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    pub fn has_edge(&self, caller: usize, callee: usize) -> bool {
        self.out_adj[caller].binary_search(&callee).is_ok()
    }

    pub fn call_pairs(&self) -> impl Iterator<Item = CallPair<'_>> + '_ {
        self.edges.iter().map(move |&(u, v)| CallPair {
            caller: self.name(u),
            callee: self.name(v),
        })
    }

    /// Sorted, deduplicated neighbours of every node ignoring edge direction.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.node_count())
            .map(|v| {
                let mut n: Vec<usize> = self.out_adj[v].iter().chain(&self.in_adj[v]).copied().collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect()
    }

    /// Same graph under a different version label.
    pub fn relabeled(&self, version_label: impl Into<String>) -> CallGraph {
        CallGraph {
            version_label: version_label.into(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub procedure_count: usize,
    pub edge_count: usize,
    /// Mean number of distinct adjacent procedures, direction ignored.
    pub avg_neighbours: f64,
}

pub fn graph_stats(cg: &CallGraph) -> Stats {
    let adjacency = cg.undirected_adjacency();
    let total: usize = adjacency.iter().map(Vec::len).sum();
    Stats {
        procedure_count: cg.node_count(),
        edge_count: cg.edge_count(),
        avg_neighbours: total as f64 / cg.node_count() as f64,
    }
}

/// Chronologically ordered call graphs of one system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionSeries {
    label: String,
    graphs: Vec<CallGraph>,
}

impl VersionSeries {
    pub fn new(label: impl Into<String>, graphs: Vec<CallGraph>) -> Result<Self, ModelError> {
        let label = label.into();
        if graphs.is_empty() {
            return Err(ModelError::EmptySeries(label));
        }
        let mut seen = BTreeSet::new();
        for g in &graphs {
            if !seen.insert(g.version_label()) {
                return Err(ModelError::DuplicateVersion(g.version_label().to_string()));
            }
        }
        Ok(Self { label, graphs })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn graphs(&self) -> &[CallGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn version_labels(&self) -> impl Iterator<Item = &str> {
        self.graphs.iter().map(CallGraph::version_label)
    }
}

#[cfg(test)]
pub(crate) fn graph_from_edges(label: &str, edges: &[(&str, &str)]) -> CallGraph {
    let mut b = CallGraph::builder(label);
    for &(u, v) in edges {
        b.procedure(u, "m").unwrap();
        b.procedure(v, "m").unwrap();
        b.call(u, v).unwrap();
    }
    b.build().unwrap()
}
