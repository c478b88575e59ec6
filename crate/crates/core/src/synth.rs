//! Synthetic version series for demos and tests.
//!
//! The first version is a random call graph with a small core of hub
//! procedures. Most calling procedures are "core clients" that
//! call the first two hubs together and usually the other two as well; the rest
//! make one or two plain calls. That keeps the mean neighbour count near 2.4
//! and gives rule mining a co-call pattern to find. Later versions edit a churn
//! fraction of the non-core edges and add new procedures; edits only add calls
//! from procedures that already call something, so the hub pattern survives
//! across versions while the periphery drifts.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{to_native, Manifest, ManifestEntry};
use crate::model::{CallGraph, VersionSeries};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub nodes: usize,
    pub versions: usize,
    pub churn: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.nodes < 4 {
            return Err(SynthError::InvalidParams(format!(
                "nodes must be at least 4, got {}",
                self.nodes
            )));
        }
        if self.versions < 1 {
            return Err(SynthError::InvalidParams("versions must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.churn) {
            return Err(SynthError::InvalidParams(format!(
                "churn must lie in [0, 1), got {}",
                self.churn
            )));
        }
        Ok(())
    }
}

const HUBS: usize = 4;
const MODULE_SIZE: usize = 25;
const CALLER_FRACTION: f64 = 0.38;
const CLIENT_FRACTION: f64 = 0.8;

struct State {
    modules: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl State {
    fn is_core(&self, (_, v): (usize, usize)) -> bool {
        v < HUBS
    }

    fn random_plain_target(&self, rng: &mut ChaCha8Rng, from: usize) -> Option<usize> {
        let n = self.modules.len();
        if n <= HUBS + 1 {
            return None;
        }
        (0..8)
            .map(|_| rng.random_range(HUBS..n))
            .find(|&t| t != from && !self.edges.contains(&(from, t)))
    }

    /// Caller of a random existing edge, so edits do not add new callers.
    fn random_caller(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        self.edges.iter().map(|&(u, _)| u).choose(rng)
    }

    /// Give procedure `p` its outgoing calls.
    fn wire_caller(&mut self, rng: &mut ChaCha8Rng, p: usize) {
        if !rng.random_bool(CALLER_FRACTION) {
            return;
        }
        if rng.random_bool(CLIENT_FRACTION) {
            self.edges.insert((p, 0));
            self.edges.insert((p, 1));
            if rng.random_bool(0.85) {
                self.edges.insert((p, 2));
            }
            if rng.random_bool(0.5) {
                self.edges.insert((p, 3));
            }
            if rng.random_bool(0.3) {
                if let Some(t) = self.random_plain_target(rng, p) {
                    self.edges.insert((p, t));
                }
            }
        } else {
            let calls = if rng.random_bool(0.3) { 2 } else { 1 };
            for _ in 0..calls {
                if let Some(t) = self.random_plain_target(rng, p) {
                    self.edges.insert((p, t));
                }
            }
        }
    }

    fn add_procedure(&mut self, rng: &mut ChaCha8Rng) {
        let p = self.modules.len();
        self.modules.push(p / MODULE_SIZE + 1);
        self.wire_caller(rng, p);
        if rng.random_bool(0.25) {
            if let Some(caller) = self.random_caller(rng) {
                if caller != p {
                    self.edges.insert((caller, p));
                }
            }
        }
    }

    fn churn_edges(&mut self, rng: &mut ChaCha8Rng, churn: f64) {
        let edits = (churn * self.edges.len() as f64).round() as usize;
        for _ in 0..edits {
            let peripheral = self.edges.iter().copied().filter(|&e| !self.is_core(e));
            match rng.random_range(0..3) {
                0 => {
                    if let Some(e) = peripheral.choose(rng) {
                        self.edges.remove(&e);
                    }
                }
                1 => {
                    if let Some((u, v)) = peripheral.choose(rng) {
                        if let Some(t) = self.random_plain_target(rng, u) {
                            self.edges.remove(&(u, v));
                            self.edges.insert((u, t));
                        }
                    }
                }
                _ => {
                    let Some(u) = self.random_caller(rng) else { continue };
                    if let Some(t) = self.random_plain_target(rng, u) {
                        self.edges.insert((u, t));
                    }
                }
            }
        }
    }

    fn snapshot(&self, label: &str, width: usize) -> CallGraph {
        let name = |p: usize| {
            if p < HUBS {
                format!("core_get{p}")
            } else {
                format!("proc{p:0width$}")
            }
        };
        let mut b = CallGraph::builder(label);
        for (p, &m) in self.modules.iter().enumerate() {
            let module = if m == 0 {
                "core".to_string()
            } else {
                format!("mod{m:03}")
            };
            b.procedure(&name(p), &module).expect("generated names are valid");
        }
        for &(u, v) in &self.edges {
            b.call(&name(u), &name(v)).expect("generated names are valid");
        }
        b.build().expect("generated graphs are consistent")
    }
}

pub fn version_label(i: usize) -> String {
    format!("v{}", i + 1)
}

/// Generate the series in memory. Same parameters, same series.
pub fn generate(params: &SynthParams) -> Result<VersionSeries, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state = State {
        modules: (0..params.nodes)
            .map(|p| if p < HUBS { 0 } else { p / MODULE_SIZE + 1 })
            .collect(),
        edges: BTreeSet::new(),
    };
    for p in HUBS..params.nodes {
        state.wire_caller(&mut rng, p);
    }

    let growth = (params.churn * params.nodes as f64).ceil() as usize;
    let final_nodes = params.nodes + growth * (params.versions - 1);
    let width = final_nodes.to_string().len();
    let mut graphs = vec![state.snapshot(&version_label(0), width)];
    for v in 1..params.versions {
        state.churn_edges(&mut rng, params.churn);
        for _ in 0..growth {
            state.add_procedure(&mut rng);
        }
        graphs.push(state.snapshot(&version_label(v), width));
    }
    VersionSeries::new("synthetic", graphs).map_err(|e| SynthError::InvalidParams(e.to_string()))
}

/// Write one native graph file per version plus `manifest.json` into `dir`.
pub fn write_series(series: &VersionSeries, dir: &Path) -> Result<PathBuf, SynthError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for g in series.graphs() {
        let file = format!("{}.cg", g.version_label());
        let path = dir.join(&file);
        fs::write(&path, to_native(g)).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            label: g.version_label().to_string(),
            path: PathBuf::from(file),
            format: None,
        });
    }
    let manifest = Manifest {
        system_label: series.label().to_string(),
        entries,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json() + "\n").map_err(io_err(&path))?;
    Ok(path)
}
