//! Directed graphlet census over call graphs.
//!
//! Graphlet classes of 2 to 4 nodes are identified by a canonical code: the
//! row-major `k x k` adjacency bit string (diagonal zero, first cell is the most
//! significant bit) minimised over all node permutations. The catalog of a size
//! lists every weakly connected class in ascending code order, and a class id is
//! its position in that list.
//!
//! Occurrences are distinct node subsets that induce a weakly connected
//! subgraph. They are found with ESU (exclusive-neighbourhood extension over
//! the undirected adjacency), partitioned by root node.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CallGraph, VersionSeries};

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphletError {
    #[error("graphlet size {0} is not supported (use 2, 3 or 4)")]
    UnsupportedSize(usize),
    #[error("invalid motif criterion: {0}")]
    InvalidCriterion(String),
    #[error("sampling probability must lie in (0, 1], got {0}")]
    InvalidSampling(f64),
}

fn check_size(size: usize) -> Result<(), GraphletError> {
    if (MIN_SIZE..=MAX_SIZE).contains(&size) {
        Ok(())
    } else {
        Err(GraphletError::UnsupportedSize(size))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GraphletClass {
    pub size: usize,
    pub class_id: usize,
    /// Row-major adjacency bits of the canonical labelling.
    pub canonical_code: u16,
}

impl GraphletClass {
    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        let k = self.size;
        self.canonical_code >> (k * k - 1 - (from * k + to)) & 1 == 1
    }

    /// Arcs of the canonical labelling, row-major.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let k = self.size;
        (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has_arc(i, j))
            .collect()
    }

    pub fn arc_count(&self) -> usize {
        self.canonical_code.count_ones() as usize
    }

    /// The code as a `k*k` character string of `0`/`1`.
    pub fn code_string(&self) -> String {
        let bits = self.size * self.size;
        format!("{:0width$b}", self.canonical_code, width = bits)
    }

    /// Arcs as `0>1,1>2`.
    pub fn edge_list(&self) -> String {
        self.arcs()
            .iter()
            .map(|(i, j)| format!("{i}>{j}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Arc count minus node count plus two; catalog classes are connected.
    pub fn cyclomatic(&self) -> i64 {
        self.arc_count() as i64 - self.size as i64 + 2
    }
}

impl fmt::Display for GraphletClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}_{} [{}]", self.size, self.class_id, self.code_string())
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for x in 0..k {
            if !prefix.contains(&x) {
                prefix.push(x);
                rec(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out
}

fn bit(code: u16, k: usize, i: usize, j: usize) -> bool {
    code >> (k * k - 1 - (i * k + j)) & 1 == 1
}

/// Minimum row-major code over all relabellings of `code`.
pub fn canonical_code(code: u16, k: usize) -> u16 {
    permutations(k)
        .iter()
        .map(|p| relabel(code, k, p))
        .min()
        .expect("at least one permutation")
}

fn relabel(code: u16, k: usize, p: &[usize]) -> u16 {
    let mut out = 0u16;
    for i in 0..k {
        for j in 0..k {
            out = out << 1 | bit(code, k, p[i], p[j]) as u16;
        }
    }
    out
}

fn weakly_connected(code: u16, k: usize) -> bool {
    let mut seen = 1u32;
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        for w in 0..k {
            if seen >> w & 1 == 0 && (bit(code, k, v, w) || bit(code, k, w, v)) {
                seen |= 1 << w;
                stack.push(w);
            }
        }
    }
    seen.count_ones() as usize == k
}

/// Classes of one size plus a lookup from any raw labelled code to its class id.
#[derive(Debug)]
pub struct Catalog {
    pub size: usize,
    pub classes: Vec<GraphletClass>,
    lookup: Vec<u16>,
}

const NOT_A_CLASS: u16 = u16::MAX;

impl Catalog {
    fn build(k: usize) -> Self {
        let cells = k * k;
        let diagonal: u16 = (0..k).map(|i| 1u16 << (cells - 1 - (i * k + i))).sum();
        let mut canon_of = vec![NOT_A_CLASS; 1 << cells];
        let mut codes = Vec::new();
        for raw in 0..(1u32 << cells) {
            let raw = raw as u16;
            if raw & diagonal != 0 || !weakly_connected(raw, k) {
                continue;
            }
            let c = canonical_code(raw, k);
            canon_of[raw as usize] = c;
            codes.push(c);
        }
        codes.sort_unstable();
        codes.dedup();
        let lookup = canon_of
            .iter()
            .map(|&c| {
                if c == NOT_A_CLASS {
                    NOT_A_CLASS
                } else {
                    codes.binary_search(&c).unwrap() as u16
                }
            })
            .collect();
        let classes = codes
            .iter()
            .enumerate()
            .map(|(class_id, &canonical_code)| GraphletClass {
                size: k,
                class_id,
                canonical_code,
            })
            .collect();
        Catalog {
            size: k,
            classes,
            lookup,
        }
    }

    /// Class id of a raw labelled code, if it is a weakly connected graphlet.
    pub fn classify(&self, raw: u16) -> Option<usize> {
        match self.lookup.get(raw as usize) {
            Some(&id) if id != NOT_A_CLASS => Some(id as usize),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

static CATALOGS: [OnceLock<Catalog>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];

pub fn catalog(size: usize) -> Result<&'static Catalog, GraphletError> {
    check_size(size)?;
    Ok(CATALOGS[size - MIN_SIZE].get_or_init(|| Catalog::build(size)))
}

/// All weakly connected directed classes on `size` nodes in class id order.
pub fn generate_catalog(size: usize) -> Result<&'static [GraphletClass], GraphletError> {
    catalog(size).map(|c| c.classes.as_slice())
}

/// Compact digraph used for enumeration, both for input graphs and null samples.
#[derive(Debug, Clone)]
pub struct Digraph {
    out: Vec<Vec<usize>>,
    undirected: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Digraph {
    /// `edges` must be free of self-loops and duplicates.
    pub fn from_edges(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut out = vec![Vec::new(); node_count];
        let mut undirected = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            out[u].push(v);
            undirected[u].push(v);
            undirected[v].push(u);
        }
        for list in out.iter_mut().chain(undirected.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Digraph { out, undirected, edges }
    }

    pub fn from_call_graph(cg: &CallGraph) -> Self {
        Self::from_edges(cg.node_count(), cg.edges().to_vec())
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].binary_search(&v).is_ok()
    }

    fn adjacent(&self, u: usize, v: usize) -> bool {
        self.undirected[u].binary_search(&v).is_ok()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.out.iter().map(Vec::len).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.node_count()];
        for &(_, v) in &self.edges {
            d[v] += 1;
        }
        d
    }

    fn raw_code(&self, nodes: &[usize]) -> u16 {
        let mut code = 0u16;
        for &u in nodes {
            for &v in nodes {
                code = code << 1 | (u != v && self.has_edge(u, v)) as u16;
            }
        }
        code
    }
}

/// Exhaustive census, or Rand-ESU style sampling for graphs above an edge budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingPolicy {
    /// Graphs with more edges than this are sampled. `None` means always exact.
    pub max_exact_edges: Option<usize>,
    /// Probability of following each extension below the root.
    pub keep_probability: f64,
    pub seed: u64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            max_exact_edges: None,
            keep_probability: 0.5,
            seed: 0,
        }
    }
}

impl SamplingPolicy {
    pub fn exact() -> Self {
        Self::default()
    }

    fn applies_to(&self, g: &Digraph) -> bool {
        self.max_exact_edges.is_some_and(|m| g.edges.len() > m)
    }
}

struct Esu<'a> {
    g: &'a Digraph,
    catalog: &'a Catalog,
    k: usize,
    counts: Vec<u64>,
    sampler: Option<(f64, ChaCha8Rng)>,
}

impl Esu<'_> {
    fn run_root(&mut self, root: usize) {
        let ext: Vec<usize> = self.g.undirected[root].iter().copied().filter(|&w| w > root).collect();
        let mut sub = vec![root];
        self.extend(&mut sub, ext, root);
    }

    fn extend(&mut self, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize) {
        if sub.len() == self.k {
            let id = self
                .catalog
                .classify(self.g.raw_code(sub))
                .expect("ESU only yields connected subsets");
            self.counts[id] += 1;
            return;
        }
        while let Some(w) = ext.pop() {
            if let Some((p, rng)) = self.sampler.as_mut() {
                if rng.random::<f64>() >= *p {
                    continue;
                }
            }
            let mut next = ext.clone();
            for &u in &self.g.undirected[w] {
                if u > root && !sub.contains(&u) && !next.contains(&u) && !sub.iter().any(|&s| self.g.adjacent(s, u)) {
                    next.push(u);
                }
            }
            sub.push(w);
            self.extend(sub, next, root);
            sub.pop();
        }
    }
}

/// Per-class occurrence counts indexed by class id.
pub fn count_graphlets(g: &Digraph, size: usize, policy: &SamplingPolicy) -> Result<Vec<u64>, GraphletError> {
    let catalog = catalog(size)?;
    let sampled = policy.applies_to(g);
    if sampled && !(policy.keep_probability > 0.0 && policy.keep_probability <= 1.0) {
        return Err(GraphletError::InvalidSampling(policy.keep_probability));
    }
    let zero = || vec![0u64; catalog.len()];
    let counts = (0..g.node_count())
        .into_par_iter()
        .fold(zero, |mut acc, root| {
            let mut esu = Esu {
                g,
                catalog,
                k: size,
                counts: std::mem::take(&mut acc),
                sampler: sampled.then(|| {
                    (
                        policy.keep_probability,
                        ChaCha8Rng::seed_from_u64(derive_seed(policy.seed, &[size as u64, root as u64])),
                    )
                }),
            };
            esu.run_root(root);
            esu.counts
        })
        .reduce(zero, |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });
    if sampled {
        let scale = policy.keep_probability.powi(size as i32 - 1);
        Ok(counts.into_iter().map(|c| (c as f64 / scale).round() as u64).collect())
    } else {
        Ok(counts)
    }
}

/// Exact census of `cg`: class id to occurrence count, absent classes omitted.
pub fn enumerate_graphlets(cg: &CallGraph, size: usize) -> Result<BTreeMap<usize, u64>, GraphletError> {
    let counts = count_graphlets(&Digraph::from_call_graph(cg), size, &SamplingPolicy::exact())?;
    Ok(counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect())
}

/// SplitMix64 over a master seed and a path of stream indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &x| mix(acc ^ mix(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VersionFrequency {
    pub count: u64,
    pub rel_freq_percent: f64,
}

/// One class's counts and relative frequencies across the series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphletFrequencySeries {
    pub class: GraphletClass,
    /// Aligned with [`FrequencyReport::versions`].
    pub per_version: Vec<VersionFrequency>,
    /// Mean over all versions; versions without the class contribute 0.
    pub mean_rel_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub versions: Vec<String>,
    pub sizes: Vec<usize>,
    /// Classes seen in at least one version, ordered by (size, class id).
    pub series: Vec<GraphletFrequencySeries>,
    /// Total occurrences per (size, version), aligned with `sizes` and `versions`.
    pub totals: Vec<Vec<u64>>,
    /// `(version, size)` pairs without any occurrence.
    pub degenerate: Vec<(String, usize)>,
}

impl FrequencyReport {
    pub fn total(&self, size: usize, version: usize) -> Option<u64> {
        let s = self.sizes.iter().position(|&x| x == size)?;
        self.totals[s].get(version).copied()
    }

    pub fn is_degenerate(&self, version: &str, size: usize) -> bool {
        self.degenerate.iter().any(|(v, s)| v == version && *s == size)
    }

    pub fn of_size(&self, size: usize) -> impl Iterator<Item = &GraphletFrequencySeries> {
        self.series.iter().filter(move |s| s.class.size == size)
    }
}

fn normalize_sizes(sizes: &[usize]) -> Result<Vec<usize>, GraphletError> {
    let mut v = sizes.to_vec();
    v.sort_unstable();
    v.dedup();
    for &s in &v {
        check_size(s)?;
    }
    if v.is_empty() {
        return Err(GraphletError::InvalidCriterion("no graphlet sizes selected".into()));
    }
    Ok(v)
}

/// Sorted sizes, and class counts indexed by size position, version, class id.
pub type Census = (Vec<usize>, Vec<Vec<Vec<u64>>>);

/// Raw class counts for every (size, version).
pub fn census(series: &VersionSeries, sizes: &[usize], policy: &SamplingPolicy) -> Result<Census, GraphletError> {
    let sizes = normalize_sizes(sizes)?;
    let graphs: Vec<Digraph> = series.graphs().par_iter().map(Digraph::from_call_graph).collect();
    let counts = sizes
        .iter()
        .map(|&k| {
            graphs
                .par_iter()
                .enumerate()
                .map(|(v, g)| {
                    let p = SamplingPolicy {
                        seed: derive_seed(policy.seed, &[v as u64]),
                        ..*policy
                    };
                    count_graphlets(g, k, &p)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((sizes, counts))
}

pub fn frequency_series(
    series: &VersionSeries,
    sizes: &[usize],
    policy: &SamplingPolicy,
) -> Result<FrequencyReport, GraphletError> {
    let versions: Vec<String> = series.version_labels().map(str::to_string).collect();
    let (sizes, counts) = census(series, sizes, policy)?;
    let n = versions.len() as f64;
    let mut out = Vec::new();
    let mut totals = Vec::new();
    let mut degenerate = Vec::new();
    for (si, &k) in sizes.iter().enumerate() {
        let per_version_total: Vec<u64> = counts[si].iter().map(|c| c.iter().sum()).collect();
        for (v, &t) in per_version_total.iter().enumerate() {
            if t == 0 {
                degenerate.push((versions[v].clone(), k));
            }
        }
        for class in &catalog(k)?.classes {
            let per_version: Vec<VersionFrequency> = counts[si]
                .iter()
                .zip(&per_version_total)
                .map(|(c, &t)| {
                    let count = c[class.class_id];
                    VersionFrequency {
                        count,
                        rel_freq_percent: if t == 0 { 0.0 } else { count as f64 * 100.0 / t as f64 },
                    }
                })
                .collect();
            if per_version.iter().all(|f| f.count == 0) {
                continue;
            }
            let mean_rel_freq = per_version.iter().map(|f| f.rel_freq_percent).sum::<f64>() / n;
            out.push(GraphletFrequencySeries {
                class: class.clone(),
                per_version,
                mean_rel_freq,
            });
        }
        totals.push(per_version_total);
    }
    Ok(FrequencyReport {
        versions,
        sizes,
        series: out,
        totals,
        degenerate,
    })
}

/// One degree-preserving randomisation of a digraph.
#[derive(Debug, Clone)]
pub struct NullSample {
    pub graph: Digraph,
    pub attempted_swaps: usize,
    pub successful_swaps: usize,
}

/// Rewire `g` by `swaps_per_edge * |E|` attempted double-edge swaps
/// `(a->b, c->d) => (a->d, c->b)`. Swaps that would create a self-loop or a
/// duplicate edge are rejected, so in- and out-degree sequences are preserved
/// and the result stays simple.
pub fn degree_preserving_sample<R: Rng>(g: &Digraph, swaps_per_edge: usize, rng: &mut R) -> NullSample {
    let mut edges = g.edges.clone();
    let m = edges.len();
    let attempts = swaps_per_edge * m;
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut successes = 0;
    if m >= 2 {
        for _ in 0..attempts {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            if i == j || a == c || b == d || a == d || c == b {
                continue;
            }
            if present.contains(&(a, d)) || present.contains(&(c, b)) {
                continue;
            }
            present.remove(&(a, b));
            present.remove(&(c, d));
            present.insert((a, d));
            present.insert((c, b));
            edges[i] = (a, d);
            edges[j] = (c, b);
            successes += 1;
        }
    }
    edges.sort_unstable();
    NullSample {
        graph: Digraph::from_edges(g.node_count(), edges),
        attempted_swaps: attempts,
        successful_swaps: successes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MotifCriterion {
    pub min_mean_freq_percent: f64,
    pub z_min: Option<f64>,
    pub null_samples: usize,
    pub swaps_per_edge: usize,
}

impl Default for MotifCriterion {
    fn default() -> Self {
        MotifCriterion {
            min_mean_freq_percent: 10.0,
            z_min: None,
            null_samples: 100,
            swaps_per_edge: 3,
        }
    }
}

impl MotifCriterion {
    pub fn validate(&self) -> Result<(), GraphletError> {
        let f = self.min_mean_freq_percent;
        if !(f > 0.0 && f <= 100.0) {
            return Err(GraphletError::InvalidCriterion(format!(
                "frequency threshold must lie in (0, 100], got {f}"
            )));
        }
        if self.z_min.is_some() && self.null_samples < 20 {
            return Err(GraphletError::InvalidCriterion(format!(
                "z-score filtering needs at least 20 null samples, got {}",
                self.null_samples
            )));
        }
        Ok(())
    }
}

/// Z-score outcome of one class over the series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZSummary {
    /// Per version; `None` where the null model was degenerate for this class.
    pub per_version: Vec<Option<f64>>,
    pub passed: usize,
    pub tested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Motif {
    pub class: GraphletClass,
    pub mean_rel_freq: f64,
    pub z: Option<ZSummary>,
    /// No version allowed a z-score; only the frequency test applied.
    pub null_model_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotifReport {
    pub motifs: Vec<Motif>,
    pub criterion: MotifCriterion,
    pub seed: u64,
}

struct NullStats {
    mean: Vec<f64>,
    std: Vec<f64>,
    degenerate: bool,
}

fn null_stats(g: &Digraph, size: usize, criterion: &MotifCriterion, seed: u64) -> Result<NullStats, GraphletError> {
    let classes = catalog(size)?.len();
    let samples: Vec<(Vec<u64>, usize)> = (0..criterion.null_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64]));
            let sample = degree_preserving_sample(g, criterion.swaps_per_edge, &mut rng);
            count_graphlets(&sample.graph, size, &SamplingPolicy::exact()).map(|c| (c, sample.successful_swaps))
        })
        .collect::<Result<_, _>>()?;
    let n = samples.len() as f64;
    let mut mean = vec![0.0; classes];
    for (c, _) in &samples {
        for (m, &x) in mean.iter_mut().zip(c) {
            *m += x as f64 / n;
        }
    }
    let mut std = vec![0.0; classes];
    for (c, _) in &samples {
        for ((s, &x), m) in std.iter_mut().zip(c).zip(&mean) {
            *s += (x as f64 - m).powi(2) / n;
        }
    }
    std.iter_mut().for_each(|s| *s = s.sqrt());
    let degenerate = samples.iter().all(|(_, swaps)| *swaps == 0);
    Ok(NullStats { mean, std, degenerate })
}

/// Classes whose mean relative frequency reaches the threshold and, when a
/// z-score minimum is set, whose count beats the degree-preserving null model
/// in a majority of versions where the null model is informative.
pub fn detect_motifs(
    freqs: &FrequencyReport,
    criterion: &MotifCriterion,
    series: &VersionSeries,
    seed: u64,
) -> Result<MotifReport, GraphletError> {
    criterion.validate()?;
    let candidates: Vec<&GraphletFrequencySeries> = freqs
        .series
        .iter()
        .filter(|s| s.mean_rel_freq >= criterion.min_mean_freq_percent)
        .collect();

    let mut null: BTreeMap<(usize, usize), NullStats> = BTreeMap::new();
    if criterion.z_min.is_some() {
        let sizes: Vec<usize> = candidates
            .iter()
            .map(|c| c.class.size)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let graphs: Vec<Digraph> = series.graphs().iter().map(Digraph::from_call_graph).collect();
        for &k in &sizes {
            let stats: Vec<NullStats> = graphs
                .par_iter()
                .enumerate()
                .map(|(v, g)| null_stats(g, k, criterion, derive_seed(seed, &[k as u64, v as u64])))
                .collect::<Result<_, _>>()?;
            for (v, s) in stats.into_iter().enumerate() {
                null.insert((k, v), s);
            }
        }
    }

    let mut motifs = Vec::new();
    for c in candidates {
        let Some(z_min) = criterion.z_min else {
            motifs.push(Motif {
                class: c.class.clone(),
                mean_rel_freq: c.mean_rel_freq,
                z: None,
                null_model_degenerate: false,
            });
            continue;
        };
        let per_version: Vec<Option<f64>> = c
            .per_version
            .iter()
            .enumerate()
            .map(|(v, f)| {
                let stats = &null[&(c.class.size, v)];
                let sd = stats.std[c.class.class_id];
                (!stats.degenerate && sd > 0.0).then(|| (f.count as f64 - stats.mean[c.class.class_id]) / sd)
            })
            .collect();
        let tested = per_version.iter().flatten().count();
        let passed = per_version.iter().flatten().filter(|&&z| z >= z_min).count();
        let degenerate = tested == 0;
        if degenerate || 2 * passed > tested {
            motifs.push(Motif {
                class: c.class.clone(),
                mean_rel_freq: c.mean_rel_freq,
                z: Some(ZSummary {
                    per_version,
                    passed,
                    tested,
                }),
                null_model_degenerate: degenerate,
            });
        }
    }
    motifs.sort_by(|a, b| {
        b.mean_rel_freq
            .total_cmp(&a.mean_rel_freq)
            .then((a.class.size, a.class.class_id).cmp(&(b.class.size, b.class.class_id)))
    });
    Ok(MotifReport {
        motifs,
        criterion: *criterion,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::graph_from_edges;

    fn class_of(edges: &[(usize, usize)], k: usize) -> usize {
        let mut raw = 0u16;
        for &(i, j) in edges {
            raw |= 1 << (k * k - 1 - (i * k + j));
        }
        catalog(k).unwrap().classify(raw).unwrap()
    }

    #[test]
    fn catalog_sizes() {
        assert_eq!(generate_catalog(2).unwrap().len(), 2);
        assert_eq!(generate_catalog(3).unwrap().len(), 13);
        assert_eq!(generate_catalog(4).unwrap().len(), 199);
        assert_eq!(generate_catalog(5), Err(GraphletError::UnsupportedSize(5)));
        assert_eq!(generate_catalog(1), Err(GraphletError::UnsupportedSize(1)));
    }

    #[test]
    fn catalog_is_sorted_and_canonical() {
        for k in 2..=4 {
            let classes = generate_catalog(k).unwrap();
            for (i, c) in classes.iter().enumerate() {
                assert_eq!(c.class_id, i);
                assert_eq!(canonical_code(c.canonical_code, k), c.canonical_code);
                assert_eq!(c.code_string().len(), k * k);
            }
            assert!(classes.windows(2).all(|w| w[0].canonical_code < w[1].canonical_code));
        }
        let two = generate_catalog(2).unwrap();
        assert_eq!(two[0].code_string(), "0010");
        assert_eq!(two[1].code_string(), "0110");
    }

    #[test]
    fn three_cycle_and_path() {
        let cycle = graph_from_edges("v", &[("a", "b"), ("b", "c"), ("c", "a")]);
        let counts = enumerate_graphlets(&cycle, 3).unwrap();
        assert_eq!(counts, BTreeMap::from([(class_of(&[(0, 1), (1, 2), (2, 0)], 3), 1)]));

        let path = graph_from_edges("v", &[("a", "b"), ("b", "c")]);
        let counts = enumerate_graphlets(&path, 3).unwrap();
        assert_eq!(counts, BTreeMap::from([(class_of(&[(0, 1), (1, 2)], 3), 1)]));
    }

    #[test]
    fn out_star() {
        let star = graph_from_edges("v", &[("s", "x"), ("s", "y"), ("s", "z")]);
        let counts = enumerate_graphlets(&star, 4).unwrap();
        let id = class_of(&[(0, 1), (0, 2), (0, 3)], 4);
        assert_eq!(counts, BTreeMap::from([(id, 1)]));
        assert_eq!(generate_catalog(4).unwrap()[id].cyclomatic(), 1);
    }

    #[test]
    fn no_occurrences() {
        let g = graph_from_edges("v", &[("a", "b")]);
        assert!(enumerate_graphlets(&g, 3).unwrap().is_empty());
        assert_eq!(enumerate_graphlets(&g, 2).unwrap().values().sum::<u64>(), 1);
    }

    #[test]
    fn two_node_graph_cannot_be_swapped() {
        let g = Digraph::from_call_graph(&graph_from_edges("v", &[("a", "b")]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = degree_preserving_sample(&g, 10, &mut rng);
        assert_eq!(s.successful_swaps, 0);

        let series = VersionSeries::new("s", vec![graph_from_edges("v", &[("a", "b")])]).unwrap();
        let freqs = frequency_series(&series, &[2], &SamplingPolicy::exact()).unwrap();
        let criterion = MotifCriterion {
            z_min: Some(2.0),
            null_samples: 20,
            ..Default::default()
        };
        let report = detect_motifs(&freqs, &criterion, &series, 7).unwrap();
        assert_eq!(report.motifs.len(), 1);
        assert!(report.motifs[0].null_model_degenerate);
    }

    #[test]
    fn frequency_threshold() {
        let mut edges = vec![("a", "b"), ("b", "c"), ("c", "a")];
        let names: Vec<String> = (0..20).map(|i| format!("leaf{i}")).collect();
        for n in &names {
            edges.push(("a", n.as_str()));
        }
        let series = VersionSeries::new("s", vec![graph_from_edges("v", &edges)]).unwrap();
        let freqs = frequency_series(&series, &[3], &SamplingPolicy::exact()).unwrap();
        let report = detect_motifs(&freqs, &MotifCriterion::default(), &series, 0).unwrap();
        let triangle = class_of(&[(0, 1), (1, 2), (2, 0)], 3);
        assert!(report.motifs.iter().all(|m| m.mean_rel_freq >= 10.0));
        assert!(report.motifs.iter().all(|m| m.class.class_id != triangle));
        let total: f64 = freqs.series.iter().map(|s| s.per_version[0].rel_freq_percent).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn half_present_class_averages_to_quarter() {
        // v1: single arc only; v2: reciprocal pair only
        let v1 = graph_from_edges("v1", &[("a", "b")]);
        let v2 = graph_from_edges("v2", &[("a", "b"), ("b", "a")]);
        let series = VersionSeries::new("s", vec![v1.clone(), v2]).unwrap();
        let freqs = frequency_series(&series, &[2], &SamplingPolicy::exact()).unwrap();
        assert_eq!(freqs.series.len(), 2);
        assert!(freqs.series.iter().all(|s| s.mean_rel_freq == 50.0));

        // v1 half arcs half reciprocal, v2 lacks the reciprocal class entirely
        let v1 = graph_from_edges("v1", &[("a", "b"), ("c", "d"), ("d", "c")]);
        let v2 = graph_from_edges("v2", &[("a", "b")]);
        let series = VersionSeries::new("s", vec![v1, v2]).unwrap();
        let freqs = frequency_series(&series, &[2], &SamplingPolicy::exact()).unwrap();
        let reciprocal = freqs.series.iter().find(|s| s.class.arc_count() == 2).unwrap();
        assert_eq!(reciprocal.per_version[0].rel_freq_percent, 50.0);
        assert_eq!(reciprocal.mean_rel_freq, 25.0);
    }

    #[test]
    fn degenerate_versions_flagged() {
        let series = VersionSeries::new("s", vec![graph_from_edges("v", &[("a", "b")])]).unwrap();
        let freqs = frequency_series(&series, &[3, 2], &SamplingPolicy::exact()).unwrap();
        assert_eq!(freqs.sizes, vec![2, 3]);
        assert!(freqs.is_degenerate("v", 3));
        assert!(!freqs.is_degenerate("v", 2));
        assert!(frequency_series(&series, &[5], &SamplingPolicy::exact()).is_err());
    }

    #[test]
    fn criterion_validation() {
        let bad = MotifCriterion {
            min_mean_freq_percent: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let few = MotifCriterion {
            z_min: Some(1.0),
            null_samples: 5,
            ..Default::default()
        };
        assert!(few.validate().is_err());
    }

    #[test]
    fn sampling_with_probability_one_is_exact() {
        let g = graph_from_edges("v", &[("a", "b"), ("b", "c"), ("c", "d"), ("a", "d"), ("b", "d")]);
        let d = Digraph::from_call_graph(&g);
        let policy = SamplingPolicy {
            max_exact_edges: Some(0),
            keep_probability: 1.0,
            seed: 3,
        };
        assert_eq!(
            count_graphlets(&d, 4, &policy).unwrap(),
            count_graphlets(&d, 4, &SamplingPolicy::exact()).unwrap()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = Vec<(u8, u8)>> {
            prop::collection::vec((0u8..9, 0u8..9), 1..30)
        }

        fn build(edges: &[(u8, u8)], perm: &[u8]) -> CallGraph {
            let mut b = CallGraph::builder("v");
            for &(u, v) in edges {
                let (u, v) = (format!("p{}", perm[u as usize]), format!("p{}", perm[v as usize]));
                b.procedure(&u, "m").unwrap();
                b.procedure(&v, "m").unwrap();
                b.call(&u, &v).unwrap();
            }
            b.build().unwrap()
        }

        proptest! {
            #[test]
            fn relabelling_keeps_census(edges in arb_graph(), perm in Just((0u8..9).collect::<Vec<_>>()).prop_shuffle()) {
                let id: Vec<u8> = (0..9).collect();
                for k in 2..=4 {
                    prop_assert_eq!(
                        enumerate_graphlets(&build(&edges, &id), k).unwrap(),
                        enumerate_graphlets(&build(&edges, &perm), k).unwrap()
                    );
                }
            }

            #[test]
            fn swaps_preserve_degrees(edges in arb_graph(), seed in any::<u64>()) {
                let g = Digraph::from_call_graph(&build(&edges, &(0..9).collect::<Vec<_>>()));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = degree_preserving_sample(&g, 5, &mut rng);
                prop_assert_eq!(s.graph.out_degrees(), g.out_degrees());
                prop_assert_eq!(s.graph.in_degrees(), g.in_degrees());
                prop_assert_eq!(s.graph.edges().len(), g.edges().len());
                prop_assert!(s.graph.edges().iter().all(|&(u, v)| u != v));
            }
        }
    }
}
