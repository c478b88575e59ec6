//! Brute-force reference implementations. Slow on purpose; none of them share
//! code with the library beyond its public data types.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::{connected_components, is_isomorphic};
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every frequent itemset by trying all subsets of the item universe.
pub fn frequent_itemsets(transactions: &[BTreeSet<u32>], min_sup: f64, max_size: usize) -> BTreeMap<Vec<u32>, usize> {
    let universe: Vec<u32> = transactions
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = transactions.len();
    let mut out = BTreeMap::new();
    if n == 0 {
        return out;
    }
    for mask in 1u32..(1 << universe.len()) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let set: Vec<u32> = (0..universe.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| universe[i])
            .collect();
        let count = transactions
            .iter()
            .filter(|t| set.iter().all(|x| t.contains(x)))
            .count();
        if count as f64 / n as f64 >= min_sup {
            out.insert(set, count);
        }
    }
    out
}

/// `(antecedent, consequent, z_count, x_count)` for every rule from the
/// frequent sets whose confidence reaches `min_conf`.
pub fn rules(frequent: &BTreeMap<Vec<u32>, usize>, min_conf: f64) -> BTreeSet<(Vec<u32>, Vec<u32>, usize, usize)> {
    let mut out = BTreeSet::new();
    for (z, &zc) in frequent {
        if z.len() < 2 {
            continue;
        }
        for mask in 1u32..(1 << z.len()) - 1 {
            let x: Vec<u32> = (0..z.len()).filter(|&i| mask >> i & 1 == 1).map(|i| z[i]).collect();
            let y: Vec<u32> = (0..z.len()).filter(|&i| mask >> i & 1 == 0).map(|i| z[i]).collect();
            let xc = frequent[&x];
            if zc as f64 / xc as f64 >= min_conf {
                out.insert((x, y, zc, xc));
            }
        }
    }
    out
}

fn digraph(k: usize, arcs: &[(usize, usize)]) -> DiGraph<(), ()> {
    let mut g = DiGraph::new();
    let ids: Vec<_> = (0..k).map(|_| g.add_node(())).collect();
    for &(u, v) in arcs {
        g.add_edge(ids[u], ids[v], ());
    }
    g
}

/// One representative arc list per weakly connected isomorphism class on `k`
/// nodes, deduplicated with VF2.
pub fn isomorphism_classes(k: usize) -> Vec<Vec<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .collect();
    let mut by_arcs: BTreeMap<usize, Vec<DiGraph<(), ()>>> = BTreeMap::new();
    let mut reps = Vec::new();
    for mask in 0u32..(1 << cells.len()) {
        let arcs: Vec<(usize, usize)> = (0..cells.len())
            .filter(|&b| mask >> b & 1 == 1)
            .map(|b| cells[b])
            .collect();
        let g = digraph(k, &arcs);
        if connected_components(&g) != 1 {
            continue;
        }
        let bucket = by_arcs.entry(arcs.len()).or_default();
        if bucket.iter().any(|h| is_isomorphic(h, &g)) {
            continue;
        }
        bucket.push(g);
        reps.push(arcs);
    }
    reps
}

/// Permutation-minimal sorted arc list, a canonical form independent of the
/// library's bit encoding.
pub fn canonical_arcs(k: usize, arcs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut best: Option<Vec<(usize, usize)>> = None;
    let mut perm: Vec<usize> = (0..k).collect();
    permutations(&mut perm, 0, &mut |p| {
        let mut relabeled: Vec<(usize, usize)> = arcs.iter().map(|&(u, v)| (p[u], p[v])).collect();
        relabeled.sort_unstable();
        if best.as_ref().is_none_or(|b| relabeled < *b) {
            best = Some(relabeled);
        }
    });
    best.unwrap_or_default()
}

fn permutations(p: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == p.len() {
        f(p);
        return;
    }
    for i in at..p.len() {
        p.swap(at, i);
        permutations(p, at + 1, f);
        p.swap(at, i);
    }
}

fn weakly_connected(nodes: &[usize], edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..nodes.len() {
            if !seen[j] && (edges.contains(&(nodes[i], nodes[j])) || edges.contains(&(nodes[j], nodes[i]))) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Counts of connected induced `k`-node subgraphs keyed by [`canonical_arcs`],
/// by trying every node subset.
pub fn subgraph_census(n: usize, edges: &BTreeSet<(usize, usize)>, k: usize) -> BTreeMap<Vec<(usize, usize)>, u64> {
    let mut out = BTreeMap::new();
    let mut subset: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        if weakly_connected(&subset, edges) {
            let arcs: Vec<(usize, usize)> = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .filter(|&(i, j)| i != j && edges.contains(&(subset[i], subset[j])))
                .collect();
            *out.entry(canonical_arcs(k, &arcs)).or_insert(0) += 1;
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if subset[i] < n - k + i {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Cycle rank of the underlying undirected multigraph (each arc one edge),
/// from the GF(2) rank of the incidence matrix.
pub fn cycle_rank(k: usize, arcs: &[(usize, usize)]) -> i64 {
    let mut rows: Vec<u32> = arcs.iter().map(|&(u, v)| (1 << u) | (1 << v)).collect();
    let mut rank = 0;
    for bit in 0..k {
        let Some(pivot) = rows.iter().position(|&r| r >> bit & 1 == 1) else {
            continue;
        };
        let p = rows.swap_remove(pivot);
        for r in rows.iter_mut() {
            if *r >> bit & 1 == 1 {
                *r ^= p;
            }
        }
        rank += 1;
    }
    arcs.len() as i64 - rank
}

/// Simple random digraph with about `avg_neighbours * n / 2` arcs.
pub fn random_digraph(seed: u64, n: usize, avg_neighbours: f64) -> BTreeSet<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = (avg_neighbours * n as f64 / 2.0).round() as usize;
    let mut edges = BTreeSet::new();
    while edges.len() < target {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            edges.insert((u, v));
        }
    }
    edges
}
