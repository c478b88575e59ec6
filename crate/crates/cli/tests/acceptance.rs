//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Built with `harness = false` so the summary
//! is always visible in `cargo test` output.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cgevo::complexity::Weighting;
use cgevo::evolution::{MinStability, RuleKey};
use cgevo::graphlets::{
    catalog, degree_preserving_sample, enumerate_graphlets, frequency_series, generate_catalog, Digraph, SamplingPolicy,
};
use cgevo::pipeline::{complexity, mine_rules};
use cgevo::rules::{generate_rules, mine_frequent_itemsets, RuleThresholds, TransactionDb};
use cgevo::synth::{generate, SynthParams};
use cgevo::{graph_stats, CallGraph, VersionSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, check, and optional wall-clock limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

fn graph(label: &str, n: usize, edges: &BTreeSet<(usize, usize)>) -> CallGraph {
    let name = |i: usize| format!("n{i:02}");
    let mut b = CallGraph::builder(label);
    for i in 0..n {
        b.procedure(&name(i), "m").unwrap();
    }
    for &(u, v) in edges {
        b.call(&name(u), &name(v)).unwrap();
    }
    b.build().unwrap()
}

fn synth(nodes: usize, versions: usize, churn: f64, seed: u64) -> VersionSeries {
    generate(&SynthParams {
        nodes,
        versions,
        churn,
        seed,
    })
    .unwrap()
}

fn venn_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut stable_total = 0;
    for seed in 0..50 {
        let versions = rng.random_range(2..=7);
        let series = synth(rng.random_range(60..=200), versions, rng.random_range(0.0..0.3), seed);
        let thresholds = RuleThresholds {
            min_sup: rng.random_range(0.2..0.6),
            min_conf: rng.random_range(0.5..0.95),
            ..RuleThresholds::default()
        };
        let min_stab = MinStability::Count(rng.random_range(1..=versions));
        let run = mine_rules(&series, &thresholds, min_stab).map_err(|e| e.to_string())?;
        let union: BTreeSet<RuleKey> = run
            .per_version
            .iter()
            .flat_map(|(_, rs)| rs.iter().map(RuleKey::of))
            .collect();
        let cgers: BTreeSet<RuleKey> = run.cgers.iter().map(|r| r.key.clone()).collect();
        let stable: BTreeSet<RuleKey> = run.stable.rules.iter().map(|r| r.key.clone()).collect();
        ensure!(stable.is_subset(&cgers), "seed {seed}: stable not within CGERs");
        ensure!(cgers.is_subset(&union), "seed {seed}: CGERs not within union of CGRs");
        for c in run.summary.per_version.iter().chain([&run.summary.overall]) {
            ensure!(
                c.stable <= c.cger_distinct && c.cger_distinct <= c.cgr_total,
                "seed {seed}: count ordering broken at {c:?}"
            );
        }
        stable_total += stable.len();
    }
    ensure!(
        stable_total > 0,
        "no series produced a stable rule, the check is vacuous"
    );
    Ok(format!("50 series, {stable_total} stable rules in total"))
}

fn apriori_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut sets, mut rules) = (0, 0);
    for case in 0..200 {
        let items = rng.random_range(1..=12u32);
        let n = rng.random_range(1..=40);
        let density = rng.random_range(0.1..0.8);
        let db: Vec<BTreeSet<u32>> = (0..n)
            .map(|_| {
                let mut t: BTreeSet<u32> = (0..items).filter(|_| rng.random_bool(density)).collect();
                t.insert(rng.random_range(0..items));
                t
            })
            .collect();
        let min_sup = rng.random_range(0.05..=1.0);
        let min_conf = rng.random_range(0.0..=1.0);
        let expected_sets = oracle::frequent_itemsets(&db, min_sup, 12);
        let expected_rules = oracle::rules(&expected_sets, min_conf);

        let tdb = TransactionDb::from_transactions("v", db.iter().map(|t| t.iter().map(|i| format!("i{i:02}"))));
        let freq = mine_frequent_itemsets(&tdb, min_sup, 12).map_err(|e| e.to_string())?;
        let id = |s: &str| s[1..].parse::<u32>().unwrap();
        let got_sets: BTreeMap<Vec<u32>, usize> = freq
            .counts
            .iter()
            .map(|(k, &c)| (k.items().iter().map(|s| id(s)).collect(), c))
            .collect();
        ensure!(got_sets == expected_sets, "case {case}: frequent itemsets differ");

        let got = generate_rules(&freq, min_conf).map_err(|e| e.to_string())?;
        ensure!(
            got.len() == expected_rules.len(),
            "case {case}: {} rules, expected {}",
            got.len(),
            expected_rules.len()
        );
        for r in &got {
            let x: Vec<u32> = r.antecedent.items().iter().map(|s| id(s)).collect();
            let y: Vec<u32> = r.consequent.items().iter().map(|s| id(s)).collect();
            let mut z = [x.clone(), y.clone()].concat();
            z.sort_unstable();
            let (zc, xc) = (expected_sets[&z], expected_sets[&x]);
            ensure!(
                expected_rules.contains(&(x, y, zc, xc)),
                "case {case}: unexpected rule {r}"
            );
            ensure!(r.support == zc as f64 / n as f64, "case {case}: support of {r}");
            ensure!(r.confidence == zc as f64 / xc as f64, "case {case}: confidence of {r}");
        }
        sets += got_sets.len();
        rules += got.len();
    }
    Ok(format!("200 databases, {sets} itemsets and {rules} rules matched"))
}

fn raw_code(k: usize, arcs: &[(usize, usize)]) -> u16 {
    arcs.iter().fold(0, |c, &(i, j)| c | 1 << (k * k - 1 - (i * k + j)))
}

fn catalog_sizes() -> Outcome {
    let mut sizes = Vec::new();
    for (k, expected) in [(2, 2), (3, 13), (4, 199)] {
        let classes = generate_catalog(k).map_err(|e| e.to_string())?;
        let reps = oracle::isomorphism_classes(k);
        ensure!(reps.len() == expected, "oracle found {} classes for k={k}", reps.len());
        ensure!(
            classes.len() == expected,
            "catalog has {} classes for k={k}",
            classes.len()
        );
        let cat = catalog(k).map_err(|e| e.to_string())?;
        let ids: BTreeSet<usize> = reps.iter().filter_map(|a| cat.classify(raw_code(k, a))).collect();
        ensure!(
            ids.len() == expected,
            "oracle classes map onto {} catalog ids for k={k}",
            ids.len()
        );
        ensure!(
            classes.windows(2).all(|w| w[0].canonical_code < w[1].canonical_code),
            "k={k}: catalog not ordered by canonical code"
        );
        ensure!(
            classes.iter().enumerate().all(|(i, c)| c.class_id == i),
            "k={k}: class ids are not positions"
        );
        sizes.push(classes.len().to_string());
    }
    Ok(format!("sizes {}", sizes.join("/")))
}

fn counting_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut key_to_id: BTreeMap<(usize, Vec<(usize, usize)>), usize> = BTreeMap::new();
    for k in [3, 4] {
        for c in generate_catalog(k).unwrap() {
            key_to_id.insert((k, oracle::canonical_arcs(k, &c.arcs())), c.class_id);
        }
    }
    let mut occurrences = 0;
    for case in 0..100u64 {
        let n = rng.random_range(5..=30);
        let edges = oracle::random_digraph(case, n, rng.random_range(2.0..=3.0));
        let cg = graph("v", n, &edges);
        for k in [3, 4] {
            let expected: BTreeMap<usize, u64> = oracle::subgraph_census(n, &edges, k)
                .into_iter()
                .map(|(arcs, c)| (key_to_id[&(k, arcs)], c))
                .collect();
            let got = enumerate_graphlets(&cg, k).map_err(|e| e.to_string())?;
            ensure!(got == expected, "case {case}, k={k}: census differs");
            occurrences += got.values().sum::<u64>();
        }
    }
    Ok(format!("100 graphs, {occurrences} occurrences matched"))
}

fn cyclomatic_check() -> Outcome {
    let mut trees = 0;
    for k in 2..=4 {
        for c in generate_catalog(k).unwrap() {
            let arcs = c.arcs();
            ensure!(c.cyclomatic() == arcs.len() as i64 - k as i64 + 2, "{c}: not E-N+2");
            ensure!(
                c.cyclomatic() == oracle::cycle_rank(k, &arcs) + 1,
                "{c}: disagrees with cycle rank"
            );
            if arcs.len() == k - 1 {
                ensure!(c.cyclomatic() == 1, "tree class {c} has CC {}", c.cyclomatic());
                trees += 1;
            }
        }
    }
    Ok(format!("214 classes, {trees} trees with CC 1"))
}

fn complexity_aggregation() -> Outcome {
    let flat = synth(150, 5, 0.0, 6);
    let churned = synth(150, 6, 0.2, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random = VersionSeries::new(
        "random",
        (0..4)
            .map(|v| {
                let n = rng.random_range(10..=30);
                graph(&format!("r{v}"), n, &oracle::random_digraph(v, n, 2.5))
            })
            .collect(),
    )
    .unwrap();
    let mut spreads = Vec::new();
    for (name, series) in [("flat", &flat), ("churned", &churned), ("random", &random)] {
        for weighting in [Weighting::Relative, Weighting::AbsoluteCount] {
            let r = complexity(series, &[3, 4], &SamplingPolicy::exact(), weighting, 0).map_err(|e| e.to_string())?;
            let mean = r.per_version.iter().map(|c| c.value).sum::<f64>() / r.per_version.len() as f64;
            ensure!(
                (r.ecg_cx - mean).abs() <= 1e-9,
                "{name}: aggregate {} vs mean {mean}",
                r.ecg_cx
            );
            let lo = r.per_version.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
            let hi = r.per_version.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
            if name == "flat" {
                ensure!(
                    hi - lo <= 1e-9 && (r.ecg_cx - lo).abs() <= 1e-9,
                    "churn-free series is not flat"
                );
            }
            if name == "churned" && weighting == Weighting::Relative {
                ensure!(hi - lo > 1e-6, "churned series shows no variation");
                spreads.push(hi - lo);
            }
        }
    }
    Ok(format!("churned spread {:.4}", spreads[0]))
}

fn null_model() -> Outcome {
    let series = synth(300, 1, 0.0, 7);
    let g = Digraph::from_call_graph(&series.graphs()[0]);
    let (outs, ins) = (g.out_degrees(), g.in_degrees());
    let mut swaps = 0;
    for s in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let sample = degree_preserving_sample(&g, 3, &mut rng);
        let h = &sample.graph;
        ensure!(
            h.out_degrees() == outs && h.in_degrees() == ins,
            "sample {s}: degree sequence changed"
        );
        let distinct: BTreeSet<_> = h.edges().iter().collect();
        ensure!(distinct.len() == h.edges().len(), "sample {s}: duplicate edge");
        ensure!(h.edges().iter().all(|(u, v)| u != v), "sample {s}: self-loop");
        ensure!(sample.successful_swaps > 0, "sample {s}: no swap succeeded");
        swaps += sample.successful_swaps;
    }
    Ok(format!("100 samples, mean {} successful swaps", swaps / 100))
}

fn cgevo(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cgevo"))
        .args(args)
        .env_remove("CGE_JOBS")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "cgevo {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn run_all(manifest: &Path, out: &Path, extra: &[&str]) -> Result<(), String> {
    let m = manifest.to_str().unwrap();
    let o = out.to_str().unwrap();
    cgevo(&[&["mine-rules", "--manifest", m, "--out", o], extra].concat())?;
    cgevo(
        &[
            &[
                "mine-subgraphs",
                "--manifest",
                m,
                "--out",
                o,
                "--z-min",
                "1.0",
                "--null-samples",
                "20",
                "--sample-above-edges",
                "150",
            ],
            extra,
        ]
        .concat(),
    )?;
    cgevo(
        &[
            &["complexity", "--manifest", m, "--out", o, "--sample-above-edges", "150"],
            extra,
        ]
        .concat(),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    cgevo(&[
        "synth",
        "--nodes",
        "200",
        "--versions",
        "4",
        "--churn",
        "0.1",
        "--seed",
        "8",
        "--out",
        data.to_str().unwrap(),
    ])?;
    let manifest = data.join("manifest.json");
    let (a, b) = (tmp.path().join("j1"), tmp.path().join("j8"));
    run_all(&manifest, &a, &["--jobs", "1", "--seed", "8"])?;
    run_all(&manifest, &b, &["--jobs", "8", "--seed", "8"])?;
    let (fa, fb) = (read_dir(&a), read_dir(&b));
    ensure!(fa.len() == 9, "expected 9 output files, got {}", fa.len());
    ensure!(fa.keys().eq(fb.keys()), "different file sets");
    for (name, bytes) in &fa {
        ensure!(fb[name] == *bytes, "{name} differs between --jobs 1 and --jobs 8");
    }
    Ok(format!("{} files byte-identical", fa.len()))
}

fn performance() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let series = synth(600, 9, 0.05, 9);
    let mean_nb = series
        .graphs()
        .iter()
        .map(|g| graph_stats(g).avg_neighbours)
        .sum::<f64>()
        / 9.0;
    ensure!(
        (2.0..=3.0).contains(&mean_nb),
        "synthetic series has {mean_nb:.2} average neighbours"
    );
    cgevo(&[
        "synth",
        "--nodes",
        "600",
        "--versions",
        "9",
        "--churn",
        "0.05",
        "--seed",
        "9",
        "--out",
        data.to_str().unwrap(),
    ])?;
    let m = data.join("manifest.json");
    let (m, o) = (m.to_str().unwrap(), tmp.path().join("out"));
    let o = o.to_str().unwrap();
    let start = Instant::now();
    cgevo(&["mine-rules", "--manifest", m, "--out", o])?;
    cgevo(&["mine-subgraphs", "--manifest", m, "--out", o, "--sizes", "3,4"])?;
    cgevo(&["complexity", "--manifest", m, "--out", o, "--sizes", "3,4"])?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "pipeline took {elapsed:?}");
    Ok(format!(
        "pipeline {:.1}s, mean avg neighbours {mean_nb:.2}",
        elapsed.as_secs_f64()
    ))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    let mut all = vec![synth(200, 4, 0.1, 10)];
    for s in 0..5 {
        all.push(
            VersionSeries::new(
                "random",
                (0..3)
                    .map(|v| {
                        let n = rng.random_range(3..=30);
                        graph(
                            &format!("v{v}"),
                            n,
                            &oracle::random_digraph(100 * s + v, n, rng.random_range(1.0..3.0)),
                        )
                    })
                    .collect(),
            )
            .unwrap(),
        );
    }
    for series in &all {
        let f = frequency_series(series, &[2, 3, 4], &SamplingPolicy::exact()).map_err(|e| e.to_string())?;
        for &k in &f.sizes {
            for (v, label) in f.versions.iter().enumerate() {
                if f.total(k, v) == Some(0) {
                    continue;
                }
                let sum: f64 = f.of_size(k).map(|s| s.per_version[v].rel_freq_percent).sum();
                ensure!(
                    (sum - 100.0).abs() <= 1e-9,
                    "version {label}, k={k}: frequencies sum to {sum}"
                );
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (version, size) distributions sum to 100"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "stable within CGERs within CGRs, count ordering",
            venn_property,
            Some(60),
        ),
        ("apriori equals exhaustive enumeration", apriori_oracle, Some(60)),
        ("catalog sizes 2/13/199", catalog_sizes, Some(10)),
        (
            "graphlet census equals naive subset counting",
            counting_oracle,
            Some(120),
        ),
        ("cyclomatic numbers", cyclomatic_check, Some(5)),
        ("complexity aggregation", complexity_aggregation, None),
        ("null model preserves degrees", null_model, None),
        ("byte-identical output across --jobs", determinism, None),
        ("desk-scale pipeline under 5 minutes", performance, Some(300)),
        ("relative frequencies sum to 100", normalization, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut result = check();
        let secs = start.elapsed().as_secs_f64();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if secs > limit as f64 {
                result = Err(format!("took {secs:.1}s, limit {limit}s"));
            }
        }
        match result {
            Ok(detail) => println!("acceptance {:>2} PASS  {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2} FAIL  {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
