use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use goram_core::engine::integrate_providers;
use goram_core::gen::{split_random, uniform};
use goram_core::partition::{assemble_bundles, local_process, parse_edge_list, ShareBundle};
use goram_core::{EdgeRecord, GlobalConfig, PlainGraph};
use goram_mpc::prf::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde_json::Value;

fn goram(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goram"))
        .current_dir(dir)
        .env_remove("GORAM_SEED")
        .args(args)
        .output()
        .expect("spawn goram")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = goram(dir, args);
    assert!(
        out.status.success(),
        "goram {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_edges(path: &Path, edges: &[EdgeRecord]) {
    let text: String = edges
        .iter()
        .map(|e| {
            let mut f = vec![e.src.to_string(), e.dst.to_string()];
            f.extend(e.attrs.iter().map(u64::to_string));
            f.join(",") + "\n"
        })
        .collect();
    fs::write(path, text).unwrap();
}

/// Value after `name: ` on the line for query kind `name`.
fn answer(stdout: &str) -> String {
    let line = stdout.lines().next().unwrap();
    line.split_once(": ").unwrap().1.to_string()
}

fn share_files(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    (1..=3).map(|i| dir.join(format!("{prefix}.s{i}"))).collect()
}

#[test]
fn pipeline_matches_oracle_for_every_query_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (round, (v, m, n, slices)) in [(12u64, 30usize, 2usize, 1usize), (20, 60, 3, 2), (9, 9, 1, 1)]
        .into_iter()
        .enumerate()
    {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let edges = uniform(&mut rng, v, m, 1, 20);
        let plain = PlainGraph::from_edges(v, &edges);
        let providers = split_random(&mut rng, &edges, n);
        let mut files = Vec::new();
        for (i, p) in providers.iter().enumerate() {
            let f = format!("p{i}.csv");
            write_edges(&d.join(&f), p);
            files.push(f);
        }
        let vs = v.to_string();
        let mut args = vec!["configure", "--vertices", &vs, "--threshold-b", "8", "--attr-lanes", "1"];
        args.extend(files.iter().map(String::as_str));
        let conf = ok(d, &args);
        let k = conf.lines().next().unwrap().strip_prefix("k=").unwrap().to_string();
        let want_k = (8 * v / m as u64).clamp(1, v);
        assert_eq!(k, want_k.to_string());

        let mut prefixes = Vec::new();
        for (i, f) in files.iter().enumerate() {
            let prefix = format!("prov{i}");
            ok(d, &["prepare", f, "--vertices", &vs, "--chunk-size", &k, "--attr-lanes", "1", "--out", &prefix]);
            prefixes.push(prefix);
        }
        let sl = slices.to_string();
        let mut args = vec!["init", "--slices", &sl, "--out", "g.state"];
        args.extend(prefixes.iter().map(String::as_str));
        ok(d, &args);

        for i in 0..12 {
            let a = rng.gen_range(1..=v);
            let b = rng.gen_range(1..=v);
            let c = rng.gen_range(1..=v);
            let t = rng.gen_range(0..25u64);
            let (sa, sb, sc, st) = (a.to_string(), b.to_string(), c.to_string(), t.to_string());
            let (args, want): (Vec<&str>, String) = match i % 6 {
                0 => (vec!["edge-exist", &sa, &sb], plain.edge_exist(a, b).to_string()),
                1 => (vec!["neighbors-count", &sa], plain.out_degree(a).to_string()),
                2 => (
                    vec!["neighbors-get", &sa],
                    plain.neighbors(a).iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                ),
                3 => (vec!["unique-neighbors-count", &sa], plain.unique_out_degree(a).to_string()),
                4 => (vec!["cycle", &sa, &sb, &sc], plain.cycle(&[a, b, c]).to_string()),
                _ => (vec!["range-count", &sa, &st], plain.range_count(a, t, 0).to_string()),
            };
            let mut full = vec!["query", "--state", "g.state"];
            full.extend(args.iter());
            assert_eq!(answer(&ok(d, &full)), want, "round {round}, query {args:?}");
        }
    }
}

#[test]
fn prepare_is_idempotent_and_reconstructs_local_process() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "1,2,4\n2,3,5\n3,4,6\n4,1,7\n").unwrap();
    let args = ["prepare", "e.csv", "--vertices", "4", "--chunk-size", "2", "--attr-lanes", "1", "--out", "x"];
    ok(d, &args);
    let first: Vec<Vec<u8>> = share_files(d, "x").iter().map(|p| fs::read(p).unwrap()).collect();
    ok(d, &args);
    let second: Vec<Vec<u8>> = share_files(d, "x").iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(first, second);

    let bundles: Vec<ShareBundle> = first.iter().map(|b| ShareBundle::read_from(&b[..]).unwrap()).collect();
    for b in &bundles {
        assert_eq!((b.header.b, b.header.l), (bundles[0].header.b, bundles[0].header.l));
    }
    let shares = assemble_bundles(&bundles.try_into().unwrap(), 1024).unwrap();
    let edges = parse_edge_list(&b"1,2,4\n2,3,5\n3,4,6\n4,1,7\n"[..], 1).unwrap();
    let cfg = GlobalConfig::new(4, 2, 1024, 1).unwrap();
    assert_eq!(shares.data.reconstruct_in_simulation(), local_process(&edges, &cfg, 0).unwrap().lanes());
}

#[test]
fn seed_changes_shares_and_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "1,2\n2,1\n").unwrap();
    let base = ["prepare", "e.csv", "--vertices", "2", "--chunk-size", "1", "--out", "x"];
    let read = || -> Vec<Vec<u8>> { share_files(d, "x").iter().map(|p| fs::read(p).unwrap()).collect() };

    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "alpha"]);
    ok(d, &with_flag);
    let alpha = read();
    ok(d, &base);
    let default = read();
    assert_ne!(alpha, default);

    let mut with_other = base.to_vec();
    with_other.extend(["--seed", "beta"]);
    let out = Command::new(env!("CARGO_BIN_EXE_goram"))
        .current_dir(d)
        .env("GORAM_SEED", "alpha")
        .args(&with_other)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read(), alpha);
}

#[test]
fn corrupted_share_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "1,2\n2,3\n3,1\n1,3\n").unwrap();
    ok(d, &["prepare", "e.csv", "--vertices", "3", "--chunk-size", "2", "--out", "x"]);
    ok(d, &["init", "x", "--out", "good.state"]);
    let files = share_files(d, "x");
    let pristine: Vec<Vec<u8>> = files.iter().map(|p| fs::read(p).unwrap()).collect();
    let len = pristine[1].len();
    for (file, pos) in [(0usize, 0usize), (1, 6), (2, 12), (1, 30), (0, len - 1), (2, len / 2)] {
        let mut bytes = pristine[file].clone();
        bytes[pos] ^= 0x01;
        fs::write(&files[file], &bytes).unwrap();
        let out = goram(d, &["init", "x", "--out", "bad.state"]);
        assert_eq!(out.status.code(), Some(2), "byte {pos} of file {file} went unnoticed");
        fs::write(&files[file], &pristine[file]).unwrap();
    }
    // truncation
    fs::write(&files[0], &pristine[0][..len - 3]).unwrap();
    assert_eq!(goram(d, &["init", "x", "--out", "bad.state"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(goram(d, &["--help"]).status.code(), Some(0));
    assert_eq!(goram(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(goram(d, &["prepare", "e.csv"]).status.code(), Some(1));
    assert_eq!(goram(d, &["query", "cycle", "1"]).status.code(), Some(1));

    fs::write(d.join("zero.csv"), "0,1\n").unwrap();
    let out = goram(d, &["prepare", "zero.csv", "--vertices", "2", "--chunk-size", "1", "--out", "z"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    assert_eq!(goram(d, &["query", "edge-exist", "1", "2", "--state", "missing"]).status.code(), Some(2));

    fs::write(d.join("e.csv"), "1,2\n").unwrap();
    ok(d, &["prepare", "e.csv", "--vertices", "2", "--chunk-size", "1", "--out", "x"]);
    assert_eq!(goram(d, &["init", "x", "--slices", "0", "--out", "s"]).status.code(), Some(1));
    ok(d, &["init", "x", "--out", "s"]);
    assert_eq!(goram(d, &["query", "neighbors-count", "3", "--state", "s"]).status.code(), Some(2));
}

#[test]
fn single_provider_init_skips_merging() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.csv"), "1,2\n2,3\n").unwrap();
    fs::write(d.join("b.csv"), "3,1\n").unwrap();
    for f in ["a", "b"] {
        ok(d, &["prepare", &format!("{f}.csv"), "--vertices", "4", "--chunk-size", "2", "--out", f]);
    }
    let rounds = |out: &str| -> u64 {
        let line = out.lines().find(|l| l.starts_with("integrate:")).unwrap();
        line.split_whitespace()
            .find_map(|w| w.strip_prefix("rounds="))
            .unwrap()
            .parse()
            .unwrap()
    };
    let one = rounds(&ok(d, &["init", "a", "--out", "one.state"]));
    let two = rounds(&ok(d, &["init", "a", "b", "--out", "two.state"]));
    assert!(one < two, "{one} vs {two}");
}

#[test]
fn state_is_reseeded_after_each_query() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("e.csv"), "1,2\n2,3\n3,1\n").unwrap();
    ok(d, &["prepare", "e.csv", "--vertices", "3", "--chunk-size", "1", "--out", "x"]);
    ok(d, &["init", "x", "--out", "g.state"]);
    let before = fs::read(d.join("g.state")).unwrap();
    let a = ok(d, &["query", "cycle", "1", "2", "3", "--state", "g.state"]);
    let after = fs::read(d.join("g.state")).unwrap();
    assert_ne!(before, after);
    let b = ok(d, &["query", "cycle", "1", "2", "3", "--state", "g.state"]);
    assert_eq!(answer(&a), "true");
    assert_eq!(answer(&a), answer(&b));
}

fn bench(d: &Path, extra: &[&str]) -> Value {
    let mut args = vec![
        "bench", "--vertices", "64", "--edges", "256", "--threshold-b", "32", "--reps", "3", "--omit-timing", "--out",
        "r.json",
    ];
    args.extend(extra);
    ok(d, &args);
    serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap()
}

#[test]
fn bench_report_is_reproducible_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    bench(d, &[]);
    let first = fs::read(d.join("r.json")).unwrap();
    let report = bench(d, &[]);
    assert_eq!(first, fs::read(d.join("r.json")).unwrap());

    let kinds: Vec<&str> = report["queries"].as_array().unwrap().iter().map(|q| q["kind"].as_str().unwrap()).collect();
    assert_eq!(
        kinds,
        ["edge-exist", "neighbors-count", "neighbors-get", "unique-neighbors-count", "cycle", "range-count"]
    );
    for q in report["queries"].as_array().unwrap() {
        assert_eq!(q["queries"], 3);
        assert!(q["avg_wall_ms"].is_null());
    }
    assert!(report["queries"][0]["list_over_goram"].as_f64().unwrap() > 1.0);
    assert_eq!(report["graph"]["edges"], 256);

    let other = bench(d, &["--generator", "power-law", "--seed", "other"]);
    assert!(other["queries"][0]["avg_wall_ms"].is_null());
    assert_ne!(other["graph"], report["graph"]);
}

#[test]
fn bench_counters_match_session_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let report = bench(dir.path(), &["--chunk-size", "8", "--seed", "m"]);
    // regenerate the same providers and integrate them directly
    let mut rng = ChaCha20Rng::from_seed(derive_seed(b"m", "goram/bench/graph"));
    let edges = uniform(&mut rng, 64, 256, 1, 100);
    let providers = split_random(&mut rng, &edges, 3);
    let cfg = GlobalConfig::new(64, 8, 32, 1).unwrap();
    let (g, m) = integrate_providers(b"m", &providers, &cfg, 0).unwrap();
    assert_eq!(report["integrate"]["rounds"], m.rounds);
    let sent: Vec<u64> = report["integrate"]["bytes_sent"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert_eq!(sent, m.bytes_sent);
    assert_eq!(report["graph"]["l"], g.l);
    assert_eq!(report["graph"]["k"], 8);
    assert_eq!(report["configure"]["rounds"], 0);
}
