use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use goram_core::engine::{configure_k, integrate_providers};
use goram_core::gen::{power_law, split_random, uniform};
use goram_core::oram::OramParams;
use goram_core::{Engine, GlobalConfig, GoramOptions, Query, SecureEdgeList};
use goram_mpc::prf::derive_seed;
use goram_mpc::{Metrics, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::{BenchArgs, Generator};

const KINDS: [&str; 6] = [
    "edge-exist",
    "neighbors-count",
    "neighbors-get",
    "unique-neighbors-count",
    "cycle",
    "range-count",
];
const CYCLE_LEN: usize = 3;
const ATTR_MAX: u64 = 100;

#[derive(Serialize)]
struct Report {
    config: ConfigEcho,
    graph: GraphParams,
    environment: Environment,
    configure: Phase,
    integrate: Phase,
    build: Phase,
    queries: Vec<QueryRecord>,
}

#[derive(Serialize)]
struct ConfigEcho {
    seed: String,
    generator: Generator,
    providers: usize,
    threshold_b: u64,
    slices: usize,
    pad_extra: usize,
    attr_lanes: usize,
    pack: usize,
    vertex_epoch: usize,
    edge_epoch: usize,
}

#[derive(Serialize)]
struct GraphParams {
    vertices: u64,
    edges: usize,
    k: u64,
    b: u64,
    l: usize,
}

#[derive(Serialize)]
struct Environment {
    version: &'static str,
    os: &'static str,
    arch: &'static str,
    threads: usize,
}

#[derive(Serialize)]
struct Phase {
    wall_ms: Option<f64>,
    rounds: u64,
    bytes_sent: [u64; 3],
    client_bytes: u64,
}

#[derive(Serialize)]
struct QueryRecord {
    kind: &'static str,
    queries: usize,
    /// Totals over all queries of this kind; exact session counters.
    rounds: u64,
    bytes_sent: [u64; 3],
    client_bytes: u64,
    avg_wall_ms: Option<f64>,
    avg_rounds: f64,
    avg_bytes_per_server: f64,
    /// Edge-list baseline on the same providers, where implemented.
    list_avg_bytes_per_server: Option<f64>,
    list_over_goram: Option<f64>,
}

fn phase(m: Metrics, wall_ms: f64, timing: bool) -> Phase {
    Phase {
        wall_ms: timing.then_some(wall_ms),
        rounds: m.rounds,
        bytes_sent: m.bytes_sent,
        client_bytes: m.client_bytes,
    }
}

fn random_query(rng: &mut ChaCha20Rng, v: u64, kind: &str, attr_lanes: usize) -> Query {
    let mut id = || rng.gen_range(1..=v);
    match kind {
        "edge-exist" => Query::EdgeExist { src: id(), dst: id() },
        "neighbors-count" => Query::NeighborsCount { v: id() },
        "neighbors-get" => Query::NeighborsGet { v: id() },
        "unique-neighbors-count" => Query::UniqueNeighborsCount { v: id() },
        "cycle" => Query::Cycle {
            vertices: (0..CYCLE_LEN).map(|_| id()).collect(),
        },
        _ => Query::RangeCount {
            v: id(),
            threshold: rng.gen_range(0..ATTR_MAX),
            lane: rng.gen_range(0..attr_lanes),
        },
    }
}

/// Average bytes per server of one List query of `kind`.
fn list_bytes(
    seed: &[u8],
    providers: &[Vec<goram_core::EdgeRecord>],
    attr_lanes: usize,
    kind: &str,
    rng: &mut ChaCha20Rng,
    v: u64,
) -> Result<Option<f64>, CliError> {
    if kind != "edge-exist" && kind != "neighbors-count" {
        return Ok(None);
    }
    let mut s = Session::labelled(seed, "goram/bench/list");
    let list = SecureEdgeList::from_providers(&mut s, providers, attr_lanes, 0)?;
    let reps = 2;
    let before = s.metrics_snapshot();
    for _ in 0..reps {
        let a = s.client_share(&[rng.gen_range(1..=v)], 32).map_err(goram_core::Error::from)?;
        if kind == "edge-exist" {
            let d = s.client_share(&[rng.gen_range(1..=v)], 32).map_err(goram_core::Error::from)?;
            list.list_edge_exist(&mut s, &a, &d)?;
        } else {
            list.list_neighbors_count(&mut s, &a)?;
        }
    }
    Ok(Some((s.metrics_snapshot() - before).avg_server_bytes() / reps as f64))
}

pub fn run(seed: &[u8], args: &BenchArgs) -> Result<(), CliError> {
    if args.providers == 0 || args.slices == 0 || args.attr_lanes == 0 || args.vertices == 0 {
        return Err(CliError::Usage(
            "--providers, --slices, --attr-lanes and --vertices must be at least 1".into(),
        ));
    }
    let timing = !args.omit_timing;
    let v = args.vertices;
    let mut rng = ChaCha20Rng::from_seed(derive_seed(seed, "goram/bench/graph"));
    let edges = match args.generator {
        Generator::Uniform => uniform(&mut rng, v, args.edges, args.attr_lanes, ATTR_MAX),
        Generator::PowerLaw => power_law(&mut rng, v, args.edges, args.attr_lanes, ATTR_MAX),
    };
    let providers = split_random(&mut rng, &edges, args.providers);

    let counts: Vec<u64> = providers.iter().map(|p| p.len() as u64).collect();
    let (k, configure_metrics) = match args.chunk_size {
        Some(k) => (k, Metrics::default()),
        None => configure_k(seed, &counts, args.threshold_b, v)?,
    };
    let cfg = GlobalConfig::new(v, k, args.threshold_b, args.attr_lanes)?;

    let start = Instant::now();
    let (graph, integrate_metrics) = integrate_providers(seed, &providers, &cfg, args.pad_extra)?;
    let integrate_ms = start.elapsed().as_secs_f64() * 1e3;
    let l = graph.l;
    let opts = GoramOptions {
        slices: args.slices,
        ..Default::default()
    };
    let start = Instant::now();
    let mut engine = Engine::build(seed, graph, opts)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let build_metrics = engine.offline_metrics();

    let b = cfg.b as usize;
    let vertex_epoch = OramParams::for_size(b).epoch;
    let edge_epoch = OramParams::for_size(b * b).epoch;

    let mut qrng = ChaCha20Rng::from_seed(derive_seed(seed, "goram/bench/queries"));
    let mut queries = Vec::with_capacity(KINDS.len());
    for kind in KINDS {
        // a full epoch of the index the kind touches
        let reps = args.reps.unwrap_or(match kind {
            "edge-exist" => edge_epoch,
            "cycle" => edge_epoch.div_ceil(2 * CYCLE_LEN),
            _ => vertex_epoch,
        });
        let before = engine.online_metrics();
        let start = Instant::now();
        for _ in 0..reps {
            let q = random_query(&mut qrng, v, kind, args.attr_lanes);
            engine.run(&q)?;
        }
        let wall = start.elapsed().as_secs_f64() * 1e3;
        let m = engine.online_metrics() - before;
        let n = reps.max(1) as f64;
        let avg_bytes = m.avg_server_bytes() / n;
        let list = list_bytes(seed, &providers, args.attr_lanes, kind, &mut qrng, v)?;
        queries.push(QueryRecord {
            kind,
            queries: reps,
            rounds: m.rounds,
            bytes_sent: m.bytes_sent,
            client_bytes: m.client_bytes,
            avg_wall_ms: timing.then_some(wall / n),
            avg_rounds: m.rounds as f64 / n,
            avg_bytes_per_server: avg_bytes,
            list_avg_bytes_per_server: list,
            list_over_goram: list.filter(|_| avg_bytes > 0.0).map(|x| x / avg_bytes),
        });
    }

    let report = Report {
        config: ConfigEcho {
            seed: String::from_utf8_lossy(seed).into_owned(),
            generator: args.generator,
            providers: args.providers,
            threshold_b: args.threshold_b,
            slices: args.slices,
            pad_extra: args.pad_extra,
            attr_lanes: args.attr_lanes,
            pack: opts.pack,
            vertex_epoch,
            edge_epoch,
        },
        graph: GraphParams {
            vertices: v,
            edges: edges.len(),
            k,
            b: cfg.b,
            l,
        },
        environment: Environment {
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
        configure: phase(configure_metrics, 0.0, false),
        integrate: phase(integrate_metrics, integrate_ms, timing),
        build: phase(build_metrics, build_ms, timing),
        queries,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match &args.out {
        Some(path) => {
            let f = File::create(path).map_err(CliError::io(path))?;
            let mut w = BufWriter::new(f);
            w.write_all(json.as_bytes()).map_err(CliError::io(path))?;
            w.flush().map_err(CliError::io(path))?;
        }
        None => print!("{json}"),
    }
    Ok(())
}
