use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use goram_core::engine::{configure_k, integrate_shares};
use goram_core::partition::{assemble_bundles, local_process, parse_edge_list, share_partition, ShareBundle};
use goram_core::{Answer, EdgeRecord, Engine, GlobalConfig, GoramOptions, Query};
use goram_mpc::prf::derive_seed;
use goram_mpc::Metrics;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::CliError;

/// `PREFIX.s1`, `PREFIX.s2`, `PREFIX.s3`.
pub fn share_paths(prefix: &Path) -> [PathBuf; 3] {
    [1, 2, 3].map(|i| {
        let mut p = OsString::from(prefix.as_os_str());
        p.push(format!(".s{i}"));
        PathBuf::from(p)
    })
}

pub fn read_edges(path: &Path, attr_lanes: usize) -> Result<Vec<EdgeRecord>, CliError> {
    let f = File::open(path).map_err(CliError::io(path))?;
    parse_edge_list(BufReader::new(f), attr_lanes).map_err(CliError::file(path))
}

pub fn format_metrics(m: &Metrics) -> String {
    format!(
        "rounds={} bytes_sent=[{}, {}, {}] client_bytes={}",
        m.rounds, m.bytes_sent[0], m.bytes_sent[1], m.bytes_sent[2], m.client_bytes
    )
}

pub fn configure(
    seed: &[u8],
    edge_files: &[PathBuf],
    vertices: u64,
    threshold: u64,
    attr_lanes: usize,
) -> Result<(), CliError> {
    let counts = edge_files
        .iter()
        .map(|p| read_edges(p, attr_lanes).map(|e| e.len() as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let (k, metrics) = configure_k(seed, &counts, threshold, vertices)?;
    let cfg = GlobalConfig::new(vertices, k, threshold, attr_lanes)?;
    println!("k={k}");
    println!("b={}", cfg.b);
    println!("{}", format_metrics(&metrics));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn prepare(
    seed: &[u8],
    edge_file: &Path,
    vertices: u64,
    chunk_size: u64,
    threshold: u64,
    attr_lanes: usize,
    pad_extra: usize,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = GlobalConfig::new(vertices, chunk_size, threshold, attr_lanes)?;
    let edges = read_edges(edge_file, attr_lanes)?;
    let part = local_process(&edges, &cfg, pad_extra).map_err(CliError::file(edge_file))?;
    // masks depend on the output name so two providers never share them
    let label = format!("goram/prepare/{}", out.file_name().unwrap_or_default().to_string_lossy());
    let mut rng = ChaCha20Rng::from_seed(derive_seed(seed, &label));
    let bundles = share_partition(&part, &mut rng);
    for (bundle, path) in bundles.iter().zip(share_paths(out)) {
        let f = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(f);
        bundle.write_to(&mut w).map_err(CliError::file(&path))?;
        w.flush().map_err(CliError::io(&path))?;
        println!("wrote {}", path.display());
    }
    println!("edges={} b={} l={}", edges.len(), cfg.b, part.l);
    Ok(())
}

pub fn init(seed: &[u8], providers: &[PathBuf], threshold: u64, slices: usize, out: &Path) -> Result<(), CliError> {
    if slices == 0 {
        return Err(CliError::Usage("--slices must be at least 1".into()));
    }
    let mut shares = Vec::with_capacity(providers.len());
    for prefix in providers {
        let mut bundles = Vec::with_capacity(3);
        for path in share_paths(prefix) {
            let f = File::open(&path).map_err(CliError::io(&path))?;
            bundles.push(ShareBundle::read_from(BufReader::new(f)).map_err(CliError::file(&path))?);
        }
        let bundles: [ShareBundle; 3] = bundles.try_into().expect("three bundles");
        shares.push(assemble_bundles(&bundles, threshold).map_err(CliError::file(prefix))?);
    }
    let start = Instant::now();
    let (graph, integrate_metrics) = integrate_shares(seed, &shares)?;
    let integrate_ms = start.elapsed().as_secs_f64() * 1e3;
    let cfg = graph.config;
    let l = graph.l;
    let start = Instant::now();
    let opts = GoramOptions {
        slices,
        ..Default::default()
    };
    let engine = Engine::build(seed, graph, opts)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let f = File::create(out).map_err(CliError::io(out))?;
    let mut w = BufWriter::new(f);
    engine.save_state(&mut w)?;
    w.flush().map_err(CliError::io(out))?;
    println!(
        "providers={} vertices={} k={} b={} l={} slices={slices}",
        providers.len(),
        cfg.num_vertices,
        cfg.k,
        cfg.b,
        l
    );
    println!("integrate: wall_ms={integrate_ms:.1} {}", format_metrics(&integrate_metrics));
    println!("build: wall_ms={build_ms:.1} {}", format_metrics(&engine.offline_metrics()));
    println!("wrote {}", out.display());
    Ok(())
}

pub fn format_answer(a: &Answer) -> String {
    match a {
        Answer::Bool(b) => b.to_string(),
        Answer::Count(c) => c.to_string(),
        Answer::Ids(ids) => ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
    }
}

pub fn query(state: &Path, q: Query) -> Result<(), CliError> {
    let f = File::open(state).map_err(CliError::io(state))?;
    let mut engine = Engine::load_state(BufReader::new(f)).map_err(CliError::file(state))?;
    let before = engine.online_metrics();
    let answer = engine.run(&q)?;
    let cost = engine.online_metrics() - before;
    // the next load must not replay this session's permutations
    let next = derive_seed(engine.seed(), "goram/next-session");
    let tmp = state.with_extension("tmp");
    let f = File::create(&tmp).map_err(CliError::io(&tmp))?;
    let mut w = BufWriter::new(f);
    engine.save_state_with_seed(&mut w, &next)?;
    w.flush().map_err(CliError::io(&tmp))?;
    drop(w);
    std::fs::rename(&tmp, state).map_err(CliError::io(state))?;
    println!("{}: {}", q.kind(), format_answer(&answer));
    println!("{}", format_metrics(&cost));
    Ok(())
}
