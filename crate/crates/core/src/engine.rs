//! In-process deployment: three servers, the client role, and the engine
//! state file.

use std::io::{Read, Write};

use goram_mpc::{ArithShareVec, BoolShareVec, Metrics, PartyId, ReplicatedPair, RevealTo, Session};

use crate::error::{Error, Result};
use crate::index::{Goram, GoramOptions};
use crate::oram::index_bits;
use crate::partition::{
    integrate, local_process, secure_config_k, share_in_session, EdgeRecord, GlobalConfig, PartitionedGraph,
    ProviderShares, WORD,
};
use crate::query::{self, EdgeProbe, ID_BITS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    EdgeExist { src: u64, dst: u64 },
    NeighborsCount { v: u64 },
    NeighborsGet { v: u64 },
    UniqueNeighborsCount { v: u64 },
    Cycle { vertices: Vec<u64> },
    RangeCount { v: u64, threshold: u64, lane: usize },
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::EdgeExist { .. } => "edge-exist",
            Query::NeighborsCount { .. } => "neighbors-count",
            Query::NeighborsGet { .. } => "neighbors-get",
            Query::UniqueNeighborsCount { .. } => "unique-neighbors-count",
            Query::Cycle { .. } => "cycle",
            Query::RangeCount { .. } => "range-count",
        }
    }
}

/// Plaintext result delivered to the client.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Bool(bool),
    Count(u64),
    /// Distinct neighbor ids, ascending.
    Ids(Vec<u64>),
}

pub struct Engine {
    seed: Vec<u8>,
    graph: PartitionedGraph,
    options: GoramOptions,
    session: Session,
    goram: Goram,
}

impl Engine {
    pub fn build(seed: &[u8], graph: PartitionedGraph, options: GoramOptions) -> Result<Engine> {
        let goram = Goram::build(seed, &graph, options)?;
        Ok(Engine {
            seed: seed.to_vec(),
            session: Session::labelled(seed, "goram/main"),
            graph,
            options,
            goram,
        })
    }

    pub fn config(&self) -> &GlobalConfig {
        &self.graph.config
    }

    pub fn l(&self) -> usize {
        self.graph.l
    }

    pub fn graph(&self) -> &PartitionedGraph {
        &self.graph
    }

    pub fn options(&self) -> GoramOptions {
        self.options
    }

    pub fn goram(&self) -> &Goram {
        &self.goram
    }

    /// All traffic so far, index builds included.
    pub fn metrics(&self) -> Metrics {
        self.session.metrics_snapshot() + self.goram.metrics()
    }

    /// Traffic excluding ORAM builds and rebuilds.
    pub fn online_metrics(&self) -> Metrics {
        self.metrics() - self.goram.offline_metrics()
    }

    pub fn offline_metrics(&self) -> Metrics {
        self.goram.offline_metrics()
    }

    /// Transcript digests of the main session followed by every slice.
    pub fn transcript_digests(&self) -> Vec<[u8; 32]> {
        let mut d = vec![self.session.transcript_digest()];
        d.extend(self.goram.transcript_digests());
        d
    }

    pub fn rebuild_indices(&mut self) -> Result<()> {
        self.goram.rebuild_indices()
    }

    fn chunk(&self, v: u64) -> Result<u64> {
        self.graph.config.chunk_of(v)
    }

    fn share_id(&mut self, v: u64) -> Result<BoolShareVec> {
        Ok(self.session.client_share(&[v], ID_BITS)?)
    }

    /// Client side: secret id and 0-based row index.
    fn vertex_inputs(&mut self, v: u64) -> Result<(BoolShareVec, BoolShareVec)> {
        let row = self.chunk(v)? - 1;
        let bits = index_bits(self.graph.config.b as usize);
        Ok((self.share_id(v)?, self.session.client_share(&[row], bits)?))
    }

    fn edge_probe(&mut self, src: u64, dst: u64) -> Result<EdgeProbe> {
        let b = self.graph.config.b;
        let flat = (self.chunk(src)? - 1) * b + self.chunk(dst)? - 1;
        let bits = index_bits((b * b) as usize);
        Ok(EdgeProbe {
            src: self.share_id(src)?,
            dst: self.share_id(dst)?,
            flat: self.session.client_share(&[flat], bits)?,
        })
    }

    pub fn run(&mut self, q: &Query) -> Result<Answer> {
        match q {
            Query::EdgeExist { src, dst } => {
                let p = self.edge_probe(*src, *dst)?;
                let bit = query::edge_exist(&mut self.session, &mut self.goram, &p.src, &p.dst, &p.flat)?;
                self.reveal_bit(bit.as_vec())
            }
            Query::NeighborsCount { v } => {
                let (v, row) = self.vertex_inputs(*v)?;
                let c = query::neighbors_count(&mut self.session, &mut self.goram, &v, &row)?;
                self.reveal_count(&c)
            }
            Query::UniqueNeighborsCount { v } => {
                let (v, row) = self.vertex_inputs(*v)?;
                let c = query::unique_neighbors_count(&mut self.session, &mut self.goram, &v, &row)?;
                self.reveal_count(&c)
            }
            Query::RangeCount { v, threshold, lane } => {
                if *lane >= self.graph.config.attr_lanes {
                    return Err(Error::Config(format!(
                        "attribute lane {lane} outside 0..{}",
                        self.graph.config.attr_lanes
                    )));
                }
                let (v, row) = self.vertex_inputs(*v)?;
                let t = self.session.client_share(&[*threshold], WORD)?;
                let c = query::range_count(&mut self.session, &mut self.goram, &v, &row, &t, *lane)?;
                self.reveal_count(&c)
            }
            Query::NeighborsGet { v } => {
                let (v, row) = self.vertex_inputs(*v)?;
                let ids = query::neighbors_get(&mut self.session, &mut self.goram, &v, &row)?;
                let mut ids: Vec<u64> = self
                    .session
                    .reveal_to(&ids, RevealTo::Client)?
                    .into_iter()
                    .filter(|&x| x != 0)
                    .collect();
                ids.sort_unstable();
                Ok(Answer::Ids(ids))
            }
            Query::Cycle { vertices } => {
                let m = vertices.len();
                if m < 2 {
                    return Err(Error::Config("a cycle needs at least two vertices".into()));
                }
                let mut forward = Vec::with_capacity(m);
                let mut backward = Vec::with_capacity(m);
                for i in 0..m {
                    let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                    forward.push(self.edge_probe(a, b)?);
                    backward.push(self.edge_probe(b, a)?);
                }
                let bit = query::cycle_identify(&mut self.session, &mut self.goram, &forward, &backward)?;
                self.reveal_bit(bit.as_vec())
            }
        }
    }

    fn reveal_bit(&mut self, bit: &BoolShareVec) -> Result<Answer> {
        Ok(Answer::Bool(self.session.reveal_to(bit, RevealTo::Client)?[0] == 1))
    }

    fn reveal_count(&mut self, c: &ArithShareVec) -> Result<Answer> {
        Ok(Answer::Count(self.session.reveal_arith_to(c, RevealTo::Client)?[0]))
    }

    /// Writes the integrated graph shares, options and seed.
    pub fn save_state(&self, out: impl Write) -> Result<()> {
        write_state(out, &self.seed, &self.graph, self.options)
    }

    /// Like [`Engine::save_state`] but stores `seed` for the next load, so
    /// index permutations of a later session are fresh.
    pub fn save_state_with_seed(&self, out: impl Write, seed: &[u8]) -> Result<()> {
        write_state(out, seed, &self.graph, self.options)
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    /// Rebuilds an engine from a state file; the indices are rebuilt
    /// deterministically from the stored seed.
    pub fn load_state(input: impl Read) -> Result<Engine> {
        let (seed, graph, options) = read_state(input)?;
        Engine::build(&seed, graph, options)
    }
}

const STATE_MAGIC: &[u8; 4] = b"GORE";
const STATE_VERSION: u16 = 1;

fn write_state(mut out: impl Write, seed: &[u8], g: &PartitionedGraph, o: GoramOptions) -> Result<()> {
    let c = &g.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(STATE_MAGIC);
    buf.extend_from_slice(&STATE_VERSION.to_le_bytes());
    for v in [c.num_vertices, c.k, c.threshold] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [
        c.attr_lanes,
        g.l,
        o.slices,
        o.pack,
        o.vertex_epoch.unwrap_or(0),
        o.edge_epoch.unwrap_or(0),
        seed.len(),
    ] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(seed);
    for p in PartyId::ALL {
        let pair = g.data.part(p);
        for (a, b) in pair.local.iter().zip(&pair.next) {
            buf.extend_from_slice(&a.to_le_bytes());
            buf.extend_from_slice(&b.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_state(mut input: impl Read) -> Result<(Vec<u8>, PartitionedGraph, GoramOptions)> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let bad = |m: &str| Error::Format(format!("engine state: {m}"));
    if buf.len() < 6 || &buf[..4] != STATE_MAGIC {
        return Err(bad("bad magic"));
    }
    if u16::from_le_bytes([buf[4], buf[5]]) != STATE_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut pos = 6;
    let mut word = |buf: &[u8]| -> Result<u64> {
        let w = buf.get(pos..pos + 8).ok_or_else(|| bad("truncated header"))?;
        pos += 8;
        Ok(u64::from_le_bytes(w.try_into().unwrap()))
    };
    let [num_vertices, k, threshold] = [word(&buf)?, word(&buf)?, word(&buf)?];
    let mut fields = [0usize; 7];
    for f in &mut fields {
        *f = word(&buf)? as usize;
    }
    let [attr_lanes, l, slices, pack, v_epoch, e_epoch, seed_len] = fields;
    let config = GlobalConfig::new(num_vertices, k, threshold, attr_lanes)?;
    let header_end = 6 + 10 * 8;
    let seed = buf
        .get(header_end..header_end + seed_len)
        .ok_or_else(|| bad("truncated seed"))?
        .to_vec();
    let body = &buf[header_end + seed_len..];
    let lanes = config.blocks() * l * config.record_lanes();
    if body.len() != 3 * lanes * 16 {
        return Err(bad("body length does not match header"));
    }
    let mut parts = Vec::with_capacity(3);
    for chunk in body.chunks(lanes * 16) {
        let mut local = Vec::with_capacity(lanes);
        let mut next = Vec::with_capacity(lanes);
        for rec in chunk.chunks(16) {
            local.push(u64::from_le_bytes(rec[..8].try_into().unwrap()));
            next.push(u64::from_le_bytes(rec[8..].try_into().unwrap()));
        }
        parts.push(ReplicatedPair { local, next });
    }
    let parts: [ReplicatedPair; 3] = parts.try_into().map_err(|_| bad("party count"))?;
    let data = BoolShareVec::from_parts(WORD, parts)?;
    data.check_consistency()
        .map_err(|e| Error::BundleMismatch(format!("engine state shares disagree: {e}")))?;
    let opt = |v: usize| (v != 0).then_some(v);
    Ok((
        seed,
        PartitionedGraph { config, l, data },
        GoramOptions {
            slices,
            pack,
            vertex_epoch: opt(v_epoch),
            edge_epoch: opt(e_epoch),
        },
    ))
}

/// Provider-side processing and server-side integration in one process:
/// every provider list is partitioned with `pad` extra dummies per block,
/// shared, and merged. Returns the graph and the integration traffic.
pub fn integrate_providers(
    seed: &[u8],
    providers: &[Vec<EdgeRecord>],
    config: &GlobalConfig,
    pad: usize,
) -> Result<(PartitionedGraph, Metrics)> {
    integrate_providers_padded(seed, providers, config, &vec![pad; providers.len()])
}

/// As [`integrate_providers`] with a separate padding per provider.
pub fn integrate_providers_padded(
    seed: &[u8],
    providers: &[Vec<EdgeRecord>],
    config: &GlobalConfig,
    pads: &[usize],
) -> Result<(PartitionedGraph, Metrics)> {
    if pads.len() != providers.len() {
        return Err(Error::Config("one padding per provider".into()));
    }
    let mut session = Session::labelled(seed, "goram/integrate");
    let shares = providers
        .iter()
        .zip(pads)
        .map(|(edges, &pad)| {
            let local = local_process(edges, config, pad)?;
            share_in_session(&mut session, &local)
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = integrate(&mut session, &shares)?;
    Ok((graph, session.metrics_snapshot()))
}

/// Servers' side of integration when the provider shares were loaded
/// from bundle files.
pub fn integrate_shares(seed: &[u8], shares: &[ProviderShares]) -> Result<(PartitionedGraph, Metrics)> {
    let mut session = Session::labelled(seed, "goram/integrate");
    let graph = integrate(&mut session, shares)?;
    Ok((graph, session.metrics_snapshot()))
}

/// Each provider secret-shares its edge count; the servers derive the
/// chunk size without learning the counts.
pub fn configure_k(seed: &[u8], counts: &[u64], threshold: u64, num_vertices: u64) -> Result<(u64, Metrics)> {
    let mut session = Session::labelled(seed, "goram/configure");
    let shared = session.client_share_arith(counts, WORD)?;
    let k = secure_config_k(&mut session, &shared, threshold, num_vertices)?;
    Ok((k, session.metrics_snapshot()))
}
