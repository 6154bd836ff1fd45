//! 2d partitioning of provider edge lists, share bundles, secure choice of
//! the chunk size and server-side integration of provider partitions.

use std::io::{BufRead, Read, Write};

use goram_mpc::{width_mask, ArithShareVec, BoolShareVec, PartyId, ReplicatedPair, SecretBit, Session};
use rand::RngCore;

use crate::error::{Error, Result};

/// Lane width of every graph share.
pub const WORD: u32 = 64;
/// Largest vertex id; ids occupy the high and low halves of the key lane.
pub const MAX_VERTEX: u64 = (1 << 31) - 1;
/// Default vectorization threshold `B`.
pub const DEFAULT_THRESHOLD: u64 = 1024;

/// Sort key `src * 2^32 + dst`. Dummies have key 0.
pub fn edge_key(src: u64, dst: u64) -> u64 {
    src << 32 | dst
}

pub fn split_key(key: u64) -> (u64, u64) {
    (key >> 32, key & 0xffff_ffff)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdgeRecord {
    pub src: u64,
    pub dst: u64,
    pub attrs: Vec<u64>,
}

impl EdgeRecord {
    pub fn new(src: u64, dst: u64, attrs: Vec<u64>) -> Self {
        EdgeRecord { src, dst, attrs }
    }

    pub fn dummy(attr_lanes: usize) -> Self {
        EdgeRecord::new(0, 0, vec![0; attr_lanes])
    }

    pub fn key(&self) -> u64 {
        edge_key(self.src, self.dst)
    }

    pub fn is_dummy(&self) -> bool {
        self.src == 0 && self.dst == 0
    }

    /// `[key, attrs..]`.
    pub fn lanes(&self) -> Vec<u64> {
        let mut v = Vec::with_capacity(1 + self.attrs.len());
        v.push(self.key());
        v.extend_from_slice(&self.attrs);
        v
    }

    pub fn from_lanes(lanes: &[u64]) -> Self {
        let (src, dst) = split_key(lanes[0]);
        EdgeRecord::new(src, dst, lanes[1..].to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GlobalConfig {
    pub num_vertices: u64,
    pub k: u64,
    pub b: u64,
    pub threshold: u64,
    pub attr_lanes: usize,
}

impl GlobalConfig {
    pub fn new(num_vertices: u64, k: u64, threshold: u64, attr_lanes: usize) -> Result<Self> {
        if num_vertices == 0 || num_vertices > MAX_VERTEX {
            return Err(Error::Config(format!("vertex count {num_vertices} outside 1..={MAX_VERTEX}")));
        }
        if k == 0 || k > num_vertices {
            return Err(Error::Config(format!("chunk size {k} outside 1..={num_vertices}")));
        }
        if attr_lanes > u16::MAX as usize {
            return Err(Error::Config(format!("{attr_lanes} attribute lanes")));
        }
        Ok(GlobalConfig {
            num_vertices,
            k,
            b: num_vertices.div_ceil(k),
            threshold,
            attr_lanes,
        })
    }

    pub fn record_lanes(&self) -> usize {
        1 + self.attr_lanes
    }

    pub fn blocks(&self) -> usize {
        (self.b * self.b) as usize
    }

    pub fn chunk_of(&self, v: u64) -> Result<u64> {
        chunk_of(v, self.k, self.num_vertices)
    }

    pub fn check_vertex(&self, v: u64) -> Result<()> {
        self.chunk_of(v).map(|_| ())
    }
}

/// `ceil(v / k)`, 1-based.
pub fn chunk_of(v: u64, k: u64, num_vertices: u64) -> Result<u64> {
    if v == 0 || v > num_vertices {
        return Err(Error::VertexOutOfRange { id: v, max: num_vertices });
    }
    Ok(v.div_ceil(k))
}

/// Row-major index of block `(ci, cj)`, both 1-based.
pub fn block_index(ci: u64, cj: u64, b: u64) -> usize {
    ((ci - 1) * b + (cj - 1)) as usize
}

/// Plaintext provider partition; every block holds exactly `l` records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalPartition {
    pub config: GlobalConfig,
    pub blocks: Vec<Vec<EdgeRecord>>,
    pub l: usize,
}

impl LocalPartition {
    pub fn block(&self, ci: u64, cj: u64) -> &[EdgeRecord] {
        &self.blocks[block_index(ci, cj, self.config.b)]
    }

    /// All lanes, blocks row-major, records `[key, attrs..]`.
    pub fn lanes(&self) -> Vec<u64> {
        self.blocks.iter().flatten().flat_map(EdgeRecord::lanes).collect()
    }
}

/// Routes every edge to block `(ceil(src/k), ceil(dst/k))`, sorts each block
/// by key and pads all blocks with leading dummies to `max + extra_pad`
/// records (at least one).
pub fn local_process(edges: &[EdgeRecord], config: &GlobalConfig, extra_pad: usize) -> Result<LocalPartition> {
    let b = config.b;
    let mut blocks = vec![Vec::new(); config.blocks()];
    for e in edges {
        if e.attrs.len() != config.attr_lanes {
            return Err(Error::Config(format!(
                "edge ({}, {}) has {} attributes, expected {}",
                e.src,
                e.dst,
                e.attrs.len(),
                config.attr_lanes
            )));
        }
        let ci = config.chunk_of(e.src)?;
        let cj = config.chunk_of(e.dst)?;
        blocks[block_index(ci, cj, b)].push(e.clone());
    }
    let l = (blocks.iter().map(Vec::len).max().unwrap_or(0) + extra_pad).max(1);
    for block in &mut blocks {
        block.sort_by_key(EdgeRecord::key);
        let mut padded = vec![EdgeRecord::dummy(config.attr_lanes); l - block.len()];
        padded.append(block);
        *block = padded;
    }
    Ok(LocalPartition {
        config: *config,
        blocks,
        l,
    })
}

/// Parses `src,dst[,attr..]` lines; `#` starts a comment. Missing
/// attributes are zero.
pub fn parse_edge_list(input: impl BufRead, attr_lanes: usize) -> Result<Vec<EdgeRecord>> {
    let mut edges = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: n + 1, msg };
        let fields: Vec<u64> = text
            .split(',')
            .map(|f| f.trim().parse::<u64>().map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if fields.len() < 2 {
            return Err(bad("expected src,dst".into()));
        }
        if fields.len() - 2 > attr_lanes {
            return Err(bad(format!("{} attributes, at most {attr_lanes} allowed", fields.len() - 2)));
        }
        let (src, dst) = (fields[0], fields[1]);
        if src == 0 || dst == 0 || src > MAX_VERTEX || dst > MAX_VERTEX {
            return Err(bad(format!("vertex ids must be in 1..={MAX_VERTEX}")));
        }
        let mut attrs = fields[2..].to_vec();
        attrs.resize(attr_lanes, 0);
        edges.push(EdgeRecord::new(src, dst, attrs));
    }
    Ok(edges)
}

const MAGIC: &[u8; 4] = b"GORA";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 2 + 4 + 4 + 8 + 4;

/// Public shape of a share file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShareHeader {
    pub party: PartyId,
    pub width: u32,
    pub attr_lanes: usize,
    pub b: u64,
    pub l: usize,
    pub num_vertices: u64,
    pub k: u64,
}

impl ShareHeader {
    pub fn lanes(&self) -> usize {
        (self.b * self.b) as usize * self.l * (1 + self.attr_lanes)
    }

    fn same_graph(&self, other: &ShareHeader) -> bool {
        (self.width, self.attr_lanes, self.b, self.l, self.num_vertices, self.k)
            == (other.width, other.attr_lanes, other.b, other.l, other.num_vertices, other.k)
    }
}

/// One server's replicated pair of a provider partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareBundle {
    pub header: ShareHeader,
    pub pair: ReplicatedPair,
}

impl ShareBundle {
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let h = &self.header;
        let mut buf = Vec::with_capacity(HEADER_LEN + h.lanes() * 16);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(h.party.get());
        buf.push(h.width as u8);
        buf.extend_from_slice(&(h.attr_lanes as u16).to_le_bytes());
        buf.extend_from_slice(&(h.b as u32).to_le_bytes());
        buf.extend_from_slice(&(h.l as u32).to_le_bytes());
        buf.extend_from_slice(&h.num_vertices.to_le_bytes());
        buf.extend_from_slice(&(h.k as u32).to_le_bytes());
        let bytes = (h.width as usize).div_ceil(8);
        for (a, b) in self.pair.local.iter().zip(&self.pair.next) {
            buf.extend_from_slice(&a.to_le_bytes()[..bytes]);
            buf.extend_from_slice(&b.to_le_bytes()[..bytes]);
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let header = parse_header(&buf)?;
        let bytes = (header.width as usize).div_ceil(8);
        let lanes = header.lanes();
        let body = &buf[HEADER_LEN..];
        if body.len() != lanes * 2 * bytes {
            return Err(Error::Format(format!(
                "body is {} bytes, header implies {}",
                body.len(),
                lanes * 2 * bytes
            )));
        }
        let word = |chunk: &[u8]| {
            let mut w = [0u8; 8];
            w[..bytes].copy_from_slice(chunk);
            u64::from_le_bytes(w)
        };
        let mut local = Vec::with_capacity(lanes);
        let mut next = Vec::with_capacity(lanes);
        for rec in body.chunks(2 * bytes) {
            local.push(word(&rec[..bytes]));
            next.push(word(&rec[bytes..]));
        }
        Ok(ShareBundle {
            header,
            pair: ReplicatedPair { local, next },
        })
    }
}

/// Parses only the fixed header; this is all a single bundle discloses.
pub fn parse_header(buf: &[u8]) -> Result<ShareHeader> {
    if buf.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", buf.len())));
    }
    if &buf[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([buf[o], buf[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let party = PartyId::new(buf[6]).ok_or_else(|| Error::Format(format!("bad party id {}", buf[6])))?;
    let width = buf[7] as u32;
    if width != WORD {
        return Err(Error::Format(format!("lane width {width}, expected {WORD}")));
    }
    let header = ShareHeader {
        party,
        width,
        attr_lanes: u16_at(8) as usize,
        b: u32_at(10) as u64,
        l: u32_at(14) as usize,
        num_vertices: u64::from_le_bytes(buf[18..26].try_into().unwrap()),
        k: u32_at(26) as u64,
    };
    if header.b == 0 || header.l == 0 || header.k == 0 || header.num_vertices == 0 {
        return Err(Error::Format("zero dimension in header".into()));
    }
    if header.num_vertices.div_ceil(header.k) != header.b {
        return Err(Error::Format("b does not match |V| and k".into()));
    }
    Ok(header)
}

/// Provider-side split of a partition into the three servers' bundles.
pub fn share_partition(p: &LocalPartition, rng: &mut impl RngCore) -> [ShareBundle; 3] {
    let values = p.lanes();
    let mask = width_mask(WORD);
    let x1: Vec<u64> = values.iter().map(|_| rng.next_u64() & mask).collect();
    let x2: Vec<u64> = values.iter().map(|_| rng.next_u64() & mask).collect();
    let x3: Vec<u64> = values.iter().zip(&x1).zip(&x2).map(|((v, a), b)| v ^ a ^ b).collect();
    let shares = [x1, x2, x3];
    PartyId::ALL.map(|party| {
        let i = party.index();
        ShareBundle {
            header: ShareHeader {
                party,
                width: WORD,
                attr_lanes: p.config.attr_lanes,
                b: p.config.b,
                l: p.l,
                num_vertices: p.config.num_vertices,
                k: p.config.k,
            },
            pair: ReplicatedPair {
                local: shares[i].clone(),
                next: shares[(i + 1) % 3].clone(),
            },
        }
    })
}

/// A provider partition as held by the servers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProviderShares {
    pub config: GlobalConfig,
    pub l: usize,
    pub data: BoolShareVec,
}

/// Checks that the three bundles describe the same partition and are
/// replicated-consistent, then assembles the sharing.
pub fn assemble_bundles(bundles: &[ShareBundle; 3], threshold: u64) -> Result<ProviderShares> {
    for (i, b) in bundles.iter().enumerate() {
        if b.header.party.index() != i {
            return Err(Error::BundleMismatch(format!("bundle {} belongs to {}", i + 1, b.header.party)));
        }
        if !b.header.same_graph(&bundles[0].header) {
            return Err(Error::BundleMismatch(format!("{} header differs from S1", b.header.party)));
        }
        if b.pair.local.len() != b.header.lanes() || b.pair.next.len() != b.header.lanes() {
            return Err(Error::BundleMismatch(format!("{} body length", b.header.party)));
        }
    }
    let h = bundles[0].header;
    let data = BoolShareVec::from_parts(h.width, bundles.clone().map(|b| b.pair))?;
    data.check_consistency()
        .map_err(|e| Error::BundleMismatch(format!("replicated shares disagree: {e}")))?;
    let config = GlobalConfig::new(h.num_vertices, h.k, threshold, h.attr_lanes)?;
    Ok(ProviderShares { config, l: h.l, data })
}

/// Secret-shared, integrated 2d-partitioned graph: `b^2` blocks of `l`
/// sorted records each, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedGraph {
    pub config: GlobalConfig,
    pub l: usize,
    pub data: BoolShareVec,
}

impl PartitionedGraph {
    pub fn block_lanes(&self) -> usize {
        self.l * self.config.record_lanes()
    }

    /// Block `(ci, cj)`, 1-based.
    pub fn block(&self, ci: u64, cj: u64) -> BoolShareVec {
        let bl = self.block_lanes();
        let i = block_index(ci, cj, self.config.b);
        self.data.slice(i * bl..(i + 1) * bl)
    }

    /// Plaintext blocks; test and oracle helper.
    pub fn reconstruct_in_simulation(&self) -> Vec<Vec<EdgeRecord>> {
        let rl = self.config.record_lanes();
        self.data
            .reconstruct_in_simulation()
            .chunks(self.block_lanes())
            .map(|b| b.chunks(rl).map(EdgeRecord::from_lanes).collect())
            .collect()
    }
}

/// Largest `k` in `[1, |V|]` with `k * sum(counts) <= B * |V|`, found by a
/// public binary search that reveals one sign bit per step. Inputs must keep
/// `B * |V|` and `|V| * sum(counts)` below `2^63`.
pub fn secure_config_k(session: &mut Session, counts: &ArithShareVec, threshold: u64, num_vertices: u64) -> Result<u64> {
    if num_vertices == 0 {
        return Err(Error::Config("no vertices".into()));
    }
    let budget = threshold
        .checked_mul(num_vertices)
        .filter(|v| *v < 1 << 63)
        .ok_or_else(|| Error::Config("B * |V| overflows".into()))?;
    let total = counts.sum();
    let (mut lo, mut hi) = (1u64, num_vertices);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        let diff = total.scale(mid).neg().add_public(&[budget])?;
        let bits = session.arith_to_bool(&diff)?;
        let negative = session.reveal(&bits.shr(63).with_width(1))?[0] == 1;
        if negative {
            hi = mid - 1;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Comparators of the final merge stage of Batcher's odd-even sort on
/// `2 * half` elements, grouped into independent layers.
pub fn merge_layers(half: usize) -> Vec<Vec<(usize, usize)>> {
    let n = 2 * half;
    let p = half;
    let mut layers = Vec::new();
    let mut k = p;
    while k >= 1 {
        let mut layer = Vec::new();
        let mut j = k % p;
        while j + k < n {
            for i in 0..k.min(n - j - k) {
                if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                    layer.push((i + j, i + j + k));
                }
            }
            j += 2 * k;
        }
        layers.push(layer);
        k /= 2;
    }
    layers
}

/// Oblivious compare-exchange of record pairs: afterwards every `a` record
/// has the smaller key. Records are `rec_lanes` lanes with the key first;
/// equal keys keep their order.
pub fn compare_exchange(
    session: &mut Session,
    a: &BoolShareVec,
    b: &BoolShareVec,
    rec_lanes: usize,
) -> Result<(BoolShareVec, BoolShareVec)> {
    let n = a.lanes() / rec_lanes;
    let keys: Vec<usize> = (0..n).map(|r| r * rec_lanes).collect();
    let cond = session.gt(&a.gather(&keys), &b.gather(&keys))?;
    let cond = SecretBit::from_vec(cond.as_vec().repeat_each(rec_lanes))?;
    let d = session.mask_select(&cond, &a.xor(b)?)?;
    Ok((a.xor(&d)?, b.xor(&d)?))
}

/// Applies comparator layers (record indices) to `data` in place.
pub fn apply_network(
    session: &mut Session,
    data: &BoolShareVec,
    rec_lanes: usize,
    layers: &[Vec<(usize, usize)>],
) -> Result<BoolShareVec> {
    let mut data = data.clone();
    let lanes_of = |recs: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        recs.flat_map(|r| (0..rec_lanes).map(move |j| r * rec_lanes + j)).collect()
    };
    for layer in layers.iter().filter(|l| !l.is_empty()) {
        let a = data.gather(&lanes_of(&mut layer.iter().map(|c| c.0)));
        let b = data.gather(&lanes_of(&mut layer.iter().map(|c| c.1)));
        let (lo, hi) = compare_exchange(session, &a, &b, rec_lanes)?;
        let total = data.lanes();
        let mut source: Vec<usize> = (0..total).collect();
        let m = layer.len() * rec_lanes;
        for (q, &(x, y)) in layer.iter().enumerate() {
            for j in 0..rec_lanes {
                source[x * rec_lanes + j] = total + q * rec_lanes + j;
                source[y * rec_lanes + j] = total + m + q * rec_lanes + j;
            }
        }
        data = BoolShareVec::concat(&[&data, &lo, &hi])?.gather(&source);
    }
    Ok(data)
}

/// Merges every block's provider runs into one sorted run of `sum(l_i)`
/// records. Runs are merged pairwise; each pairwise merge pads both runs
/// to a power of two with maximal-key sentinels and drops them afterwards.
/// All blocks and pairs of one stage share the network layers.
pub fn integrate(session: &mut Session, providers: &[ProviderShares]) -> Result<PartitionedGraph> {
    let first = providers.first().ok_or_else(|| Error::Config("no provider partitions".into()))?;
    let config = first.config;
    for p in providers {
        let c = p.config;
        if (c.num_vertices, c.k, c.b, c.attr_lanes) != (config.num_vertices, config.k, config.b, config.attr_lanes) {
            return Err(Error::BundleMismatch("provider configurations differ".into()));
        }
        if p.data.lanes() != config.blocks() * p.l * config.record_lanes() {
            return Err(Error::BundleMismatch("provider share length".into()));
        }
    }
    let rl = config.record_lanes();
    let blocks = config.blocks();
    // runs[i] = (records per block, data with blocks row-major)
    let mut runs: Vec<(usize, BoolShareVec)> = providers.iter().map(|p| (p.l, p.data.clone())).collect();
    let mut sentinel_rec = vec![0u64; rl];
    sentinel_rec[0] = u64::MAX;

    while runs.len() > 1 {
        let mut next_runs = Vec::new();
        let mut pairs = Vec::new();
        let mut it = runs.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => pairs.push((a, b)),
                None => next_runs.push(a),
            }
        }
        // Lay out every (pair, block) segment of 2 * half records.
        let sentinel = BoolShareVec::public(&sentinel_rec, WORD);
        let mut pieces: Vec<BoolShareVec> = Vec::new();
        let mut layers: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut offset = 0usize;
        let mut extents = Vec::new();
        for ((la, da), (lb, db)) in &pairs {
            let half = (*la).max(*lb).next_power_of_two();
            let net = merge_layers(half);
            if layers.len() < net.len() {
                layers.resize(net.len(), Vec::new());
            }
            let seg_start = offset;
            for blk in 0..blocks {
                pieces.push(da.slice(blk * la * rl..(blk + 1) * la * rl));
                pieces.push(sentinel.tile(half - la));
                pieces.push(db.slice(blk * lb * rl..(blk + 1) * lb * rl));
                pieces.push(sentinel.tile(half - lb));
                for (d, layer) in net.iter().enumerate() {
                    layers[d].extend(layer.iter().map(|&(x, y)| (offset + x, offset + y)));
                }
                offset += 2 * half;
            }
            extents.push((seg_start, half, la + lb));
        }
        let refs: Vec<&BoolShareVec> = pieces.iter().collect();
        let merged = apply_network(session, &BoolShareVec::concat(&refs)?, rl, &layers)?;
        for (start, half, len) in extents {
            let mut idx = Vec::with_capacity(blocks * len * rl);
            for blk in 0..blocks {
                let base = (start + blk * 2 * half) * rl;
                idx.extend(base..base + len * rl);
            }
            next_runs.push((len, merged.gather(&idx)));
        }
        runs = next_runs;
    }
    let (l, data) = runs.pop().expect("one run");
    Ok(PartitionedGraph { config, l, data })
}

/// Servers-side load of a provider's bundles with a fresh replicated
/// sharing, for in-process simulations that start from plaintext.
pub fn share_in_session(session: &mut Session, p: &LocalPartition) -> Result<ProviderShares> {
    let data = session.client_share(&p.lanes(), WORD)?;
    Ok(ProviderShares {
        config: p.config,
        l: p.l,
        data,
    })
}
