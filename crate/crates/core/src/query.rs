//! Ego-centric queries over fetched partitions.
//!
//! Ids are 1-based `u32`-range values; row indices are 0-based chunk
//! indices `ceil(v/k) - 1` and flat block indices are
//! `(ceil(src/k) - 1) * b + ceil(dst/k) - 1`. All of them are computed by
//! the client from the public `k` and arrive secret-shared.

use goram_mpc::{ArithShareVec, BoolShareVec, SecretBit, Session};

use crate::error::{Error, Result};
use crate::index::Goram;
use crate::partition::WORD;
use crate::shuffle::{oblivious_shuffle, BlockArray};

/// Bits of a vertex id.
pub const ID_BITS: u32 = 32;

fn key_lanes(records: &BoolShareVec, record_lanes: usize) -> BoolShareVec {
    let n = records.lanes() / record_lanes;
    records.gather(&(0..n).map(|r| r * record_lanes).collect::<Vec<_>>())
}

/// `(src, dst)` lanes of every record, `ID_BITS` wide.
pub fn src_dst(records: &BoolShareVec, record_lanes: usize) -> (BoolShareVec, BoolShareVec) {
    let keys = key_lanes(records, record_lanes);
    (keys.shr(32).with_width(ID_BITS), keys.with_width(ID_BITS))
}

/// Attribute `lane` of every record.
pub fn attr_lane(records: &BoolShareVec, record_lanes: usize, lane: usize) -> BoolShareVec {
    let n = records.lanes() / record_lanes;
    records.gather(&(0..n).map(|r| r * record_lanes + 1 + lane).collect::<Vec<_>>())
}

/// Records with `src == v`.
pub fn source_mask(s: &mut Session, records: &BoolShareVec, record_lanes: usize, v: &BoolShareVec) -> Result<SecretBit> {
    let (src, _) = src_dst(records, record_lanes);
    Ok(s.eq(&src, &v.with_width(ID_BITS).tile(src.lanes()))?)
}

/// Records equal to the edge `(vs, vd)`.
pub fn edge_mask(
    s: &mut Session,
    records: &BoolShareVec,
    record_lanes: usize,
    vs: &BoolShareVec,
    vd: &BoolShareVec,
) -> Result<SecretBit> {
    let (src, dst) = src_dst(records, record_lanes);
    let n = src.lanes();
    let lhs = BoolShareVec::concat(&[&src, &dst])?;
    let rhs = BoolShareVec::concat(&[&vs.with_width(ID_BITS).tile(n), &vd.with_width(ID_BITS).tile(n)])?;
    let both = s.eq(&lhs, &rhs)?;
    Ok(s.and_bits(&both.slice(0..n), &both.slice(n..2 * n))?)
}

/// Number of set bits as an additive share.
pub fn count_mask(s: &mut Session, mask: &SecretBit) -> Result<ArithShareVec> {
    Ok(s.bit_to_arith(mask, WORD)?.sum())
}

/// `1` where `candidate[i] != candidate[i + 1]`, and at the last lane.
fn run_ends(s: &mut Session, candidate: &BoolShareVec) -> Result<SecretBit> {
    let n = candidate.lanes();
    let tail = SecretBit::public(&[true]);
    if n <= 1 {
        return Ok(SecretBit::public(&vec![true; n]));
    }
    let differ = s.neq(&candidate.slice(1..n), &candidate.slice(0..n - 1))?;
    Ok(SecretBit::concat(&[&differ, &tail])?)
}

pub fn edge_exist(main: &mut Session, g: &mut Goram, vs: &BoolShareVec, vd: &BoolShareVec, flat: &BoolShareVec) -> Result<SecretBit> {
    let bits = g.fan_out(|slice| {
        let block = slice.edge_partition(flat)?;
        let rl = slice.record_lanes();
        let mask = edge_mask(&mut slice.session, &block, rl, vs, vd)?;
        Ok(slice.session.or_fold(&mask)?)
    })?;
    let refs: Vec<&SecretBit> = bits.iter().collect();
    Ok(main.or_fold(&SecretBit::concat(&refs)?)?)
}

/// Out-edges of `v` with multiplicity.
/// Runs entirely in the slice sessions; `_main` keeps the query signatures
/// uniform.
pub fn neighbors_count(_main: &mut Session, g: &mut Goram, v: &BoolShareVec, row: &BoolShareVec) -> Result<ArithShareVec> {
    let counts = g.fan_out(|slice| {
        let part = slice.vertex_partition(row)?;
        let rl = slice.record_lanes();
        let mask = source_mask(&mut slice.session, &part, rl, v)?;
        count_mask(&mut slice.session, &mask)
    })?;
    sum_counts(counts)
}

/// Out-edges of `v` whose attribute `lane` is strictly below `threshold`.
pub fn range_count(
    _main: &mut Session,
    g: &mut Goram,
    v: &BoolShareVec,
    row: &BoolShareVec,
    threshold: &BoolShareVec,
    lane: usize,
) -> Result<ArithShareVec> {
    if lane >= g.config().attr_lanes {
        return Err(Error::Config(format!("attribute lane {lane} of {}", g.config().attr_lanes)));
    }
    let counts = g.fan_out(|slice| {
        let part = slice.vertex_partition(row)?;
        let rl = slice.record_lanes();
        let s = &mut slice.session;
        let attrs = attr_lane(&part, rl, lane);
        let earlier = s.lt(&attrs, &threshold.with_width(WORD).tile(attrs.lanes()))?;
        let mask = source_mask(s, &part, rl, v)?;
        let mask = s.and_bits(&mask, &earlier)?;
        count_mask(s, &mask)
    })?;
    sum_counts(counts)
}

fn sum_counts(counts: Vec<ArithShareVec>) -> Result<ArithShareVec> {
    let refs: Vec<&ArithShareVec> = counts.iter().collect();
    Ok(ArithShareVec::concat(&refs)?.sum())
}

/// Source mask and masked destinations of the row, in row order.
fn row_candidates(g: &mut Goram, v: &BoolShareVec, row: &BoolShareVec) -> Result<(SecretBit, BoolShareVec)> {
    let parts = g.fan_out(|slice| {
        let part = slice.vertex_partition(row)?;
        let rl = slice.record_lanes();
        let s = &mut slice.session;
        let (src, dst) = src_dst(&part, rl);
        let mask = s.eq(&src, &v.with_width(ID_BITS).tile(src.lanes()))?;
        let candidate = s.mask_select(&mask, &dst)?;
        Ok((mask, candidate))
    })?;
    let masks: Vec<BoolShareVec> = parts.iter().map(|(m, _)| m.as_vec().clone()).collect();
    let candidates: Vec<BoolShareVec> = parts.into_iter().map(|(_, c)| c).collect();
    let mask = SecretBit::from_vec(g.assemble_row(&masks, 1)?)?;
    Ok((mask, g.assemble_row(&candidates, 1)?))
}

/// Distinct out-neighbors of `v`: `b * l` lanes, each neighbor once, zeros
/// elsewhere, in shuffled order.
pub fn neighbors_get(main: &mut Session, g: &mut Goram, v: &BoolShareVec, row: &BoolShareVec) -> Result<BoolShareVec> {
    let (_, candidate) = row_candidates(g, v, row)?;
    let ends = run_ends(main, &candidate)?;
    let neighbors = main.mask_select(&ends, &candidate)?;
    let shuffled = oblivious_shuffle(main, &BlockArray::new(neighbors, 1)?)?;
    Ok(shuffled.into_data())
}

/// Distinct out-neighbors of `v`.
pub fn unique_neighbors_count(main: &mut Session, g: &mut Goram, v: &BoolShareVec, row: &BoolShareVec) -> Result<ArithShareVec> {
    let (mask, candidate) = row_candidates(g, v, row)?;
    let ends = run_ends(main, &candidate)?;
    let last = main.and_bits(&ends, &mask)?;
    count_mask(main, &last)
}

/// One secret edge probe: endpoints and flat block index.
#[derive(Clone, Debug)]
pub struct EdgeProbe {
    pub src: BoolShareVec,
    pub dst: BoolShareVec,
    pub flat: BoolShareVec,
}

/// `forward` probes the cycle's edges, `backward` their reversals.
pub fn cycle_identify(main: &mut Session, g: &mut Goram, forward: &[EdgeProbe], backward: &[EdgeProbe]) -> Result<SecretBit> {
    if forward.len() < 2 || forward.len() != backward.len() {
        return Err(Error::Config("a cycle needs at least two vertices".into()));
    }
    let mut fold = |probes: &[EdgeProbe]| -> Result<SecretBit> {
        let bits = probes
            .iter()
            .map(|p| edge_exist(main, g, &p.src, &p.dst, &p.flat))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&SecretBit> = bits.iter().collect();
        Ok(main.and_fold(&SecretBit::concat(&refs)?)?)
    };
    let f = fold(forward)?;
    let b = fold(backward)?;
    Ok(main.or_bits(&f, &b)?)
}
