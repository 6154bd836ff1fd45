//! GORAM: a vertex ORAM over the `b` row partitions and an edge ORAM over
//! the `b^2` blocks, optionally split into edge-range slices that each own
//! a protocol session.

use std::ops::Range;

use goram_mpc::{BoolShareVec, Metrics, Session};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oram::{OramParams, SqrtOram};
use crate::partition::{GlobalConfig, PartitionedGraph};
use crate::shuffle::BlockArray;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoramOptions {
    pub slices: usize,
    pub pack: usize,
    /// Epoch of the vertex ORAM; `ceil(sqrt(b))` when unset.
    pub vertex_epoch: Option<usize>,
    /// Epoch of the edge ORAM; `ceil(sqrt(b^2))` when unset.
    pub edge_epoch: Option<usize>,
}

impl Default for GoramOptions {
    fn default() -> Self {
        GoramOptions {
            slices: 1,
            pack: OramParams::DEFAULT_PACK,
            vertex_epoch: None,
            edge_epoch: None,
        }
    }
}

impl GoramOptions {
    fn params(&self, n: usize, epoch: Option<usize>) -> OramParams {
        let base = OramParams::for_size(n);
        OramParams {
            pack: self.pack,
            epoch: epoch.unwrap_or(base.epoch),
        }
    }
}

/// One edge-range slice with its own session and index pair.
pub struct Slice {
    pub session: Session,
    voram: SqrtOram,
    eoram: SqrtOram,
    range: Range<usize>,
    b: usize,
    record_lanes: usize,
}

impl Slice {
    /// Records per block in this slice.
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn record_lanes(&self) -> usize {
        self.record_lanes
    }

    /// Row `row` (0-based chunk index): `b` blocks of `len()` records.
    pub fn vertex_partition(&mut self, row: &BoolShareVec) -> Result<BoolShareVec> {
        self.voram.access(&mut self.session, row)
    }

    /// Block at flat index `(ci - 1) * b + (cj - 1)`: `len()` records.
    pub fn edge_partition(&mut self, flat: &BoolShareVec) -> Result<BoolShareVec> {
        self.eoram.access(&mut self.session, flat)
    }

    pub fn voram(&self) -> &SqrtOram {
        &self.voram
    }

    pub fn eoram(&self) -> &SqrtOram {
        &self.eoram
    }

    fn rebuild(&mut self) -> Result<()> {
        self.voram.rebuild(&mut self.session)?;
        self.eoram.rebuild(&mut self.session)
    }

    fn offline(&self) -> Metrics {
        self.voram.offline_metrics() + self.eoram.offline_metrics()
    }

    /// Per-record values of this slice's vertex partition in the global row
    /// order: block by block, then slices.
    fn row_positions(&self, l: usize) -> Vec<usize> {
        (0..self.b)
            .flat_map(|c| (0..self.len()).map(move |r| c * l + self.range.start + r))
            .collect()
    }
}

pub struct Goram {
    config: GlobalConfig,
    l: usize,
    slices: Vec<Slice>,
}

/// Splits `[0, l)` into `p` contiguous ranges whose sizes differ by at most
/// one.
pub fn slice_ranges(l: usize, p: usize) -> Vec<Range<usize>> {
    let (q, r) = (l / p, l % p);
    let mut start = 0;
    (0..p)
        .map(|j| {
            let len = q + usize::from(j < r);
            let range = start..start + len;
            start += len;
            range
        })
        .collect()
}

impl Goram {
    /// Builds every slice's vertex and edge ORAM in its own session,
    /// labelled from `master_seed`.
    pub fn build(master_seed: &[u8], g: &PartitionedGraph, opts: GoramOptions) -> Result<Goram> {
        let l = g.l;
        if opts.slices == 0 || opts.slices > l {
            return Err(Error::Config(format!("slice count {} outside 1..={l}", opts.slices)));
        }
        let b = g.config.b as usize;
        let rl = g.config.record_lanes();
        let ranges = slice_ranges(l, opts.slices);
        let slices = ranges
            .into_par_iter()
            .enumerate()
            .map(|(j, range)| {
                let mut session = Session::labelled(master_seed, &format!("goram/slice/{j}"));
                let len = range.len();
                let lanes_of_block = |blk: usize| {
                    let start = (blk * l + range.start) * rl;
                    start..start + len * rl
                };
                // rows are blocks (i, 1..b) in column order
                let idx: Vec<usize> = (0..b * b).flat_map(lanes_of_block).collect();
                let restricted = g.data.gather(&idx);
                let rows = BlockArray::new(restricted.clone(), b * len * rl)?;
                let blocks = BlockArray::new(restricted, len * rl)?;
                let voram = SqrtOram::build(&mut session, &rows, opts.params(b, opts.vertex_epoch))?;
                let eoram = SqrtOram::build(&mut session, &blocks, opts.params(b * b, opts.edge_epoch))?;
                Ok(Slice {
                    session,
                    voram,
                    eoram,
                    range,
                    b,
                    record_lanes: rl,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Goram {
            config: g.config,
            l,
            slices,
        })
    }

    pub fn config(&self) -> &GlobalConfig {
        &self.config
    }

    /// Records per block over all slices.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    /// Runs `f` on every slice concurrently; results in slice order.
    pub fn fan_out<T: Send>(&mut self, f: impl Fn(&mut Slice) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        self.slices.par_iter_mut().map(f).collect()
    }

    /// Every slice's share of row `row`, each `b` blocks of the slice's
    /// records.
    pub fn access_vertex_partition(&mut self, row: &BoolShareVec) -> Result<Vec<BoolShareVec>> {
        self.fan_out(|s| s.vertex_partition(row))
    }

    /// Every slice's share of the block at `flat`.
    pub fn access_edge_partition(&mut self, flat: &BoolShareVec) -> Result<Vec<BoolShareVec>> {
        self.fan_out(|s| s.edge_partition(flat))
    }

    /// Reorders per-record values of slice vertex partitions (`per_record`
    /// lanes each) into global row order, `b * l` records.
    pub fn assemble_row(&self, parts: &[BoolShareVec], per_record: usize) -> Result<BoolShareVec> {
        let total = self.config.b as usize * self.l;
        let mut source = vec![0usize; total * per_record];
        let mut offset = 0;
        for (slice, part) in self.slices.iter().zip(parts) {
            let positions = slice.row_positions(self.l);
            if part.lanes() != positions.len() * per_record {
                return Err(Error::Config("slice partition shape".into()));
            }
            for (r, &pos) in positions.iter().enumerate() {
                for j in 0..per_record {
                    source[pos * per_record + j] = offset + r * per_record + j;
                }
            }
            offset += part.lanes();
        }
        let refs: Vec<&BoolShareVec> = parts.iter().collect();
        Ok(BoolShareVec::concat(&refs)?.gather(&source))
    }

    /// Block contents in slice order: concatenating a block's slice parts
    /// gives its `l` records in order.
    pub fn assemble_block(&self, parts: &[BoolShareVec]) -> Result<BoolShareVec> {
        let refs: Vec<&BoolShareVec> = parts.iter().collect();
        Ok(BoolShareVec::concat(&refs)?)
    }

    pub fn rebuild_indices(&mut self) -> Result<()> {
        self.fan_out(Slice::rebuild).map(|_| ())
    }

    /// Traffic of all slice sessions, builds included.
    pub fn metrics(&self) -> Metrics {
        self.slices.iter().fold(Metrics::default(), |m, s| m + s.session.metrics_snapshot())
    }

    /// Traffic spent on ORAM builds and rebuilds.
    pub fn offline_metrics(&self) -> Metrics {
        self.slices.iter().fold(Metrics::default(), |m, s| m + s.offline())
    }

    pub fn transcript_digests(&self) -> Vec<[u8; 32]> {
        self.slices.iter().map(|s| s.session.transcript_digest()).collect()
    }
}
