//! Recursive square-root ORAM over an array of equal-size secret blocks.
//!
//! Level 0 holds the shuffled data. Each stored block is `[tag, payload..]`
//! where `tag` is the logical index. The permutation representation of level
//! `h` is packed `P` entries per element into level `h + 1`, which is again
//! shuffled, until a level is small enough to keep its position map as a
//! directly scannable base (`Data`, `Used`). Every access touches every
//! level exactly once and reveals one fresh physical index per level.

use goram_mpc::{BoolShareVec, Metrics, SecretBit, Session};

use crate::error::{Error, Result};
use crate::shuffle::{shuffle_mem, BlockArray};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OramParams {
    /// Position-map entries packed per child element; a power of two.
    pub pack: usize,
    /// Stash capacity and epoch length.
    pub epoch: usize,
}

impl OramParams {
    pub const DEFAULT_PACK: usize = 4;

    /// `P = 4`, `T = ceil(sqrt(n))`.
    pub fn for_size(n: usize) -> Self {
        OramParams {
            pack: Self::DEFAULT_PACK,
            epoch: ceil_sqrt(n).max(1),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.pack < 2 || !self.pack.is_power_of_two() {
            return Err(Error::Config(format!("pack factor {} must be a power of two >= 2", self.pack)));
        }
        if self.epoch == 0 || self.epoch > n {
            return Err(Error::Config(format!("epoch length {} outside 1..={n}", self.epoch)));
        }
        Ok(())
    }
}

pub fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while r * r < n {
        r += 1;
    }
    r
}

/// Bits needed to address `n` positions; at least one.
pub fn index_bits(n: usize) -> u32 {
    if n <= 2 {
        1
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Level sizes the recursion produces for `n` elements.
pub fn level_sizes(n: usize, params: OramParams) -> Vec<usize> {
    let mut sizes = vec![n];
    let mut cur = n;
    while !is_last(cur, params) {
        cur = cur.div_ceil(params.pack);
        sizes.push(cur);
    }
    sizes
}

/// A level stops the recursion once it fits the epoch or its packed child
/// could not absorb a full epoch of fresh accesses.
fn is_last(n: usize, params: OramParams) -> bool {
    n <= params.epoch || n.div_ceil(params.pack) < params.epoch
}

#[derive(Clone, Debug)]
struct Level {
    shuffled: BlockArray,
    /// Revealed physical indices this epoch, in access order.
    stash_pos: Vec<usize>,
    /// Fetched blocks, `stash_pos.len()` blocks of `shuffled.block_lanes()`.
    stash: Option<BoolShareVec>,
}

impl Level {
    fn len(&self) -> usize {
        self.shuffled.len()
    }
}

#[derive(Clone, Debug)]
pub struct SqrtOram {
    params: OramParams,
    levels: Vec<Level>,
    /// Position map of the last level, in logical order.
    base_data: BoolShareVec,
    base_used: SecretBit,
    /// Tagged level-0 input in logical order, kept for rebuilds.
    source: BlockArray,
    accesses: usize,
    epochs: usize,
    offline: Metrics,
    last_trace: Vec<usize>,
}

/// `[tag_i, block_i..]` for every block.
fn prepend_tags(tags: &BoolShareVec, blocks: &BoolShareVec, block_lanes: usize) -> Result<BoolShareVec> {
    let n = tags.lanes();
    let joined = BoolShareVec::concat(&[tags, blocks])?;
    let mut idx = Vec::with_capacity(n * (block_lanes + 1));
    for i in 0..n {
        idx.push(i);
        idx.extend((0..block_lanes).map(|j| n + i * block_lanes + j));
    }
    Ok(joined.gather(&idx))
}

fn public_range(n: usize, width: u32) -> BoolShareVec {
    BoolShareVec::public(&(0..n as u64).collect::<Vec<_>>(), width)
}

impl SqrtOram {
    pub fn build(session: &mut Session, data: &BlockArray, params: OramParams) -> Result<Self> {
        params.validate(data.len())?;
        let w = data.width();
        let tags = public_range(data.len(), w);
        let tagged = prepend_tags(&tags, data.data(), data.block_lanes())?;
        let source = BlockArray::new(tagged, data.block_lanes() + 1)?;
        let mut oram = SqrtOram {
            params,
            levels: Vec::new(),
            base_data: BoolShareVec::empty(w),
            base_used: SecretBit::public(&[]),
            source,
            accesses: 0,
            epochs: 0,
            offline: Metrics::default(),
            last_trace: Vec::new(),
        };
        oram.construct(session)?;
        Ok(oram)
    }

    fn construct(&mut self, session: &mut Session) -> Result<()> {
        let before = session.metrics_snapshot();
        let p = self.params.pack;
        let mut input = self.source.clone();
        let w = input.width();
        self.levels.clear();
        loop {
            let n = input.len();
            let (shuffled, rep) = shuffle_mem(session, &input)?;
            self.levels.push(Level {
                shuffled,
                stash_pos: Vec::new(),
                stash: None,
            });
            if is_last(n, self.params) {
                self.base_data = rep.entries;
                self.base_used = SecretBit::public(&vec![false; n]);
                break;
            }
            let m = n.div_ceil(p);
            let padded = BoolShareVec::concat(&[&rep.entries, &BoolShareVec::public(&[0], w)])?;
            let idx: Vec<usize> = (0..m * p).map(|j| if j < n { j } else { n }).collect();
            let packed = padded.gather(&idx);
            input = BlockArray::new(prepend_tags(&public_range(m, w), &packed, p)?, p + 1)?;
        }
        self.accesses = 0;
        self.epochs += 1;
        self.offline = self.offline + (session.metrics_snapshot() - before);
        Ok(())
    }

    /// Fresh build over the same logical contents with new randomness.
    pub fn rebuild(&mut self, session: &mut Session) -> Result<()> {
        self.construct(session)
    }

    pub fn params(&self) -> OramParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Payload lanes per element.
    pub fn block_lanes(&self) -> usize {
        self.source.block_lanes() - 1
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Level::len).collect()
    }

    pub fn accesses_this_epoch(&self) -> usize {
        self.accesses
    }

    /// Builds performed so far, the initial one included.
    pub fn epochs(&self) -> usize {
        self.epochs
    }

    /// Traffic spent on builds and rebuilds.
    pub fn offline_metrics(&self) -> Metrics {
        self.offline
    }

    /// Physical indices revealed by the last access, level 0 first.
    pub fn last_trace(&self) -> &[usize] {
        &self.last_trace
    }

    /// Physical indices revealed at level 0 this epoch.
    pub fn revealed_root(&self) -> &[usize] {
        &self.levels[0].stash_pos
    }

    pub fn stash_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.stash_pos.len()).collect()
    }

    pub fn base_used(&self) -> &SecretBit {
        &self.base_used
    }

    /// Reads the element at the secret logical index (one lane). Rebuilds
    /// first when the epoch is exhausted.
    pub fn access(&mut self, session: &mut Session, index: &BoolShareVec) -> Result<BoolShareVec> {
        if index.lanes() != 1 {
            return Err(Error::Config(format!("index must be one lane, got {}", index.lanes())));
        }
        if self.accesses == self.params.epoch {
            self.rebuild(session)?;
        }
        self.last_trace.clear();
        let block = self.access_level(session, 0, index, None)?;
        self.accesses += 1;
        // deepest level reveals first
        self.last_trace.reverse();
        Ok(block.slice(1..block.lanes()))
    }

    fn access_level(
        &mut self,
        s: &mut Session,
        h: usize,
        idx: &BoolShareVec,
        parent_fake: Option<&SecretBit>,
    ) -> Result<BoolShareVec> {
        let level = &self.levels[h];
        let n = level.len();
        let bl = level.shuffled.block_lanes();
        let w = level.shuffled.width();
        let bits = index_bits(n);
        let key = idx.with_width(bits);

        let (found, stash_val) = match &level.stash {
            None => (SecretBit::public(&[false]), BoolShareVec::public(&vec![0; bl], w)),
            Some(st) => {
                let k = level.stash_pos.len();
                let tags = st.gather(&(0..k).map(|j| j * bl).collect::<Vec<_>>()).with_width(bits);
                let hits = s.eq(&tags, &key.tile(k))?;
                let found = s.or_fold(&hits)?;
                let val = s.oblivious_dot(st, &hits)?;
                (found, val)
            }
        };

        // fake = found | parent_fake, real = found & !parent_fake; one AND.
        let (fake, real) = match parent_fake {
            None => (found.clone(), found.clone()),
            Some(pf) => {
                let both = s.and_bits(&found, pf)?;
                let real = found.xor(&both)?;
                (real.xor(pf)?, real)
            }
        };

        let p = if h + 1 == self.levels.len() {
            let (ps, used) = get_pos_base_batch(s, &self.base_data, &self.base_used, n, idx, &fake)?;
            self.base_used = used;
            ps[0] as usize
        } else {
            let lp = self.params.pack.trailing_zeros();
            let pack = self.params.pack;
            let child = self.access_level(s, h + 1, &idx.shr(lp), Some(&fake))?;
            let positions = child.slice(1..1 + pack);
            let residue = idx.with_width(lp);
            let r_eff = s.mask_select(&fake.not(), &residue)?;
            let onehot = s.eq(&r_eff.tile(pack), &public_range(pack, lp))?;
            let pos = s.oblivious_dot(&positions, &onehot)?;
            s.reveal(&pos)?[0] as usize
        };

        let level = &mut self.levels[h];
        if p >= n || level.stash_pos.contains(&p) {
            return Err(Error::Config(format!("level {h} revealed stale position {p}")));
        }
        let fetched = level.shuffled.block(p);
        level.stash = Some(match &level.stash {
            None => fetched.clone(),
            Some(st) => BoolShareVec::concat(&[st, &fetched])?,
        });
        level.stash_pos.push(p);
        self.last_trace.push(p);
        let real = SecretBit::from_vec(real.as_vec().repeat_each(bl))?;
        Ok(s.mux(&real, &stash_val, &fetched)?)
    }
}

/// Position lookup in the base map for `rows` independent instances.
///
/// `data` and `used` hold `rows * t` lanes, row-major. For each row, when
/// `fake` is 0 the hot lane is `idx`, otherwise it is the first unused lane.
/// Returns the revealed `data` entries at the hot lanes and the updated
/// `used` bits.
pub fn get_pos_base_batch(
    s: &mut Session,
    data: &BoolShareVec,
    used: &SecretBit,
    t: usize,
    idx: &BoolShareVec,
    fake: &SecretBit,
) -> Result<(Vec<u64>, SecretBit)> {
    let rows = idx.lanes();
    if t == 0 || data.lanes() != rows * t || used.lanes() != rows * t || fake.lanes() != rows {
        return Err(Error::Config("base map shape mismatch".into()));
    }
    let total = rows * t;
    let zero = SecretBit::public(&[false]);
    let one = SecretBit::public(&[true]);

    // fz[k] = OR of not_used[j] for j < k, per row
    let not_used = used.not();
    let shifted = |v: &SecretBit, by: usize, fill: &SecretBit| -> Result<SecretBit> {
        let ext = SecretBit::concat(&[v, fill])?;
        Ok(ext.gather(
            &(0..total)
                .map(|j| if j % t >= by { j - by } else { total })
                .collect::<Vec<_>>(),
        ))
    };
    let mut fz = shifted(&not_used, 1, &zero)?;
    let mut stride = 1;
    while stride < t {
        let prev = shifted(&fz, stride, &zero)?;
        fz = s.or_bits(&fz, &prev)?;
        stride *= 2;
    }
    // first unused: fz[k] ^ fz[k + 1], with fz[t] = 1
    let ext = SecretBit::concat(&[&fz, &one])?;
    let next = ext.gather(
        &(0..total)
            .map(|j| if j % t + 1 < t { j + 1 } else { total })
            .collect::<Vec<_>>(),
    );
    let first_unused = fz.xor(&next)?;

    let bits = index_bits(t);
    let positions = BoolShareVec::public(&(0..total).map(|j| (j % t) as u64).collect::<Vec<_>>(), bits);
    let s1 = s.eq(&idx.with_width(bits).repeat_each(t), &positions)?;
    let fake_rep = SecretBit::from_vec(fake.as_vec().repeat_each(t))?;
    let hot = SecretBit::from_vec(s.mux(&fake_rep, first_unused.as_vec(), s1.as_vec())?)?;

    let sel = hot.extend(data.width());
    let prods = s.and_batch(&[(&sel, data), (hot.as_vec(), used.as_vec())])?;
    let new_used = SecretBit::from_vec(hot.as_vec().xor(used.as_vec())?.xor(&prods[1])?)?;
    let picked = prods[0].rearrange(|v| v.chunks(t).map(|r| r.iter().fold(0, |a, x| a ^ x)).collect());
    Ok((s.reveal(&picked)?, new_used))
}
