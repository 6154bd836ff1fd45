//! Oblivious shuffling of block arrays.
//!
//! [`shuffle_mem`] shuffles an array of equal-size secret blocks under a
//! permutation `pi = pi_23 . pi_31 . pi_12` that no single server knows, and
//! at the same time shuffles the ranging array `L = [0, n)` under `pi^-1`,
//! which yields the secret permutation representation: entry `i` is the
//! position of logical block `i` in the shuffled output. Constant rounds and
//! `O(n * B)` bytes.
//!
//! Randomness schedule. Each call draws from the pairwise `Shuffle` streams,
//! per pair and in this order: the permutation `pi_ij`, the data mask
//! `Z_ij` (n*B words), the index mask `Z^L_ij` (n words, `shuffle_mem`
//! only), then the pair's output share: `B~` for (1,2), `L~_C` for (2,3) and
//! `A~`, `L~_A` for (3,1).

use goram_mpc::prf::{PartyPrf, Purpose, Side};
use goram_mpc::{width_mask, BoolShareVec, PartyId, ReplicatedPair, Session};

use crate::error::{Error, Result};

/// `n` secret blocks of `block_lanes` lanes each, stored contiguously.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockArray {
    data: BoolShareVec,
    block_lanes: usize,
}

impl BlockArray {
    pub fn new(data: BoolShareVec, block_lanes: usize) -> Result<Self> {
        if block_lanes == 0 || !data.lanes().is_multiple_of(block_lanes) || data.lanes() == 0 {
            return Err(Error::Config(format!(
                "{} lanes do not form non-empty blocks of {block_lanes}",
                data.lanes()
            )));
        }
        Ok(BlockArray { data, block_lanes })
    }

    pub fn len(&self) -> usize {
        self.data.lanes() / self.block_lanes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block_lanes(&self) -> usize {
        self.block_lanes
    }

    /// Bits per block, `B`.
    pub fn block_bits(&self) -> usize {
        self.block_lanes * self.data.width() as usize
    }

    pub fn width(&self) -> u32 {
        self.data.width()
    }

    pub fn data(&self) -> &BoolShareVec {
        &self.data
    }

    pub fn into_data(self) -> BoolShareVec {
        self.data
    }

    pub fn block(&self, i: usize) -> BoolShareVec {
        self.data.slice(i * self.block_lanes..(i + 1) * self.block_lanes)
    }

    /// Plaintext blocks; test and oracle helper.
    pub fn reconstruct_in_simulation(&self) -> Vec<Vec<u64>> {
        self.data
            .reconstruct_in_simulation()
            .chunks(self.block_lanes)
            .map(<[u64]>::to_vec)
            .collect()
    }
}

/// Secret permutation representation: entry `i` is where logical block `i`
/// landed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationRep {
    pub entries: BoolShareVec,
}

/// `out[perm[i]] = input[i]`, block-wise.
fn permute(perm: &[usize], input: &[u64], block: usize) -> Vec<u64> {
    let mut out = vec![0u64; input.len()];
    for (i, &to) in perm.iter().enumerate() {
        out[to * block..(to + 1) * block].copy_from_slice(&input[i * block..(i + 1) * block]);
    }
    out
}

/// `out[i] = input[perm[i]]`, the inverse of [`permute`].
fn permute_inv(perm: &[usize], input: &[u64], block: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(input.len());
    for &from in perm {
        out.extend_from_slice(&input[from * block..(from + 1) * block]);
    }
    out
}

fn xor3(a: &[u64], b: &[u64], c: Option<&[u64]>) -> Vec<u64> {
    match c {
        Some(c) => a.iter().zip(b).zip(c).map(|((x, y), z)| x ^ y ^ z).collect(),
        None => a.iter().zip(b).map(|(x, y)| x ^ y).collect(),
    }
}

/// Material a pair of servers derives from its shared seed for one call.
struct PairDraw {
    perm: Vec<usize>,
    z: Vec<u64>,
    z_index: Vec<u64>,
    out: Vec<u64>,
    out_index: Vec<u64>,
}

#[allow(clippy::too_many_arguments)]
fn draw(
    prf: &mut PartyPrf,
    side: Side,
    n: usize,
    lanes: usize,
    mask: u64,
    with_rep: bool,
    out_lanes: usize,
    out_index: bool,
) -> PairDraw {
    let perm = prf.permutation(side, n);
    let z = prf.words(side, Purpose::Shuffle, lanes, mask);
    let z_index = if with_rep {
        prf.words(side, Purpose::Shuffle, n, mask)
    } else {
        Vec::new()
    };
    let out = prf.words(side, Purpose::Shuffle, out_lanes, mask);
    let out_index = if with_rep && out_index {
        prf.words(side, Purpose::Shuffle, n, mask)
    } else {
        Vec::new()
    };
    PairDraw {
        perm,
        z,
        z_index,
        out,
        out_index,
    }
}

/// Both holders of the pair seed starting at `lo` draw the same material.
/// Returns `lo`'s copy; the partner's stream advances in step.
#[allow(clippy::too_many_arguments)]
fn pair_draw(
    session: &mut Session,
    lo: PartyId,
    n: usize,
    lanes: usize,
    mask: u64,
    with_rep: bool,
    out_lanes: usize,
    out_index: bool,
) -> PairDraw {
    let a = draw(session.party(lo).prf(), Side::Next, n, lanes, mask, with_rep, out_lanes, out_index);
    let b = draw(session.party(lo.next()).prf(), Side::Prev, n, lanes, mask, with_rep, out_lanes, out_index);
    debug_assert!(a.perm == b.perm && a.z == b.z && a.out == b.out);
    a
}

/// Oblivious shuffle of the blocks without a permutation representation.
/// Two rounds.
pub fn oblivious_shuffle(session: &mut Session, data: &BlockArray) -> Result<BlockArray> {
    Ok(run(session, data, false)?.0)
}

/// Shuffle plus secret permutation representation. Three rounds: one to
/// share `L` and two exchanges in the main protocol.
pub fn shuffle_mem(session: &mut Session, data: &BlockArray) -> Result<(BlockArray, PermutationRep)> {
    let (shuffled, rep) = run(session, data, true)?;
    Ok((shuffled, rep.expect("requested")))
}

/// Shares of `L = [0, n)`: `S_1` masks its zero-share with `L` and every
/// server forwards its share to its predecessor. One round.
pub fn build_ranging_array(session: &mut Session, n: usize, width: u32) -> Result<BoolShareVec> {
    let l: Vec<u64> = (0..n as u64).collect();
    Ok(session.share_input(PartyId::P1, &l, width)?)
}

fn run(session: &mut Session, data: &BlockArray, with_rep: bool) -> Result<(BlockArray, Option<PermutationRep>)> {
    let n = data.len();
    let bl = data.block_lanes();
    let lanes = data.data().lanes();
    let w = data.width();
    let mask = width_mask(w);
    let (p1, p2, p3) = (PartyId::P1, PartyId::P2, PartyId::P3);

    // step 0: ranging array
    let l_shares = if with_rep {
        Some(build_ranging_array(session, n, w)?)
    } else {
        None
    };

    // step 1: correlated randomness
    let r12 = pair_draw(session, p1, n, lanes, mask, with_rep, lanes, false);
    let r23 = pair_draw(session, p2, n, lanes, mask, with_rep, 0, true);
    let r31 = pair_draw(session, p3, n, lanes, mask, with_rep, lanes, true);
    // (2,3) only needs an index share; its data output slot is empty.
    let b_out = &r12.out;
    let a_out = &r31.out;
    let lc_out = &r23.out_index;
    let la_out = &r31.out_index;

    let d1 = data.data().part(p1);
    let d2 = data.data().part(p2);
    let d3 = data.data().part(p3);
    let (a, b, c) = (&d1.local, &d1.next, &d2.next);
    debug_assert_eq!(&d3.local, c);

    // step 2, first computations
    // S1
    let x1 = permute(&r12.perm, &xor3(a, b, Some(&r12.z)), bl);
    let x2 = permute(&r31.perm, &xor3(&x1, &r31.z, None), bl);
    // S2
    let y1 = permute(&r12.perm, &xor3(&d2.next, &r12.z, None), bl);

    session.send_words(p1, p2, &x2, w);
    session.send_words(p2, p3, &y1, w);

    let mut l_stage = None;
    if let Some(l) = &l_shares {
        let (la, lb) = (&l.part(p1).local, &l.part(p1).next);
        let lb2 = &l.part(p2).local;
        let (lc3, la3) = (&l.part(p3).local, &l.part(p3).next);
        debug_assert_eq!(la, la3);
        // S2
        let ly1 = permute_inv(&r23.perm, &xor3(lb2, &r23.z_index, None), 1);
        // S3
        let lx1 = permute_inv(&r23.perm, &xor3(lc3, la3, Some(&r23.z_index)), 1);
        let lx2 = permute_inv(&r31.perm, &xor3(&lx1, &r31.z_index, None), 1);
        session.send_words(p2, p1, &ly1, w);
        session.send_words(p3, p2, &lx2, w);
        l_stage = Some(lb.clone());
    }
    session.end_round();

    let x2_at_s2 = session.recv_words(p1, p2, lanes, w)?;
    let y1_at_s3 = session.recv_words(p2, p3, lanes, w)?;

    // S3
    let y2 = permute(&r31.perm, &xor3(&y1_at_s3, &r31.z, None), bl);
    let y3 = permute(&r23.perm, &xor3(&y2, &r23.z, None), bl);
    let c2 = xor3(&y3, a_out, None);
    // S2
    let x3 = permute(&r23.perm, &xor3(&x2_at_s2, &r23.z, None), bl);
    let c1 = xor3(&x3, b_out, None);

    session.send_words(p2, p3, &c1, w);
    session.send_words(p3, p2, &c2, w);

    let mut index_parts = None;
    if l_stage.is_some() {
        let ly1_at_s1 = session.recv_words(p2, p1, n, w)?;
        let lx2_at_s2 = session.recv_words(p3, p2, n, w)?;
        // S1
        let ly2 = permute_inv(&r31.perm, &xor3(&ly1_at_s1, &r31.z_index, None), 1);
        let ly3 = permute_inv(&r12.perm, &xor3(&ly2, &r12.z_index, None), 1);
        let lb1 = xor3(&ly3, la_out, None);
        // S2
        let lx3 = permute_inv(&r12.perm, &xor3(&lx2_at_s2, &r12.z_index, None), 1);
        let lb2 = xor3(&lx3, lc_out, None);
        session.send_words(p1, p2, &lb1, w);
        session.send_words(p2, p1, &lb2, w);
        index_parts = Some((lb1, lb2));
    }
    session.end_round();

    let c1_at_s3 = session.recv_words(p2, p3, lanes, w)?;
    let c2_at_s2 = session.recv_words(p3, p2, lanes, w)?;
    let c_at_s2 = xor3(&c1, &c2_at_s2, None);
    let c_at_s3 = xor3(&c1_at_s3, &c2, None);
    debug_assert_eq!(c_at_s2, c_at_s3);

    let shuffled = BoolShareVec::from_parts(
        w,
        [
            ReplicatedPair { local: a_out.clone(), next: b_out.clone() },
            ReplicatedPair { local: b_out.clone(), next: c_at_s2 },
            ReplicatedPair { local: c_at_s3, next: a_out.clone() },
        ],
    )?;

    let rep = match index_parts {
        Some((lb1, lb2)) => {
            let lb2_at_s1 = session.recv_words(p2, p1, n, w)?;
            let lb1_at_s2 = session.recv_words(p1, p2, n, w)?;
            let lb_at_s1 = xor3(&lb1, &lb2_at_s1, None);
            let lb_at_s2 = xor3(&lb1_at_s2, &lb2, None);
            debug_assert_eq!(lb_at_s1, lb_at_s2);
            Some(PermutationRep {
                entries: BoolShareVec::from_parts(
                    w,
                    [
                        ReplicatedPair { local: la_out.clone(), next: lb_at_s1 },
                        ReplicatedPair { local: lb_at_s2, next: lc_out.clone() },
                        ReplicatedPair { local: lc_out.clone(), next: la_out.clone() },
                    ],
                )?,
            })
        }
        None => None,
    };
    Ok((BlockArray::new(shuffled, bl)?, rep))
}
