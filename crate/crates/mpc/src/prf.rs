//! Correlated randomness from pairwise seeds.
//!
//! Every pair of servers `(S_i, S_{i+1})` shares a 32-byte seed. Each seed
//! keys a ChaCha20 stream cipher, used as a PRF in counter mode; distinct
//! purposes use distinct ChaCha streams under the same key so that their
//! counters advance independently. Both holders of a seed draw the same
//! amount of material in the same order, which keeps their counters in step.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::PartyId;

/// Derives a labelled 32-byte seed from a master seed.
pub fn derive_seed(master: &[u8], label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"goram/seed/v1");
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(master);
    h.finalize().into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Zero-sharings used to re-randomize products and inputs.
    Zero = 0,
    /// Shuffle permutations and masks.
    Shuffle = 1,
}

const PURPOSES: usize = 2;

/// The three pairwise seeds, as produced by a trusted setup.
///
/// `pair_seeds[i]` is shared by the servers with indices `i` and `i + 1`
/// (so index 0 is `s_12`, 1 is `s_23`, 2 is `s_31`).
#[derive(Clone)]
pub struct PrfSetup {
    pair_seeds: [[u8; 32]; 3],
}

impl PrfSetup {
    pub fn from_master(master: &[u8]) -> Self {
        PrfSetup {
            pair_seeds: [
                derive_seed(master, "pair/12"),
                derive_seed(master, "pair/23"),
                derive_seed(master, "pair/31"),
            ],
        }
    }

    /// Hands party `p` exactly the two seeds it is entitled to.
    pub fn party_prf(&self, p: PartyId) -> PartyPrf {
        PartyPrf {
            with_next: streams(&self.pair_seeds[p.index()]),
            with_prev: streams(&self.pair_seeds[p.prev().index()]),
        }
    }
}

fn streams(seed: &[u8; 32]) -> [ChaCha20Rng; PURPOSES] {
    std::array::from_fn(|purpose| {
        let mut rng = ChaCha20Rng::from_seed(*seed);
        rng.set_stream(purpose as u64);
        rng
    })
}

/// Which of a party's two pairwise seeds to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Seed shared with the successor `S_{i+1}`.
    Next,
    /// Seed shared with the predecessor `S_{i-1}`.
    Prev,
}

#[derive(Clone)]
pub struct PartyPrf {
    with_next: [ChaCha20Rng; PURPOSES],
    with_prev: [ChaCha20Rng; PURPOSES],
}

impl PartyPrf {
    pub fn rng(&mut self, side: Side, purpose: Purpose) -> &mut ChaCha20Rng {
        match side {
            Side::Next => &mut self.with_next[purpose as usize],
            Side::Prev => &mut self.with_prev[purpose as usize],
        }
    }

    pub fn words(&mut self, side: Side, purpose: Purpose, n: usize, mask: u64) -> Vec<u64> {
        let rng = self.rng(side, purpose);
        (0..n).map(|_| rng.next_u64() & mask).collect()
    }

    /// A uniformly random permutation of `0..n` (Fisher-Yates), as
    /// `perm[i] = destination of element i`.
    pub fn permutation(&mut self, side: Side, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(self.rng(side, Purpose::Shuffle));
        perm
    }

    /// Position of the given stream, for checking that both holders agree.
    pub fn counter(&self, side: Side, purpose: Purpose) -> u128 {
        match side {
            Side::Next => self.with_next[purpose as usize].get_word_pos(),
            Side::Prev => self.with_prev[purpose as usize].get_word_pos(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbours_share_streams() {
        let setup = PrfSetup::from_master(b"seed");
        let mut p1 = setup.party_prf(PartyId::P1);
        let mut p2 = setup.party_prf(PartyId::P2);
        let mut p3 = setup.party_prf(PartyId::P3);
        let a = p1.words(Side::Next, Purpose::Zero, 4, u64::MAX);
        let b = p2.words(Side::Prev, Purpose::Zero, 4, u64::MAX);
        assert_eq!(a, b);
        let c = p3.words(Side::Next, Purpose::Zero, 4, u64::MAX);
        let d = p1.words(Side::Prev, Purpose::Zero, 4, u64::MAX);
        assert_eq!(c, d);
        assert_ne!(a, c);
        assert_eq!(
            p1.counter(Side::Next, Purpose::Zero),
            p2.counter(Side::Prev, Purpose::Zero)
        );
    }

    #[test]
    fn purposes_are_independent() {
        let setup = PrfSetup::from_master(b"seed");
        let mut p1 = setup.party_prf(PartyId::P1);
        let z = p1.words(Side::Next, Purpose::Zero, 2, u64::MAX);
        let s = p1.words(Side::Next, Purpose::Shuffle, 2, u64::MAX);
        assert_ne!(z, s);
    }

    #[test]
    fn permutation_is_bijection() {
        let setup = PrfSetup::from_master(b"x");
        let mut p = setup.party_prf(PartyId::P2);
        let mut perm = p.permutation(Side::Next, 50);
        perm.sort_unstable();
        assert_eq!(perm, (0..50).collect::<Vec<_>>());
    }
}
