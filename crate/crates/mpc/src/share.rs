//! Replicated share vectors.
//!
//! The runtime simulates all three servers in one process, so a share vector
//! value carries the replicated pair held by each of them. Server `S_i`'s view
//! is `parts[i]`, and only that view is ever touched by the code paths that
//! play `S_i`'s role in a protocol.

use std::ops::Range;

use crate::error::{MpcError, Result};
use crate::PartyId;

/// A server's two shares `(x_i, x_{i+1})` of a lane vector.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ReplicatedPair {
    pub local: Vec<u64>,
    pub next: Vec<u64>,
}

impl ReplicatedPair {
    fn map(&self, f: &impl Fn(&[u64]) -> Vec<u64>) -> ReplicatedPair {
        ReplicatedPair {
            local: f(&self.local),
            next: f(&self.next),
        }
    }
}

pub fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

pub(crate) fn check_width(width: u32) -> Result<()> {
    if (1..=64).contains(&width) {
        Ok(())
    } else {
        Err(MpcError::BadWidth(width))
    }
}

macro_rules! share_common {
    ($ty:ident) => {
        impl $ty {
            /// Builds a share vector from the three servers' pairs.
            pub fn from_parts(width: u32, parts: [ReplicatedPair; 3]) -> Result<Self> {
                check_width(width)?;
                let lanes = parts[0].local.len();
                for p in &parts {
                    if p.local.len() != lanes || p.next.len() != lanes {
                        return Err(MpcError::Malformed("ragged replicated pair"));
                    }
                }
                Ok($ty { width, parts })
            }

            pub fn lanes(&self) -> usize {
                self.parts[0].local.len()
            }

            pub fn is_empty(&self) -> bool {
                self.lanes() == 0
            }

            pub fn width(&self) -> u32 {
                self.width
            }

            pub fn mask(&self) -> u64 {
                width_mask(self.width)
            }

            /// The pair held by server `p`.
            pub fn part(&self, p: PartyId) -> &ReplicatedPair {
                &self.parts[p.index()]
            }

            pub fn into_parts(self) -> [ReplicatedPair; 3] {
                self.parts
            }

            /// A vector with no lanes.
            pub fn empty(width: u32) -> Self {
                $ty {
                    width,
                    parts: Default::default(),
                }
            }

            /// Applies the same lane-rearranging map to every share word
            /// vector. Valid for any map that commutes with the share
            /// combination (selection, reordering, repetition).
            pub fn rearrange(&self, f: impl Fn(&[u64]) -> Vec<u64>) -> Self {
                $ty {
                    width: self.width,
                    parts: std::array::from_fn(|i| self.parts[i].map(&f)),
                }
            }

            pub fn slice(&self, range: Range<usize>) -> Self {
                self.rearrange(|v| v[range.clone()].to_vec())
            }

            /// Lanes picked by public indices, `out[j] = self[indices[j]]`.
            pub fn gather(&self, indices: &[usize]) -> Self {
                self.rearrange(|v| indices.iter().map(|&i| v[i]).collect())
            }

            /// Each lane repeated `times` times in place.
            pub fn repeat_each(&self, times: usize) -> Self {
                self.rearrange(|v| {
                    v.iter()
                        .flat_map(|&w| std::iter::repeat(w).take(times))
                        .collect()
                })
            }

            /// The whole vector repeated `times` times.
            pub fn tile(&self, times: usize) -> Self {
                self.rearrange(|v| {
                    let mut out = Vec::with_capacity(v.len() * times);
                    for _ in 0..times {
                        out.extend_from_slice(v);
                    }
                    out
                })
            }

            /// Lane-wise concatenation of equally wide vectors.
            pub fn concat(items: &[&Self]) -> Result<Self> {
                let Some(first) = items.first() else {
                    return Err(MpcError::Malformed("empty concat"));
                };
                let width = first.width;
                let mut parts: [ReplicatedPair; 3] = Default::default();
                for it in items {
                    if it.width != width {
                        return Err(MpcError::ShapeMismatch {
                            left: first.lanes(),
                            left_width: width,
                            right: it.lanes(),
                            right_width: it.width,
                        });
                    }
                    for (dst, src) in parts.iter_mut().zip(&it.parts) {
                        dst.local.extend_from_slice(&src.local);
                        dst.next.extend_from_slice(&src.next);
                    }
                }
                Ok($ty { width, parts })
            }

            /// Checks that `S_i.next == S_{i+1}.local` for every server.
            pub fn check_consistency(&self) -> Result<()> {
                for p in PartyId::ALL {
                    if self.parts[p.index()].next != self.parts[p.next().index()].local {
                        return Err(MpcError::Integrity(p));
                    }
                }
                Ok(())
            }

            pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
                if self.lanes() != other.lanes() || self.width != other.width {
                    Err(MpcError::ShapeMismatch {
                        left: self.lanes(),
                        left_width: self.width,
                        right: other.lanes(),
                        right_width: other.width,
                    })
                } else {
                    Ok(())
                }
            }

            pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
                self.same_shape(other)?;
                let mask = self.mask();
                let parts = std::array::from_fn(|i| {
                    let (a, b) = (&self.parts[i], &other.parts[i]);
                    ReplicatedPair {
                        local: a.local.iter().zip(&b.local).map(|(&x, &y)| f(x, y) & mask).collect(),
                        next: a.next.iter().zip(&b.next).map(|(&x, &y)| f(x, y) & mask).collect(),
                    }
                });
                Ok($ty { width: self.width, parts })
            }

            /// Sets the first share `x_1` to `values` and the others to zero.
            /// This is a valid (non-random) sharing of a public vector.
            pub fn public(values: &[u64], width: u32) -> Self {
                let mask = width_mask(width);
                let v: Vec<u64> = values.iter().map(|x| x & mask).collect();
                let z = vec![0u64; v.len()];
                $ty {
                    width,
                    parts: [
                        ReplicatedPair { local: v.clone(), next: z.clone() },
                        ReplicatedPair { local: z.clone(), next: z },
                        ReplicatedPair { local: vec![0; v.len()], next: v },
                    ],
                }
            }

            /// Reconstructs the plaintext directly from the simulated shares,
            /// without any messages. For tests and oracles only; protocol code
            /// opens values through the session.
            pub fn reconstruct_in_simulation(&self) -> Vec<u64> {
                let [a, b, c] = &self.parts;
                let mask = self.mask();
                (0..self.lanes())
                    .map(|j| Self::combine(a.local[j], b.local[j], c.local[j]) & mask)
                    .collect()
            }
        }
    };
}

/// XOR-shared vector of `width`-bit lanes: `x = x_1 ^ x_2 ^ x_3`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolShareVec {
    width: u32,
    parts: [ReplicatedPair; 3],
}

share_common!(BoolShareVec);

impl BoolShareVec {
    pub(crate) fn combine(a: u64, b: u64, c: u64) -> u64 {
        a ^ b ^ c
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a ^ b)
    }

    /// XOR with a public vector (only `x_1` changes).
    pub fn xor_public(&self, values: &[u64]) -> Result<Self> {
        self.xor(&Self::public(values, self.width))
    }

    pub fn not(&self) -> Self {
        let ones = vec![self.mask(); self.lanes()];
        self.xor_public(&ones).expect("same shape")
    }

    /// AND with a public mask, a local operation.
    pub fn and_public(&self, values: &[u64]) -> Result<Self> {
        if values.len() != self.lanes() {
            return Err(MpcError::ShapeMismatch {
                left: self.lanes(),
                left_width: self.width,
                right: values.len(),
                right_width: self.width,
            });
        }
        Ok(self.rearrange(|v| v.iter().zip(values).map(|(w, m)| w & m).collect()))
    }

    /// Logical right shift of every lane.
    pub fn shr(&self, bits: u32) -> Self {
        self.rearrange(|v| v.iter().map(|w| w >> bits).collect())
    }

    /// Left shift of every lane, truncated to the lane width.
    pub fn shl(&self, bits: u32) -> Self {
        let mask = self.mask();
        self.rearrange(|v| v.iter().map(|w| (w << bits) & mask).collect())
    }

    /// Keeps the low `bits` bits of every lane.
    pub fn low_bits(&self, bits: u32) -> Self {
        let m = width_mask(bits);
        self.rearrange(|v| v.iter().map(|w| w & m).collect())
    }

    /// Reinterprets the lanes at another width, masking if narrower.
    pub fn with_width(&self, width: u32) -> Self {
        let m = width_mask(width);
        let mut out = self.rearrange(|v| v.iter().map(|w| w & m).collect());
        out.width = width;
        out
    }

    /// Bit 0 of each lane as a secret bit.
    pub fn lsb(&self) -> SecretBit {
        SecretBit(self.with_width(1))
    }
}

/// Additively shared vector: `x = x_1 + x_2 + x_3 mod 2^width`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArithShareVec {
    width: u32,
    parts: [ReplicatedPair; 3],
}

share_common!(ArithShareVec);

impl ArithShareVec {
    pub(crate) fn combine(a: u64, b: u64, c: u64) -> u64 {
        a.wrapping_add(b).wrapping_add(c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, u64::wrapping_add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, u64::wrapping_sub)
    }

    pub fn add_public(&self, values: &[u64]) -> Result<Self> {
        self.add(&Self::public(values, self.width))
    }

    /// Multiplication by a public scalar, a local operation.
    pub fn scale(&self, k: u64) -> Self {
        let mask = self.mask();
        self.rearrange(|v| v.iter().map(|w| w.wrapping_mul(k) & mask).collect())
    }

    pub fn neg(&self) -> Self {
        let mask = self.mask();
        self.rearrange(|v| v.iter().map(|w| w.wrapping_neg() & mask).collect())
    }

    /// Sum of all lanes as a one-lane vector, by pairwise halving.
    pub fn sum(&self) -> Self {
        let mut cur = self.clone();
        if cur.is_empty() {
            return Self::public(&[0], self.width);
        }
        while cur.lanes() > 1 {
            if cur.lanes() % 2 == 1 {
                let zero = Self::public(&[0], self.width);
                cur = Self::concat(&[&cur, &zero]).expect("same width");
            }
            let half = cur.lanes() / 2;
            cur = cur.slice(0..half).add(&cur.slice(half..2 * half)).expect("same shape");
        }
        cur
    }

    /// Sums consecutive groups of `group` lanes.
    pub fn sum_groups(&self, group: usize) -> Self {
        let mask = self.mask();
        self.rearrange(|v| {
            v.chunks(group)
                .map(|c| c.iter().fold(0u64, |a, &b| a.wrapping_add(b)) & mask)
                .collect()
        })
    }
}

/// A boolean-shared vector whose lanes are single bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretBit(pub(crate) BoolShareVec);

impl SecretBit {
    pub fn from_vec(v: BoolShareVec) -> Result<Self> {
        if v.width() != 1 {
            return Err(MpcError::BadWidth(v.width()));
        }
        Ok(SecretBit(v))
    }

    pub fn public(bits: &[bool]) -> Self {
        let words: Vec<u64> = bits.iter().map(|&b| b as u64).collect();
        SecretBit(BoolShareVec::public(&words, 1))
    }

    pub fn lanes(&self) -> usize {
        self.0.lanes()
    }

    pub fn as_vec(&self) -> &BoolShareVec {
        &self.0
    }

    pub fn into_vec(self) -> BoolShareVec {
        self.0
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.0.xor(&other.0).map(SecretBit)
    }

    pub fn not(&self) -> Self {
        SecretBit(self.0.not())
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        SecretBit(self.0.slice(range))
    }

    pub fn gather(&self, indices: &[usize]) -> Self {
        SecretBit(self.0.gather(indices))
    }

    pub fn concat(items: &[&Self]) -> Result<Self> {
        let inner: Vec<&BoolShareVec> = items.iter().map(|b| &b.0).collect();
        BoolShareVec::concat(&inner).map(SecretBit)
    }

    /// Sign-extends every bit across a `width`-bit lane (0 or all ones).
    /// Local: the XOR of extended share bits is the extended secret bit.
    pub fn extend(&self, width: u32) -> BoolShareVec {
        let mask = width_mask(width);
        self.0
            .rearrange(|v| v.iter().map(|&b| if b & 1 == 1 { mask } else { 0 }).collect())
            .with_width_unmasked(width)
    }

    pub fn reconstruct_in_simulation(&self) -> Vec<bool> {
        self.0.reconstruct_in_simulation().into_iter().map(|b| b == 1).collect()
    }
}

impl BoolShareVec {
    fn with_width_unmasked(mut self, width: u32) -> Self {
        self.width = width;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn public_sharing_is_consistent() {
        let v = BoolShareVec::public(&[5, 7], 8);
        v.check_consistency().unwrap();
        assert_eq!(v.reconstruct_in_simulation(), vec![5, 7]);
        let a = ArithShareVec::public(&[300], 8);
        assert_eq!(a.reconstruct_in_simulation(), vec![300 & 0xff]);
    }

    #[test]
    fn local_linear_ops() {
        let v = BoolShareVec::public(&[0b1011, 0b0110], 4);
        assert_eq!(v.not().reconstruct_in_simulation(), vec![0b0100, 0b1001]);
        assert_eq!(v.shr(1).reconstruct_in_simulation(), vec![0b101, 0b011]);
        assert_eq!(v.shl(1).reconstruct_in_simulation(), vec![0b0110, 0b1100]);
        assert_eq!(
            v.and_public(&[0b0011, 0b1111]).unwrap().reconstruct_in_simulation(),
            vec![0b0011, 0b0110]
        );
        v.not().check_consistency().unwrap();
    }

    #[test]
    fn extend_bits() {
        let b = SecretBit::public(&[true, false]);
        assert_eq!(b.extend(8).reconstruct_in_simulation(), vec![0xff, 0]);
    }

    #[test]
    fn arith_sum_odd_lengths() {
        let a = ArithShareVec::public(&[1, 2, 3, 4, 5], 64);
        assert_eq!(a.sum().reconstruct_in_simulation(), vec![15]);
        assert_eq!(a.sum_groups(2).reconstruct_in_simulation(), vec![3, 7, 5]);
        assert_eq!(ArithShareVec::empty(64).sum().reconstruct_in_simulation(), vec![0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = BoolShareVec::public(&[1, 2], 8);
        let b = BoolShareVec::public(&[1], 8);
        assert!(matches!(a.xor(&b), Err(MpcError::ShapeMismatch { .. })));
    }
}
