//! Boolean circuits and share conversions built from XOR and AND gates.
//!
//! All gates are vectorized: one call processes every lane at once and its
//! round count depends only on the lane width.

use crate::error::{MpcError, Result};
use crate::session::Session;
use crate::share::{width_mask, ArithShareVec, BoolShareVec, ReplicatedPair, SecretBit};
use crate::PartyId;

/// Mask selecting bit positions that are multiples of `step`.
fn stride_mask(step: u32) -> u64 {
    (0..64).step_by(step as usize).fold(0u64, |m, b| m | (1 << b))
}

impl Session {
    pub fn or(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<BoolShareVec> {
        let both = self.and(x, y)?;
        x.xor(y)?.xor(&both)
    }

    pub fn or_bits(&mut self, x: &SecretBit, y: &SecretBit) -> Result<SecretBit> {
        Ok(SecretBit(self.or(&x.0, &y.0)?))
    }

    pub fn and_bits(&mut self, x: &SecretBit, y: &SecretBit) -> Result<SecretBit> {
        Ok(SecretBit(self.and(&x.0, &y.0)?))
    }

    /// Lane-wise equality. The XNOR of the operands is folded with an AND
    /// tree over halves of the lane, `ceil(log2 w)` rounds.
    pub fn eq(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<SecretBit> {
        let mut v = x.xor(y)?.not();
        let mut span = x.width();
        while span > 1 {
            let low = span / 2;
            let high = span - low;
            let lo = v.low_bits(low).xor_public(&vec![width_mask(high) & !width_mask(low); v.lanes()])?;
            let hi = v.shr(low).low_bits(high);
            v = self.and(&lo.with_width(high), &hi.with_width(high))?;
            span = high;
        }
        Ok(v.lsb())
    }

    pub fn neq(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<SecretBit> {
        Ok(self.eq(x, y)?.not())
    }

    /// Unsigned `x > y` by a log-depth prefix combination of per-bit
    /// (greater, equal) flags.
    pub fn gt(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<SecretBit> {
        x.same_shape(y)?;
        let w = x.width().next_power_of_two();
        let (x, y) = (x.with_width(w), y.with_width(w));
        // Bits above the original width are zero in both operands, so they
        // compare as equal and do not disturb the prefix.
        let mut greater = self.and(&x, &y.not())?;
        let mut equal = x.xor(&y)?.not();
        let mut span = 1;
        while span < w {
            let reps = stride_mask(2 * span);
            let reps_vec = vec![reps & width_mask(w); x.lanes()];
            let hi_g = greater.shr(span).and_public(&reps_vec)?;
            let hi_e = equal.shr(span).and_public(&reps_vec)?;
            let lo_g = greater.and_public(&reps_vec)?;
            let lo_e = equal.and_public(&reps_vec)?;
            let mut out = self.and_batch(&[(&hi_e, &lo_g), (&hi_e, &lo_e)])?;
            equal = out.pop().expect("two outputs");
            greater = hi_g.xor(&out.pop().expect("two outputs"))?;
            span *= 2;
        }
        Ok(greater.lsb())
    }

    pub fn lt(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<SecretBit> {
        self.gt(y, x)
    }

    pub fn ge(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<SecretBit> {
        Ok(self.lt(x, y)?.not())
    }

    /// `bit ? value : 0`, lane-wise. One round.
    pub fn mask_select(&mut self, bit: &SecretBit, value: &BoolShareVec) -> Result<BoolShareVec> {
        self.and(&bit.extend(value.width()), value)
    }

    /// `cond ? a : b`, lane-wise. One round.
    pub fn mux(&mut self, cond: &SecretBit, a: &BoolShareVec, b: &BoolShareVec) -> Result<BoolShareVec> {
        let diff = a.xor(b)?;
        b.xor(&self.mask_select(cond, &diff)?)
    }

    /// Selects the row of `data` (laid out as `onehot.lanes()` rows of equal
    /// length) at the single hot position. One batched AND, then a local XOR
    /// fold.
    pub fn oblivious_dot(&mut self, data: &BoolShareVec, onehot: &SecretBit) -> Result<BoolShareVec> {
        let rows = onehot.lanes();
        if rows == 0 || !data.lanes().is_multiple_of(rows) {
            return Err(MpcError::ShapeMismatch {
                left: data.lanes(),
                left_width: data.width(),
                right: rows,
                right_width: 1,
            });
        }
        let cols = data.lanes() / rows;
        let selector = onehot.extend(data.width()).repeat_each(cols);
        let masked = self.and(&selector, data)?;
        Ok(masked.rearrange(|v| {
            let mut acc = vec![0u64; cols];
            for row in v.chunks(cols) {
                for (a, w) in acc.iter_mut().zip(row) {
                    *a ^= w;
                }
            }
            acc
        }))
    }

    /// OR over consecutive groups of `group` lanes, one output lane per
    /// group; `ceil(log2 group)` rounds.
    pub fn or_fold_groups(&mut self, bits: &SecretBit, group: usize) -> Result<SecretBit> {
        self.fold_groups(bits, group, false)
    }

    pub fn or_fold(&mut self, bits: &SecretBit) -> Result<SecretBit> {
        let n = bits.lanes().max(1);
        self.or_fold_groups(bits, n)
    }

    pub fn and_fold(&mut self, bits: &SecretBit) -> Result<SecretBit> {
        let n = bits.lanes().max(1);
        self.fold_groups(bits, n, true)
    }

    fn fold_groups(&mut self, bits: &SecretBit, group: usize, conjunctive: bool) -> Result<SecretBit> {
        if group == 0 || !bits.lanes().is_multiple_of(group) && bits.lanes() != 0 {
            return Err(MpcError::Malformed("fold group does not divide lanes"));
        }
        let neutral = conjunctive as u64;
        if bits.lanes() == 0 {
            return Ok(SecretBit::public(&[conjunctive]));
        }
        let groups = bits.lanes() / group;
        let mut cur = bits.0.clone();
        let mut len = group;
        while len > 1 {
            let half = len.div_ceil(2);
            // left[g][j] = cur[g][j], right[g][j] = cur[g][half + j] or neutral
            let mut left_idx = Vec::with_capacity(groups * half);
            let mut right_idx = Vec::with_capacity(groups * half);
            let mut right_pad = Vec::with_capacity(groups * half);
            for g in 0..groups {
                for j in 0..half {
                    left_idx.push(g * len + j);
                    if half + j < len {
                        right_idx.push(g * len + half + j);
                        right_pad.push(false);
                    } else {
                        right_idx.push(g * len);
                        right_pad.push(true);
                    }
                }
            }
            let left = cur.gather(&left_idx);
            let pads: Vec<u64> = right_pad.iter().map(|&p| if p { 0 } else { 1 }).collect();
            let fill: Vec<u64> = right_pad.iter().map(|&p| if p { neutral } else { 0 }).collect();
            let right = cur.gather(&right_idx).and_public(&pads)?.xor_public(&fill)?;
            cur = if conjunctive {
                self.and(&left, &right)?
            } else {
                self.or(&left, &right)?
            };
            len = half;
        }
        Ok(SecretBit(cur))
    }

    /// Boolean bit sharing to additive sharing mod `2^width`, computing
    /// `b_1 ^ b_2 ^ b_3` arithmetically with `u ^ v = u + v - 2uv`.
    /// Two rounds.
    pub fn bit_to_arith(&mut self, bits: &SecretBit, width: u32) -> Result<ArithShareVec> {
        let terms = share_terms(&bits.0, width, ArithShareVec::from_parts)?;
        let [a, b, c] = terms;
        let ab = self.mul(&a, &b)?;
        let t = a.add(&b)?.sub(&ab.scale(2))?;
        let tc = self.mul(&t, &c)?;
        t.add(&c)?.sub(&tc.scale(2))
    }

    /// Additive sharing to boolean sharing of the same `w`-bit value: a
    /// carry-save layer reduces the three additive shares to two, and a
    /// Kogge-Stone prefix adder sums them.
    pub fn arith_to_bool(&mut self, x: &ArithShareVec) -> Result<BoolShareVec> {
        let w = x.width();
        let [a, b, c] = share_terms(x, w, BoolShareVec::from_parts)?;
        let ab = a.xor(&b)?;
        let mut m = self.and_batch(&[(&a, &b), (&c, &ab)])?;
        let carry = m.pop().expect("two").xor(&m.pop().expect("two"))?.shl(1);
        let sum = ab.xor(&c)?;

        let propagate = sum.xor(&carry)?;
        let mut g = self.and(&sum, &carry)?;
        let mut p = propagate.clone();
        let mut d = 1;
        while d < w {
            let g_shift = g.shl(d);
            if 2 * d < w {
                let p_shift = p.shl(d);
                let mut out = self.and_batch(&[(&p, &g_shift), (&p, &p_shift)])?;
                p = out.pop().expect("two");
                g = g.xor(&out.pop().expect("two"))?;
            } else {
                g = g.xor(&self.and(&p, &g_shift)?)?;
            }
            d *= 2;
        }
        propagate.xor(&g.shl(1))
    }
}

/// Splits a replicated sharing into its three component shares, each as a
/// sharing (of the other kind if requested) in which only that component is
/// non-zero. Server `S_i` knows `x_i` and `x_{i+1}`, so each term is formed
/// locally by its two holders.
fn share_terms<S>(
    x: &impl SharedWords,
    width: u32,
    build: impl Fn(u32, [ReplicatedPair; 3]) -> Result<S>,
) -> Result<[S; 3]> {
    let mask = width_mask(width);
    let lanes = x.lanes_count();
    let mut out = Vec::with_capacity(3);
    for k in PartyId::ALL {
        let mut parts: [ReplicatedPair; 3] = std::array::from_fn(|_| ReplicatedPair {
            local: vec![0; lanes],
            next: vec![0; lanes],
        });
        // x_k is S_k's local share and S_{k-1}'s next share.
        parts[k.index()].local = x.pair(k).local.iter().map(|w| w & mask).collect();
        parts[k.prev().index()].next = x.pair(k.prev()).next.iter().map(|w| w & mask).collect();
        out.push(build(width, parts)?);
    }
    Ok(out.try_into().ok().expect("three terms"))
}

trait SharedWords {
    fn lanes_count(&self) -> usize;
    fn pair(&self, p: PartyId) -> &ReplicatedPair;
}

impl SharedWords for BoolShareVec {
    fn lanes_count(&self) -> usize {
        self.lanes()
    }
    fn pair(&self, p: PartyId) -> &ReplicatedPair {
        self.part(p)
    }
}

impl SharedWords for ArithShareVec {
    fn lanes_count(&self) -> usize {
        self.lanes()
    }
    fn pair(&self, p: PartyId) -> &ReplicatedPair {
        self.part(p)
    }
}
