//! A lockstep protocol session over the three simulated servers.
//!
//! Every protocol step runs the local computation of all three servers,
//! pushes their messages through the transport, and only then lets the
//! receivers continue. Each server's code reads its own replicated pair and
//! the messages addressed to it, nothing else.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{MpcError, Result};
use crate::prf::{derive_seed, PartyPrf, PrfSetup, Purpose, Side};
use crate::share::{check_width, width_mask, ArithShareVec, BoolShareVec, ReplicatedPair};
use crate::transport::{pack_words, unpack_words, Endpoint, InProcTransport, Metrics, Transport};
use crate::PartyId;

/// One server's protocol state.
pub struct PartyRuntime {
    pub id: PartyId,
    prf: PartyPrf,
}

impl PartyRuntime {
    pub fn prf(&mut self) -> &mut PartyPrf {
        &mut self.prf
    }
}

pub struct Session {
    parties: [PartyRuntime; 3],
    client_rng: ChaCha20Rng,
    transport: Box<dyn Transport>,
}

/// Where an opened value is delivered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RevealTo {
    All,
    Party(PartyId),
    Client,
}

impl Session {
    /// Sets up three servers with pairwise seeds derived from `master_seed`
    /// and connects them over an in-process transport.
    pub fn setup(master_seed: &[u8]) -> Session {
        Session::with_transport(master_seed, Box::new(InProcTransport::new()))
    }

    pub fn with_transport(master_seed: &[u8], transport: Box<dyn Transport>) -> Session {
        let setup = PrfSetup::from_master(master_seed);
        Session {
            parties: PartyId::ALL.map(|id| PartyRuntime {
                id,
                prf: setup.party_prf(id),
            }),
            client_rng: ChaCha20Rng::from_seed(derive_seed(master_seed, "client")),
            transport,
        }
    }

    /// An independent session whose seeds are derived from `master_seed` and
    /// `label`; used to give each partition slice its own session.
    pub fn labelled(master_seed: &[u8], label: &str) -> Session {
        Session::setup(&derive_seed(master_seed, label))
    }

    pub fn party(&mut self, p: PartyId) -> &mut PartyRuntime {
        &mut self.parties[p.index()]
    }

    pub fn metrics_snapshot(&self) -> Metrics {
        self.transport.metrics()
    }

    pub fn transcript_digest(&self) -> [u8; 32] {
        self.transport.transcript_digest()
    }

    // ---- raw messaging, for protocols built outside this crate ----

    pub fn send_words(&mut self, from: PartyId, to: PartyId, words: &[u64], bits: u32) {
        self.transport
            .send(Endpoint::Server(from), Endpoint::Server(to), pack_words(words, bits));
    }

    pub fn recv_words(&mut self, from: PartyId, to: PartyId, count: usize, bits: u32) -> Result<Vec<u64>> {
        let bytes = self.transport.recv(Endpoint::Server(from), Endpoint::Server(to))?;
        unpack_words(&bytes, count, bits)
    }

    pub fn end_round(&mut self) {
        self.transport.end_round();
    }

    // ---- correlated randomness ----

    /// Fresh XOR zero-sharing: `Z_1 ^ Z_2 ^ Z_3 = 0`, no communication.
    pub fn zero_sharing(&mut self, lanes: usize, width: u32) -> [Vec<u64>; 3] {
        let mask = width_mask(width);
        std::array::from_fn(|i| {
            let prf = &mut self.parties[i].prf;
            let a = prf.words(Side::Next, Purpose::Zero, lanes, mask);
            let b = prf.words(Side::Prev, Purpose::Zero, lanes, mask);
            a.iter().zip(&b).map(|(x, y)| x ^ y).collect()
        })
    }

    /// Fresh additive zero-sharing: `Z_1 + Z_2 + Z_3 = 0 mod 2^width`.
    pub fn zero_sharing_arith(&mut self, lanes: usize, width: u32) -> [Vec<u64>; 3] {
        let mask = width_mask(width);
        std::array::from_fn(|i| {
            let prf = &mut self.parties[i].prf;
            let a = prf.words(Side::Next, Purpose::Zero, lanes, mask);
            let b = prf.words(Side::Prev, Purpose::Zero, lanes, mask);
            a.iter().zip(&b).map(|(x, y)| x.wrapping_sub(*y) & mask).collect()
        })
    }

    /// Each server sends its share `z_i` to its predecessor, turning three
    /// additive or XOR shares into replicated pairs. One round.
    pub fn reshare(&mut self, z: [Vec<u64>; 3], bits: u32) -> Result<[ReplicatedPair; 3]> {
        let lanes = z[0].len();
        for p in PartyId::ALL {
            self.send_words(p, p.prev(), &z[p.index()], bits);
        }
        let mut out: [ReplicatedPair; 3] = Default::default();
        let mut z = z;
        for p in PartyId::ALL {
            let next = self.recv_words(p.next(), p, lanes, bits)?;
            out[p.index()] = ReplicatedPair {
                local: std::mem::take(&mut z[p.index()]),
                next,
            };
        }
        self.end_round();
        Ok(out)
    }

    // ---- inputs ----

    fn check_fits(values: &[u64], width: u32) -> Result<()> {
        check_width(width)?;
        let mask = width_mask(width);
        match values.iter().find(|&&v| v & !mask != 0) {
            Some(&value) => Err(MpcError::WidthOverflow { value, width }),
            None => Ok(()),
        }
    }

    /// Server `owner` secret-shares its private `values`. The owner masks its
    /// zero-share with the input and every server forwards its share to its
    /// predecessor; one round.
    pub fn share_input(&mut self, owner: PartyId, values: &[u64], width: u32) -> Result<BoolShareVec> {
        Self::check_fits(values, width)?;
        let mut z = self.zero_sharing(values.len(), width);
        for (w, v) in z[owner.index()].iter_mut().zip(values) {
            *w ^= v;
        }
        let parts = self.reshare(z, width)?;
        BoolShareVec::from_parts(width, parts)
    }

    pub fn share_input_arith(&mut self, owner: PartyId, values: &[u64], width: u32) -> Result<ArithShareVec> {
        Self::check_fits(values, width)?;
        let mut z = self.zero_sharing_arith(values.len(), width);
        let mask = width_mask(width);
        for (w, v) in z[owner.index()].iter_mut().zip(values) {
            *w = w.wrapping_add(*v) & mask;
        }
        let parts = self.reshare(z, width)?;
        ArithShareVec::from_parts(width, parts)
    }

    /// The client (or a data provider) splits `values` into three random
    /// shares and sends each server its pair. One round.
    pub fn client_share(&mut self, values: &[u64], width: u32) -> Result<BoolShareVec> {
        Self::check_fits(values, width)?;
        let parts = self.client_split(values, width, |v, a, b| v ^ a ^ b)?;
        BoolShareVec::from_parts(width, parts)
    }

    pub fn client_share_arith(&mut self, values: &[u64], width: u32) -> Result<ArithShareVec> {
        Self::check_fits(values, width)?;
        let parts = self.client_split(values, width, |v, a, b| v.wrapping_sub(a).wrapping_sub(b))?;
        ArithShareVec::from_parts(width, parts)
    }

    fn client_split(
        &mut self,
        values: &[u64],
        width: u32,
        last: impl Fn(u64, u64, u64) -> u64,
    ) -> Result<[ReplicatedPair; 3]> {
        let mask = width_mask(width);
        let n = values.len();
        let x1: Vec<u64> = (0..n).map(|_| self.client_rng.next_u64() & mask).collect();
        let x2: Vec<u64> = (0..n).map(|_| self.client_rng.next_u64() & mask).collect();
        let x3: Vec<u64> = (0..n).map(|j| last(values[j], x1[j], x2[j]) & mask).collect();
        let shares = [x1, x2, x3];
        for p in PartyId::ALL {
            let mut payload = pack_words(&shares[p.index()], width);
            payload.extend(pack_words(&shares[p.next().index()], width));
            self.transport.send(Endpoint::Client, Endpoint::Server(p), payload);
        }
        let mut out: [ReplicatedPair; 3] = Default::default();
        for p in PartyId::ALL {
            let bytes = self.transport.recv(Endpoint::Client, Endpoint::Server(p))?;
            let half = bytes.len() / 2;
            out[p.index()] = ReplicatedPair {
                local: unpack_words(&bytes[..half], n, width)?,
                next: unpack_words(&bytes[half..], n, width)?,
            };
        }
        self.end_round();
        Ok(out)
    }

    // ---- opening ----

    fn open(
        &mut self,
        parts: &[ReplicatedPair; 3],
        width: u32,
        to: RevealTo,
        combine: impl Fn(u64, u64, u64) -> u64,
    ) -> Result<Vec<u64>> {
        let lanes = parts[0].local.len();
        let mask = width_mask(width);
        let result = match to {
            RevealTo::All => {
                for p in PartyId::ALL {
                    self.send_words(p, p.next(), &parts[p.index()].local, width);
                }
                let mut views = Vec::with_capacity(3);
                for p in PartyId::ALL {
                    let missing = self.recv_words(p.prev(), p, lanes, width)?;
                    let own = &parts[p.index()];
                    let v: Vec<u64> = (0..lanes)
                        .map(|j| combine(missing[j], own.local[j], own.next[j]) & mask)
                        .collect();
                    views.push(v);
                }
                if views[0] != views[1] || views[1] != views[2] {
                    return Err(MpcError::Integrity(PartyId::P1));
                }
                views.swap_remove(0)
            }
            RevealTo::Party(p) => {
                self.send_words(p.prev(), p, &parts[p.prev().index()].local, width);
                let missing = self.recv_words(p.prev(), p, lanes, width)?;
                let own = &parts[p.index()];
                (0..lanes)
                    .map(|j| combine(missing[j], own.local[j], own.next[j]) & mask)
                    .collect()
            }
            RevealTo::Client => {
                for p in PartyId::ALL {
                    self.transport.send(
                        Endpoint::Server(p),
                        Endpoint::Client,
                        pack_words(&parts[p.index()].local, width),
                    );
                }
                let mut got = Vec::with_capacity(3);
                for p in PartyId::ALL {
                    let bytes = self.transport.recv(Endpoint::Server(p), Endpoint::Client)?;
                    got.push(unpack_words(&bytes, lanes, width)?);
                }
                (0..lanes)
                    .map(|j| combine(got[0][j], got[1][j], got[2][j]) & mask)
                    .collect()
            }
        };
        self.end_round();
        Ok(result)
    }

    /// Opens a boolean sharing to all servers. The replicated copies are
    /// cross-checked first; a mismatch is reported as an integrity fault.
    pub fn reveal(&mut self, x: &BoolShareVec) -> Result<Vec<u64>> {
        self.reveal_to(x, RevealTo::All)
    }

    pub fn reveal_to(&mut self, x: &BoolShareVec, to: RevealTo) -> Result<Vec<u64>> {
        x.check_consistency()?;
        let parts = x.clone().into_parts();
        self.open(&parts, x.width(), to, |a, b, c| a ^ b ^ c)
    }

    pub fn reveal_arith(&mut self, x: &ArithShareVec) -> Result<Vec<u64>> {
        self.reveal_arith_to(x, RevealTo::All)
    }

    pub fn reveal_arith_to(&mut self, x: &ArithShareVec, to: RevealTo) -> Result<Vec<u64>> {
        x.check_consistency()?;
        let parts = x.clone().into_parts();
        self.open(&parts, x.width(), to, |a, b, c| a.wrapping_add(b).wrapping_add(c))
    }

    // ---- multiplicative gates ----

    /// Lane-wise AND of several operand pairs in a single round.
    pub fn and_batch(&mut self, pairs: &[(&BoolShareVec, &BoolShareVec)]) -> Result<Vec<BoolShareVec>> {
        for (x, y) in pairs {
            x.same_shape(y)?;
        }
        let mut z: [Vec<u64>; 3] = Default::default();
        for (x, y) in pairs {
            let zero = self.zero_sharing(x.lanes(), x.width());
            for p in PartyId::ALL {
                let (xp, yp) = (x.part(p), y.part(p));
                let zi = &zero[p.index()];
                z[p.index()].extend((0..x.lanes()).map(|j| {
                    (xp.local[j] & yp.local[j]) ^ (xp.local[j] & yp.next[j]) ^ (xp.next[j] & yp.local[j]) ^ zi[j]
                }));
            }
        }
        self.reshare_segments(z, pairs.iter().map(|(x, _)| (x.lanes(), x.width())).collect())?
            .into_iter()
            .map(|(w, parts)| BoolShareVec::from_parts(w, parts))
            .collect()
    }

    pub fn and(&mut self, x: &BoolShareVec, y: &BoolShareVec) -> Result<BoolShareVec> {
        Ok(self.and_batch(&[(x, y)])?.remove(0))
    }

    /// Lane-wise products mod `2^w` of several operand pairs in one round.
    pub fn mul_batch(&mut self, pairs: &[(&ArithShareVec, &ArithShareVec)]) -> Result<Vec<ArithShareVec>> {
        for (x, y) in pairs {
            x.same_shape(y)?;
        }
        let mut z: [Vec<u64>; 3] = Default::default();
        for (x, y) in pairs {
            let zero = self.zero_sharing_arith(x.lanes(), x.width());
            let mask = x.mask();
            for p in PartyId::ALL {
                let (xp, yp) = (x.part(p), y.part(p));
                let zi = &zero[p.index()];
                z[p.index()].extend((0..x.lanes()).map(|j| {
                    xp.local[j]
                        .wrapping_mul(yp.local[j])
                        .wrapping_add(xp.local[j].wrapping_mul(yp.next[j]))
                        .wrapping_add(xp.next[j].wrapping_mul(yp.local[j]))
                        .wrapping_add(zi[j])
                        & mask
                }));
            }
        }
        self.reshare_segments(z, pairs.iter().map(|(x, _)| (x.lanes(), x.width())).collect())?
            .into_iter()
            .map(|(w, parts)| ArithShareVec::from_parts(w, parts))
            .collect()
    }

    pub fn mul(&mut self, x: &ArithShareVec, y: &ArithShareVec) -> Result<ArithShareVec> {
        Ok(self.mul_batch(&[(x, y)])?.remove(0))
    }

    /// Reshares a concatenation of segments with per-segment widths, packing
    /// each segment at its own width.
    fn reshare_segments(
        &mut self,
        z: [Vec<u64>; 3],
        segments: Vec<(usize, u32)>,
    ) -> Result<Vec<(u32, [ReplicatedPair; 3])>> {
        for p in PartyId::ALL {
            let mut payload = Vec::new();
            let mut at = 0;
            for &(lanes, width) in &segments {
                payload.extend(pack_words(&z[p.index()][at..at + lanes], width));
                at += lanes;
            }
            self.transport
                .send(Endpoint::Server(p), Endpoint::Server(p.prev()), payload);
        }
        let mut out: Vec<(u32, [ReplicatedPair; 3])> = segments
            .iter()
            .map(|&(_, w)| (w, Default::default()))
            .collect();
        for p in PartyId::ALL {
            let bytes = self
                .transport
                .recv(Endpoint::Server(p.next()), Endpoint::Server(p))?;
            let (mut at, mut byte_at) = (0usize, 0usize);
            for (k, &(lanes, width)) in segments.iter().enumerate() {
                let nbytes = (lanes * width as usize).div_ceil(8);
                let chunk = bytes
                    .get(byte_at..byte_at + nbytes)
                    .ok_or(MpcError::Malformed("short reshare payload"))?;
                out[k].1[p.index()] = ReplicatedPair {
                    local: z[p.index()][at..at + lanes].to_vec(),
                    next: unpack_words(chunk, lanes, width)?,
                };
                at += lanes;
                byte_at += nbytes;
            }
        }
        self.end_round();
        Ok(out)
    }
}
