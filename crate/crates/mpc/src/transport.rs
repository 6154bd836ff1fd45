//! Message transport between the three servers and the client role.
//!
//! Only the in-process transport is provided. It queues messages per directed
//! channel, counts payload bytes per sender, and folds every message into a
//! running SHA-256 transcript digest so that two executions can be compared
//! byte for byte.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::{Add, Sub};

use sha2::{Digest, Sha256};

use crate::error::{MpcError, Result};
use crate::PartyId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Server(PartyId),
    Client,
}

impl Endpoint {
    fn tag(self) -> u8 {
        match self {
            Endpoint::Server(p) => p.get(),
            Endpoint::Client => 0,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Server(p) => write!(f, "{p}"),
            Endpoint::Client => f.write_str("client"),
        }
    }
}

/// Communication counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    /// Communication rounds among the servers (client hand-offs included).
    pub rounds: u64,
    /// Payload bytes sent by each server, indexed by `PartyId::index`.
    pub bytes_sent: [u64; 3],
    /// Payload bytes sent by the client role.
    pub client_bytes: u64,
}

impl Metrics {
    pub fn server_bytes(&self) -> u64 {
        self.bytes_sent.iter().sum()
    }

    /// Mean bytes sent per computation server.
    pub fn avg_server_bytes(&self) -> f64 {
        self.server_bytes() as f64 / 3.0
    }
}

impl Add for Metrics {
    type Output = Metrics;

    fn add(self, rhs: Metrics) -> Metrics {
        Metrics {
            rounds: self.rounds + rhs.rounds,
            bytes_sent: [
                self.bytes_sent[0] + rhs.bytes_sent[0],
                self.bytes_sent[1] + rhs.bytes_sent[1],
                self.bytes_sent[2] + rhs.bytes_sent[2],
            ],
            client_bytes: self.client_bytes + rhs.client_bytes,
        }
    }
}

impl Sub for Metrics {
    type Output = Metrics;

    fn sub(self, rhs: Metrics) -> Metrics {
        Metrics {
            rounds: self.rounds - rhs.rounds,
            bytes_sent: [
                self.bytes_sent[0] - rhs.bytes_sent[0],
                self.bytes_sent[1] - rhs.bytes_sent[1],
                self.bytes_sent[2] - rhs.bytes_sent[2],
            ],
            client_bytes: self.client_bytes - rhs.client_bytes,
        }
    }
}

pub trait Transport: Send {
    fn send(&mut self, from: Endpoint, to: Endpoint, payload: Vec<u8>);
    fn recv(&mut self, from: Endpoint, to: Endpoint) -> Result<Vec<u8>>;
    /// Marks the end of one communication round.
    fn end_round(&mut self);
    fn metrics(&self) -> Metrics;
    fn transcript_digest(&self) -> [u8; 32];
}

#[derive(Default)]
pub struct InProcTransport {
    queues: HashMap<(Endpoint, Endpoint), VecDeque<Vec<u8>>>,
    metrics: Metrics,
    transcript: Sha256,
}

impl InProcTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Transport for InProcTransport {
    fn send(&mut self, from: Endpoint, to: Endpoint, payload: Vec<u8>) {
        let len = payload.len() as u64;
        match from {
            Endpoint::Server(p) => self.metrics.bytes_sent[p.index()] += len,
            Endpoint::Client => self.metrics.client_bytes += len,
        }
        self.transcript.update([from.tag(), to.tag()]);
        self.transcript.update(len.to_le_bytes());
        self.transcript.update(&payload);
        self.queues.entry((from, to)).or_default().push_back(payload);
    }

    fn recv(&mut self, from: Endpoint, to: Endpoint) -> Result<Vec<u8>> {
        self.queues
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| MpcError::MissingMessage {
                from: from.to_string(),
                to: to.to_string(),
            })
    }

    fn end_round(&mut self) {
        self.metrics.rounds += 1;
    }

    fn metrics(&self) -> Metrics {
        self.metrics
    }

    fn transcript_digest(&self) -> [u8; 32] {
        self.transcript.clone().finalize().into()
    }
}

/// Packs `bits`-wide words into a little-endian bit stream.
pub fn pack_words(words: &[u64], bits: u32) -> Vec<u8> {
    debug_assert!((1..=64).contains(&bits));
    if bits.is_multiple_of(8) {
        let nbytes = (bits / 8) as usize;
        let mut out = Vec::with_capacity(words.len() * nbytes);
        for w in words {
            out.extend_from_slice(&w.to_le_bytes()[..nbytes]);
        }
        return out;
    }
    let total = (words.len() * bits as usize).div_ceil(8);
    let mut out = vec![0u8; total];
    let mut pos = 0usize;
    for &w in words {
        for b in 0..bits as usize {
            if (w >> b) & 1 == 1 {
                let at = pos + b;
                out[at / 8] |= 1 << (at % 8);
            }
        }
        pos += bits as usize;
    }
    out
}

pub fn unpack_words(bytes: &[u8], count: usize, bits: u32) -> Result<Vec<u64>> {
    let expected = (count * bits as usize).div_ceil(8);
    if bytes.len() != expected {
        return Err(MpcError::Malformed("payload length"));
    }
    if bits.is_multiple_of(8) {
        let nbytes = (bits / 8) as usize;
        return Ok(bytes
            .chunks_exact(nbytes)
            .map(|c| {
                let mut buf = [0u8; 8];
                buf[..nbytes].copy_from_slice(c);
                u64::from_le_bytes(buf)
            })
            .collect());
    }
    let mut out = Vec::with_capacity(count);
    let mut pos = 0usize;
    for _ in 0..count {
        let mut w = 0u64;
        for b in 0..bits as usize {
            let at = pos + b;
            if (bytes[at / 8] >> (at % 8)) & 1 == 1 {
                w |= 1 << b;
            }
        }
        out.push(w);
        pos += bits as usize;
    }
    Ok(out)
}
