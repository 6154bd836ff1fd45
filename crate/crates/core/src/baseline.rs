//! Plaintext ground truth and the secure full-scan edge-list baseline.

use std::collections::{BTreeMap, BTreeSet};

use goram_mpc::{ArithShareVec, BoolShareVec, SecretBit, Session};

use crate::error::Result;
use crate::partition::{EdgeRecord, WORD};
use crate::query::{count_mask, edge_mask, source_mask};

/// The global graph as a multiset of attributed edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlainGraph {
    pub num_vertices: u64,
    adj: BTreeMap<u64, Vec<(u64, Vec<u64>)>>,
    edges: usize,
}

impl PlainGraph {
    pub fn new(num_vertices: u64) -> Self {
        PlainGraph {
            num_vertices,
            ..Default::default()
        }
    }

    pub fn from_edges<'a>(num_vertices: u64, edges: impl IntoIterator<Item = &'a EdgeRecord>) -> Self {
        let mut g = PlainGraph::new(num_vertices);
        for e in edges {
            g.insert(e);
        }
        g
    }

    pub fn insert(&mut self, e: &EdgeRecord) {
        if !e.is_dummy() {
            self.adj.entry(e.src).or_default().push((e.dst, e.attrs.clone()));
            self.edges += 1;
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    fn out(&self, v: u64) -> &[(u64, Vec<u64>)] {
        self.adj.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_exist(&self, src: u64, dst: u64) -> bool {
        self.out(src).iter().any(|(d, _)| *d == dst)
    }

    /// Out-degree with multiplicity.
    pub fn out_degree(&self, v: u64) -> u64 {
        self.out(v).len() as u64
    }

    pub fn unique_out_degree(&self, v: u64) -> u64 {
        self.neighbors(v).len() as u64
    }

    /// Distinct out-neighbors, ascending.
    pub fn neighbors(&self, v: u64) -> Vec<u64> {
        let set: BTreeSet<u64> = self.out(v).iter().map(|(d, _)| *d).collect();
        set.into_iter().collect()
    }

    /// Out-edges of `v` whose attribute `lane` is strictly below
    /// `threshold`.
    pub fn range_count(&self, v: u64, threshold: u64, lane: usize) -> u64 {
        self.out(v).iter().filter(|(_, a)| a[lane] < threshold).count() as u64
    }

    /// Whether `v_1 -> v_2 -> .. -> v_m -> v_1` exists in either direction.
    pub fn cycle(&self, vertices: &[u64]) -> bool {
        let m = vertices.len();
        let forward = (0..m).all(|i| self.edge_exist(vertices[i], vertices[(i + 1) % m]));
        let backward = (0..m).all(|i| self.edge_exist(vertices[(i + 1) % m], vertices[i]));
        forward || backward
    }
}

/// All provider edges in one secret-shared flat list of `[key, attrs..]`
/// records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecureEdgeList {
    pub data: BoolShareVec,
    pub record_lanes: usize,
}

impl SecureEdgeList {
    /// Shares the concatenation of the provider lists, each followed by
    /// `pad` dummy records.
    pub fn from_providers(session: &mut Session, providers: &[Vec<EdgeRecord>], attr_lanes: usize, pad: usize) -> Result<Self> {
        let mut lanes = Vec::new();
        for list in providers {
            for e in list {
                lanes.extend(e.lanes());
            }
            for _ in 0..pad {
                lanes.extend(EdgeRecord::dummy(attr_lanes).lanes());
            }
        }
        Ok(SecureEdgeList {
            data: session.client_share(&lanes, WORD)?,
            record_lanes: 1 + attr_lanes,
        })
    }

    pub fn len(&self) -> usize {
        self.data.lanes() / self.record_lanes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn list_edge_exist(&self, s: &mut Session, src: &BoolShareVec, dst: &BoolShareVec) -> Result<SecretBit> {
        if self.is_empty() {
            return Ok(SecretBit::public(&[false]));
        }
        let mask = edge_mask(s, &self.data, self.record_lanes, src, dst)?;
        Ok(s.or_fold(&mask)?)
    }

    pub fn list_neighbors_count(&self, s: &mut Session, v: &BoolShareVec) -> Result<ArithShareVec> {
        if self.is_empty() {
            return Ok(ArithShareVec::public(&[0], WORD));
        }
        let mask = source_mask(s, &self.data, self.record_lanes, v)?;
        count_mask(s, &mask)
    }
}
