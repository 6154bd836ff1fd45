pub mod baseline;
pub mod engine;
pub mod error;
pub mod gen;
pub mod index;
pub mod oram;
pub mod partition;
pub mod query;
pub mod shuffle;

pub use baseline::{PlainGraph, SecureEdgeList};
pub use engine::{Answer, Engine, Query};
pub use error::{Error, Result};
pub use index::{Goram, GoramOptions};
pub use oram::{OramParams, SqrtOram};
pub use partition::{EdgeRecord, GlobalConfig, LocalPartition, PartitionedGraph};
pub use shuffle::{oblivious_shuffle, shuffle_mem, BlockArray, PermutationRep};
