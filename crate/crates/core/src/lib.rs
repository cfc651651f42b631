//! Synchronization of a binary file over a random-deletion channel.
//!
//! Node A holds a bit string X; node B holds Y, a copy of X with each bit
//! independently deleted at a small rate. Over a two-way error-free channel
//! the engine rebuilds X at node B in three stages:
//!
//! 1. **Pivot matching**: A broadcasts short evenly spaced pivot substrings;
//!    B locates them in Y with a layered-graph longest-path search
//!    ([`matching`]).
//! 2. **Per-gap deletion recovery**: for each stretch between matched pivots,
//!    an interactive protocol (VT syndromes, anchors, or wholesale
//!    retransmission) rebuilds the stretch at its original length
//!    ([`gapsync`]).
//! 3. **LDPC cleanup**: residual mismatches behave like a binary symmetric
//!    channel; systematic LDPC parity bits and belief propagation remove them
//!    ([`ldpc`]).
//!
//! [`protocol`] drives both node state machines over a metered channel and
//! [`harness`] reproduces the scheme's bit-budget and error-rate behaviour by
//! Monte Carlo.

pub mod bits;
pub mod deletion;
pub mod error;
pub mod gapsync;
pub mod harness;
pub mod ldpc;
pub mod matching;
pub mod partition;
pub mod protocol;
pub mod transport;
pub mod vt;
pub mod wire;

pub use bits::BitString;
pub use deletion::{apply_deletions, gen_instance, DeletionPattern, Instance};
pub use error::{Error, Result};
pub use partition::{partition, Partition, PartitionParams};
pub use protocol::{one_shot, ProtocolConfig, RunOutcome, SyncReport};
