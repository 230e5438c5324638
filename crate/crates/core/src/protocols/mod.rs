//! Tree protocols built on broadcast-and-echo over marked trees.

pub mod control;
pub mod messages;
pub mod node;
pub mod ops;
pub mod queries;
pub mod wave;

pub use control::{Controller, Outcome, SearchMode};
pub use messages::{Echo, Msg, Notice, ParityWord, Query};
pub use node::{After, Output, Purpose, Search, Tick, TreeNode};
pub use ops::{
    broadcast_and_echo, elect_leader, find_any, find_min, hp_test_out, run_controller, test_out, test_out_parallel,
    AnyResult, MinResult, ProtocolError, WaveNode,
};
pub use queries::TreeQueries;
pub use wave::{Aggregation, Payload, WaveEngine, WaveMsg};
