//! CONGEST network simulation with low-message spanning tree construction
//! and impromptu repair.

pub mod algorithms;
pub mod experiment;
pub mod graph;
pub mod params;
pub mod protocols;
pub mod runtime;
pub mod sketch;
