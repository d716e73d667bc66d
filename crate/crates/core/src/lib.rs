//! Sensing loops: time-coherent tuples from unsynchronized sensors, with
//! guarantees computed only from the loop node's trusted clock.

pub mod baseline;
pub mod clock;
pub mod coherence;
pub mod fallback;
pub mod harness;
pub mod loop_node;
pub mod multilat;
pub mod netsim;
pub mod scenario;
pub mod sensor_node;
pub mod time;
pub mod tuple;
