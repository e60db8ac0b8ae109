//! Compiles the guide's code listings as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/topology.md")]
pub mod topology {}
#[doc = include_str!("../../../book/src/paths.md")]
pub mod paths {}
#[doc = include_str!("../../../book/src/aggregation.md")]
pub mod aggregation {}
#[doc = include_str!("../../../book/src/throughput.md")]
pub mod throughput {}
#[doc = include_str!("../../../book/src/failover.md")]
pub mod failover {}
#[doc = include_str!("../../../book/src/multicast.md")]
pub mod multicast {}
#[doc = include_str!("../../../book/src/policing.md")]
pub mod policing {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
