//! Traffic engineering for Ethernet networks built from commodity switches.
//!
//! Switched Ethernet forwards every frame along a single spanning tree, which
//! leaves redundant links idle. Switches that support 802.1s multiple spanning
//! trees can instead bind a different tree to each VLAN tag, so a host selects
//! a switching path simply by tagging its frames. This crate models that
//! architecture end to end:
//!
//! - [`netmodel`]: topologies, paths, VLAN trees and traffic matrices, plus
//!   the grid generator and a line-oriented text format.
//! - [`tepath`]: load-balanced primary path selection and link/switch
//!   disjoint backup paths.
//! - [`aggregate`]: grouping selected paths into loop-free spanning trees and
//!   binding VLAN tags to them.
//! - [`failover`]: a discrete-event model of trap-driven failover to backup
//!   VLANs through status monitors.
//! - [`mcast`]: IGMP-snooping forwarding state, multicast trees and an
//!   ack/timeout reliable multicast scheme.
//! - [`qos`]: single-rate token-bucket ingress policing.
//! - [`flowsim`]: flow-level throughput under single-tree and multi-tree
//!   routing.
//!
//! ```
//! use vlantree::flowsim::{multi_tree_route, single_tree_route};
//! use vlantree::netmodel::{build_grid, uniform_matrix};
//!
//! let grid = build_grid(4, 100.0, 1).unwrap();
//! let matrix = uniform_matrix(&grid, 10.0).unwrap();
//! let single = single_tree_route(&grid, &matrix).unwrap();
//! let multi = multi_tree_route(&grid, &matrix, false).unwrap();
//! assert!(multi.aggregate_mbps >= single.aggregate_mbps);
//! ```

pub mod aggregate;
pub mod error;
pub mod failover;
pub mod flowsim;
pub mod mcast;
pub mod netmodel;
pub mod qos;
pub mod tepath;

mod graph;

pub use error::{Error, Result};
