use thiserror::Error;

use crate::netmodel::{HostId, Link, SwitchId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid side must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("link capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("self-loop link on switch {0}")]
    SelfLoop(SwitchId),
    #[error("duplicate link {0}")]
    DuplicateLink(Link),
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error("unknown link {0}")]
    UnknownLink(Link),
    #[error("identifiers must be dense from 0: {0}")]
    SparseIds(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid demand {src} -> {dst}: {reason}")]
    InvalidDemand {
        src: HostId,
        dst: HostId,
        reason: String,
    },
    #[error("need at least {need} hosts, have {have}")]
    TooFewHosts { need: usize, have: usize },
    #[error("switch {src} cannot reach switch {dst}")]
    Unreachable { src: SwitchId, dst: SwitchId },
    #[error("edge set contains a cycle")]
    CyclicTree,
    #[error("topology is disconnected, no spanning tree exists")]
    Disconnected,
    #[error("{0} trees exceed the 4094 usable VLAN tags")]
    TagSpaceExhausted(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid failure scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid multicast group: {0}")]
    InvalidGroup(String),
    #[error("invalid rate profile: {0}")]
    InvalidProfile(String),
    #[error("no rate profile for host {0}")]
    MissingProfile(HostId),
    #[error("time went backwards: {now:?} < {last:?}")]
    TimeRegression {
        now: std::time::Duration,
        last: std::time::Duration,
    },
    #[error("frame of {0} bytes exceeds the 1522 byte maximum")]
    FrameTooLarge(u32),
    #[error("argument lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
