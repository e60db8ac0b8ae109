//! Reference implementations used as test oracles. They share no code with
//! the library beyond its public data types.
#![allow(dead_code)]

pub mod lp;
pub mod oracle;
pub mod random;
