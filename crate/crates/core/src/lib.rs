//! Inverse isoparametric maps, FE-MD coupling topology, Arlequin weight
//! fields and coupled explicit dynamics.

// index loops mirror the tensor notation; `!(x > 0.0)` guards also reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha;
pub mod cells;
pub mod config;
pub mod demo;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod iso;
pub mod lattice;
pub mod linalg;
pub mod pipeline;
pub mod ray;
pub mod shape;
pub mod topology;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
