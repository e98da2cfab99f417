//! Program synthesis toolkit for ARC-style grid tasks.
//!
//! The crate is organized around three layers:
//!
//! - a typed, functional grid-transformation DSL: values and rasters
//!   ([`grid`], [`value`]), operation signatures and unification
//!   ([`types`]), programs ([`program`], [`text`]) and their evaluator
//!   ([`interp`]) over per-demonstration symbol bindings ([`workspace`]);
//! - a type-directed stochastic program generator whose output is
//!   well-typed by construction ([`generate`]);
//! - a closed training loop that turns failed candidate programs into
//!   synthetic supervised tasks ([`task`], [`store`], [`train`]).

pub mod digest;
pub mod generate;
pub mod grid;
pub mod interp;
pub mod program;
pub mod store;
pub mod task;
pub mod text;
pub mod train;
pub mod types;
pub mod value;
pub mod workspace;

pub use digest::{Canonical, Digest};
pub use grid::{Color, GridError, Loc, Raster, Region};
pub use program::{AstNode, Program};
pub use value::Value;
