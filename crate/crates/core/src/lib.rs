//! A miniature SSA toolkit modeling the invariance of virtual pointers.
//!
//! The crate lowers a small object-oriented language (MiniOO) to an SSA IR
//! carrying invariant-group metadata and launder/strip intrinsics, optimizes
//! it (redundant vtable-load elimination, devirtualization, loop hoisting),
//! and checks soundness by differential execution against a fat-pointer
//! reference interpreter.

pub mod analysis;
pub mod cfg;
pub mod corpus;
pub mod diag;
pub mod frontend;
pub mod interp;
pub mod ir;
pub mod link;
pub mod passes;
