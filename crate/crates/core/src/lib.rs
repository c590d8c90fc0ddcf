//! Component-based synthesis of numeric kernels guided by property relations.
//!
//! The pipeline: a [`sigmodel::FunctionSpec`] is matched against a [`query::RuleLibrary`]
//! to instantiate fragments; valid compositions of those fragments are enumerated by
//! increasing size and lowered to skeletons with holes; holes are filled with short
//! instruction sequences and candidates are tested against a reference [`oracle`].
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod lex;

pub mod sigmodel;
pub mod query;
pub mod fragments;
pub mod ir;
pub mod oracle;
pub mod search;
