//! Negative-imaginary (NI) systems: realizations, frequency-domain and LMI tests,
//! robust stability of positive-feedback loops, controller families and
//! state-feedback synthesis.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod controllers;
pub mod error;
pub mod lmi;
pub mod lti;
pub mod numerics;
pub mod stability;
pub mod synthesis;
pub mod zeros;

pub use error::{Error, Result};
pub use lti::{FeedbackLoop, LoopSign, ModalModel, Mode, OutputKind, StateSpace};
