//! Safety-constrained backstepping control of a planar bicopter.
//!
//! Position and velocity are kept inside a box by designing the controller in
//! `atanh`-transformed coordinates ([`xform`]), where the box becomes the whole
//! plane. [`ctrl`] holds the control law, [`sim`] a fixed-step closed-loop
//! simulator with runtime monitors, and [`derivcheck`] a finite-difference
//! audit of every closed-form derivative the controller uses.

// `!(x < bound)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ctrl;
pub mod derivcheck;
pub mod error;
pub mod model;
pub mod sim;
pub mod traj;
pub mod xform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/transform.md")]
    pub struct Transform;
    #[doc = include_str!("../../../book/src/controller.md")]
    pub struct Controller;
    #[doc = include_str!("../../../book/src/trajectory.md")]
    pub struct Trajectory;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/verification.md")]
    pub struct Verification;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
