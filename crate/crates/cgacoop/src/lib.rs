//! Conformal geometric algebra toolkit for cooperative multi-chain manipulation.
//!
//! The crate is `no_std` with `alloc`. It covers the Cl(4,1) algebra, the
//! rotor/translator/dilator groups, geometric primitives, serial kinematic
//! chains, the cooperative similarity of several chains with its Jacobians,
//! task-space control, an iLQR solver and a deterministic simulator.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod algebra;
pub mod chain;
pub mod control;
pub mod cooperative;
pub mod error;
pub mod linalg;
pub mod models;
pub mod ocp;
pub mod primitive;
pub mod sim;
pub mod teleop;
pub mod versor;

pub use algebra::{embed_point, extract_point, Blade, Multivector};
pub use error::{Error, Result};
