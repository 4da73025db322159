//! Error models for surrogate solutions of parameterized dynamical systems.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod dynsys;
pub mod error;
pub mod eval;
pub mod features;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod pipeline;
pub mod reduction;
pub mod regress;

pub use error::{Error, Result};
