//! Shared test support: fixture programs, seeded program and selector
//! generators, and slow reference implementations used as oracles.

pub mod count;
pub mod fixtures;
pub mod gen;
pub mod naive;

pub use fixtures::Fixture;
