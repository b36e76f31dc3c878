pub mod allocation;
pub mod caching;
pub mod channel;
pub mod geometry;
pub mod harness;
pub mod photo;
pub mod pricing;
pub mod rng;
pub mod scenario;
pub mod selection;
