pub mod bench;
pub mod candidates;
pub mod model;
pub mod network;
pub mod rng;
pub mod sim;
pub mod solvers;
