pub mod agent;
pub mod baselines;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lsd;
pub mod mapping;
pub mod reward;
pub mod sensor;
pub mod uncertainty;
pub mod world;
