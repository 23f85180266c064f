pub mod model;
pub mod discrete;
pub mod continuous;
pub mod equilibria;
pub mod experiments;
pub mod cli;
