//! Multi-agent reinforcement-learning control of 2D Rayleigh-Benard convection.

pub mod env;
pub mod grad;
pub mod lab;
pub mod nets;
pub mod ppo;
pub mod solver;
