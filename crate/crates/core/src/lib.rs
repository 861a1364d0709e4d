pub mod cli;
pub mod critical;
pub mod error;
pub mod intervals;
pub mod limit;
pub mod mc;
pub mod normal;
mod quad;
mod roots;
