pub mod dfs;
pub mod encode;
pub mod graph;
pub mod models;
pub mod pipeline;
pub mod rdb;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod tensor;
pub mod train;
