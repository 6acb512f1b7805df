pub mod agent;
pub mod augmentation;
pub mod cli;
pub mod clients;
pub mod geometry;
pub mod perception;
pub mod raster;
pub mod retrieval;
pub mod simulator;
