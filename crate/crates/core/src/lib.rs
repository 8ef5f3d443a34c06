pub mod api;
pub mod churn;
pub mod cli;
pub mod dataset;
pub mod economics;
pub mod error;
pub mod market;
pub mod report;
pub mod scenario;
