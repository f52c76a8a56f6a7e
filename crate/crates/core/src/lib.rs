pub mod analytics;
pub mod cli;
pub mod commands;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod factorization;
pub mod hpo;
pub mod manifest;
pub mod mlp;
pub mod synthetic;
