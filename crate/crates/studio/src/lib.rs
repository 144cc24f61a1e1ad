//! Studio layer of jianzhi: corpus files, the model-provider gateway,
//! canonical SVG export, design sessions, the HTTP service and the CLI
//! plumbing around [`jianzhi_core`].

pub mod corpus;
pub mod fixtures;
pub mod gateway;
pub mod imaging;
pub mod pipeline;
pub mod service;
pub mod session;
pub mod svg;
