//! Static detection of JCA misuse in Java sources, a store for every secure
//! and insecure usage found, and ranked example search over that store.

pub mod rules;
pub mod extract;
pub mod analyzer;
pub mod store;
pub mod search;
#[cfg(feature = "pipeline")]
pub mod pipeline;
