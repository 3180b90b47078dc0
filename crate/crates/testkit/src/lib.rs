//! Test support shared by the workspace's integration and acceptance tests.

pub mod fixtures;
pub mod oracle;
