//! The deterministic, deliberately vulnerable target application used by
//! the end-to-end test suite: a toy build coordinator with three roles and
//! four individually seedable vulnerabilities.

pub mod server;
pub mod site;

pub use server::{serve, FixtureHandle};
pub use site::{SiteConfig, Vuln};
