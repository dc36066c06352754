//! The Mob mobile-agent language: syntax, type inference, code collection
//! and an abstract machine that runs agents on a simulated network.

pub mod syntax;
pub mod names;
pub mod resolver;
pub mod types;
pub mod collect;
pub mod external;
pub mod machine;
pub mod prelude;
pub mod driver;
