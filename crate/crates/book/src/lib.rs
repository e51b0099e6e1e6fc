//! The guide in `book/` compiled as documentation, so its listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/conventions.md")]
pub mod conventions {}

#[doc = include_str!("../../../book/src/channels.md")]
pub mod channels {}

#[doc = include_str!("../../../book/src/liouvillian.md")]
pub mod liouvillian {}

#[doc = include_str!("../../../book/src/steady-states.md")]
pub mod steady_states {}

#[doc = include_str!("../../../book/src/concurrence.md")]
pub mod concurrence {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
