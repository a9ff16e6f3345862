#![allow(dead_code, clippy::too_many_arguments)]

pub mod oracle;
pub mod scenarios;
