//! Host side of the toolkit: file formats, trajectory output, the websocket
//! teleop service and verification suites used by the `cgacoop` binary.

pub mod format;
pub mod output;
pub mod protocol;
pub mod server;
pub mod verify;
