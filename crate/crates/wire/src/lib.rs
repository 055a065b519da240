//! Networked harness: Alice, Bob and a pair broker exchange length-prefixed
//! JSON frames over TCP. The classical channel is a real byte stream; the
//! quantum channel lives inside the broker, which answers measurement
//! requests.

pub mod broker;
pub mod error;
pub mod frame;
pub mod messages;
pub mod roles;

pub use broker::{broker_serve, Broker, BrokerHandle};
pub use error::WireError;
pub use frame::{read_frame, write_frame, Frame, FrameType, FramedStream, MAX_FRAME_LEN};
pub use roles::{combine, run_alice, run_bob, AliceConfig, BobConfig, DEFAULT_FRAME_TIMEOUT};
