use std::io;

use epr_core::protocol::ProtocolError;
use epr_core::security::SecurityError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("connection closed by peer")]
    Closed,
    #[error("timed out waiting for a frame")]
    Timeout,
    #[error("frame length {0} exceeds limit")]
    FrameTooLarge(u32),
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("sequence number {got} does not follow {last}")]
    BadSeq { last: u64, got: u64 },
    #[error("peer reported {code}: {message}")]
    Remote { code: String, message: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

impl WireError {
    /// Short code carried in ERROR frames.
    pub fn code(&self) -> &'static str {
        match self {
            WireError::Io(_) | WireError::Closed => "transport",
            WireError::Timeout => "timeout",
            WireError::FrameTooLarge(_) => "frame-too-large",
            WireError::Truncated { .. } => "truncated-frame",
            WireError::Malformed(_) => "malformed-frame",
            WireError::BadSeq { .. } => "bad-seq",
            WireError::Remote { .. } => "remote",
            WireError::ProtocolViolation(_) => "protocol-violation",
            WireError::Protocol(_) | WireError::Security(_) => "protocol",
        }
    }

    /// True when the peers disagreed about the protocol itself, as opposed to
    /// the transport failing.
    pub fn is_protocol_violation(&self) -> bool {
        matches!(
            self,
            WireError::ProtocolViolation(_)
                | WireError::Remote { .. }
                | WireError::BadSeq { .. }
                | WireError::Malformed(_)
                | WireError::Protocol(_)
                | WireError::Security(_)
        )
    }
}
