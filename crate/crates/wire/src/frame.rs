//! Length-prefixed JSON frames.
//!
//! ```text
//! +----------------------+------------------------------------------+
//! | length: u32, BE      | payload: UTF-8 JSON, `length` bytes      |
//! +----------------------+------------------------------------------+
//! payload = {"type": <FrameType>, "session": str, "seq": int, "body": {..}}
//! ```

use std::fmt;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::WireError;

/// Largest accepted payload.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameType {
    Hello,
    PairsReady,
    CheckBasis,
    CheckOutcome,
    Verdict,
    Announce,
    MeasureReq,
    MeasureResp,
    Bye,
    Error,
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: FrameType,
    pub session: String,
    pub seq: u64,
    pub body: Map<String, Value>,
}

impl Frame {
    pub fn new<B: Serialize>(kind: FrameType, session: &str, seq: u64, body: &B) -> Result<Self, WireError> {
        let body = match serde_json::to_value(body).map_err(|e| WireError::Malformed(e.to_string()))? {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => return Err(WireError::Malformed(format!("body must be an object, got {other}"))),
        };
        Ok(Self {
            kind,
            session: session.to_string(),
            seq,
            body,
        })
    }

    pub fn parse_body<T: DeserializeOwned>(&self) -> Result<T, WireError> {
        serde_json::from_value(Value::Object(self.body.clone()))
            .map_err(|e| WireError::Malformed(format!("{} body: {e}", self.kind)))
    }

    /// Serialized frame: prefix plus payload.
    pub fn encode(&self) -> Vec<u8> {
        let payload = serde_json::to_vec(self).expect("frame fields always serialize");
        let mut out = Vec::with_capacity(payload.len() + 4);
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&payload);
        out
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), WireError> {
    w.write_all(&frame.encode())?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. A clean end of stream before any prefix byte is
/// [`WireError::Closed`].
pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, WireError> {
    let mut prefix = [0u8; 4];
    let got = read_full(r, &mut prefix)?;
    if got == 0 {
        return Err(WireError::Closed);
    }
    if got < 4 {
        return Err(WireError::Truncated {
            expected: 4,
            got,
        });
    }
    let len = u32::from_be_bytes(prefix);
    if len > MAX_FRAME_LEN {
        return Err(WireError::FrameTooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    let got = read_full(r, &mut payload)?;
    if got < payload.len() {
        return Err(WireError::Truncated {
            expected: payload.len(),
            got,
        });
    }
    serde_json::from_slice(&payload).map_err(|e| WireError::Malformed(e.to_string()))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, WireError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                return Err(WireError::Timeout)
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// One end of a framed connection with per-direction sequence numbers.
pub struct FramedStream {
    stream: TcpStream,
    session: String,
    next_seq: u64,
    last_recv: Option<u64>,
}

impl FramedStream {
    pub fn new(stream: TcpStream, session: &str, timeout: Option<Duration>) -> Result<Self, WireError> {
        stream.set_read_timeout(timeout)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            session: session.to_string(),
            next_seq: 0,
            last_recv: None,
        })
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn set_session(&mut self, session: &str) {
        self.session = session.to_string();
    }

    pub fn send<B: Serialize>(&mut self, kind: FrameType, body: &B) -> Result<(), WireError> {
        let frame = Frame::new(kind, &self.session, self.next_seq, body)?;
        self.next_seq += 1;
        write_frame(&mut self.stream, &frame)
    }

    pub fn send_error(&mut self, code: &str, message: &str) -> Result<(), WireError> {
        self.send(
            FrameType::Error,
            &ErrorBody {
                code: code.to_string(),
                message: message.to_string(),
            },
        )
    }

    /// Next frame, with sequence checking. ERROR frames are returned as-is.
    pub fn recv(&mut self) -> Result<Frame, WireError> {
        let frame = read_frame(&mut self.stream)?;
        if let Some(last) = self.last_recv {
            if frame.seq <= last {
                return Err(WireError::BadSeq {
                    last,
                    got: frame.seq,
                });
            }
        }
        self.last_recv = Some(frame.seq);
        Ok(frame)
    }

    /// Receives a frame of type `kind` and decodes its body. A remote ERROR
    /// becomes [`WireError::Remote`]; any other type is a protocol violation
    /// that is reported to the peer before returning.
    pub fn expect<T: DeserializeOwned>(&mut self, kind: FrameType) -> Result<T, WireError> {
        let frame = self.recv()?;
        if frame.kind == kind {
            return frame.parse_body();
        }
        if frame.kind == FrameType::Error {
            let e: ErrorBody = frame.parse_body()?;
            return Err(WireError::Remote {
                code: e.code,
                message: e.message,
            });
        }
        let msg = format!("expected {kind}, got {}", frame.kind);
        let _ = self.send_error("protocol-violation", &msg);
        Err(WireError::ProtocolViolation(msg))
    }

    pub fn shutdown(&self) {
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}
