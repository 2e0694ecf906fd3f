//! Length-prefixed framing: `u32 LE length | u8 msg_type | payload`.
//!
//! `length` counts the type byte plus the payload, so it is never zero.

use super::WireError;

/// Largest accepted value of the length field.
pub const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;

/// Bytes before the payload.
pub const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: u8, payload: Vec<u8>) -> Self {
        Frame { msg_type, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        encode_frame(self.msg_type, &self.payload, &mut out);
        out
    }
}

/// Appends one frame to `out`.
///
/// Panics if the payload would exceed [`MAX_FRAME_LEN`].
pub fn encode_frame(msg_type: u8, payload: &[u8], out: &mut Vec<u8>) {
    let len = payload.len() + 1;
    assert!(len <= MAX_FRAME_LEN, "frame of {len} bytes exceeds the limit");
    out.reserve(HEADER_LEN + payload.len());
    out.extend_from_slice(&(len as u32).to_le_bytes());
    out.push(msg_type);
    out.extend_from_slice(payload);
}

/// Outcome of decoding from the front of a buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Frame { frame: Frame, consumed: usize },
    /// At least `needed` more bytes are required.
    NeedMore { needed: usize },
}

fn read_length(bytes: &[u8]) -> Result<Option<usize>, WireError> {
    if bytes.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len == 0 {
        return Err(WireError::EmptyFrame);
    }
    if len > MAX_FRAME_LEN {
        return Err(WireError::FrameTooLarge(len));
    }
    Ok(Some(len))
}

/// Decodes the first frame in `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Decoded, WireError> {
    let Some(len) = read_length(bytes)? else {
        return Ok(Decoded::NeedMore { needed: 4 - bytes.len() + 1 });
    };
    let total = 4 + len;
    if bytes.len() < total {
        return Ok(Decoded::NeedMore { needed: total - bytes.len() });
    }
    let frame = Frame { msg_type: bytes[4], payload: bytes[HEADER_LEN..total].to_vec() };
    Ok(Decoded::Frame { frame, consumed: total })
}

/// Reassembles frames from arbitrarily split reads.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet returned as frames.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    /// Next complete frame, `Ok(None)` if more bytes are needed.
    ///
    /// After an error the stream is unrecoverable.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, WireError> {
        match decode_frame(&self.buf[self.start..])? {
            Decoded::Frame { frame, consumed } => {
                self.start += consumed;
                // compact once the dead prefix dominates
                if self.start > 4096 && self.start * 2 > self.buf.len() {
                    self.buf.drain(..self.start);
                    self.start = 0;
                }
                Ok(Some(frame))
            }
            Decoded::NeedMore { .. } => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_control_frame_bytes() {
        let payload = br#"{"op":"stop"}"#;
        assert_eq!(payload.len(), 13);
        let bytes = Frame::new(0x05, payload.to_vec()).encode();
        assert_eq!(&bytes[..5], &[0x0E, 0x00, 0x00, 0x00, 0x05]);
        assert_eq!(&bytes[5..], payload);
    }

    #[test]
    fn empty_payload_frame() {
        assert_eq!(Frame::new(0x05, Vec::new()).encode(), vec![0x01, 0, 0, 0, 0x05]);
    }

    #[test]
    fn truncated_needs_more() {
        let bytes = Frame::new(2, vec![1, 2, 3]).encode();
        assert_eq!(decode_frame(&bytes[..2]).unwrap(), Decoded::NeedMore { needed: 3 });
        assert_eq!(decode_frame(&bytes[..6]).unwrap(), Decoded::NeedMore { needed: 2 });
    }

    #[test]
    fn oversized_and_empty_lengths_rejected() {
        let mut bytes = ((MAX_FRAME_LEN + 1) as u32).to_le_bytes().to_vec();
        bytes.push(1);
        assert!(matches!(decode_frame(&bytes), Err(WireError::FrameTooLarge(_))));
        assert!(matches!(decode_frame(&[0, 0, 0, 0, 1]), Err(WireError::EmptyFrame)));
        let mut ok = (MAX_FRAME_LEN as u32).to_le_bytes().to_vec();
        ok.push(1);
        assert!(matches!(decode_frame(&ok), Ok(Decoded::NeedMore { .. })));
    }

    #[test]
    fn decoder_byte_at_a_time() {
        let frames = [Frame::new(1, vec![9; 10]), Frame::new(0x7f, vec![]), Frame::new(3, b"{}".to_vec())];
        let stream: Vec<u8> = frames.iter().flat_map(Frame::encode).collect();
        let mut d = FrameDecoder::new();
        let mut got = Vec::new();
        for b in stream {
            d.push(&[b]);
            while let Some(f) = d.next_frame().unwrap() {
                got.push(f);
            }
        }
        assert_eq!(got, frames);
        assert_eq!(d.buffered(), 0);
    }
}
