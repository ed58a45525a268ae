//! Datagram transport for bus envelopes.
//!
//! Wire layout, integers little-endian:
//!
//! ```text
//! u8  topic_len
//! ..  topic (UTF-8, topic_len bytes)
//! u32 publisher
//! u64 seq
//! u64 timestamp_us
//! u32 payload_len
//! ..  payload
//! ```

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use super::Envelope;

pub const MAX_DATAGRAM: usize = 65_507;
const FIXED: usize = 1 + 4 + 8 + 8 + 4;

pub fn encode_envelope(env: &Envelope) -> io::Result<Vec<u8>> {
    let topic = env.topic.as_bytes();
    if topic.len() > u8::MAX as usize {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "topic longer than 255 bytes",
        ));
    }
    if FIXED + topic.len() + env.payload.len() > MAX_DATAGRAM {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "envelope exceeds datagram size",
        ));
    }
    let mut out = Vec::with_capacity(FIXED + topic.len() + env.payload.len());
    out.push(topic.len() as u8);
    out.extend_from_slice(topic);
    out.extend_from_slice(&env.publisher.to_le_bytes());
    out.extend_from_slice(&env.seq.to_le_bytes());
    out.extend_from_slice(&env.timestamp_us.to_le_bytes());
    out.extend_from_slice(&(env.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&env.payload);
    Ok(out)
}

pub fn decode_envelope(bytes: &[u8]) -> Option<Envelope> {
    let tl = *bytes.first()? as usize;
    if bytes.len() < FIXED + tl {
        return None;
    }
    let topic = std::str::from_utf8(&bytes[1..1 + tl]).ok()?.to_string();
    let mut p = 1 + tl;
    let mut take = |n: usize| {
        let s = &bytes[p..p + n];
        p += n;
        s
    };
    let publisher = u32::from_le_bytes(take(4).try_into().ok()?);
    let seq = u64::from_le_bytes(take(8).try_into().ok()?);
    let timestamp_us = u64::from_le_bytes(take(8).try_into().ok()?);
    let len = u32::from_le_bytes(take(4).try_into().ok()?) as usize;
    if bytes.len() != p + len {
        return None;
    }
    Some(Envelope {
        topic,
        publisher,
        seq,
        timestamp_us,
        payload: bytes[p..].to_vec(),
    })
}

/// A UDP socket exchanging envelopes with peers.
#[derive(Debug)]
pub struct DatagramEndpoint {
    socket: UdpSocket,
}

impl DatagramEndpoint {
    pub fn bind(addr: SocketAddr) -> io::Result<Self> {
        Ok(Self {
            socket: UdpSocket::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn send_to(&self, env: &Envelope, peer: SocketAddr) -> io::Result<()> {
        self.socket
            .send_to(&encode_envelope(env)?, peer)
            .map(|_| ())
    }

    /// Next well-formed envelope, or `None` on timeout. Malformed
    /// datagrams are skipped.
    pub fn recv(&self, timeout: Duration) -> io::Result<Option<Envelope>> {
        self.socket
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        let mut buf = vec![0u8; MAX_DATAGRAM];
        loop {
            match self.socket.recv_from(&mut buf) {
                Ok((n, _)) => {
                    if let Some(env) = decode_envelope(&buf[..n]) {
                        return Ok(Some(env));
                    }
                }
                Err(e)
                    if matches!(
                        e.kind(),
                        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                    ) =>
                {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Envelope {
        Envelope {
            topic: "nav/estimate".into(),
            publisher: 7,
            seq: 42,
            timestamp_us: 123_456,
            payload: vec![1, 2, 3],
        }
    }

    #[test]
    fn envelope_round_trip() {
        let bytes = encode_envelope(&env()).unwrap();
        assert_eq!(bytes.len(), FIXED + 12 + 3);
        assert_eq!(decode_envelope(&bytes), Some(env()));
        assert_eq!(decode_envelope(&bytes[..bytes.len() - 1]), None);
    }

    #[test]
    fn loopback_delivery() {
        let a = DatagramEndpoint::bind("127.0.0.1:0".parse().unwrap()).unwrap();
        let b = DatagramEndpoint::bind("127.0.0.1:0".parse().unwrap()).unwrap();
        a.send_to(&env(), b.local_addr().unwrap()).unwrap();
        assert_eq!(b.recv(Duration::from_secs(2)).unwrap(), Some(env()));
    }
}
