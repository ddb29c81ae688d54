//! UDP endpoints carrying exactly one OSC packet per datagram.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use crate::osc::{self, OscError, OscPacket};

/// Largest UDP payload over IPv4.
pub const MAX_DATAGRAM: usize = 65_507;

/// Community default port for OSC-driven synths.
pub const DEFAULT_TARGET_PORT: u16 = 4560;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
    #[error("encoded packet is {0} bytes, above the {MAX_DATAGRAM}-byte datagram limit")]
    OversizePacket(usize),
    #[error(transparent)]
    Encode(#[from] OscError),
    #[error("send to {dest} failed: {source}")]
    SendFailure { dest: SocketAddr, source: io::Error },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EndpointStats {
    pub sent: u64,
    pub received: u64,
    pub decode_failures: u64,
}

/// A bound UDP socket speaking OSC.
///
/// `send` may be called from several threads while one consumer polls.
#[derive(Debug)]
pub struct Endpoint {
    socket: UdpSocket,
    sent: AtomicU64,
    received: AtomicU64,
    decode_failures: AtomicU64,
}

impl Endpoint {
    pub fn open(bind: impl ToSocketAddrs + std::fmt::Debug) -> Result<Endpoint, TransportError> {
        let socket = UdpSocket::bind(&bind).map_err(|source| TransportError::BindFailure {
            addr: format!("{bind:?}"),
            source,
        })?;
        Ok(Endpoint {
            socket,
            sent: AtomicU64::new(0),
            received: AtomicU64::new(0),
            decode_failures: AtomicU64::new(0),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn stats(&self) -> EndpointStats {
        EndpointStats {
            sent: self.sent.load(Ordering::Relaxed),
            received: self.received.load(Ordering::Relaxed),
            decode_failures: self.decode_failures.load(Ordering::Relaxed),
        }
    }

    /// Encode `packet` and dispatch it as a single datagram.
    ///
    /// The sent counter counts datagrams the OS accepted; whether they
    /// arrive is up to the network.
    pub fn send(&self, packet: &OscPacket, dest: SocketAddr) -> Result<(), TransportError> {
        let bytes = osc::encode(packet)?;
        self.send_raw(&bytes, dest)
    }

    /// Dispatch pre-encoded bytes. Used by tests and the debug sender.
    pub fn send_raw(&self, bytes: &[u8], dest: SocketAddr) -> Result<(), TransportError> {
        if bytes.len() > MAX_DATAGRAM {
            return Err(TransportError::OversizePacket(bytes.len()));
        }
        self.socket
            .send_to(bytes, dest)
            .map_err(|source| TransportError::SendFailure { dest, source })?;
        self.sent.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Wait up to `timeout` for traffic, then drain every queued datagram.
    ///
    /// Datagrams that do not decode are counted and dropped.
    pub fn poll(&self, timeout: Duration) -> Vec<(OscPacket, SocketAddr)> {
        let mut out = Vec::new();
        let mut buf = vec![0u8; MAX_DATAGRAM + 1];
        let first = if timeout.is_zero() {
            None
        } else {
            // A zero read timeout means "block forever" to the OS.
            self.socket.set_nonblocking(false).ok();
            self.socket.set_read_timeout(Some(timeout)).ok();
            self.socket.recv_from(&mut buf).ok()
        };
        if let Some((n, from)) = first {
            self.accept(&buf[..n], from, &mut out);
        } else if !timeout.is_zero() {
            return out;
        }
        if self.socket.set_nonblocking(true).is_err() {
            return out;
        }
        while let Ok((n, from)) = self.socket.recv_from(&mut buf) {
            self.accept(&buf[..n], from, &mut out);
        }
        self.socket.set_nonblocking(false).ok();
        out
    }

    fn accept(&self, datagram: &[u8], from: SocketAddr, out: &mut Vec<(OscPacket, SocketAddr)>) {
        match osc::decode(datagram) {
            Ok(packet) => {
                self.received.fetch_add(1, Ordering::Relaxed);
                out.push((packet, from));
            }
            Err(err) => {
                self.decode_failures.fetch_add(1, Ordering::Relaxed);
                log::warn!(
                    "dropping {}-byte datagram from {from}: {err}",
                    datagram.len()
                );
            }
        }
    }
}
