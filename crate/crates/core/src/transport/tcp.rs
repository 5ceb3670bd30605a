use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::frame::{Frame, FRAME_HEADER_BYTES};
use super::Link;
use crate::error::{Error, Result};

struct TcpLink {
    peer: usize,
    writer: BufWriter<TcpStream>,
    rx: Receiver<Vec<u8>>,
}

impl Link for TcpLink {
    fn send_frame(&mut self, encoded: Vec<u8>) -> Result<()> {
        self.writer
            .write_all(&encoded)
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::Transport(format!("send to party {} failed: {e}", self.peer)))
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Vec<u8>> {
        match self.rx.recv_timeout(timeout) {
            Ok(b) => Ok(b),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout { peer: self.peer }),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport(format!("party {} closed the connection", self.peer)))
            }
        }
    }
}

/// Reads whole frames off the socket on a background thread so that a
/// large send never blocks on a peer that is itself sending.
fn spawn_reader(stream: TcpStream) -> Receiver<Vec<u8>> {
    let (tx, rx) = channel();
    thread::spawn(move || {
        let mut r = BufReader::with_capacity(1 << 16, stream);
        loop {
            let mut header = [0u8; FRAME_HEADER_BYTES];
            if r.read_exact(&mut header).is_err() {
                return;
            }
            let len = Frame::header_payload_len(&header);
            let mut buf = Vec::with_capacity(FRAME_HEADER_BYTES + len);
            buf.extend_from_slice(&header);
            buf.resize(FRAME_HEADER_BYTES + len, 0);
            if r.read_exact(&mut buf[FRAME_HEADER_BYTES..]).is_err() {
                return;
            }
            if tx.send(buf).is_err() {
                return;
            }
        }
    });
    rx
}

fn make_link(peer: usize, stream: TcpStream) -> Result<Box<dyn Link>> {
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    Ok(Box::new(TcpLink {
        peer,
        writer: BufWriter::with_capacity(1 << 16, stream),
        rx: spawn_reader(reader),
    }))
}

/// Binds `addrs[party]` and builds the full mesh. Lower ids accept, higher
/// ids connect; each connection opens with the connector's 4-byte id.
pub fn tcp_connect(
    party: usize,
    addrs: &[SocketAddr],
    timeout: Duration,
) -> Result<Vec<Option<Box<dyn Link>>>> {
    let listener = TcpListener::bind(addrs.get(party).ok_or_else(|| {
        Error::Config(format!("no address configured for party {party}"))
    })?)?;
    tcp_connect_with_listener(party, listener, addrs, timeout)
}

pub fn tcp_connect_with_listener(
    party: usize,
    listener: TcpListener,
    addrs: &[SocketAddr],
    timeout: Duration,
) -> Result<Vec<Option<Box<dyn Link>>>> {
    let n = addrs.len();
    let mut links: Vec<Option<Box<dyn Link>>> = (0..n).map(|_| None).collect();
    let deadline = Instant::now() + timeout;

    for (peer, addr) in addrs.iter().enumerate().take(party) {
        let stream = loop {
            match TcpStream::connect(addr) {
                Ok(s) => break s,
                Err(e) => {
                    if Instant::now() >= deadline {
                        return Err(Error::Transport(format!(
                            "party {peer} at {addr} unreachable: {e}"
                        )));
                    }
                    thread::sleep(Duration::from_millis(50));
                }
            }
        };
        let mut s = stream;
        s.write_all(&(party as u32).to_le_bytes())?;
        links[peer] = Some(make_link(peer, s)?);
    }

    listener.set_nonblocking(true)?;
    let mut pending = n - party - 1;
    while pending > 0 {
        match listener.accept() {
            Ok((mut s, _)) => {
                s.set_nonblocking(false)?;
                s.set_read_timeout(Some(timeout))?;
                let mut id = [0u8; 4];
                s.read_exact(&mut id)?;
                s.set_read_timeout(None)?;
                let peer = u32::from_le_bytes(id) as usize;
                if peer <= party || peer >= n || links[peer].is_some() {
                    return Err(Error::Transport(format!("unexpected connection from id {peer}")));
                }
                links[peer] = Some(make_link(peer, s)?);
                pending -= 1;
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Transport(format!(
                        "party {party} timed out waiting for {pending} peer(s)"
                    )));
                }
                thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(links)
}
