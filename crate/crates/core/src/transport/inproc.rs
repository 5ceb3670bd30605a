use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::Link;
use crate::error::{Error, Result};

struct ChannelLink {
    peer: usize,
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl Link for ChannelLink {
    fn send_frame(&mut self, encoded: Vec<u8>) -> Result<()> {
        self.tx
            .send(encoded)
            .map_err(|_| Error::Transport(format!("party {} disconnected", self.peer)))
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Vec<u8>> {
        match self.rx.recv_timeout(timeout) {
            Ok(b) => Ok(b),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout { peer: self.peer }),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport(format!("party {} disconnected", self.peer)))
            }
        }
    }
}

/// Full mesh of in-process channels; entry `i` holds party `i`'s links,
/// indexed by peer, with `None` in its own slot.
pub fn inprocess_mesh(n: usize) -> Vec<Vec<Option<Box<dyn Link>>>> {
    let mut mesh: Vec<Vec<Option<Box<dyn Link>>>> =
        (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let (tx_ij, rx_ij) = channel();
            let (tx_ji, rx_ji) = channel();
            mesh[i][j] = Some(Box::new(ChannelLink {
                peer: j,
                tx: tx_ij,
                rx: rx_ji,
            }));
            mesh[j][i] = Some(Box::new(ChannelLink {
                peer: i,
                tx: tx_ji,
                rx: rx_ij,
            }));
        }
    }
    mesh
}
