//! Point-to-point messaging between parties.
//!
//! Two interchangeable link types sit behind [`Link`]: ordered in-process
//! channels and TCP streams carrying the same [`Frame`] encoding. Every
//! frame is charged to the session's [`CommLedger`] under its phase tag.

mod config;
mod frame;
mod inproc;
mod ledger;
mod tcp;

use std::time::Duration;

pub use config::PartyConfig;
pub use frame::{Frame, MessageKind, Phase, FRAME_HEADER_BYTES};
pub use inproc::inprocess_mesh;
pub use ledger::{
    ledgers_conserved, report_ledger, CommLedger, LedgerReport, LinkCounters, PartyTotals,
    PhaseCounters,
};
pub use tcp::{tcp_connect, tcp_connect_with_listener};

use crate::error::{Error, Result};
use crate::sharing::{decode_elements, encode_elements};

/// Ordered, reliable byte-frame delivery to one peer.
pub trait Link: Send {
    fn send_frame(&mut self, encoded: Vec<u8>) -> Result<()>;
    fn recv_frame(&mut self, timeout: Duration) -> Result<Vec<u8>>;
}

/// A party's view of the full mesh after the handshake.
pub struct Session {
    party: usize,
    parties: usize,
    links: Vec<Option<Box<dyn Link>>>,
    ledger: CommLedger,
    phase: Phase,
    timeout: Duration,
    config_hash: u32,
}

impl Session {
    /// Runs the config-hash handshake over already-connected links.
    pub fn establish(
        party: usize,
        links: Vec<Option<Box<dyn Link>>>,
        config_hash: u32,
        timeout: Duration,
    ) -> Result<Session> {
        let parties = links.len();
        if party >= parties || links[party].is_some() {
            return Err(Error::Config(format!(
                "party {party} must have an empty self slot among {parties} links"
            )));
        }
        for (j, l) in links.iter().enumerate() {
            if j != party && l.is_none() {
                return Err(Error::Transport(format!("party {party} has no link to {j}")));
            }
        }
        let mut s = Session {
            party,
            parties,
            links,
            ledger: CommLedger::new(party, parties),
            phase: Phase::Online,
            timeout,
            config_hash,
        };
        let mut hello = Vec::with_capacity(8);
        hello.extend_from_slice(&(party as u32).to_le_bytes());
        hello.extend_from_slice(&config_hash.to_le_bytes());
        for peer in s.peers() {
            s.send_frame(peer, MessageKind::Handshake, hello.clone())?;
        }
        let mut mismatch = None;
        for peer in s.peers() {
            let p = s.recv_frame(peer, MessageKind::Handshake)?;
            if p.len() != 8 {
                return Err(Error::Protocol("malformed handshake".into()));
            }
            let id = u32::from_le_bytes(p[0..4].try_into().unwrap()) as usize;
            let remote = u32::from_le_bytes(p[4..8].try_into().unwrap());
            if id != peer {
                return Err(Error::Protocol(format!(
                    "expected handshake from {peer}, got party id {id}"
                )));
            }
            if remote != config_hash && mismatch.is_none() {
                mismatch = Some(Error::IncompatibleConfig {
                    local: config_hash,
                    remote,
                    peer,
                });
            }
        }
        match mismatch {
            Some(e) => Err(e),
            None => Ok(s),
        }
    }

    pub fn party(&self) -> usize {
        self.party
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn config_hash(&self) -> u32 {
        self.config_hash
    }

    pub fn peers(&self) -> impl Iterator<Item = usize> {
        let me = self.party;
        (0..self.parties).filter(move |&j| j != me)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut CommLedger {
        &mut self.ledger
    }

    pub fn into_ledger(self) -> CommLedger {
        self.ledger
    }

    fn link(&mut self, peer: usize) -> Result<&mut Box<dyn Link>> {
        let party = self.party;
        self.links
            .get_mut(peer)
            .and_then(|l| l.as_mut())
            .ok_or_else(|| Error::Usage(format!("party {party} has no link to {peer}")))
    }

    pub fn send_frame(&mut self, peer: usize, kind: MessageKind, payload: Vec<u8>) -> Result<()> {
        let frame = Frame::new(self.phase, kind, payload);
        let len = frame.payload.len();
        let phase = self.phase;
        self.link(peer)?.send_frame(frame.encode())?;
        self.ledger.record_send(peer, phase, len);
        Ok(())
    }

    pub fn recv_frame(&mut self, peer: usize, kind: MessageKind) -> Result<Vec<u8>> {
        let timeout = self.timeout;
        let bytes = self.link(peer)?.recv_frame(timeout)?;
        let frame = Frame::decode(&bytes)?;
        self.ledger.record_recv(peer, frame.phase, frame.payload.len());
        if frame.kind != kind {
            return Err(Error::Protocol(format!(
                "party {} expected {kind:?} from {peer}, got {:?}",
                self.party, frame.kind
            )));
        }
        Ok(frame.payload)
    }

    /// Sends ring elements as one frame: `8 * len` payload bytes.
    pub fn send_elements(&mut self, peer: usize, values: &[u64]) -> Result<()> {
        self.send_frame(peer, MessageKind::Elements, encode_elements(values))
    }

    pub fn recv_elements(&mut self, peer: usize) -> Result<Vec<u64>> {
        let payload = self.recv_frame(peer, MessageKind::Elements)?;
        decode_elements(&payload)
    }

    /// Marks the end of one communication round of the current phase.
    pub fn end_round(&mut self) {
        self.ledger.record_round(self.phase);
    }

    /// Explicit synchronization point: exchanges round indices with every
    /// peer and checks that they agree.
    pub fn round_barrier(&mut self) -> Result<u64> {
        let index = self.ledger.rounds(self.phase);
        for peer in self.peers().collect::<Vec<_>>() {
            self.send_frame(peer, MessageKind::Barrier, index.to_le_bytes().to_vec())?;
        }
        for peer in self.peers().collect::<Vec<_>>() {
            let p = self.recv_frame(peer, MessageKind::Barrier)?;
            let theirs = u64::from_le_bytes(
                p.as_slice()
                    .try_into()
                    .map_err(|_| Error::Protocol("malformed barrier".into()))?,
            );
            if theirs != index {
                return Err(Error::Protocol(format!(
                    "round mismatch at barrier: party {} at {index}, party {peer} at {theirs}",
                    self.party
                )));
            }
        }
        self.end_round();
        Ok(self.ledger.rounds(self.phase))
    }
}
