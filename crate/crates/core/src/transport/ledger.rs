//! Per-party, per-peer, per-phase communication accounting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::frame::{Phase, FRAME_HEADER_BYTES};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounters {
    /// Wire bytes, frame headers included.
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Payload bytes only.
    pub payload_sent: u64,
    pub payload_received: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

impl LinkCounters {
    fn add(&mut self, other: &LinkCounters) {
        self.bytes_sent += other.bytes_sent;
        self.bytes_received += other.bytes_received;
        self.payload_sent += other.payload_sent;
        self.payload_received += other.payload_received;
        self.messages_sent += other.messages_sent;
        self.messages_received += other.messages_received;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounters {
    /// Indexed by peer id; the party's own slot stays zero.
    pub peers: Vec<LinkCounters>,
    pub rounds: u64,
}

impl PhaseCounters {
    pub fn total(&self) -> LinkCounters {
        let mut t = LinkCounters::default();
        for p in &self.peers {
            t.add(p);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub party: usize,
    pub parties: usize,
    pub offline: PhaseCounters,
    pub online: PhaseCounters,
    /// Bytes of dealer material read from disk, reported apart from network traffic.
    pub offline_file_bytes: u64,
}

impl CommLedger {
    pub fn new(party: usize, parties: usize) -> Self {
        let empty = PhaseCounters {
            peers: vec![LinkCounters::default(); parties],
            rounds: 0,
        };
        CommLedger {
            party,
            parties,
            offline: empty.clone(),
            online: empty,
            offline_file_bytes: 0,
        }
    }

    pub fn phase(&self, phase: Phase) -> &PhaseCounters {
        match phase {
            Phase::Offline => &self.offline,
            Phase::Online => &self.online,
        }
    }

    fn phase_mut(&mut self, phase: Phase) -> &mut PhaseCounters {
        match phase {
            Phase::Offline => &mut self.offline,
            Phase::Online => &mut self.online,
        }
    }

    pub fn record_send(&mut self, peer: usize, phase: Phase, payload: usize) {
        let c = &mut self.phase_mut(phase).peers[peer];
        c.bytes_sent += (payload + FRAME_HEADER_BYTES) as u64;
        c.payload_sent += payload as u64;
        c.messages_sent += 1;
    }

    pub fn record_recv(&mut self, peer: usize, phase: Phase, payload: usize) {
        let c = &mut self.phase_mut(phase).peers[peer];
        c.bytes_received += (payload + FRAME_HEADER_BYTES) as u64;
        c.payload_received += payload as u64;
        c.messages_received += 1;
    }

    pub fn record_round(&mut self, phase: Phase) {
        self.phase_mut(phase).rounds += 1;
    }

    pub fn bytes_sent(&self, phase: Phase) -> u64 {
        self.phase(phase).total().bytes_sent
    }

    pub fn payload_sent(&self, phase: Phase) -> u64 {
        self.phase(phase).total().payload_sent
    }

    pub fn rounds(&self, phase: Phase) -> u64 {
        self.phase(phase).rounds
    }

    pub fn total_bytes_sent(&self) -> u64 {
        self.bytes_sent(Phase::Offline) + self.bytes_sent(Phase::Online)
    }
}

/// Aggregated view over all parties of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerReport {
    pub parties: Vec<PartyTotals>,
    pub online_bytes_max: u64,
    pub online_bytes_total: u64,
    pub offline_bytes_total: u64,
    pub conserved: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartyTotals {
    pub party: usize,
    pub offline_bytes_sent: u64,
    pub online_bytes_sent: u64,
    pub total_bytes_sent: u64,
    pub offline_bytes_received: u64,
    pub online_bytes_received: u64,
    pub online_payload_sent: u64,
    pub offline_rounds: u64,
    pub online_rounds: u64,
    pub offline_file_bytes: u64,
}

/// Checks that every directed link's sent count equals the peer's received count.
pub fn ledgers_conserved(ledgers: &[CommLedger]) -> bool {
    for a in ledgers {
        for b in ledgers {
            if a.party == b.party {
                continue;
            }
            for phase in Phase::ALL {
                let sent = &a.phase(phase).peers[b.party];
                let recv = &b.phase(phase).peers[a.party];
                if sent.bytes_sent != recv.bytes_received
                    || sent.messages_sent != recv.messages_received
                    || sent.payload_sent != recv.payload_received
                {
                    return false;
                }
            }
        }
    }
    true
}

pub fn report_ledger(ledgers: &[CommLedger]) -> LedgerReport {
    let parties: Vec<PartyTotals> = ledgers
        .iter()
        .map(|l| {
            let off = l.offline.total();
            let on = l.online.total();
            PartyTotals {
                party: l.party,
                offline_bytes_sent: off.bytes_sent,
                online_bytes_sent: on.bytes_sent,
                total_bytes_sent: off.bytes_sent + on.bytes_sent,
                offline_bytes_received: off.bytes_received,
                online_bytes_received: on.bytes_received,
                online_payload_sent: on.payload_sent,
                offline_rounds: l.offline.rounds,
                online_rounds: l.online.rounds,
                offline_file_bytes: l.offline_file_bytes,
            }
        })
        .collect();
    LedgerReport {
        online_bytes_max: parties.iter().map(|p| p.online_bytes_sent).max().unwrap_or(0),
        online_bytes_total: parties.iter().map(|p| p.online_bytes_sent).sum(),
        offline_bytes_total: parties.iter().map(|p| p.offline_bytes_sent).sum(),
        conserved: ledgers_conserved(ledgers),
        parties,
    }
}

impl LedgerReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger report serializes")
    }

    pub fn to_table(&self) -> String {
        let mb = |b: u64| b as f64 / 1e6;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5} | {:>14} {:>14} {:>14} | {:>8} {:>8} | {:>12}",
            "party", "offline MB", "online MB", "total MB", "off rnds", "on rnds", "file MB"
        );
        let _ = writeln!(s, "{}", "-".repeat(92));
        for p in &self.parties {
            let _ = writeln!(
                s,
                "{:>5} | {:>14.3} {:>14.3} {:>14.3} | {:>8} {:>8} | {:>12.3}",
                p.party,
                mb(p.offline_bytes_sent),
                mb(p.online_bytes_sent),
                mb(p.total_bytes_sent),
                p.offline_rounds,
                p.online_rounds,
                mb(p.offline_file_bytes)
            );
        }
        let _ = writeln!(
            s,
            "online MB per party (max) {:.3}; all parties {:.3}; ledger conserved: {}",
            mb(self.online_bytes_max),
            mb(self.online_bytes_total),
            self.conserved
        );
        s
    }
}
