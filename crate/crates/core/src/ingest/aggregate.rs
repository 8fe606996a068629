//! Bidirectional flow aggregation over a time-ordered packet stream.

use std::collections::{HashMap, VecDeque};
use std::net::Ipv4Addr;

use thiserror::Error;

use super::packet::{proto_name, PacketSummary};
use crate::flow::{FlowRecord, Timestamp};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid aggregator config: {0}")]
pub struct ConfigError(pub String);

/// Flush policy, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatorConfig {
    pub idle_timeout: f64,
    pub active_timeout: f64,
    pub status_interval: f64,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        AggregatorConfig {
            idle_timeout: 60.0,
            active_timeout: 3600.0,
            status_interval: 5.0,
        }
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.idle_timeout) || !ok(self.active_timeout) || !ok(self.status_interval) {
            return Err(ConfigError("timeouts must be positive".into()));
        }
        if self.idle_timeout > self.active_timeout {
            return Err(ConfigError("idle_timeout exceeds active_timeout".into()));
        }
        Ok(())
    }
}

/// Smallest standard initial TTL at or above the observed value, minus it.
pub fn estimate_hops(observed_ttl: u8) -> u8 {
    let initial: u16 = [32u16, 64, 128, 255]
        .into_iter()
        .find(|i| *i >= observed_ttl as u16)
        .unwrap_or(255);
    (initial - observed_ttl as u16) as u8
}

type Endpoint = (Ipv4Addr, Option<u16>);

/// Direction-free flow identity: `key(A->B) == key(B->A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowKey {
    lo: Endpoint,
    hi: Endpoint,
    proto: u8,
}

impl FlowKey {
    pub fn of(p: &PacketSummary) -> Self {
        let a = (p.src_addr, p.sport);
        let b = (p.dst_addr, p.dport);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        FlowKey { lo, hi, proto: p.proto }
    }
}

#[derive(Debug, Clone)]
struct FlowState {
    seq: u64,
    src: Endpoint,
    dst: Endpoint,
    proto: u8,
    start: Timestamp,
    last: Timestamp,
    src_pkts: u64,
    dst_pkts: u64,
    src_bytes: u64,
    dst_bytes: u64,
    s_app: u64,
    d_app: u64,
    s_tos: Option<u8>,
    d_tos: Option<u8>,
    s_ttl: Option<u8>,
    d_ttl: Option<u8>,
    src_win: Option<u32>,
    dst_win: Option<u32>,
    syn: Option<Timestamp>,
    syn_ack: Option<Timestamp>,
    ack_dat: Option<Timestamp>,
    fin_src: bool,
    fin_dst: bool,
    rst: bool,
}

impl FlowState {
    fn open(seq: u64, p: &PacketSummary) -> Self {
        FlowState {
            seq,
            src: (p.src_addr, p.sport),
            dst: (p.dst_addr, p.dport),
            proto: p.proto,
            start: p.timestamp,
            last: p.timestamp,
            src_pkts: 0,
            dst_pkts: 0,
            src_bytes: 0,
            dst_bytes: 0,
            s_app: 0,
            d_app: 0,
            s_tos: None,
            d_tos: None,
            s_ttl: None,
            d_ttl: None,
            src_win: None,
            dst_win: None,
            syn: None,
            syn_ack: None,
            ack_dat: None,
            fin_src: false,
            fin_dst: false,
            rst: false,
        }
    }

    fn closed(&self) -> bool {
        self.rst || (self.fin_src && self.fin_dst)
    }

    fn add(&mut self, p: &PacketSummary) {
        let forward = (p.src_addr, p.sport) == self.src;
        self.last = self.last.max(p.timestamp);
        let is_tcp = p.proto == 6;
        let f = p.tcp_flags;
        if forward {
            self.src_pkts += 1;
            self.src_bytes += p.ip_total_len as u64;
            self.s_app += p.l4_payload_len as u64;
            self.s_tos.get_or_insert(p.tos);
            self.s_ttl.get_or_insert(p.ttl);
            if is_tcp {
                self.src_win.get_or_insert(p.tcp_window);
                if f.syn() && !f.ack() && self.syn.is_none() {
                    self.syn = Some(p.timestamp);
                }
                if f.ack() && !f.syn() && self.syn_ack.is_some() && self.ack_dat.is_none() {
                    self.ack_dat = Some(p.timestamp);
                }
                self.fin_src |= f.fin();
            }
        } else {
            self.dst_pkts += 1;
            self.dst_bytes += p.ip_total_len as u64;
            self.d_app += p.l4_payload_len as u64;
            self.d_tos.get_or_insert(p.tos);
            self.d_ttl.get_or_insert(p.ttl);
            if is_tcp {
                self.dst_win.get_or_insert(p.tcp_window);
                if f.syn() && f.ack() && self.syn.is_some() && self.syn_ack.is_none() {
                    self.syn_ack = Some(p.timestamp);
                }
                self.fin_dst |= f.fin();
            }
        }
        if is_tcp {
            self.rst |= f.rst();
        }
    }

    fn state_name(&self) -> &'static str {
        if self.proto != 6 {
            "INT"
        } else if self.rst {
            "RST"
        } else if self.fin_src && self.fin_dst {
            "FIN"
        } else if self.ack_dat.is_some() {
            "EST"
        } else if self.syn.is_some() {
            "SYN"
        } else {
            "CON"
        }
    }

    fn to_record(&self) -> FlowRecord {
        let dur = self.last.secs_since(self.start);
        let per_sec = |n: u64| if dur > 0.0 { n as f64 / dur } else { 0.0 };
        let s_ttl = self.s_ttl.unwrap_or(0);
        let d_ttl = self.d_ttl.unwrap_or(0);
        let (syn_ack, ack_dat, tcp_rtt) = match (self.syn, self.syn_ack, self.ack_dat) {
            (Some(s), Some(sa), Some(a)) => (sa.secs_since(s), a.secs_since(sa), a.secs_since(s)),
            (Some(s), Some(sa), None) => (sa.secs_since(s), 0.0, 0.0),
            _ => (0.0, 0.0, 0.0),
        };
        let tot_pkts = self.src_pkts + self.dst_pkts;
        FlowRecord {
            src_addr: self.src.0.to_string(),
            dst_addr: self.dst.0.to_string(),
            proto: proto_name(self.proto),
            sport: self.src.1,
            dport: self.dst.1,
            state: self.state_name().to_string(),
            s_tos: self.s_tos.unwrap_or(0),
            d_tos: self.d_tos.unwrap_or(0),
            src_win: self.src_win.unwrap_or(0),
            dst_win: self.dst_win.unwrap_or(0),
            s_hops: if self.src_pkts > 0 { estimate_hops(s_ttl) } else { 0 },
            d_hops: if self.dst_pkts > 0 { estimate_hops(d_ttl) } else { 0 },
            start_time: self.start,
            last_time: self.last,
            s_ttl,
            d_ttl,
            tcp_rtt,
            syn_ack,
            ack_dat,
            src_pkts: self.src_pkts,
            dst_pkts: self.dst_pkts,
            tot_pkts,
            src_bytes: self.src_bytes,
            dst_bytes: self.dst_bytes,
            tot_bytes: self.src_bytes + self.dst_bytes,
            s_app_bytes: self.s_app,
            d_app_bytes: self.d_app,
            tot_app_bytes: self.s_app + self.d_app,
            dur,
            rate: per_sec(tot_pkts),
            src_rate: per_sec(self.src_pkts),
            dst_rate: per_sec(self.dst_pkts),
            label: None,
        }
    }
}

/// Single-writer flow table.
///
/// Timestamps that step backwards are clamped to the latest time seen so
/// flow durations never go negative.
pub struct Aggregator {
    cfg: AggregatorConfig,
    table: HashMap<FlowKey, FlowState>,
    next_seq: u64,
    clock: Option<Timestamp>,
    last_sweep: Option<Timestamp>,
    ready: VecDeque<FlowRecord>,
}

impl Aggregator {
    pub fn new(cfg: AggregatorConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Aggregator {
            cfg,
            table: HashMap::new(),
            next_seq: 0,
            clock: None,
            last_sweep: None,
            ready: VecDeque::new(),
        })
    }

    pub fn active_flows(&self) -> usize {
        self.table.len()
    }

    fn micros(secs: f64) -> i64 {
        (secs * 1e6).round() as i64
    }

    pub fn push(&mut self, packet: &PacketSummary) {
        let mut p = packet.clone();
        if let Some(c) = self.clock {
            p.timestamp = p.timestamp.max(c);
        }
        self.clock = Some(p.timestamp);
        let now = p.timestamp;
        let key = FlowKey::of(&p);
        let idle = Self::micros(self.cfg.idle_timeout);
        let active = Self::micros(self.cfg.active_timeout);

        if let Some(st) = self.table.get(&key) {
            let expired = now.micros() - st.last.micros() > idle
                || now.micros() - st.start.micros() > active
                || (st.closed() && p.tcp_flags.syn() && !p.tcp_flags.ack());
            if expired {
                let st = self.table.remove(&key).unwrap();
                self.ready.push_back(st.to_record());
            }
        }
        let seq = self.next_seq;
        let st = self.table.entry(key).or_insert_with(|| FlowState::open(seq, &p));
        if st.seq == seq {
            self.next_seq += 1;
        }
        st.add(&p);
        if st.rst {
            let st = self.table.remove(&key).unwrap();
            self.ready.push_back(st.to_record());
        }

        let due = match self.last_sweep {
            None => {
                self.last_sweep = Some(now);
                false
            }
            Some(t) => now.micros() - t.micros() >= Self::micros(self.cfg.status_interval),
        };
        if due {
            self.sweep(now);
        }
    }

    /// Flushes idle, over-age and completed flows as of `now`.
    pub fn sweep(&mut self, now: Timestamp) {
        let now = self.clock.map_or(now, |c| c.max(now));
        self.last_sweep = Some(now);
        let idle = Self::micros(self.cfg.idle_timeout);
        let active = Self::micros(self.cfg.active_timeout);
        let mut done: Vec<FlowKey> = self
            .table
            .iter()
            .filter(|(_, st)| {
                st.closed()
                    || now.micros() - st.last.micros() > idle
                    || now.micros() - st.start.micros() > active
            })
            .map(|(k, _)| *k)
            .collect();
        done.sort_by_key(|k| self.table[k].seq);
        for k in done {
            let st = self.table.remove(&k).unwrap();
            self.ready.push_back(st.to_record());
        }
    }

    pub fn pop_ready(&mut self) -> Option<FlowRecord> {
        self.ready.pop_front()
    }

    /// Flushes everything still open, in creation order.
    pub fn finish(&mut self) -> Vec<FlowRecord> {
        let mut out: Vec<FlowRecord> = self.ready.drain(..).collect();
        let mut rest: Vec<FlowState> = self.table.drain().map(|(_, v)| v).collect();
        rest.sort_by_key(|s| s.seq);
        out.extend(rest.iter().map(FlowState::to_record));
        out
    }
}

/// Lazy adapter turning a packet iterator into a flow iterator.
pub struct Aggregate<I> {
    packets: I,
    agg: Aggregator,
    tail: Option<std::vec::IntoIter<FlowRecord>>,
}

impl<I: Iterator<Item = PacketSummary>> Iterator for Aggregate<I> {
    type Item = FlowRecord;

    fn next(&mut self) -> Option<FlowRecord> {
        loop {
            if let Some(tail) = &mut self.tail {
                return tail.next();
            }
            if let Some(f) = self.agg.pop_ready() {
                return Some(f);
            }
            match self.packets.next() {
                Some(p) => self.agg.push(&p),
                None => self.tail = Some(self.agg.finish().into_iter()),
            }
        }
    }
}

pub fn aggregate<I>(packets: I, cfg: AggregatorConfig) -> Result<Aggregate<I::IntoIter>, ConfigError>
where
    I: IntoIterator<Item = PacketSummary>,
{
    Ok(Aggregate {
        packets: packets.into_iter(),
        agg: Aggregator::new(cfg)?,
        tail: None,
    })
}
