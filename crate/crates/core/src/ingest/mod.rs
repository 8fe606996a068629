//! Packet sources and flow extraction.

pub mod aggregate;
pub mod capture;
pub mod packet;
pub mod pcap;

use std::path::Path;

pub use aggregate::{aggregate, estimate_hops, Aggregator, AggregatorConfig, FlowKey};
pub use capture::{CaptureError, LiveCapture};
pub use packet::{decode_packet, DecodeError, Decoded, LinkType, PacketSummary, TcpFlags};
pub use pcap::{read_pcap, PacketStream, PcapError, PcapReader, PcapWriter};

use crate::flow::FlowRecord;

/// Reads a pcap file and aggregates it into flows with `cfg`.
pub fn extract_flows(path: &Path, cfg: AggregatorConfig) -> Result<Vec<FlowRecord>, ExtractError> {
    let stream = read_pcap(path)?;
    let mut agg = Aggregator::new(cfg).map_err(|e| ExtractError::Config(e.0))?;
    let mut out = Vec::new();
    for p in stream {
        agg.push(&p?);
        while let Some(f) = agg.pop_ready() {
            out.push(f);
        }
    }
    out.extend(agg.finish());
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error("invalid aggregator config: {0}")]
    Config(String),
}
