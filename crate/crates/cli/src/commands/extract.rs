use std::fs::File;
use std::io::{BufWriter, Write};

use flowhunter::dataset::{label_by_ip, read_infected_ips};
use flowhunter::flow::FlowWriter;
use flowhunter::ingest::extract_flows;

use super::{aggregator, write_err};
use crate::args::ExtractArgs;
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub fn run(a: &ExtractArgs, cfg: &Config) -> CliResult<()> {
    let agg = aggregator(&a.aggregator, &cfg.aggregator)?;
    if !a.pcap.exists() {
        return Err(CliError::data(format!("{}: no such file", a.pcap.display())));
    }
    let infected = a.infected_ips.as_deref().map(read_infected_ips).transpose()?;
    let mut flows = extract_flows(&a.pcap, agg).map_err(|e| CliError::from(e).context(a.pcap.display()))?;
    if let Some(ips) = &infected {
        flows = label_by_ip(flows, ips)?;
    }

    let out = File::create(&a.output).map_err(|e| write_err(&a.output, e))?;
    let mut w = FlowWriter::new(BufWriter::new(out)).map_err(|e| write_err(&a.output, e))?;
    for f in &flows {
        w.write(f).map_err(|e| write_err(&a.output, e))?;
    }
    w.into_inner()
        .and_then(|mut b| b.flush())
        .map_err(|e| write_err(&a.output, e))?;
    println!("{} flows written to {}", flows.len(), a.output.display());
    Ok(())
}
