//! Flow records and the comma-delimited `.binetflow` text format.
//!
//! A [`FlowRecord`] is one bidirectional, payload-free flow carrying the
//! 33 extended fields. Text lines are mapped onto records through a
//! [`FieldOrder`], normally taken from the file header.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const TIMESTAMP_FORMAT: &str = "%Y/%m/%d %H:%M:%S%.6f";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column} ({field}): cannot parse {token:?}")]
    NumericParse {
        line: usize,
        column: usize,
        field: &'static str,
        token: String,
    },
    #[error("unknown flow field {0:?}")]
    UnknownField(String),
    #[error("missing header line")]
    MissingHeader,
    #[error("i/o error: {0}")]
    Io(String),
}

impl FlowError {
    fn at_line(self, n: usize) -> Self {
        match self {
            FlowError::FieldCountMismatch {
                expected, found, ..
            } => FlowError::FieldCountMismatch {
                line: n,
                expected,
                found,
            },
            FlowError::NumericParse {
                column,
                field,
                token,
                ..
            } => FlowError::NumericParse {
                line: n,
                column,
                field,
                token,
            },
            other => other,
        }
    }
}

/// Binary class of a flow. Botnet is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelClass {
    Normal,
    Botnet,
}

impl LabelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelClass::Normal => "Normal",
            LabelClass::Botnet => "Botnet",
        }
    }

    pub fn is_botnet(self) -> bool {
        self == LabelClass::Botnet
    }

    /// Index used by per-class arrays: Normal = 0, Botnet = 1.
    pub fn index(self) -> usize {
        match self {
            LabelClass::Normal => 0,
            LabelClass::Botnet => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            LabelClass::Normal
        } else {
            LabelClass::Botnet
        }
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Normal" => Ok(LabelClass::Normal),
            "Botnet" => Ok(LabelClass::Botnet),
            other => Err(format!("not a class label: {other:?}")),
        }
    }
}

/// Microseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_micros(us: i64) -> Self {
        Timestamp(us)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Seconds elapsed from `earlier` to `self`.
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1e6
    }

    /// Accepts `YYYY/MM/DD HH:MM:SS[.ffffff]`, RFC 3339 or raw epoch seconds.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT) {
            return Some(Timestamp(dt.and_utc().timestamp_micros()));
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.timestamp_micros()));
        }
        let secs: f64 = s.parse().ok()?;
        if !secs.is_finite() || secs.abs() > 1e13 {
            return None;
        }
        Some(Timestamp((secs * 1e6).round() as i64))
    }

    pub fn to_rfc3339(self) -> String {
        match DateTime::from_timestamp_micros(self.0) {
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string(),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::from_timestamp_micros(self.0) {
            Some(dt) => write!(f, "{}", dt.format(TIMESTAMP_FORMAT)),
            None => write!(f, "{:.6}", self.as_secs_f64()),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp {s:?}")))
    }
}

/// One bidirectional network flow.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowRecord {
    pub src_addr: String,
    pub dst_addr: String,
    pub proto: String,
    pub sport: Option<u16>,
    pub dport: Option<u16>,
    pub state: String,
    pub s_tos: u8,
    pub d_tos: u8,
    pub src_win: u32,
    pub dst_win: u32,
    pub s_hops: u8,
    pub d_hops: u8,
    pub start_time: Timestamp,
    pub last_time: Timestamp,
    pub s_ttl: u8,
    pub d_ttl: u8,
    pub tcp_rtt: f64,
    pub syn_ack: f64,
    pub ack_dat: f64,
    pub src_pkts: u64,
    pub dst_pkts: u64,
    pub tot_pkts: u64,
    pub src_bytes: u64,
    pub dst_bytes: u64,
    pub tot_bytes: u64,
    pub s_app_bytes: u64,
    pub d_app_bytes: u64,
    pub tot_app_bytes: u64,
    pub dur: f64,
    pub rate: f64,
    pub src_rate: f64,
    pub dst_rate: f64,
    pub label: Option<String>,
}

impl FlowRecord {
    /// Checks the additivity, ordering and non-negativity invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.tot_pkts != self.src_pkts + self.dst_pkts {
            return Err("tot_pkts != src_pkts + dst_pkts".into());
        }
        if self.tot_bytes != self.src_bytes + self.dst_bytes {
            return Err("tot_bytes != src_bytes + dst_bytes".into());
        }
        if self.tot_app_bytes != self.s_app_bytes + self.d_app_bytes {
            return Err("tot_app_bytes != s_app_bytes + d_app_bytes".into());
        }
        if self.last_time < self.start_time {
            return Err("last_time < start_time".into());
        }
        let floats = [
            self.dur,
            self.rate,
            self.src_rate,
            self.dst_rate,
            self.tcp_rtt,
            self.syn_ack,
            self.ack_dat,
        ];
        if floats.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("negative or non-finite duration/rate/timing".into());
        }
        Ok(())
    }

    /// Value of one of the numeric feature fields; `None` for metadata fields.
    pub fn numeric(&self, field: Field) -> Option<f64> {
        use Field::*;
        Some(match field {
            STos => self.s_tos as f64,
            DTos => self.d_tos as f64,
            SrcWin => self.src_win as f64,
            DstWin => self.dst_win as f64,
            SHops => self.s_hops as f64,
            DHops => self.d_hops as f64,
            STtl => self.s_ttl as f64,
            DTtl => self.d_ttl as f64,
            TcpRtt => self.tcp_rtt,
            SynAck => self.syn_ack,
            AckDat => self.ack_dat,
            SrcPkts => self.src_pkts as f64,
            DstPkts => self.dst_pkts as f64,
            SrcBytes => self.src_bytes as f64,
            DstBytes => self.dst_bytes as f64,
            SAppBytes => self.s_app_bytes as f64,
            DAppBytes => self.d_app_bytes as f64,
            Dur => self.dur,
            TotPkts => self.tot_pkts as f64,
            TotBytes => self.tot_bytes as f64,
            TotAppBytes => self.tot_app_bytes as f64,
            Rate => self.rate,
            SrcRate => self.src_rate,
            DstRate => self.dst_rate,
            _ => return None,
        })
    }
}

macro_rules! fields {
    ($( $variant:ident => $name:literal, $argus:literal, $numeric:literal; )*) => {
        /// A named column of the flow format.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Field {
            $( $variant, )*
        }

        impl Field {
            /// Every field in canonical column order.
            pub const ALL: &'static [Field] = &[ $( Field::$variant, )* ];

            pub fn name(self) -> &'static str {
                match self { $( Field::$variant => $name, )* }
            }

            /// The short column name used by argus' `ra -s`.
            pub fn argus_name(self) -> &'static str {
                match self { $( Field::$variant => $argus, )* }
            }

            /// True for the behavioural fields kept after excluding
            /// addresses, ports, protocol, state, times and the label.
            pub fn is_numeric_feature(self) -> bool {
                match self { $( Field::$variant => $numeric, )* }
            }
        }
    };
}

fields! {
    SrcAddr => "SrcAddr", "saddr", false;
    DstAddr => "DstAddr", "daddr", false;
    Proto => "Proto", "proto", false;
    Sport => "Sport", "sport", false;
    Dport => "Dport", "dport", false;
    State => "State", "state", false;
    STos => "sTos", "stos", true;
    DTos => "dTos", "dtos", true;
    SrcWin => "SrcWin", "swin", true;
    DstWin => "DstWin", "dwin", true;
    SHops => "sHops", "shops", true;
    DHops => "dHops", "dhops", true;
    StartTime => "StartTime", "stime", false;
    LastTime => "LastTime", "ltime", false;
    STtl => "sTtl", "sttl", true;
    DTtl => "dTtl", "dttl", true;
    TcpRtt => "TcpRtt", "tcprtt", true;
    SynAck => "SynAck", "synack", true;
    AckDat => "AckDat", "ackdat", true;
    SrcPkts => "SrcPkts", "spkts", true;
    DstPkts => "DstPkts", "dpkts", true;
    SrcBytes => "SrcBytes", "sbytes", true;
    DstBytes => "DstBytes", "dbytes", true;
    SAppBytes => "SAppBytes", "sappbytes", true;
    DAppBytes => "DAppBytes", "dappbytes", true;
    Dur => "Dur", "dur", true;
    TotPkts => "TotPkts", "pkts", true;
    TotBytes => "TotBytes", "bytes", true;
    TotAppBytes => "TotAppByte", "appbytes", true;
    Rate => "Rate", "rate", true;
    SrcRate => "SrcRate", "srate", true;
    DstRate => "DstRate", "drate", true;
    Label => "Label", "label", false;
}

impl Field {
    /// Resolves a canonical or argus column name, case-insensitively.
    pub fn lookup(name: &str) -> Option<Field> {
        let name = name.trim();
        Field::ALL.iter().copied().find(|f| {
            f.name().eq_ignore_ascii_case(name) || f.argus_name().eq_ignore_ascii_case(name)
        })
    }

    /// The behavioural feature fields in canonical order (24 of them).
    pub fn numeric_features() -> Vec<Field> {
        Field::ALL
            .iter()
            .copied()
            .filter(|f| f.is_numeric_feature())
            .collect()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Column layout of a flow file. `None` entries are columns that are
/// carried in the file but not part of the record (e.g. CTU's `Dir`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOrder {
    columns: Vec<Option<Field>>,
}

impl FieldOrder {
    /// All 33 fields in canonical order.
    pub fn canonical() -> Self {
        FieldOrder {
            columns: Field::ALL.iter().copied().map(Some).collect(),
        }
    }

    /// Strict constructor: every name must resolve to a field.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, FlowError> {
        let columns = names
            .iter()
            .map(|n| {
                Field::lookup(n.as_ref())
                    .map(Some)
                    .ok_or_else(|| FlowError::UnknownField(n.as_ref().to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(FieldOrder { columns })
    }

    /// Lenient constructor for file headers: unknown columns are skipped.
    pub fn from_header(header: &str) -> Self {
        let columns = header
            .trim_end_matches(['\r', '\n'])
            .split(',')
            .map(Field::lookup)
            .collect();
        FieldOrder { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn header(&self) -> String {
        self.columns
            .iter()
            .map(|c| c.map(Field::name).unwrap_or(""))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn num_err(column: usize, field: Field, token: &str) -> FlowError {
    FlowError::NumericParse {
        line: 0,
        column,
        field: field.name(),
        token: token.to_string(),
    }
}

fn parse_uint(token: &str, max: u64, column: usize, field: Field) -> Result<u64, FlowError> {
    let t = token.trim();
    if t.is_empty() {
        return Ok(0);
    }
    let v = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        t.parse::<u64>().ok().or_else(|| {
            // Some exporters write integral columns as floats ("64.0").
            t.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite() && *f >= 0.0 && f.fract() == 0.0 && *f < 9.007e15)
                .map(|f| f as u64)
        })
    };
    match v {
        Some(v) if v <= max => Ok(v),
        _ => Err(num_err(column, field, token)),
    }
}

fn parse_float(token: &str, column: usize, field: Field) -> Result<f64, FlowError> {
    let t = token.trim();
    if t.is_empty() {
        return Ok(0.0);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(num_err(column, field, token)),
    }
}

fn parse_port(token: &str, column: usize, field: Field) -> Result<Option<u16>, FlowError> {
    if token.trim().is_empty() {
        return Ok(None);
    }
    parse_uint(token, u16::MAX as u64, column, field).map(|v| Some(v as u16))
}

fn parse_time(token: &str, column: usize, field: Field) -> Result<Timestamp, FlowError> {
    if token.trim().is_empty() {
        return Ok(Timestamp::default());
    }
    Timestamp::parse(token).ok_or_else(|| num_err(column, field, token))
}

fn set_field(rec: &mut FlowRecord, field: Field, token: &str, col: usize) -> Result<(), FlowError> {
    use Field::*;
    let u8f = |t: &str| parse_uint(t, 255, col, field).map(|v| v as u8);
    let u32f = |t: &str| parse_uint(t, u32::MAX as u64, col, field).map(|v| v as u32);
    let u64f = |t: &str| parse_uint(t, u64::MAX, col, field);
    let ff = |t: &str| parse_float(t, col, field);
    match field {
        SrcAddr => rec.src_addr = token.trim().to_string(),
        DstAddr => rec.dst_addr = token.trim().to_string(),
        Proto => rec.proto = token.trim().to_string(),
        Sport => rec.sport = parse_port(token, col, field)?,
        Dport => rec.dport = parse_port(token, col, field)?,
        State => rec.state = token.trim().to_string(),
        STos => rec.s_tos = u8f(token)?,
        DTos => rec.d_tos = u8f(token)?,
        SrcWin => rec.src_win = u32f(token)?,
        DstWin => rec.dst_win = u32f(token)?,
        SHops => rec.s_hops = u8f(token)?,
        DHops => rec.d_hops = u8f(token)?,
        StartTime => rec.start_time = parse_time(token, col, field)?,
        LastTime => rec.last_time = parse_time(token, col, field)?,
        STtl => rec.s_ttl = u8f(token)?,
        DTtl => rec.d_ttl = u8f(token)?,
        TcpRtt => rec.tcp_rtt = ff(token)?,
        SynAck => rec.syn_ack = ff(token)?,
        AckDat => rec.ack_dat = ff(token)?,
        SrcPkts => rec.src_pkts = u64f(token)?,
        DstPkts => rec.dst_pkts = u64f(token)?,
        TotPkts => rec.tot_pkts = u64f(token)?,
        SrcBytes => rec.src_bytes = u64f(token)?,
        DstBytes => rec.dst_bytes = u64f(token)?,
        TotBytes => rec.tot_bytes = u64f(token)?,
        SAppBytes => rec.s_app_bytes = u64f(token)?,
        DAppBytes => rec.d_app_bytes = u64f(token)?,
        TotAppBytes => rec.tot_app_bytes = u64f(token)?,
        Dur => rec.dur = ff(token)?,
        Rate => rec.rate = ff(token)?,
        SrcRate => rec.src_rate = ff(token)?,
        DstRate => rec.dst_rate = ff(token)?,
        Label => {
            let t = token.trim();
            rec.label = if t.is_empty() { None } else { Some(t.to_string()) };
        }
    }
    Ok(())
}

fn render_field(rec: &FlowRecord, field: Field, out: &mut String) {
    use std::fmt::Write as _;
    use Field::*;
    let _ = match field {
        SrcAddr => write!(out, "{}", rec.src_addr),
        DstAddr => write!(out, "{}", rec.dst_addr),
        Proto => write!(out, "{}", rec.proto),
        Sport => match rec.sport {
            Some(p) => write!(out, "{p}"),
            None => Ok(()),
        },
        Dport => match rec.dport {
            Some(p) => write!(out, "{p}"),
            None => Ok(()),
        },
        State => write!(out, "{}", rec.state),
        StartTime => write!(out, "{}", rec.start_time),
        LastTime => write!(out, "{}", rec.last_time),
        Label => write!(out, "{}", rec.label.as_deref().unwrap_or("")),
        TcpRtt | SynAck | AckDat | Dur | Rate | SrcRate | DstRate => {
            write!(out, "{:.6}", rec.numeric(field).unwrap_or(0.0))
        }
        STos => write!(out, "{}", rec.s_tos),
        DTos => write!(out, "{}", rec.d_tos),
        SrcWin => write!(out, "{}", rec.src_win),
        DstWin => write!(out, "{}", rec.dst_win),
        SHops => write!(out, "{}", rec.s_hops),
        DHops => write!(out, "{}", rec.d_hops),
        STtl => write!(out, "{}", rec.s_ttl),
        DTtl => write!(out, "{}", rec.d_ttl),
        SrcPkts => write!(out, "{}", rec.src_pkts),
        DstPkts => write!(out, "{}", rec.dst_pkts),
        TotPkts => write!(out, "{}", rec.tot_pkts),
        SrcBytes => write!(out, "{}", rec.src_bytes),
        DstBytes => write!(out, "{}", rec.dst_bytes),
        TotBytes => write!(out, "{}", rec.tot_bytes),
        SAppBytes => write!(out, "{}", rec.s_app_bytes),
        DAppBytes => write!(out, "{}", rec.d_app_bytes),
        TotAppBytes => write!(out, "{}", rec.tot_app_bytes),
    };
}

/// Parses one comma-separated line laid out as `order`.
///
/// Blank numeric columns read as 0, a blank port as absent and a blank
/// label as no label. Errors carry line 0; readers patch the real number.
pub fn parse_flow_line(line: &str, order: &FieldOrder) -> Result<FlowRecord, FlowError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let tokens: Vec<&str> = line.split(',').collect();
    if tokens.len() != order.len() {
        return Err(FlowError::FieldCountMismatch {
            line: 0,
            expected: order.len(),
            found: tokens.len(),
        });
    }
    let mut rec = FlowRecord::default();
    for (col, (token, field)) in tokens.iter().zip(&order.columns).enumerate() {
        if let Some(field) = field {
            set_field(&mut rec, *field, token, col + 1)?;
        }
    }
    Ok(rec)
}

/// Renders `flow` as one line (no newline) in `order`.
pub fn serialize_flow_line(flow: &FlowRecord, order: &FieldOrder) -> Result<String, FlowError> {
    let mut out = String::with_capacity(256);
    for (i, col) in order.columns.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match col {
            Some(f) => render_field(flow, *f, &mut out),
            None => return Err(FlowError::UnknownField(format!("column {}", i + 1))),
        }
    }
    Ok(out)
}

/// Convenience for name lists: rejects names that are not flow fields.
pub fn serialize_flow_line_named<S: AsRef<str>>(
    flow: &FlowRecord,
    names: &[S],
) -> Result<String, FlowError> {
    serialize_flow_line(flow, &FieldOrder::new(names)?)
}

/// Streams records out of a `.binetflow` source (header line first).
pub struct FlowReader<R> {
    lines: std::io::Lines<BufReader<R>>,
    order: FieldOrder,
    line_no: usize,
}

impl<R: Read> FlowReader<R> {
    pub fn new(inner: R) -> Result<Self, FlowError> {
        let mut lines = BufReader::new(inner).lines();
        let header = loop {
            match lines.next() {
                None => return Err(FlowError::MissingHeader),
                Some(Err(e)) => return Err(FlowError::Io(e.to_string())),
                Some(Ok(l)) if l.trim().is_empty() => continue,
                Some(Ok(l)) => break l,
            }
        };
        let order = FieldOrder::from_header(header.trim_start_matches('\u{feff}'));
        Ok(FlowReader {
            lines,
            order,
            line_no: 1,
        })
    }

    pub fn order(&self) -> &FieldOrder {
        &self.order
    }
}

impl<R: Read> Iterator for FlowReader<R> {
    type Item = Result<FlowRecord, FlowError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(FlowError::Io(e.to_string()))),
            };
            if line.trim().is_empty() {
                continue;
            }
            let n = self.line_no;
            return Some(parse_flow_line(&line, &self.order).map_err(|e| e.at_line(n)));
        }
    }
}

/// Reads a whole `.binetflow` file into memory.
pub fn read_flow_file(path: &std::path::Path) -> Result<Vec<FlowRecord>, FlowError> {
    let f = std::fs::File::open(path).map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))?;
    FlowReader::new(f)?.collect()
}

/// Writes the canonical header followed by one line per record.
pub struct FlowWriter<W: Write> {
    inner: W,
    order: FieldOrder,
}

impl<W: Write> FlowWriter<W> {
    pub fn new(mut inner: W) -> std::io::Result<Self> {
        let order = FieldOrder::canonical();
        writeln!(inner, "{}", order.header())?;
        Ok(FlowWriter { inner, order })
    }

    pub fn write(&mut self, flow: &FlowRecord) -> std::io::Result<()> {
        let line = serialize_flow_line(flow, &self.order)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        writeln!(self.inner, "{line}")
    }

    pub fn into_inner(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FlowRecord {
        FlowRecord {
            src_addr: "147.32.84.165".into(),
            dst_addr: "8.8.8.8".into(),
            proto: "tcp".into(),
            sport: Some(1025),
            dport: Some(80),
            state: "EST".into(),
            s_ttl: 64,
            d_ttl: 57,
            d_hops: 7,
            src_win: 65535,
            src_pkts: 7,
            dst_pkts: 5,
            tot_pkts: 12,
            src_bytes: 1000,
            dst_bytes: 2000,
            tot_bytes: 3000,
            start_time: Timestamp(1_313_675_000_123_456),
            last_time: Timestamp(1_313_675_001_623_456),
            dur: 1.5,
            rate: 8.0,
            label: Some("flow=From-Botnet-V50-4-TCP-WEB-Established-SSL".into()),
            ..Default::default()
        }
    }

    #[test]
    fn canonical_order_has_33_fields_and_24_features() {
        assert_eq!(FieldOrder::canonical().len(), 33);
        assert_eq!(Field::numeric_features().len(), 24);
    }

    #[test]
    fn pkts_and_bytes_map_to_totals() {
        let line = serialize_flow_line(&sample(), &FieldOrder::canonical()).unwrap();
        let rec = parse_flow_line(&line, &FieldOrder::canonical()).unwrap();
        assert_eq!(rec.tot_pkts, 12);
        assert_eq!(rec.tot_bytes, 3000);
        assert_eq!(rec, sample());
    }

    #[test]
    fn icmp_line_with_blank_ports() {
        let order = FieldOrder::canonical();
        let mut cols = vec![""; 33];
        cols[0] = "10.0.0.1";
        cols[1] = "10.0.0.2";
        cols[2] = "icmp";
        cols[5] = "ECO";
        cols[14] = "64";
        cols[19] = "1";
        cols[26] = "1";
        let rec = parse_flow_line(&cols.join(","), &order).unwrap();
        assert_eq!(rec.sport, None);
        assert_eq!(rec.dport, None);
        assert_eq!(rec.proto, "icmp");
        assert_eq!(rec.s_ttl, 64);
        assert_eq!(rec.tot_pkts, 1);
        assert_eq!(rec.label, None);
    }

    #[test]
    fn arity_mismatch() {
        let line = vec!["0"; 32].join(",");
        let err = parse_flow_line(&line, &FieldOrder::canonical()).unwrap_err();
        assert!(matches!(
            err,
            FlowError::FieldCountMismatch {
                expected: 33,
                found: 32,
                ..
            }
        ));
    }

    #[test]
    fn numeric_error_reports_line_and_column() {
        let text = format!(
            "{}\n{}\n",
            FieldOrder::canonical().header(),
            serialize_flow_line(&sample(), &FieldOrder::canonical())
                .unwrap()
                .replacen(",64,", ",sixty-four,", 1)
        );
        let err = FlowReader::new(text.as_bytes()).unwrap().next().unwrap().unwrap_err();
        match err {
            FlowError::NumericParse { line, column, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 15);
                assert_eq!(field, "sTtl");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_duration_renders_six_decimals() {
        let mut f = sample();
        f.dur = 0.0;
        let line = serialize_flow_line_named(&f, &["Dur"]).unwrap();
        assert_eq!(line, "0.000000");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = serialize_flow_line_named(&sample(), &["Dur", "bogus"]).unwrap_err();
        assert_eq!(err, FlowError::UnknownField("bogus".into()));
    }

    #[test]
    fn timestamps_accept_epoch_seconds() {
        let a = Timestamp::parse("1313675000.123456").unwrap();
        assert_eq!(a, Timestamp(1_313_675_000_123_456));
        assert_eq!(a.to_string(), "2011/08/18 13:43:20.123456");
        assert_eq!(Timestamp::parse(&a.to_string()), Some(a));
    }

    #[test]
    fn argus_names_resolve() {
        assert_eq!(Field::lookup("sappbytes"), Some(Field::SAppBytes));
        assert_eq!(Field::lookup("TotAppByte"), Some(Field::TotAppBytes));
        assert_eq!(Field::lookup("Dir"), None);
    }

    #[test]
    fn ctu_header_with_extra_columns_is_tolerated() {
        let text = "StartTime,Dur,Proto,SrcAddr,Sport,Dir,DstAddr,Dport,State,sTos,dTos,TotPkts,TotBytes,SrcBytes,Label\n\
            2011/08/10 09:46:59.607825,1.026539,tcp,94.44.127.113,1577,   ->,147.32.84.59,6881,S_RA,0,0,4,276,156,flow=Background-Established-cmpgw-CVUT\n";
        let recs: Vec<_> = FlowReader::new(text.as_bytes()).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].tot_bytes, 276);
        assert_eq!(recs[0].sport, Some(1577));
    }
}
