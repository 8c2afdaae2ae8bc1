//! Trace files.
//!
//! Binary layout (little-endian):
//!
//! | offset | type      | field         |
//! |--------|-----------|---------------|
//! | 0      | `[u8; 4]` | magic `SLVT`  |
//! | 4      | `u16`     | version (1)   |
//! | 6      | `u8`      | channel tag   |
//! | 7      | `f64`     | sample rate   |
//! | 15     | `u64`     | sample count  |
//! | 23     | `f32 × n` | samples       |
//!
//! The binary header carries no time origin or beat frequency; readers supply
//! them. CSV files carry everything in a leading comment line and store
//! samples at full double precision.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::trace::{ChannelTag, Trace};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SLVT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 23;

/// Decoded binary trace before a clock is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTrace {
    pub channel: ChannelTag,
    pub sample_rate: f64,
    pub samples: Vec<f32>,
}

impl BinaryTrace {
    pub fn into_trace(self, time_origin: f64, beat_frequency: f64) -> Result<Trace> {
        let samples = self.samples.into_iter().map(f64::from).collect();
        Trace::from_samples(samples, self.sample_rate, time_origin, beat_frequency, self.channel)
    }
}

pub fn write_binary<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * trace.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(trace.channel().code());
    buf.extend_from_slice(&trace.config().sample_rate.to_le_bytes());
    buf.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    for &v in trace.samples() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<BinaryTrace> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn decode_binary(bytes: &[u8]) -> Result<BinaryTrace> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format("header", format!("file has {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::format("magic", format!("expected \"SLVT\", found {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let channel = ChannelTag::from_code(bytes[6])
        .ok_or_else(|| Error::format("channel", format!("unknown channel tag {}", bytes[6])))?;
    let sample_rate = f64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes"));
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::format("sample_rate", format!("must be finite and > 0, got {sample_rate}")));
    }
    let length = u64::from_le_bytes(bytes[15..23].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if (body.len() as u64) != length.saturating_mul(4) {
        return Err(Error::format(
            "length",
            format!("header declares {length} samples, body holds {} bytes", body.len()),
        ));
    }
    let samples: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::format("samples", format!("non-finite value at index {i}")));
    }
    Ok(BinaryTrace {
        channel,
        sample_rate,
        samples,
    })
}

pub fn write_csv<W: Write>(trace: &Trace, w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let cfg = trace.config();
    writeln!(
        w,
        "# channel={} sample_rate={} time_origin={} beat_frequency={} units=t:s,value:detector",
        trace.channel().name(),
        cfg.sample_rate,
        cfg.time_origin,
        cfg.beat_frequency
    )?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "value"]).map_err(csv_io)?;
    for (i, v) in trace.samples().iter().enumerate() {
        out.write_record([trace.time(i).to_string(), v.to_string()]).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn meta_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
}

pub fn read_csv<R: Read>(r: R) -> Result<Trace> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let meta = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::format("metadata", "first line must be a '#' metadata comment"))?;
    let number = |key: &str| -> Result<f64> {
        meta_value(meta, key)
            .ok_or_else(|| Error::format(key, "missing from metadata line"))?
            .parse::<f64>()
            .map_err(|e| Error::format(key, e.to_string()))
    };
    let channel = match meta_value(meta, "channel") {
        Some("reference") => ChannelTag::Reference,
        Some("probe") => ChannelTag::Probe,
        other => return Err(Error::format("channel", format!("unknown channel {other:?}"))),
    };
    let sample_rate = number("sample_rate")?;
    let time_origin = number("time_origin")?;
    let beat_frequency = number("beat_frequency")?;

    let mut rows = csv::Reader::from_reader(reader);
    let header = rows.headers().map_err(|e| Error::format("header", e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["t", "value"] {
        return Err(Error::format("header", format!("expected t,value, found {header:?}")));
    }
    let mut samples = Vec::new();
    for (i, rec) in rows.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("row", e.to_string()))?;
        let v = rec
            .get(1)
            .ok_or_else(|| Error::format("row", format!("row {i} has no value column")))?
            .parse::<f64>()
            .map_err(|e| Error::format("value", format!("row {i}: {e}")))?;
        samples.push(v);
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::format("sample_rate", format!("must be finite and > 0, got {sample_rate}")));
    }
    Trace::from_samples(samples, sample_rate, time_origin, beat_frequency, channel)
        .map_err(|e| Error::format("trace", e.to_string()))
}

/// Loads a trace by extension: `.csv` as CSV, anything else as binary with the
/// given clock.
pub fn load_trace(path: &Path, time_origin: f64, beat_frequency: f64) -> Result<Trace> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(file)
    } else {
        read_binary(file)?.into_trace(time_origin, beat_frequency)
    }
}

pub fn save_binary(trace: &Trace, path: &Path) -> Result<()> {
    write_binary(trace, std::fs::File::create(path)?)
}

pub fn save_csv(trace: &Trace, path: &Path) -> Result<()> {
    write_csv(trace, std::fs::File::create(path)?)
}
