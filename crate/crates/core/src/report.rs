//! Figure-analogue tables and phase-measurement rows.
//!
//! Every table starts with a `#` comment line naming the columns' units,
//! followed by a header row. Numbers are written in shortest round-trip form,
//! so [`Table::read`] recovers exactly what was written.

use std::io::{BufRead, BufReader, Read, Write};

use crate::phase::PhaseMeasurement;
use crate::velocimetry::{AveragingPoint, SensitivityReport, SweepResult};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    /// `(name, unit)` per column.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

impl Table {
    pub fn new(title: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            title: title.to_string(),
            columns: columns.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|(n, _)| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let units: Vec<String> = self.columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
        writeln!(w, "# {}; units: {}", self.title, units.join(", "))?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.columns.iter().map(|(n, _)| n)).map_err(csv_io)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_string())).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write(&mut v).expect("writing to memory");
        v
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let comment = first
            .trim()
            .strip_prefix("# ")
            .ok_or_else(|| Error::format("comment", "table must start with a '# ' comment"))?;
        let (title, units) = comment
            .split_once("; units: ")
            .ok_or_else(|| Error::format("comment", "missing units list"))?;
        let units: Vec<(String, String)> = units
            .split(", ")
            .map(|c| {
                let (n, u) = c
                    .split_once(" [")
                    .ok_or_else(|| Error::format("comment", format!("bad unit entry {c:?}")))?;
                Ok((n.to_string(), u.trim_end_matches(']').to_string()))
            })
            .collect::<Result<_>>()?;
        let mut rows = csv::Reader::from_reader(reader);
        let header: Vec<String> = rows
            .headers()
            .map_err(|e| Error::format("header", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != units.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>() {
            return Err(Error::format("header", "column header does not match units comment"));
        }
        let mut table = Table {
            title: title.to_string(),
            columns: units,
            rows: Vec::new(),
        };
        for rec in rows.records() {
            let rec = rec.map_err(|e| Error::format("row", e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::format("row", e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            table.rows.push(row);
        }
        Ok(table)
    }
}

/// ΔΦ_Tr versus velocity for every storage time.
pub fn fig3a(sweeps: &[SweepResult], probe_wavenumber: f64) -> Table {
    let mut t = Table::new(
        "fig3a translation phase versus stage velocity",
        &[
            ("tau_s", "s"),
            ("velocity", "m/s"),
            ("dphi_tr", "rad"),
            ("stderr", "rad"),
            ("ideal_dphi_tr", "rad"),
        ],
    );
    for s in sweeps {
        for p in &s.points {
            t.push(vec![
                s.storage_time,
                p.velocity,
                p.phase,
                p.stderr,
                -probe_wavenumber * p.velocity * s.storage_time,
            ]);
        }
    }
    t
}

/// α versus storage time with the fitted line.
pub fn fig3b(sweeps: &[SweepResult], slope: f64, slope_stderr: f64, intercept: f64) -> Table {
    let mut t = Table::new(
        "fig3b alpha versus storage time",
        &[
            ("tau_s", "s"),
            ("alpha", "rad/(m/s)"),
            ("stderr", "rad/(m/s)"),
            ("fit_slope", "rad/m"),
            ("fit_slope_stderr", "rad/m"),
            ("fit_intercept", "rad/(m/s)"),
        ],
    );
    for s in sweeps {
        t.push(vec![s.storage_time, s.alpha, s.alpha_stderr, slope, slope_stderr, intercept]);
    }
    t
}

/// Sensitivity versus storage time. `measured` carries the per-τ_s fitted α.
pub fn fig3c(reports: &[SensitivityReport]) -> Table {
    let mut t = Table::new(
        "fig3c sensitivity versus storage time",
        &[
            ("tau_s", "s"),
            ("sigma_phi", "rad"),
            ("integration_time", "s"),
            ("delta_v_ideal", "m/s"),
            ("s_ideal", "m/s/sqrt(Hz)"),
            ("alpha_measured", "rad/(m/s)"),
            ("delta_v_measured", "m/s"),
            ("s_measured", "m/s/sqrt(Hz)"),
        ],
    );
    for r in reports {
        let m = r.measured.unwrap_or(crate::velocimetry::SensitivityVariant {
            alpha: f64::NAN,
            delta_v: f64::NAN,
            sensitivity: f64::NAN,
        });
        t.push(vec![
            r.storage_time,
            r.sigma_phi,
            r.integration_time,
            r.ideal.delta_v,
            r.ideal.sensitivity,
            m.alpha,
            m.delta_v,
            m.sensitivity,
        ]);
    }
    t
}

pub fn supp_fig2(points: &[AveragingPoint]) -> Table {
    let mut t = Table::new(
        "supp_fig2 phase spread versus oscilloscope averages",
        &[("averages", "count"), ("sigma_phi", "rad"), ("stderr", "rad")],
    );
    for p in points {
        t.push(vec![p.averages as f64, p.sigma_phi, p.stderr]);
    }
    t
}

/// Phase measurements as CSV rows with a units comment.
pub fn write_measurements_csv<W: Write>(rows: &[PhaseMeasurement], w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(
        w,
        "# phase measurements; units: delta_phi_* [rad], *_time [s], *_amplitude and *_residual [detector]"
    )?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_measurements_csv<R: Read>(r: R) -> Result<Vec<PhaseMeasurement>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::format("row", e.to_string())))
        .collect()
}

/// Phase measurements as JSON lines.
pub fn write_measurements_jsonl<W: Write>(rows: &[PhaseMeasurement], w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
