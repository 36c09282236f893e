//! CSV tables written by the command line tool and read back by plotting.
//!
//! Every file starts with one comment line
//! `# units: <col> [<unit>], ...; seed=<u64>; jobs=<n>` followed by a header
//! row and data rows. Missing values are empty fields.

use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::macsim::{BerReport, Layer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Sweep,
    Fig3,
    Fig4,
    Budget,
    Capacity,
}

impl CsvKind {
    pub fn file_name(self) -> &'static str {
        match self {
            CsvKind::Sweep => "sweep.csv",
            CsvKind::Fig3 => "fig3.csv",
            CsvKind::Fig4 => "fig4.csv",
            CsvKind::Budget => "budget.csv",
            CsvKind::Capacity => "capacity.csv",
        }
    }

    /// Column names and units, in file order.
    pub fn columns(self) -> &'static [(&'static str, &'static str)] {
        match self {
            CsvKind::Sweep => &[
                ("n_onus", "count"),
                ("bits_per_onu", "bits"),
                ("pre_ecc_ber", "dimensionless"),
                ("post_ecc_ber", "dimensionless"),
                ("utilization", "dimensionless"),
                ("max_collision", "count"),
            ],
            CsvKind::Fig3 => &[
                ("n_onus", "count"),
                ("target_ber", "dimensionless"),
                ("min_er_db", "dB"),
            ],
            CsvKind::Fig4 => &[
                ("n_onus", "count"),
                ("pre_ecc_ber", "dimensionless"),
                ("post_ecc_ber", "dimensionless"),
                ("utilization", "dimensionless"),
                ("layer", "logical|physical"),
            ],
            CsvKind::Budget => &[("point", "name"), ("dBm", "dBm")],
            CsvKind::Capacity => &[
                ("p", "dimensionless"),
                ("z_capacity", "bits/use"),
                ("bsc_capacity", "bits/use"),
            ],
        }
    }

    fn names(self) -> Vec<&'static str> {
        self.columns().iter().map(|c| c.0).collect()
    }
}

/// Run parameters stamped into every file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunMeta {
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_onus: usize,
    pub bits_per_onu: u64,
    pub pre_ecc_ber: f64,
    pub post_ecc_ber: Option<f64>,
    pub utilization: f64,
    pub max_collision: u32,
}

impl From<&BerReport> for SweepRow {
    fn from(r: &BerReport) -> Self {
        Self {
            n_onus: r.n_onus,
            bits_per_onu: r.bits_per_onu,
            pre_ecc_ber: r.pre_ecc_ber(),
            post_ecc_ber: r.post_ecc_ber(),
            utilization: r.utilization,
            max_collision: r.max_collision(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub n_onus: usize,
    pub target_ber: f64,
    /// Empty when the target is not reached inside the search bracket.
    pub min_er_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Row {
    pub n_onus: usize,
    pub pre_ecc_ber: f64,
    pub post_ecc_ber: Option<f64>,
    pub utilization: f64,
    pub layer: Layer,
}

impl From<&BerReport> for Fig4Row {
    fn from(r: &BerReport) -> Self {
        Self {
            n_onus: r.n_onus,
            pre_ecc_ber: r.pre_ecc_ber(),
            post_ecc_ber: r.post_ecc_ber(),
            utilization: r.utilization,
            layer: r.layer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub point: String,
    #[serde(rename = "dBm")]
    pub dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub p: f64,
    pub z_capacity: f64,
    pub bsc_capacity: f64,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn metadata_line(kind: CsvKind, meta: RunMeta) -> String {
    let units: Vec<String> = kind
        .columns()
        .iter()
        .map(|(name, unit)| format!("{name} [{unit}]"))
        .collect();
    format!("# units: {}; seed={}; jobs={}", units.join(", "), meta.seed, meta.jobs)
}

pub fn write_csv<W: Write, T: Serialize>(mut out: W, kind: CsvKind, meta: RunMeta, rows: &[T]) -> Result<()> {
    writeln!(out, "{}", metadata_line(kind, meta)).map_err(io_err)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(kind.names()).map_err(io_err)?;
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn parse_meta(line: &str) -> Option<RunMeta> {
    let mut seed = None;
    let mut jobs = None;
    for part in line.split(';').map(str::trim) {
        if let Some(v) = part.strip_prefix("seed=") {
            seed = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("jobs=") {
            jobs = v.parse().ok();
        }
    }
    Some(RunMeta {
        seed: seed?,
        jobs: jobs?,
    })
}

/// Reads a table of `kind`, rejecting files whose header differs from the
/// declared columns.
pub fn read_csv<R: Read, T: DeserializeOwned>(input: R, kind: CsvKind) -> Result<(RunMeta, Vec<T>)> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first).map_err(io_err)?;
    let meta = first
        .strip_prefix("# units:")
        .and_then(parse_meta)
        .ok_or_else(|| Error::Io(format!("missing units/metadata line, found {:?}", first.trim_end())))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found: Vec<String> = r.headers().map_err(io_err)?.iter().map(str::to_string).collect();
    if found != kind.names() {
        return Err(Error::Schema {
            expected: kind.names().join(","),
            found: found.join(","),
        });
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(io_err)?;
    if rows.is_empty() {
        return Err(Error::Io(format!("{} has no data rows", kind.file_name())));
    }
    Ok((meta, rows))
}
