//! CSV input and output.
//!
//! A sample file carries both groups:
//!
//! ```text
//! group,value,w1,w2
//! Y,0.31,0.6,0.4
//! Z,-1.2,0.2,0.8
//! ```
//!
//! Rows of each group keep their file order as the observation index.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulation::ExperimentReport;
use crate::statistic::PairedSample;
use crate::weights::WeightMatrix;

/// Per-row weight-sum tolerance on ingestion.
pub const ROW_WEIGHT_TOLERANCE: f64 = 1e-9;

pub const HISTOGRAM_BINS: usize = 50;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn parse_sample_csv(path: &Path) -> Result<PairedSample> {
    parse_sample_csv_with(path, false)
}

/// With `renormalize`, each row's weights are rescaled to sum to one instead of
/// being checked against [`ROW_WEIGHT_TOLERANCE`].
pub fn parse_sample_csv_with(path: &Path, renormalize: bool) -> Result<PairedSample> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_sample_reader(file, path, renormalize)
}

/// Parses sample CSV from any reader; `path` is used only in error messages.
pub fn parse_sample_reader<R: Read>(reader: R, path: &Path, renormalize: bool) -> Result<PairedSample> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let m = header.len().saturating_sub(2);
    let expected: Vec<String> = ["group".to_string(), "value".to_string()]
        .into_iter()
        .chain((1..=m).map(|u| format!("w{u}")))
        .collect();
    if m == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Schema(format!(
            "header must be group,value,w1..wM; got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }

    let (mut y, mut z) = (Vec::new(), Vec::new());
    let (mut wy, mut wz) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != m + 2 {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields, found {}",
                m + 2,
                record.len()
            )));
        }
        let number = |field: usize| -> Result<f64> {
            let raw = &record[field];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(line, format!("field {} is not a finite number: {raw:?}", field + 1))),
            }
        };
        let value = number(1)?;
        let weights = (2..m + 2).map(number).collect::<Result<Vec<f64>>>()?;
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Weight(format!("line {line}: negative weight in {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if !renormalize && (sum - 1.0).abs() > ROW_WEIGHT_TOLERANCE {
            return Err(Error::Weight(format!("line {line}: weights sum to {sum}")));
        }
        match &record[0] {
            "Y" | "y" => {
                y.push(value);
                wy.push(weights);
            }
            "Z" | "z" => {
                z.push(value);
                wz.push(weights);
            }
            other => return Err(parse_err(line, format!("group must be Y or Z, got {other:?}"))),
        }
    }
    if y.len() != z.len() {
        return Err(Error::Schema(format!("{} Y rows but {} Z rows", y.len(), z.len())));
    }
    if y.is_empty() {
        return Err(Error::Schema("file has no observations".into()));
    }
    let omega = WeightMatrix::from_columns_with_tolerance(&wy, ROW_WEIGHT_TOLERANCE, renormalize)?;
    let sigma = WeightMatrix::from_columns_with_tolerance(&wz, ROW_WEIGHT_TOLERANCE, renormalize)?;
    PairedSample::new(y, z, omega, sigma)
}

/// Writes `Y` rows then `Z` rows; values use shortest round-trip formatting.
pub fn write_sample_csv<W: Write>(writer: W, sample: &PairedSample) -> Result<()> {
    let m = sample.m();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["group".to_string(), "value".to_string()];
    header.extend((1..=m).map(|u| format!("w{u}")));
    wtr.write_record(&header)?;
    for (group, values, weights) in [("Y", sample.y(), sample.omega()), ("Z", sample.z(), sample.sigma())] {
        for (i, v) in values.iter().enumerate() {
            let mut row = vec![group.to_string(), v.to_string()];
            row.extend(weights.column(i).iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_sample_csv_path(path: &Path, sample: &PairedSample) -> Result<()> {
    write_sample_csv(File::create(path).map_err(io_err(path))?, sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub y_count: u64,
    pub z_count: u64,
}

/// Equal-width bins spanning both groups; the last bin is closed on the right.
pub fn histogram(sample: &PairedSample, bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let (lo, hi) = sample
        .y()
        .iter()
        .chain(sample.z())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            bin_lo: lo + b as f64 * width,
            bin_hi: if b + 1 == bins && hi > lo { hi } else { lo + (b + 1) as f64 * width },
            y_count: 0,
            z_count: 0,
        })
        .collect();
    let slot = |v: f64| (((v - lo) / width).floor() as usize).min(bins - 1);
    for &v in sample.y() {
        out[slot(v)].y_count += 1;
    }
    for &v in sample.z() {
        out[slot(v)].z_count += 1;
    }
    out
}

pub fn write_histogram_csv<W: Write>(writer: W, bins: &[HistogramBin]) -> Result<()> {
    write_rows(writer, bins)
}

/// Power-study rows; the leading columns are `n,K,t_n,power,gamma_opt,t_opt`.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[ExperimentReport]) -> Result<()> {
    write_rows(writer, reports)
}

fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
