//! Learning curves and their CSV form.
//!
//! Files carry the header `iter,msd_db,emse_db,mu_mean,source,rule`. Floats
//! are written with Rust's shortest round-trip formatting, so reading a file
//! back reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{from_db, to_db, HarnessError};

pub const CSV_HEADER: [&str; 6] = ["iter", "msd_db", "emse_db", "mu_mean", "source", "rule"];

/// Minimum number of points averaged by [`steady_state_estimate`].
pub const MIN_TAIL_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    Theory,
    Simulation,
}

impl CurveSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveSource::Theory => "theory",
            CurveSource::Simulation => "simulation",
        }
    }
}

impl std::str::FromStr for CurveSource {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theory" => Ok(CurveSource::Theory),
            "simulation" => Ok(CurveSource::Simulation),
            other => Err(HarnessError::CurveFormat(format!("unknown source {other:?}"))),
        }
    }
}

/// MSD/EMSE in dB and mean step-size; `iter[k]` is the first iteration of
/// the `k`-th recorded block.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub rule: String,
    pub source: CurveSource,
    pub iter: Vec<usize>,
    pub msd_db: Vec<f64>,
    pub emse_db: Vec<f64>,
    pub mu_mean: Vec<f64>,
}

impl LearningCurve {
    /// Builds a curve from linear-scale series.
    pub fn from_linear(
        rule: impl Into<String>,
        source: CurveSource,
        iter: Vec<usize>,
        msd: &[f64],
        emse: &[f64],
        mu_mean: Vec<f64>,
    ) -> Self {
        Self {
            rule: rule.into(),
            source,
            iter,
            msd_db: msd.iter().map(|&x| to_db(x)).collect(),
            emse_db: emse.iter().map(|&x| to_db(x)).collect(),
            mu_mean,
        }
    }

    pub fn len(&self) -> usize {
        self.iter.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iter.is_empty()
    }

    /// MSD of the last point, in dB.
    pub fn terminal_msd_db(&self) -> Option<f64> {
        self.msd_db.last().copied()
    }
}

/// Mean of the linear-scale MSD over the last `tail_fraction` of the points,
/// in dB.
pub fn steady_state_estimate(curve: &LearningCurve, tail_fraction: f64) -> Result<f64, HarnessError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(HarnessError::InvalidTailFraction(tail_fraction));
    }
    let n = curve.len();
    let count = ((n as f64) * tail_fraction).round() as usize;
    if count < MIN_TAIL_SAMPLES {
        return Err(HarnessError::TooFewSamples {
            needed: MIN_TAIL_SAMPLES,
            got: count,
        });
    }
    let start = n - count;
    let mut sum = 0.0;
    for k in start..n {
        let db = curve.msd_db[k];
        if !db.is_finite() && db != f64::NEG_INFINITY {
            return Err(HarnessError::CurveDiverged(curve.iter[k]));
        }
        sum += from_db(db);
    }
    Ok(to_db(sum / count as f64))
}

/// Writes one curve as CSV.
pub fn write_curve_csv<W: Write>(curve: &LearningCurve, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for k in 0..curve.len() {
        w.write_record([
            curve.iter[k].to_string(),
            curve.msd_db[k].to_string(),
            curve.emse_db[k].to_string(),
            curve.mu_mean[k].to_string(),
            curve.source.as_str().to_string(),
            curve.rule.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a file written by [`write_curve_csv`]. All rows must share the
/// same rule and source.
pub fn read_curve_csv<R: Read>(input: R) -> Result<LearningCurve, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(HarnessError::CurveFormat(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut curve: Option<LearningCurve> = None;
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or_default();
        let num = |k: usize| -> Result<f64, HarnessError> {
            field(k).parse().map_err(|_| {
                HarnessError::CurveFormat(format!("row {}: bad number {:?}", line + 1, field(k)))
            })
        };
        let iter: usize = field(0).parse().map_err(|_| {
            HarnessError::CurveFormat(format!("row {}: bad iteration {:?}", line + 1, field(0)))
        })?;
        let source: CurveSource = field(4).parse()?;
        let rule = field(5);
        let c = curve.get_or_insert_with(|| LearningCurve {
            rule: rule.to_string(),
            source,
            iter: Vec::new(),
            msd_db: Vec::new(),
            emse_db: Vec::new(),
            mu_mean: Vec::new(),
        });
        if c.rule != rule || c.source != source {
            return Err(HarnessError::CurveFormat(format!(
                "row {} mixes curves ({} {} vs {} {})",
                line + 1,
                c.rule,
                c.source.as_str(),
                rule,
                source.as_str()
            )));
        }
        c.iter.push(iter);
        c.msd_db.push(num(1)?);
        c.emse_db.push(num(2)?);
        c.mu_mean.push(num(3)?);
    }
    curve.ok_or_else(|| HarnessError::CurveFormat("no rows".into()))
}

/// Writes `curve` to `path`.
pub fn save_curve(curve: &LearningCurve, path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    write_curve_csv(curve, std::io::BufWriter::new(file))
}

/// Reads a curve from `path`.
pub fn load_curve(path: &Path) -> Result<LearningCurve, HarnessError> {
    let file = File::open(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    read_curve_csv(std::io::BufReader::new(file))
}
