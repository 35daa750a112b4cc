//! Long-format CSV ingestion and emission of data, draws, fits and reports.
//!
//! Observations are rows `curve_id,t,y`. Floating-point output uses 17
//! significant digits so every value reads back bit-identical.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::bases::BasisMatrix;
use crate::model::{Curve, Dataset, MuState};
use crate::sampler::PosteriorSample;
use crate::summary::{fitted_values, FitSummary};
use crate::{Error, Result};

const HEADER: [&str; 3] = ["curve_id", "t", "y"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a long-format dataset.
///
/// Curves appear in order of first appearance; rows of a curve are sorted by
/// `t` (stably, so repeated times keep their file order).
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header 'curve_id,t,y', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let number = |field: usize, name: &str| -> Result<f64> {
            let raw = &record[field];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("{name} value '{raw}' is not a finite number"),
                })
        };
        let (t, y) = (number(1, "t")?, number(2, "y")?);
        let id = record[0].to_string();
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            groups.push((id, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push((t, y));
    }
    if groups.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no observations".into(),
        });
    }
    let curves = groups
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (t, y) = rows.into_iter().unzip();
            Curve::new(id, t, y)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(curves)
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for c in data.curves() {
        for (t, y) in c.t.iter().zip(&c.y) {
            w.write_record([c.id.as_str(), &fmt(*t), &fmt(*y)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Noiseless curve as `t,truth`.
pub fn write_truth<W: Write>(grid: &[f64], truth: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "truth"])?;
    for (t, y) in grid.iter().zip(truth) {
        w.write_record([fmt(*t), fmt(*y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Retained draws in long format: `chain,iteration,parameter,value`, with
/// matrix entries named `beta[i,k]`, `z[i,k]`, `theta[i,k]`, `mu[i,k]`
/// (1-based).
pub fn write_draws<W: Write>(sample: &PosteriorSample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chain", "iteration", "parameter", "value"])?;
    for chain in &sample.chains {
        let c = chain.chain.to_string();
        for (it, s) in chain.iterations.iter().zip(&chain.states) {
            let it = it.to_string();
            let mut emit = |name: String, v: f64| w.write_record([c.as_str(), &it, &name, &fmt(v)]);
            emit("sigma2".into(), s.sigma2)?;
            emit("tau2".into(), s.tau2)?;
            let (m, k) = s.beta.shape();
            for i in 0..m {
                for j in 0..k {
                    let tag = format!("[{},{}]", i + 1, j + 1);
                    emit(format!("beta{tag}"), s.beta[(i, j)])?;
                    emit(format!("z{tag}"), f64::from(u8::from(s.z[(i, j)])))?;
                    emit(format!("theta{tag}"), s.theta[(i, j)])?;
                    if let MuState::Random(mu) = &s.mu {
                        emit(format!("mu{tag}"), mu[(i, j)])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Fitted curves `B diag(Ẑ) β̂` on each curve's grid; when the data were
/// standardized a `fitted_rescaled` column multiplies back by the scale.
pub fn write_fitted<W: Write>(
    data: &Dataset,
    bases: &[BasisMatrix],
    summary: &FitSummary,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let scales = data.scales();
    if scales.is_some() {
        w.write_record(["curve_id", "t", "fitted", "fitted_rescaled"])?;
    } else {
        w.write_record(["curve_id", "t", "fitted"])?;
    }
    for (i, (curve, basis)) in data.curves().iter().zip(bases).enumerate() {
        let fitted = fitted_values(basis, &summary.z_hat[i], &summary.beta_hat[i])?;
        for (t, f) in curve.t.iter().zip(fitted.iter()) {
            match scales {
                Some(s) => w.write_record([curve.id.as_str(), &fmt(*t), &fmt(*f), &fmt(f * s[i])])?,
                None => w.write_record([curve.id.as_str(), &fmt(*t), &fmt(*f)])?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize, W: Write>(value: &T, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file<F>(path: impl AsRef<Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
