//! CSV reports. Each begins with a metadata comment block; times carry six
//! decimals.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::bayes::{Comparison, DiagnosticsReport, Summary};
use crate::error::{io_at, Result};
use crate::io::metadata::Metadata;
use crate::model::ParamId;
use crate::outcome::{CurveEstimate, IncidenceTable, OccupancyDecomposition, Profile};

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "NA".into(),
    }
}

fn start<W: Write>(mut out: W, meta: &Metadata, header: &[&str]) -> Result<csv::Writer<W>> {
    meta.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

/// One row per parameter: mean, sd and the 2.5/50/97.5% quantiles.
pub fn write_summary<W: Write>(out: W, meta: &Metadata, rows: &[(ParamId, Summary)]) -> Result<()> {
    let mut w = start(out, meta, &["parameter", "mean", "sd", "q2.5", "q50", "q97.5"])?;
    for (id, s) in rows {
        w.write_record([
            id.to_string(),
            format!("{:.6}", s.mean),
            format!("{:.6}", s.sd),
            format!("{:.6}", s.q025),
            format!("{:.6}", s.q50),
            format!("{:.6}", s.q975),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// R-hat, ESS, MCSE and mean acceptance of the parameter's block; `NA`
/// where a statistic is undefined.
pub fn write_diagnostics<W: Write>(out: W, meta: &Metadata, report: &DiagnosticsReport) -> Result<()> {
    let mut w = start(out, meta, &["parameter", "rhat", "ess", "mcse", "acceptance"])?;
    for p in &report.params {
        let acc = (!p.acceptance.is_empty()).then(|| p.acceptance.iter().sum::<f64>() / p.acceptance.len() as f64);
        w.write_record([
            p.id.to_string(),
            fmt_opt(p.rhat, 5),
            fmt_opt(p.ess, 1),
            fmt_opt(p.mcse, 8),
            fmt_opt(acc, 4),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows keyed by transition, sex and age; values in percent.
pub fn write_incidence<W: Write>(out: W, meta: &Metadata, table: &IncidenceTable) -> Result<()> {
    let mut w = start(out, meta, &["transition", "sex", "age", "mean_pct", "lower_pct", "upper_pct"])?;
    for r in &table.rows {
        w.write_record([
            r.transition.label().to_string(),
            r.profile.sex_label().to_string(),
            r.profile.age.to_string(),
            format!("{:.4}", r.mean),
            format!("{:.4}", r.lower),
            format!("{:.4}", r.upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Posterior mean and credible band of one quantity for several profiles.
pub fn write_curves<W: Write>(out: W, meta: &Metadata, curves: &[(Profile, CurveEstimate)]) -> Result<()> {
    let mut w = start(out, meta, &["sex", "age", "t", "mean", "lower", "upper"])?;
    for (profile, c) in curves {
        for (k, t) in c.grid.times().iter().enumerate() {
            w.write_record([
                profile.sex_label().to_string(),
                profile.age.to_string(),
                format!("{t:.6}"),
                format!("{:.8}", c.mean[k]),
                format!("{:.8}", c.lower[k]),
                format!("{:.8}", c.upper[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_decomposition<W: Write>(out: W, meta: &Metadata, d: &OccupancyDecomposition) -> Result<()> {
    let mut w = start(
        out,
        meta,
        &["t", "cif_refracture", "occupancy_refracture", "dead_after_refracture"],
    )?;
    for (k, t) in d.grid.times().iter().enumerate() {
        w.write_record([
            format!("{t:.6}"),
            format!("{:.8}", d.cif_refracture[k]),
            format!("{:.8}", d.occupancy_refracture[k]),
            format!("{:.8}", d.dead_after_refracture[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison<W: Write>(out: W, meta: &Metadata, cmp: &Comparison) -> Result<()> {
    let mut meta = meta.clone();
    meta.push("max_ratio", fmt_opt(cmp.max_ratio(), 4));
    let mut w = start(
        out,
        &meta,
        &[
            "parameter",
            "mean_cr",
            "sd_cr",
            "mcse_cr",
            "mean_id",
            "sd_id",
            "mcse_id",
            "abs_diff",
            "combined_mcse",
            "ratio",
        ],
    )?;
    for r in &cmp.rows {
        w.write_record([
            r.id.to_string(),
            format!("{:.6}", r.competing.mean),
            format!("{:.6}", r.competing.sd),
            fmt_opt(r.competing.mcse, 8),
            format!("{:.6}", r.illness_death.mean),
            format!("{:.6}", r.illness_death.sd),
            fmt_opt(r.illness_death.mcse, 8),
            format!("{:.3e}", r.abs_diff),
            fmt_opt(r.combined_mcse, 8),
            fmt_opt(r.ratio, 4),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Output directory that records the files written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_at(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes `name` through `f`, buffering and recording the path.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.root.join(name);
        let mut out = BufWriter::new(File::create(&path).map_err(|e| io_at(&path, e))?);
        f(&mut out)?;
        out.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Paths written so far, in order.
    pub fn manifest(&self) -> &[PathBuf] {
        &self.written
    }
}
