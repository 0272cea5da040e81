//! Subject-level CSV: `id,sex,age,t_first,first_outcome,t_second,second_outcome`.
//!
//! `sex` is `M` or `W`; the post-refracture columns are empty unless
//! `first_outcome` is `refracture`. Lines starting with `#` are ignored.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::cohort::{center_ages, CohortDataset, FirstOutcome, PostRefracture, SecondOutcome, SubjectRecord};
use crate::error::{io_at, Error, Result};

pub const DATASET_COLUMNS: [&str; 7] = ["id", "sex", "age", "t_first", "first_outcome", "t_second", "second_outcome"];

/// How ages are centered after reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgeCenter {
    Fixed(f64),
    /// Mean age of the dataset.
    DatasetMean,
}

impl AgeCenter {
    fn as_option(self) -> Option<f64> {
        match self {
            AgeCenter::Fixed(c) => Some(c),
            AgeCenter::DatasetMean => None,
        }
    }
}

impl std::str::FromStr for AgeCenter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AgeCenter::DatasetMean);
        }
        s.parse::<f64>()
            .ok()
            .filter(|c| c.is_finite())
            .map(AgeCenter::Fixed)
            .ok_or_else(|| Error::Config(format!("age center must be a number or 'auto', got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDataset {
    pub dataset: CohortDataset,
    pub warnings: Vec<String>,
}

pub fn parse_dataset_csv(path: &Path, center: AgeCenter) -> Result<ParsedDataset> {
    let file = File::open(path).map_err(|e| io_at(path, e))?;
    read_dataset(file, &path.display().to_string(), center)
}

/// Reads a dataset from any reader; `source` names it in error messages.
pub fn read_dataset<R: Read>(reader: R, source: &str, center: AgeCenter) -> Result<ParsedDataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let header_line = rdr.position().line();
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(DATASET_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(header_line.max(1), format!("missing column {name:?}")))?;
    }

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), row.len()),
            ));
        }
        let field = |k: usize| row.get(index[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("{} is not a number: {:?}", DATASET_COLUMNS[k], field(k))))
        };
        let woman_indicator = match field(1) {
            "W" | "w" => 1,
            "M" | "m" => 0,
            other => return Err(parse_err(line, format!("sex must be M or W, got {other:?}"))),
        };
        let first_outcome: FirstOutcome = field(4).parse().map_err(|m| parse_err(line, m))?;
        let post_refracture = match (first_outcome, field(5).is_empty() && field(6).is_empty()) {
            (FirstOutcome::Refracture, true) => {
                return Err(parse_err(line, "refracture row needs t_second and second_outcome".into()))
            }
            (FirstOutcome::Refracture, false) => Some(PostRefracture {
                t_second: number(5)?,
                second_outcome: field(6).parse::<SecondOutcome>().map_err(|m| parse_err(line, m))?,
            }),
            (other, false) => {
                return Err(parse_err(
                    line,
                    format!("t_second/second_outcome must be empty when first_outcome is {other}"),
                ))
            }
            (_, true) => None,
        };
        records.push(SubjectRecord {
            id: field(0).to_string(),
            woman_indicator,
            age_at_discharge: number(2)?,
            t_first: number(3)?,
            first_outcome,
            post_refracture,
        });
        lines.push(line);
    }

    let mut warnings = Vec::new();
    if records.is_empty() {
        warnings.push(format!("{source}: no subject rows"));
    }
    let dataset = center_ages(records, center.as_option()).map_err(|e| match e {
        Error::Validation(mut v) => {
            for violation in &mut v {
                violation.rule = format!("{source}: line {}: {}", lines[violation.index], violation.rule);
            }
            Error::Validation(v)
        }
        other => other,
    })?;
    Ok(ParsedDataset { dataset, warnings })
}

/// Writes records with six-decimal times and ages; `comments` go first as
/// `# ` lines.
pub fn write_dataset<W: Write>(mut out: W, dataset: &CohortDataset, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_COLUMNS)?;
    for r in dataset.records() {
        let (t_second, second_outcome) = match &r.post_refracture {
            Some(p) => (format!("{:.6}", p.t_second), p.second_outcome.as_str()),
            None => (String::new(), ""),
        };
        w.write_record([
            r.id.as_str(),
            if r.woman_indicator == 1 { "W" } else { "M" },
            &format!("{:.6}", r.age_at_discharge),
            &format!("{:.6}", r.t_first),
            r.first_outcome.as_str(),
            &t_second,
            second_outcome,
        ])?;
    }
    w.flush()?;
    Ok(())
}
