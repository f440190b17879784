use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Attribute, AttributeKind, OperatingPointSet};
use crate::error::{Error, Result};

/// JSON sidecar written next to a dataset CSV with per-attribute bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSidecar {
    pub attributes: Vec<Attribute>,
}

/// `dataset.csv` -> `dataset.normalization.json`
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.normalization.json"))
}

pub fn read_sidecar(path: &Path) -> Result<NormalizationSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Read `hour,<attr1>,<attr2>,...` and normalize every column.
///
/// Attribute kinds come from the sidecar when one sits next to the file, and
/// are otherwise inferred from the column names.
pub fn load_csv(path: impl AsRef<Path>) -> Result<OperatingPointSet> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |row: usize, line: usize, message: String| Error::Parse {
        path: display.clone(),
        row,
        line,
        message,
    };

    let header = reader
        .headers()
        .map_err(|e| parse_err(0, 1, e.to_string()))?
        .clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("hour") {
        return Err(parse_err(
            0,
            1,
            "header must be `hour,<attr1>,<attr2>,...`".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n_cols = names.len();

    let mut hours = Vec::new();
    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(row, row + 1, e.to_string()))?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        if record.len() != n_cols + 1 {
            return Err(parse_err(
                row,
                line,
                format!("expected {} fields, found {}", n_cols + 1, record.len()),
            ));
        }
        let hour: usize = record[0]
            .parse()
            .map_err(|_| parse_err(row, line, format!("invalid hour `{}`", &record[0])))?;
        let mut values = Vec::with_capacity(n_cols);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    row,
                    line,
                    format!("column `{}`: invalid number `{cell}`", names[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    row,
                    line,
                    format!("column `{}`: non-finite value", names[j]),
                ));
            }
            values.push(v);
        }
        hours.push(hour);
        raw.push(values);
    }

    let mut seen = std::collections::HashSet::new();
    for (i, &h) in hours.iter().enumerate() {
        if !seen.insert(h) {
            return Err(parse_err(i + 1, i + 2, format!("duplicate hour {h}")));
        }
    }

    let sidecar = sidecar_path(path);
    let kinds: Vec<AttributeKind> = match sidecar.exists().then(|| read_sidecar(&sidecar)) {
        Some(Ok(sc)) if sc.attributes.len() == n_cols => {
            sc.attributes.iter().map(|a| a.kind).collect()
        }
        _ => names.iter().map(|n| AttributeKind::infer(n)).collect(),
    };

    OperatingPointSet::normalize_with_hours(hours, &raw, names.into_iter().zip(kinds).collect())
}

/// Write the set in native units plus its normalization sidecar.
pub fn write_csv(set: &OperatingPointSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(out, "hour").map_err(io)?;
    for a in set.attributes() {
        write!(out, ",{}", a.name).map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (i, &h) in set.hours().iter().enumerate() {
        write!(out, "{h}").map_err(io)?;
        for v in set.raw_row(i) {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)?;

    let sidecar = NormalizationSidecar {
        attributes: set.attributes().to_vec(),
    };
    let sc_path = sidecar_path(path);
    std::fs::write(&sc_path, serde_json::to_string_pretty(&sidecar)?)
        .map_err(|e| Error::io(&sc_path, e))?;
    Ok(())
}
