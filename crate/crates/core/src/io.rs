//! Plain-text file formats: panel CSV, generator CSV, sample lists, and
//! atomic whole-file writes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generator::{StateId, SubIntensityMatrix};
use crate::panel::{PanelObservationSet, PanelPath};

pub const PANEL_HEADER: [&str; 3] = ["path_id", "time", "state"];

/// Shortest decimal that parses back to exactly `v`; exponent form for very
/// small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Input {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        }
    })
}

pub fn panel_to_csv(set: &PanelObservationSet) -> String {
    let mut out = PANEL_HEADER.join(",");
    out.push('\n');
    for p in set.paths() {
        for (t, s) in p.times.iter().zip(&p.states) {
            let _ = writeln!(out, "{},{},{}", p.id, fmt_f64(*t), s.number());
        }
    }
    out
}

pub fn write_panel(set: &PanelObservationSet, path: &Path) -> Result<()> {
    write_atomic(path, panel_to_csv(set).as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Input {
        line: e.position().map(|p| p.line() as usize),
        message: e.to_string(),
    }
}

struct PathBuilder {
    id: String,
    times: Vec<f64>,
    states: Vec<StateId>,
}

/// Parses panel CSV (`path_id,time,state`, states numbered 1..=n+1). Records
/// of one path must appear in increasing time order; paths keep the order of
/// their first record.
pub fn parse_panel(text: &str, n: usize) -> Result<PanelObservationSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>() != PANEL_HEADER {
        return Err(Error::input(1, format!("expected header '{}'", PANEL_HEADER.join(","))));
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut paths: Vec<PathBuilder> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::input(line, format!("expected 3 fields, found {}", record.len())));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(Error::input(line, "empty path_id"));
        }
        let time: f64 = record[1]
            .parse()
            .map_err(|_| Error::input(line, format!("malformed time '{}'", &record[1])))?;
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::input(line, format!("time {time} must be finite and >= 0")));
        }
        let number: usize = record[2]
            .parse()
            .map_err(|_| Error::input(line, format!("malformed state '{}'", &record[2])))?;
        let state = StateId::from_number(number)
            .filter(|s| s.index() <= n)
            .ok_or_else(|| Error::input(line, format!("state {number} outside 1..={}", n + 1)))?;
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            paths.push(PathBuilder {
                id: id.to_string(),
                times: Vec::new(),
                states: Vec::new(),
            });
            paths.len() - 1
        });
        let p = &mut paths[slot];
        match p.times.last() {
            None if time != 0.0 => {
                return Err(Error::input(line, format!("path '{id}' must start at time 0, got {time}")))
            }
            Some(&prev) if time <= prev => {
                return Err(Error::input(
                    line,
                    format!("non-increasing times in path '{id}': {prev} then {time}"),
                ))
            }
            _ => {}
        }
        if p.states.last().is_some_and(|s| s.is_absorbing(n)) {
            return Err(Error::input(
                line,
                format!("path '{id}' has a record after entering absorbing state {}", n + 1),
            ));
        }
        if p.states.is_empty() && state.is_absorbing(n) {
            return Err(Error::input(line, format!("path '{id}' starts in the absorbing state")));
        }
        p.times.push(time);
        p.states.push(state);
    }
    PanelObservationSet::new(
        n,
        paths
            .into_iter()
            .map(|p| PanelPath::new(p.id, p.times, p.states))
            .collect(),
    )
}

pub fn read_panel(path: &Path, n: usize) -> Result<PanelObservationSet> {
    parse_panel(&read_text(path)?, n)
}

/// Generator as CSV: `n` rows of `n` comma-separated rates.
pub fn generator_to_csv(m: &SubIntensityMatrix) -> String {
    let mut out = String::new();
    for row in m.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses rows of comma-separated numbers; blank lines are skipped.
/// `first_line` is the file line number of the first row, for messages.
pub fn parse_rows(text: &str, first_line: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let row = raw
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::input(first_line + i, format!("malformed number '{}'", c.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_generator_csv(text: &str) -> Result<SubIntensityMatrix> {
    let rows = parse_rows(text, 1)?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Input {
            line: None,
            message: format!("generator must be square, got {n} rows"),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    SubIntensityMatrix::new(DMatrix::from_row_slice(n, n, &flat))
}

/// One value per line under a `time` header.
pub fn samples_to_csv(values: &[f64]) -> String {
    let mut out = String::from("time\n");
    for v in values {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("time") => {}
        _ => return Err(Error::input(1, "expected header 'time'")),
    }
    let mut out = Vec::new();
    for (i, raw) in lines.enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::input(i + 2, format!("malformed number '{raw}'")))?;
        if !v.is_finite() {
            return Err(Error::input(i + 2, format!("non-finite value {v}")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    parse_samples(&read_text(path)?)
}
