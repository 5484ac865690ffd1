use std::path::Path;

use super::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::io::{binary_csv, matrix_csv, write_atomic};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

/// Reads a whitespace-separated panel whose first column is time and whose
/// replicates are separated by blank lines. An optional header row names
/// the series; without one they are called `G1..Gp`.
pub fn load_replicated_panel(path: &Path) -> Result<TimeSeriesPanel> {
    let text = read_text(path)?;
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut lengths: Vec<usize> = Vec::new();
    let mut block_start: Option<usize> = None;
    let mut current = 0usize;

    let close_block = |current: &mut usize, start: usize, lengths: &mut Vec<usize>| -> Result<()> {
        if *current > 0 {
            if let Some(&first) = lengths.first() {
                if *current != first {
                    return Err(format_err(
                        path,
                        start,
                        format!("replicate has {} time points, the first has {first}", *current),
                    ));
                }
            }
            lengths.push(*current);
            *current = 0;
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            if let Some(start) = block_start.take() {
                close_block(&mut current, start, &mut lengths)?;
            }
            continue;
        }
        if names.is_none() && rows.is_empty() && tokens[0].parse::<f64>().is_err() {
            if tokens.len() < 2 {
                return Err(format_err(path, line_no, "header names no series"));
            }
            names = Some(tokens[1..].iter().map(|s| s.to_string()).collect());
            continue;
        }
        let p = names.as_ref().map_or(tokens.len() - 1, Vec::len);
        if p == 0 || tokens.len() != p + 1 {
            return Err(format_err(
                path,
                line_no,
                format!("expected a time column and {p} values, found {} fields", tokens.len()),
            ));
        }
        let mut row = Vec::with_capacity(p);
        for (col, tok) in tokens.iter().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| format_err(path, line_no, format!("column {}: not a number: {tok:?}", col + 1)))?;
            if !v.is_finite() {
                return Err(format_err(path, line_no, format!("column {}: non-finite value", col + 1)));
            }
            if col > 0 {
                row.push(v);
            }
        }
        if names.is_none() {
            names = Some((1..=p).map(|i| format!("G{i}")).collect());
        }
        rows.push(row);
        current += 1;
        block_start.get_or_insert(line_no);
    }
    if let Some(start) = block_start {
        close_block(&mut current, start, &mut lengths)?;
    }
    let names = names.filter(|_| !rows.is_empty()).ok_or_else(|| format_err(path, 1, "no data rows"))?;
    TimeSeriesPanel::new(rows, names)?.with_replicates(lengths)
}

/// Reads `Ga Gb w` lines; a nonzero `w` marks `Ga -> Gb`, stored at
/// `truth[index(Gb)][index(Ga)]`. An empty file gives an all-zero matrix.
pub fn load_edge_list(path: &Path, names: &[String]) -> Result<Vec<Vec<u8>>> {
    let text = read_text(path)?;
    let p = names.len();
    let mut truth = vec![vec![0u8; p]; p];
    let index = |name: &str, line: usize| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| format_err(path, line, format!("unknown series name {name:?}")))
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 3 {
            return Err(format_err(path, line_no, "expected `cause effect weight`"));
        }
        let cause = index(tokens[0], line_no)?;
        let effect = index(tokens[1], line_no)?;
        let weight: f64 = tokens[2]
            .parse()
            .map_err(|_| format_err(path, line_no, format!("bad edge weight {:?}", tokens[2])))?;
        if weight != 0.0 {
            truth[effect][cause] = 1;
        }
    }
    Ok(truth)
}

/// Reads a panel CSV: a header of series names, then one row per time step.
pub fn read_panel_csv(path: &Path) -> Result<TimeSeriesPanel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| format_err(path, 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            format_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(names.len());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                format_err(path, line, format!("column {} ({}): not a number: {cell:?}", col + 1, names[col]))
            })?;
            if !v.is_finite() {
                return Err(format_err(path, line, format!("column {}: non-finite value", col + 1)));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, 1, "panel has no data rows"));
    }
    TimeSeriesPanel::new(rows, names)
}

pub fn write_panel_csv(path: &Path, panel: &TimeSeriesPanel) -> Result<()> {
    write_atomic(path, matrix_csv(Some(panel.series_names()), panel.data()).as_bytes())
}

/// Reads a headerless `p x p` matrix of 0/1 values.
pub fn read_truth_csv(path: &Path) -> Result<Vec<Vec<u8>>> {
    let text = read_text(path)?;
    let mut truth = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let row = raw
            .split(',')
            .enumerate()
            .map(|(col, cell)| match cell.trim() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(format_err(path, idx + 1, format!("column {}: expected 0 or 1, got {other:?}", col + 1))),
            })
            .collect::<Result<Vec<u8>>>()?;
        truth.push(row);
    }
    let p = truth.len();
    if p == 0 || truth.iter().any(|r| r.len() != p) {
        return Err(format_err(path, 1, "truth must be a nonempty square matrix"));
    }
    Ok(truth)
}

pub fn write_truth_csv(path: &Path, truth: &[Vec<u8>]) -> Result<()> {
    write_atomic(path, binary_csv(truth).as_bytes())
}
