//! Comma-separated numeric files without a header. When a file carries
//! labels, they are the integers in column 0.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::Array2;

use super::{SourceDataset, TargetDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub points: Array2<f64>,
    pub labels: Option<Vec<usize>>,
}

fn parse_label(cell: &str, row: usize, column: usize, class_count: Option<usize>) -> Result<usize> {
    let err = |message: String| Error::Parse { row, column, message };
    let label: usize = cell
        .parse()
        .map_err(|_| err(format!("label '{cell}' is not a non-negative integer")))?;
    if let Some(k) = class_count {
        if label >= k {
            return Err(err(format!("label {label} out of range for {k} classes")));
        }
    }
    Ok(label)
}

/// Parses CSV text. Blank lines are skipped; row numbers in errors are
/// 1-based line numbers.
pub fn parse_csv(text: &str, has_labels: bool, class_count: Option<usize>) -> Result<CsvTable> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row,
                    column: cells.len().min(w) + 1,
                    message: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        let mut feature_cells = &cells[..];
        if has_labels {
            labels.push(parse_label(cells[0], row, 1, class_count)?);
            feature_cells = &cells[1..];
        }
        let offset = usize::from(has_labels);
        for (c, cell) in feature_cells.iter().enumerate() {
            let column = c + offset + 1;
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let cols = values.len() / rows;
    let points = Array2::from_shape_vec((rows, cols), values).expect("rectangular rows");
    Ok(CsvTable {
        points,
        labels: has_labels.then_some(labels),
    })
}

pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<CsvTable> {
    parse_csv(&fs::read_to_string(path)?, has_labels, None)
}

/// Loads a labeled file. Without an explicit class count, it is one more
/// than the largest label.
pub fn load_source_csv(path: impl AsRef<Path>, class_count: Option<usize>) -> Result<SourceDataset> {
    let table = parse_csv(&fs::read_to_string(path)?, true, class_count)?;
    let labels = table.labels.expect("labeled parse");
    let k = class_count.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    SourceDataset::new(table.points, labels, k)
}

pub fn load_target_csv(path: impl AsRef<Path>) -> Result<TargetDataset> {
    TargetDataset::new(load_csv(path, false)?.points)
}

/// One non-negative integer label per line.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label(l.trim(), i + 1, 1, None))
        .collect::<Result<Vec<_>>>()?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(labels)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_labels(&fs::read_to_string(path)?)
}

fn write_row(out: &mut impl Write, label: Option<usize>, row: impl Iterator<Item = f64>) -> io::Result<()> {
    let mut cells: Vec<String> = label.map(|l| l.to_string()).into_iter().collect();
    // `{}` on f64 prints the shortest representation that parses back exactly
    cells.extend(row.map(|v| v.to_string()));
    writeln!(out, "{}", cells.join(","))
}

pub fn write_source_csv(mut out: impl Write, data: &SourceDataset) -> io::Result<()> {
    for (row, &y) in data.points().rows().into_iter().zip(data.labels()) {
        write_row(&mut out, Some(y), row.iter().copied())?;
    }
    Ok(())
}

pub fn write_points_csv(mut out: impl Write, points: &Array2<f64>) -> io::Result<()> {
    for row in points.rows() {
        write_row(&mut out, None, row.iter().copied())?;
    }
    Ok(())
}

pub fn write_labels(mut out: impl Write, labels: &[usize]) -> io::Result<()> {
    for y in labels {
        writeln!(out, "{y}")?;
    }
    Ok(())
}
