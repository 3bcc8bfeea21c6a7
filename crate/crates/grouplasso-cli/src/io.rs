//! CSV file formats: matrices and vectors with a header row, group
//! specifications, and multi-task data sets as (task, y, x0..) tuples.
//!
//! Floats are written with Rust's shortest round-trip formatting, so an
//! export/import cycle reproduces the numbers bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use grouplasso::multitask::{TaskCollection, TaskData};
use grouplasso::norms::GroupPartition;
use ndarray::{Array1, Array2};

use crate::error::{CliError, CliResult};

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn open_reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path_str(path), e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn parse_f64(path: &Path, line: usize, field: &str) -> CliResult<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        CliError::parse(path_str(path), format!("line {line}: cannot parse number {field:?}"))
    })
}

/// Reads a matrix CSV (header row, one observation per line).
pub fn read_matrix(path: &Path) -> CliResult<(Vec<String>, Array2<f64>)> {
    let mut reader = open_reader(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::parse(path_str(path), e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() {
        return Err(CliError::parse(path_str(path), "empty header row"));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
        if record.len() != headers.len() {
            return Err(CliError::parse(
                path_str(path),
                format!("line {}: expected {} fields, got {}", i + 2, headers.len(), record.len()),
            ));
        }
        for field in record.iter() {
            rows.push(parse_f64(path, i + 2, field)?);
        }
        count += 1;
    }
    if count == 0 {
        return Err(CliError::parse(path_str(path), "no data rows"));
    }
    let matrix = Array2::from_shape_vec((count, headers.len()), rows)
        .map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
    Ok((headers, matrix))
}

/// Reads a single-column CSV into a vector (any header name accepted).
pub fn read_vector(path: &Path) -> CliResult<Array1<f64>> {
    let (headers, matrix) = read_matrix(path)?;
    if headers.len() != 1 {
        return Err(CliError::parse(
            path_str(path),
            format!("expected a single column, got {}", headers.len()),
        ));
    }
    Ok(matrix.column(0).to_owned())
}

/// Group specification: one line per group, `name,start,size`, contiguous
/// and covering all columns.
pub fn read_groups(path: &Path, total_dim: usize) -> CliResult<(Vec<String>, GroupPartition)> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::parse(path_str(path), e.to_string()))?
        .clone();
    if headers.len() != 3 {
        return Err(CliError::parse(path_str(path), "group file needs the header name,start,size"));
    }
    let mut names = Vec::new();
    let mut sizes = Vec::new();
    let mut cursor = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
        let line = i + 2;
        if record.len() != 3 {
            return Err(CliError::parse(path_str(path), format!("line {line}: expected 3 fields")));
        }
        let start: usize = record[1].trim().parse().map_err(|_| {
            CliError::parse(path_str(path), format!("line {line}: bad start {:?}", &record[1]))
        })?;
        let size: usize = record[2].trim().parse().map_err(|_| {
            CliError::parse(path_str(path), format!("line {line}: bad size {:?}", &record[2]))
        })?;
        if start != cursor {
            return Err(CliError::parse(
                path_str(path),
                format!("line {line}: group starts at {start}, expected {cursor} (groups must be contiguous)"),
            ));
        }
        if size == 0 {
            return Err(CliError::parse(path_str(path), format!("line {line}: size must be positive")));
        }
        names.push(record[0].to_string());
        sizes.push(size);
        cursor += size;
    }
    if cursor != total_dim {
        return Err(CliError::parse(
            path_str(path),
            format!("groups cover {cursor} columns, design has {total_dim}"),
        ));
    }
    let partition = GroupPartition::new(sizes)
        .map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
    Ok((names, partition))
}

pub fn write_groups(path: &Path, names: &[String], partition: &GroupPartition) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let err = |e: std::io::Error| CliError::io(path_str(path), e);
    writeln!(w, "name,start,size").map_err(err)?;
    for (j, range) in partition.iter_ranges().enumerate() {
        writeln!(w, "{},{},{}", names[j], range.start, range.len())
            .map_err(|e| CliError::io(path_str(path), e))?;
    }
    w.flush().map_err(|e| CliError::io(path_str(path), e))
}

/// One multi-task data set: header `task,y,x0..x{d-1}`, labels +-1.
pub fn write_tasks(path: &Path, tasks: &TaskCollection) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let err = |e: std::io::Error| CliError::io(path_str(path), e);
    let d = tasks.dim();
    let mut header = String::from("task,y");
    for j in 0..d {
        header.push_str(&format!(",x{j}"));
    }
    writeln!(w, "{header}").map_err(err)?;
    for (k, task) in tasks.tasks().iter().enumerate() {
        for i in 0..task.num_examples() {
            let mut line = format!("{k},{}", task.y()[i]);
            for j in 0..d {
                line.push(',');
                line.push_str(&format!("{}", task.x()[[i, j]]));
            }
            writeln!(w, "{line}").map_err(|e| CliError::io(path_str(path), e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path_str(path), e))
}

pub fn read_tasks(path: &Path) -> CliResult<TaskCollection> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::parse(path_str(path), e.to_string()))?
        .clone();
    if headers.len() < 3 || &headers[0] != "task" || &headers[1] != "y" {
        return Err(CliError::parse(path_str(path), "task file needs the header task,y,x0,..."));
    }
    let d = headers.len() - 2;
    let mut per_task: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
        let line = i + 2;
        if record.len() != headers.len() {
            return Err(CliError::parse(path_str(path), format!("line {line}: wrong field count")));
        }
        let task: usize = record[0].trim().parse().map_err(|_| {
            CliError::parse(path_str(path), format!("line {line}: bad task id {:?}", &record[0]))
        })?;
        if task >= per_task.len() {
            per_task.resize_with(task + 1, || (Vec::new(), Vec::new()));
        }
        let y = parse_f64(path, line, &record[1])?;
        per_task[task].1.push(y);
        for field in record.iter().skip(2) {
            per_task[task].0.push(parse_f64(path, line, field)?);
        }
    }
    let mut tasks = Vec::with_capacity(per_task.len());
    for (k, (xs, ys)) in per_task.into_iter().enumerate() {
        if ys.is_empty() {
            return Err(CliError::parse(path_str(path), format!("task {k} has no examples")));
        }
        let n = ys.len();
        let x = Array2::from_shape_vec((n, d), xs)
            .map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
        let task = TaskData::new(x, Array1::from(ys))
            .map_err(|e| CliError::parse(path_str(path), e.to_string()))?;
        tasks.push(task);
    }
    TaskCollection::new(tasks).map_err(|e| CliError::parse(path_str(path), e.to_string()))
}

/// Writes text to a file, or to stdout when the path is `-`.
pub fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    if path.as_os_str() == "-" {
        print!("{contents}");
        return Ok(());
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path_str(path), e))
}
