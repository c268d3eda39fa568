//! On-disk dataset format.
//!
//! A dataset is a directory holding `meta.json` (`{"T": .., "d": .., "n": [N_1, ..]}`)
//! and one headerless `task_<t>.csv` per task (t is 0-based). Each CSV row is
//! `d` feature values followed by the response.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{DesignMatrix, MultiTaskDataset, Task, WeightMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(rename = "T")]
    pub n_tasks: usize,
    pub d: usize,
    pub n: Vec<usize>,
}

pub fn task_file(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("task_{t}.csv"))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<MultiTaskDataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| {
        Error::Parse {
            file: meta_path.clone(),
            line: e.line(),
            message: e.to_string(),
        }
    })?;
    if meta.n.len() != meta.n_tasks {
        return Err(Error::Parse {
            file: meta_path,
            line: 1,
            message: format!("T = {} but n lists {} tasks", meta.n_tasks, meta.n.len()),
        });
    }
    let mut tasks = Vec::with_capacity(meta.n_tasks);
    for (t, &n_t) in meta.n.iter().enumerate() {
        tasks.push(read_task(&task_file(dir, t), n_t, meta.d)?);
    }
    MultiTaskDataset::new(tasks)
}

fn read_task(path: &Path, n_t: usize, d: usize) -> Result<Task> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut x = vec![0.0; n_t * d];
    let mut y = Vec::with_capacity(n_t);
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if i >= n_t {
            return Err(parse_err(line, format!("more than the {n_t} rows declared in meta.json")));
        }
        if record.len() != d + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields (d = {d} plus response), found {}", d + 1, record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("field {} is not a number: {field:?}", j + 1)))?;
            if j < d {
                x[j * n_t + i] = v;
            } else {
                y.push(v);
            }
        }
    }
    if y.len() != n_t {
        return Err(parse_err(
            y.len() + 1,
            format!("expected {n_t} rows, found {}", y.len()),
        ));
    }
    Ok(Task::new(DesignMatrix::from_col_major(n_t, d, x)?, y))
}

pub fn save_dataset(dir: impl AsRef<Path>, ds: &MultiTaskDataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = DatasetMeta {
        n_tasks: ds.n_tasks(),
        d: ds.n_features(),
        n: ds.block_lens(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    for (t, task) in ds.tasks().iter().enumerate() {
        let mut out = std::io::BufWriter::new(fs::File::create(task_file(dir, t))?);
        let mut line = String::new();
        for i in 0..task.n_samples() {
            line.clear();
            for j in 0..task.x.cols() {
                // shortest repr that parses back to the same f64
                line.push_str(&format!("{:?}", task.x.get(i, j)));
                line.push(',');
            }
            line.push_str(&format!("{:?}", task.y[i]));
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
    }
    Ok(())
}

/// `truth.csv`: d rows of T comma-separated values of the generating W*.
pub fn save_weights(path: impl AsRef<Path>, w: &WeightMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for l in 0..w.n_features() {
        let row: Vec<String> = w.row(l).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    file: path.to_path_buf(),
                    line: i + 1,
                    message: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    WeightMatrix::from_rows(&rows)
}
