//! Run-directory file formats. Floats are written with `{:?}` so they read back exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::CliError;
use crate::model::{ColumnScale, Dataset, Family, Standardization};
use crate::predictive::{GridKind, PredictiveDistribution};

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn bad(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: line {line}: {msg}", path.display()))
}

fn floats(path: &Path, line: usize, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad(path, line, format!("bad number '{v}'")))).collect()
}

/// `exposure,response,<covariates>` with design columns after the intercept.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    write!(w, "exposure,response")?;
    for c in &data.colnames[1..] {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for o in data.iter() {
        write!(w, "{:?},{:?}", o.exposure, o.response)?;
        for v in &o.x[1..] {
            write!(w, ",{v:?}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path, family: Family) -> Result<Dataset, CliError> {
    let mut lines = open(path)?.lines();
    let header = lines.next().ok_or_else(|| bad(path, 1, "empty file"))??;
    let names: Vec<&str> = header.split(',').skip(2).collect();
    let (mut cov, mut t, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let v = floats(path, i + 2, &line?)?;
        if v.len() != names.len() + 2 {
            return Err(bad(path, i + 2, "wrong number of fields"));
        }
        t.push(v[0]);
        y.push(v[1]);
        cov.push(v[2..].to_vec());
    }
    Ok(Dataset::from_covariates(family, &names, &cov, t, y))
}

pub fn write_standardization(std: &Standardization, names: &[String], path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "column,mean,sd")?;
    for (name, c) in names.iter().zip(&std.columns) {
        writeln!(w, "{name},{:?},{:?}", c.mean, c.sd)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_standardization(path: &Path) -> Result<Standardization, CliError> {
    let mut columns = Vec::new();
    for (i, line) in open(path)?.lines().enumerate().skip(1) {
        let line = line?;
        let (_, rest) = line.split_once(',').ok_or_else(|| bad(path, i + 1, "expected column,mean,sd"))?;
        match floats(path, i + 1, rest)?[..] {
            [mean, sd] => columns.push(ColumnScale { mean, sd }),
            _ => return Err(bad(path, i + 1, "expected column,mean,sd")),
        }
    }
    Ok(Standardization { columns })
}

/// Long format: `row,y,mass`.
pub fn write_predictive(preds: &[PredictiveDistribution], path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "row,y,mass")?;
    for (r, p) in preds.iter().enumerate() {
        for (y, m) in p.grid.iter().zip(&p.mass) {
            writeln!(w, "{r},{y:?},{m:?}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Grids and masses per row from [`write_predictive`] output.
pub fn read_predictive(path: &Path) -> Result<Vec<(Vec<f64>, Vec<f64>)>, CliError> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, line) in open(path)?.lines().enumerate().skip(1) {
        let line = line?;
        let (row, rest) = line.split_once(',').ok_or_else(|| bad(path, i + 1, "expected row,y,mass"))?;
        let row: usize = row.parse().map_err(|_| bad(path, i + 1, "bad row index"))?;
        let [y, m] = floats(path, i + 1, rest)?[..] else {
            return Err(bad(path, i + 1, "expected row,y,mass"));
        };
        if row == out.len() {
            out.push((Vec::new(), Vec::new()));
        } else if row + 1 != out.len() {
            return Err(bad(path, i + 1, "rows out of order"));
        }
        out[row].0.push(y);
        out[row].1.push(m);
    }
    Ok(out)
}

/// Reassembles pmfs for the χ² test.
pub fn to_pmfs(tables: Vec<(Vec<f64>, Vec<f64>)>, model: &str) -> Vec<PredictiveDistribution> {
    tables
        .into_iter()
        .map(|(grid, mass)| PredictiveDistribution {
            kind: GridKind::Pmf,
            grid,
            mass,
            x_new: Vec::new(),
            t_new: 1.0,
            model: model.to_string(),
        })
        .collect()
}

/// `row,exposure,observed,mean`.
pub fn write_summary(data: &Dataset, means: &[f64], path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "row,exposure,observed,mean")?;
    for (i, (o, m)) in data.iter().zip(means).enumerate() {
        writeln!(w, "{i},{:?},{:?},{m:?}", o.exposure, o.response)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_means(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut means = Vec::new();
    for (i, line) in open(path)?.lines().enumerate().skip(1) {
        let v = floats(path, i + 1, &line?)?;
        means.push(*v.last().ok_or_else(|| bad(path, i + 1, "empty line"))?);
    }
    Ok(means)
}
