use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::DataError;
use crate::kernels::ChainRng;
use crate::model::{ColumnScale, Dataset, Standardization};

/// How many rows go to training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainSize {
    Count(usize),
    Fraction(f64),
}

impl TrainSize {
    pub fn rows(&self, n: usize) -> usize {
        match *self {
            TrainSize::Count(c) => c,
            TrainSize::Fraction(f) => (f * n as f64).round() as usize,
        }
    }
}

pub const MIN_TRAIN: usize = 10;

/// Per-column mean and sample sd of the raw covariates (design columns 1..).
pub fn fit_standardization(data: &Dataset) -> Result<Standardization, DataError> {
    let n = data.len() as f64;
    let mut columns = Vec::new();
    for j in 1..data.dim() {
        let mean = data.x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = data.x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(DataError::ZeroVariance { column: data.colnames.get(j).cloned().unwrap_or_default() });
        }
        columns.push(ColumnScale { mean, sd });
    }
    Ok(Standardization { columns })
}

/// Applies `std` to raw design rows.
pub fn apply_standardization(data: &Dataset, std: &Standardization) -> Dataset {
    let mut out = data.clone();
    for row in &mut out.x {
        *row = std.design_row(&row[1..]);
    }
    out.standardization = Some(std.clone());
    out
}

/// Seeded random split; covariates are standardized with training means and sds.
/// Rows keep their original relative order within each part.
pub fn standardize_split(data: &Dataset, train: TrainSize, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let n = data.len();
    let m = train.rows(n);
    if m < MIN_TRAIN || m >= n {
        return Err(DataError::Config(format!("train size {m} must be in {MIN_TRAIN}..{n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChainRng::seed_from_u64(seed));
    let (mut tr, mut te) = (idx[..m].to_vec(), idx[m..].to_vec());
    tr.sort_unstable();
    te.sort_unstable();
    let train_raw = data.subset(&tr);
    let std = fit_standardization(&train_raw)?;
    Ok((apply_standardization(&train_raw, &std), apply_standardization(&data.subset(&te), &std)))
}
