use super::Family;

/// Mean and standard deviation used to standardize one covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

/// Per-covariate scaling learned from training rows. Index `j` applies to
/// design column `j + 1` (the intercept is never scaled).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub columns: Vec<ColumnScale>,
}

impl Standardization {
    /// Maps raw covariates (without intercept) to a standardized design row.
    pub fn design_row(&self, raw: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(raw.len() + 1);
        x.push(1.0);
        x.extend(raw.iter().zip(&self.columns).map(|(v, s)| (v - s.mean) / s.sd));
        x
    }
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub x: &'a [f64],
    pub exposure: f64,
    pub response: f64,
}

/// Design rows with a leading 1, exposures and responses.
///
/// Construction does not enforce invariants; run [`super::validate`] before fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub family: Family,
    /// Column labels of the design, starting with the intercept.
    pub colnames: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub exposure: Vec<f64>,
    pub response: Vec<f64>,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(
        family: Family,
        colnames: Vec<String>,
        x: Vec<Vec<f64>>,
        exposure: Vec<f64>,
        response: Vec<f64>,
    ) -> Self {
        Self { family, colnames, x, exposure, response, standardization: None }
    }

    /// Builds a dataset from raw covariates, prepending the intercept.
    pub fn from_covariates(
        family: Family,
        covariate_names: &[&str],
        covariates: &[Vec<f64>],
        exposure: Vec<f64>,
        response: Vec<f64>,
    ) -> Self {
        let mut colnames = vec!["(Intercept)".to_string()];
        colnames.extend(covariate_names.iter().map(|s| s.to_string()));
        let x = covariates
            .iter()
            .map(|row| {
                let mut v = Vec::with_capacity(row.len() + 1);
                v.push(1.0);
                v.extend_from_slice(row);
                v
            })
            .collect();
        Self::new(family, colnames, x, exposure, response)
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Number of design columns, k + 1.
    pub fn dim(&self) -> usize {
        self.x.first().map_or(self.colnames.len(), Vec::len)
    }

    pub fn obs(&self, i: usize) -> Observation<'_> {
        Observation { x: &self.x[i], exposure: self.exposure[i], response: self.response[i] }
    }

    pub fn iter(&self) -> impl Iterator<Item = Observation<'_>> + '_ {
        (0..self.len()).map(move |i| self.obs(i))
    }

    /// Rows `idx`, in that order, sharing this dataset's columns and scaling.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            family: self.family,
            colnames: self.colnames.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            exposure: idx.iter().map(|&i| self.exposure[i]).collect(),
            response: idx.iter().map(|&i| self.response[i]).collect(),
            standardization: self.standardization.clone(),
        }
    }
}
