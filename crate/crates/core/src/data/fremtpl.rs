//! Readers for the French motor third-party liability policy (freMTPLfreq) and
//! claim (freMTPLsev) CSV exports.

use std::collections::HashMap;
use std::path::Path;

use super::DataError;
use crate::model::{validate, Dataset, Family, ModelSpec, Process};

/// Columns of the policy file. Only PolicyID, ClaimNb, Exposure and the
/// selected covariates are required; the rest are carried but unused.
pub const FREQ_COLUMNS: [&str; 10] = [
    "PolicyID", "ClaimNb", "Exposure", "Power", "CarAge", "DriverAge", "Brand", "Gas", "Region", "Density",
];
pub const DEFAULT_COVARIATES: [&str; 2] = ["DriverAge", "CarAge"];

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub policy_id: String,
    pub claims: f64,
    pub exposure: f64,
    pub covariates: Vec<f64>,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn { column: name.to_string(), path: path.display().to_string() })
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, DataError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::from_csv(e, path))
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str, path: &Path) -> Result<f64, DataError> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<f64>().map_err(|_| DataError::Parse {
        path: path.display().to_string(),
        line,
        msg: format!("column {name}: '{raw}' is not a number"),
    })
}

/// Reads every policy row with the named covariates, unvalidated.
pub fn read_policies(path: &Path, covariates: &[&str]) -> Result<Vec<PolicyRow>, DataError> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| DataError::from_csv(e, path))?.clone();
    let id = column(&headers, "PolicyID", path)?;
    let nb = column(&headers, "ClaimNb", path)?;
    let ex = column(&headers, "Exposure", path)?;
    let cov: Vec<usize> = covariates.iter().map(|c| column(&headers, c, path)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::from_csv(e, path))?;
        rows.push(PolicyRow {
            policy_id: rec.get(id).unwrap_or("").to_string(),
            claims: number(&rec, nb, "ClaimNb", path)?,
            exposure: number(&rec, ex, "Exposure", path)?,
            covariates: cov
                .iter()
                .zip(covariates)
                .map(|(&i, name)| number(&rec, i, name, path))
                .collect::<Result<_, _>>()?,
        });
    }
    Ok(rows)
}

/// Claim counts with exposures and raw (unstandardized) covariates.
pub fn load_frequency(path: &Path, covariates: &[&str]) -> Result<Dataset, DataError> {
    let rows = read_policies(path, covariates)?;
    let data = Dataset::from_covariates(
        Family::PoissonFrequency,
        covariates,
        &rows.iter().map(|r| r.covariates.clone()).collect::<Vec<_>>(),
        rows.iter().map(|r| r.exposure).collect(),
        rows.iter().map(|r| r.claims).collect(),
    );
    let report = validate(&data, &ModelSpec::frequency(Process::Dirichlet));
    if !report.is_ok() {
        return Err(DataError::Validation(report));
    }
    Ok(data)
}

/// Severity rows plus counts of claims excluded during the join.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityLoad {
    pub data: Dataset,
    pub unmatched: usize,
    pub nonpositive: usize,
}

/// Joins claims to policies on PolicyID; the response is ln(ClaimAmount).
pub fn load_severity(freq_path: &Path, sev_path: &Path, covariates: &[&str]) -> Result<SeverityLoad, DataError> {
    let policies = read_policies(freq_path, covariates)?;
    let by_id: HashMap<&str, &PolicyRow> = policies.iter().map(|p| (p.policy_id.as_str(), p)).collect();
    let mut rdr = open(sev_path)?;
    let headers = rdr.headers().map_err(|e| DataError::from_csv(e, sev_path))?.clone();
    let id = column(&headers, "PolicyID", sev_path)?;
    let amt = column(&headers, "ClaimAmount", sev_path)?;
    let (mut cov, mut y) = (Vec::new(), Vec::new());
    let (mut unmatched, mut nonpositive) = (0, 0);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::from_csv(e, sev_path))?;
        let amount = number(&rec, amt, "ClaimAmount", sev_path)?;
        let Some(p) = by_id.get(rec.get(id).unwrap_or("")) else {
            unmatched += 1;
            continue;
        };
        if !(amount > 0.0) {
            nonpositive += 1;
            continue;
        }
        cov.push(p.covariates.clone());
        y.push(amount.ln());
    }
    if unmatched > 0 || nonpositive > 0 {
        log::warn!("severity join excluded {unmatched} unmatched and {nonpositive} nonpositive claims");
    }
    if y.is_empty() {
        return Err(DataError::NoMatchingPolicies);
    }
    let n = y.len();
    let data = Dataset::from_covariates(Family::NormalSeverity, covariates, &cov, vec![1.0; n], y);
    let report = validate(&data, &ModelSpec::severity(Process::Dirichlet));
    if !report.is_ok() {
        return Err(DataError::Validation(report));
    }
    Ok(SeverityLoad { data, unmatched, nonpositive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    const HEADER: &str = "PolicyID,ClaimNb,Exposure,Power,CarAge,DriverAge,Brand,Gas,Region,Density";

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn policies() -> tempfile::NamedTempFile {
        file(&format!(
            "{HEADER}\n1,0,0.09,g,0,46,Japanese (except Nissan) or Korean,Diesel,Aquitaine,76\n\
             2,1,0.84,g,0,46,Japanese (except Nissan) or Korean,Diesel,Aquitaine,76\n\
             3,0,0.52,f,2,38,Japanese (except Nissan) or Korean,Regular,Nord-Pas-de-Calais,3003\n"
        ))
    }

    #[test]
    fn three_rows() {
        let f = policies();
        let d = load_frequency(f.path(), &DEFAULT_COVARIATES).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 3);
        assert_eq!(d.x[2], vec![1.0, 38.0, 2.0]);
        assert_eq!(d.response, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_exposure_surfaces_validation() {
        let f = file(&format!("{HEADER}\n1,0,0,g,0,46,A,Diesel,R,76\n"));
        match load_frequency(f.path(), &DEFAULT_COVARIATES) {
            Err(DataError::Validation(r)) => assert!(r.to_string().contains("nonpositive exposure")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_names_line() {
        let f = file(&format!("{HEADER}\n1,0,0.5,g,0,46,A,Diesel,R,76\n2,0,0.5,g,0,old,A,Diesel,R,76\n"));
        let err = load_frequency(f.path(), &DEFAULT_COVARIATES).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err:?}");
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn missing_column() {
        let f = file("PolicyID,ClaimNb,Exposure\n1,0,0.5\n");
        assert!(matches!(load_frequency(f.path(), &DEFAULT_COVARIATES), Err(DataError::MissingColumn { .. })));
    }

    #[test]
    fn severity_join() {
        let p = policies();
        let s = file("PolicyID,ClaimAmount\n2,100\n2,50\n9,300\n3,0\n");
        let load = load_severity(p.path(), s.path(), &DEFAULT_COVARIATES).unwrap();
        assert_eq!(load.data.len(), 2);
        assert_eq!(load.data.x[0], load.data.x[1]);
        assert_relative_eq!(load.data.response[0], 4.6052, epsilon = 1e-4);
        assert_eq!(load.unmatched, 1);
        assert_eq!(load.nonpositive, 1);
        let none = file("PolicyID,ClaimAmount\n99,10\n");
        assert!(matches!(load_severity(p.path(), none.path(), &DEFAULT_COVARIATES), Err(DataError::NoMatchingPolicies)));
    }
}
