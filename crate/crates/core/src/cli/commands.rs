use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;

use super::files::{self, create, open};
use super::{CliError, SimKind};
use crate::analysis::{
    chain_diagnostics, chi_square_gof, dissimilarity_matrix, expected_counts, fit_ols, fit_poisson_glm, mse,
    observed_counts, point_partition, AnalysisError, DEFAULT_LAGS,
};
use crate::data::{load_frequency, load_severity, simulate as draw_mixture, standardize_split, MixtureSpec, RunConfig};
use crate::kernels::ln_factorial;
use crate::model::format::{peek_spec, read_draws, write_draws};
use crate::model::{ComponentParams, Family, FreqParams, PosteriorDraws, Process, SevParams};
use crate::predictive::{
    default_severity_grid, predictive_freq, predictive_freq_batch, predictive_sev, predictive_sev_batch,
    predictive_freq_mean, predictive_sev_mean, LaplaceCache, PredictiveDistribution,
};
use crate::sampler::{fit_frequency, fit_severity};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn path_in(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

/// The two-component mixture written by `simulate`.
pub fn demo_mixture(kind: SimKind) -> MixtureSpec {
    let b = |v: [f64; 2]| DVector::from_column_slice(&v);
    match kind {
        SimKind::Freq => MixtureSpec::Frequency(vec![
            (0.5, FreqParams { beta: b([-1.0, 1.0]) }),
            (0.5, FreqParams { beta: b([1.0, -1.0]) }),
        ]),
        SimKind::Sev => MixtureSpec::Severity(vec![
            (0.5, SevParams { beta: b([0.0, 2.5]), sigma2: 0.25 }),
            (0.5, SevParams { beta: b([1.0, -2.5]), sigma2: 0.25 }),
        ]),
    }
}

pub fn simulate(kind: SimKind, n: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let sim = draw_mixture(&demo_mixture(kind), n, seed)?;
    fs::create_dir_all(out)?;
    let d = &sim.data;
    let covs = &d.colnames[1..];
    let policies = out.join("policies.csv");
    let mut w = create(&policies)?;
    writeln!(w, "PolicyID,ClaimNb,Exposure,{}", covs.join(","))?;
    for (i, o) in d.iter().enumerate() {
        let claims = if kind == SimKind::Freq { o.response } else { 1.0 };
        write!(w, "{},{claims},{:?}", i + 1, o.exposure)?;
        for v in &o.x[1..] {
            write!(w, ",{v:?}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    let mut conf = format!("# synthetic {n}-row data, seed {seed}\nfreq_path = {}\n", policies.display());
    if kind == SimKind::Sev {
        let claims = out.join("claims.csv");
        let mut w = create(&claims)?;
        writeln!(w, "PolicyID,ClaimAmount")?;
        for (i, y) in d.response.iter().enumerate() {
            writeln!(w, "{},{:?}", i + 1, y.exp())?;
        }
        w.flush()?;
        let _ = writeln!(conf, "sev_path = {}", claims.display());
    }
    let mut w = create(&out.join("truth.csv"))?;
    writeln!(w, "PolicyID,label")?;
    for (i, l) in sim.labels.iter().enumerate() {
        writeln!(w, "{},{l}", i + 1)?;
    }
    w.flush()?;
    let _ = writeln!(conf, "covariates = {}\ntrain_size = {}\nout_dir = {}", covs.join(","), n / 2, out.join("run").display());
    fs::write(out.join("run.conf"), conf)?;
    log::info!("wrote {n} simulated rows to {}", out.display());
    Ok(())
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Validation(format!("{key} is not set")))
}

pub fn fit(family: Family, cfg: &RunConfig) -> Result<(), CliError> {
    let covs = cfg.covariate_refs();
    let freq_path = require(&cfg.freq_path, "freq_path")?;
    let mut notes = String::new();
    let data = match family {
        Family::PoissonFrequency => load_frequency(freq_path, &covs)?,
        Family::NormalSeverity => {
            let load = load_severity(freq_path, require(&cfg.sev_path, "sev_path")?, &covs)?;
            let _ = writeln!(notes, "# excluded_unmatched_claims = {}", load.unmatched);
            let _ = writeln!(notes, "# excluded_nonpositive_claims = {}", load.nonpositive);
            load.data
        }
    };
    let (train, test) = standardize_split(&data, cfg.train(family), cfg.split_seed)?;
    fs::create_dir_all(&cfg.out_dir)?;
    files::write_dataset_csv(&train, &path_in(cfg, "train.csv"))?;
    files::write_dataset_csv(&test, &path_in(cfg, "test.csv"))?;
    if let Some(std) = &train.standardization {
        files::write_standardization(std, &train.colnames[1..], &path_in(cfg, "standardization.csv"))?;
    }
    let spec = cfg.model_spec(family);
    let scfg = cfg.sampler_config();
    log::info!("fitting {family} {} mixture on {} rows ({} held out)", spec.process, train.len(), test.len());
    let mut w = create(&path_in(cfg, "draws.txt"))?;
    let acceptance = match family {
        Family::PoissonFrequency => {
            let draws = fit_frequency(&train, &spec, &scfg)?;
            write_draws(&draws, &mut w)?;
            draws.meta.acceptance
        }
        Family::NormalSeverity => {
            let draws = fit_severity(&train, &spec, &scfg)?;
            write_draws(&draws, &mut w)?;
            draws.meta.acceptance
        }
    };
    w.flush()?;
    let mut m = create(&path_in(cfg, "manifest.txt"))?;
    writeln!(m, "# bnpclaims run manifest\nversion = {VERSION}\nfamily = {family}")?;
    write!(m, "{}", cfg.to_text())?;
    writeln!(m, "# rows_loaded = {}\n# train_rows = {}\n# test_rows = {}", data.len(), train.len(), test.len())?;
    write!(m, "{notes}")?;
    writeln!(m, "# saved_draws = {}", scfg.saved_draws())?;
    for (name, r) in [("phi", acceptance.phi), ("discount", acceptance.discount), ("strength", acceptance.strength)] {
        if let Some(r) = r {
            writeln!(m, "# acceptance_{name} = {r:.4}")?;
        }
    }
    m.flush()?;
    Ok(())
}

fn load_spec(cfg: &RunConfig) -> Result<crate::model::ModelSpec, CliError> {
    Ok(peek_spec(open(&path_in(cfg, "draws.txt"))?)?)
}

fn load<P: ComponentParams>(cfg: &RunConfig) -> Result<PosteriorDraws<P>, CliError> {
    Ok(read_draws(open(&path_in(cfg, "draws.txt"))?)?)
}

pub fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = load_spec(cfg)?;
    let test = files::read_dataset_csv(&path_in(cfg, "test.csv"), spec.family)?;
    let (preds, means) = match spec.family {
        Family::PoissonFrequency => {
            let draws = load(cfg)?;
            let rows: Vec<(Vec<f64>, f64)> = test.iter().map(|o| (o.x.to_vec(), o.exposure)).collect();
            let means = rows.par_iter().map(|(x, t)| predictive_freq_mean(&draws, x, *t)).collect::<Result<Vec<_>, _>>()?;
            (predictive_freq_batch(&draws, &rows, cfg.y_max)?, means)
        }
        Family::NormalSeverity => {
            let draws = load(cfg)?;
            let train = files::read_dataset_csv(&path_in(cfg, "train.csv"), spec.family)?;
            let grid = default_severity_grid(&train.response, cfg.severity_points)?;
            let means = test.x.par_iter().map(|x| predictive_sev_mean(&draws, x)).collect::<Result<Vec<_>, _>>()?;
            (predictive_sev_batch(&draws, &test.x, &grid)?, means)
        }
    };
    files::write_predictive(&preds, &path_in(cfg, "predictive.csv"))?;
    files::write_summary(&test, &means, &path_in(cfg, "predictive_summary.csv"))?;
    log::info!("wrote predictives for {} held-out rows", test.len());
    Ok(())
}

pub fn predict_at(cfg: &RunConfig, at: &str, exposure: f64) -> Result<(), CliError> {
    let raw: Vec<f64> = at
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| CliError::Validation(format!("--at: bad number '{v}'"))))
        .collect::<Result<_, _>>()?;
    let std = files::read_standardization(&path_in(cfg, "standardization.csv"))?;
    if raw.len() != std.columns.len() {
        return Err(CliError::Validation(format!("--at needs {} values, got {}", std.columns.len(), raw.len())));
    }
    let x = std.design_row(&raw);
    let spec = load_spec(cfg)?;
    let (pred, mean) = match spec.family {
        Family::PoissonFrequency => {
            let draws = load(cfg)?;
            let pred = predictive_freq(&draws, &x, exposure, cfg.y_max, &LaplaceCache::new())?;
            (pred, predictive_freq_mean(&draws, &x, exposure)?)
        }
        Family::NormalSeverity => {
            let draws = load(cfg)?;
            let train = files::read_dataset_csv(&path_in(cfg, "train.csv"), spec.family)?;
            let grid = default_severity_grid(&train.response, cfg.severity_points)?;
            (predictive_sev(&draws, &x, &grid)?, predictive_sev_mean(&draws, &x)?)
        }
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "y,mass")?;
    for (y, m) in pred.grid.iter().zip(&pred.mass) {
        writeln!(out, "{y:?},{m:?}")?;
    }
    writeln!(out, "# mean = {mean:?}")?;
    Ok(())
}

fn poisson_pmf(mean: f64, y_max: usize) -> Vec<f64> {
    (0..=y_max).map(|y| (y as f64 * mean.ln() - mean - ln_factorial(y as f64)).exp()).collect()
}

type Row = (String, &'static str, String);

fn gof_rows(model: &str, preds: &[PredictiveDistribution], ys: &[f64], rows: &mut Vec<Row>) -> Result<(), CliError> {
    let e = expected_counts(preds);
    let o = observed_counts(ys, e.len());
    let (stat, df, p) = match chi_square_gof(&e, &o) {
        Ok(g) => (format!("{:?}", g.stat), g.df.to_string(), format!("{:?}", g.p_value)),
        Err(err @ AnalysisError::TooFewBins { .. }) => {
            log::warn!("{model}: chi-square skipped: {err}");
            ("NA".into(), "NA".into(), "NA".into())
        }
        Err(err) => return Err(err.into()),
    };
    rows.push((model.to_string(), "chi2", stat));
    rows.push((model.to_string(), "chi2_df", df));
    rows.push((model.to_string(), "chi2_p", p));
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = load_spec(cfg)?;
    let train = files::read_dataset_csv(&path_in(cfg, "train.csv"), spec.family)?;
    let test = files::read_dataset_csv(&path_in(cfg, "test.csv"), spec.family)?;
    let bnp_means = files::read_summary_means(&path_in(cfg, "predictive_summary.csv"))?;
    let bnp = format!("bnp-{}", spec.process);
    let mut rows: Vec<Row> = Vec::new();
    rows.push((bnp.clone(), "mse", format!("{:?}", mse(&bnp_means, &test.response)?)));
    match spec.family {
        Family::PoissonFrequency => {
            let glm = fit_poisson_glm(&train)?;
            let glm_means: Vec<f64> = test.iter().map(|o| glm.predict(o.x, o.exposure)).collect();
            rows.push(("glm".into(), "mse", format!("{:?}", mse(&glm_means, &test.response)?)));
            let bnp_pmfs = files::to_pmfs(files::read_predictive(&path_in(cfg, "predictive.csv"))?, &bnp);
            let y_max = bnp_pmfs.first().map_or(cfg.y_max, |p| p.grid.len() - 1);
            let grid: Vec<f64> = (0..=y_max).map(|y| y as f64).collect();
            let glm_pmfs =
                files::to_pmfs(glm_means.iter().map(|&m| (grid.clone(), poisson_pmf(m, y_max))).collect(), "glm");
            gof_rows(&bnp, &bnp_pmfs, &test.response, &mut rows)?;
            gof_rows("glm", &glm_pmfs, &test.response, &mut rows)?;
        }
        Family::NormalSeverity => {
            let ols = fit_ols(&train)?;
            let ols_means: Vec<f64> = test.x.iter().map(|x| ols.predict(x)).collect();
            rows.push(("ols".into(), "mse", format!("{:?}", mse(&ols_means, &test.response)?)));
        }
    }
    let mut w = create(&path_in(cfg, "evaluation.csv"))?;
    writeln!(w, "model,metric,value")?;
    for (model, metric, value) in &rows {
        writeln!(w, "{model},{metric},{value}")?;
        println!("{model:>10} {metric:>8} {value}");
    }
    w.flush()?;
    Ok(())
}

fn cluster_draws<P: ComponentParams>(cfg: &RunConfig, draws: &PosteriorDraws<P>) -> Result<(), CliError> {
    let d = dissimilarity_matrix(draws)?;
    let part = point_partition(&d, cfg.cut)?;
    let n = d.n();
    let mut w = create(&path_in(cfg, "dissimilarity.csv"))?;
    for i in 0..n {
        let row: Vec<String> = d.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    // white where two rows always share a cluster, rows in dendrogram order
    let mut w = create(&path_in(cfg, "dissimilarity.pgm"))?;
    writeln!(w, "P2\n{n} {n}\n255")?;
    for &i in &part.leaf_order {
        let row: Vec<String> =
            part.leaf_order.iter().map(|&j| ((1.0 - d.get(i, j)) * 255.0).round().to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    let mut w = create(&path_in(cfg, "labels.csv"))?;
    writeln!(w, "row,label")?;
    for (i, l) in part.labels.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    w.flush()?;
    log::info!("point partition at cut {} has {} clusters", cfg.cut, part.num_clusters());
    Ok(())
}

pub fn cluster(cfg: &RunConfig) -> Result<(), CliError> {
    match load_spec(cfg)?.family {
        Family::PoissonFrequency => cluster_draws(cfg, &load::<FreqParams>(cfg)?),
        Family::NormalSeverity => cluster_draws(cfg, &load::<SevParams>(cfg)?),
    }
}

fn traces<P: ComponentParams>(draws: &PosteriorDraws<P>) -> Vec<(&'static str, Vec<f64>)> {
    let mut t = vec![("alpha", draws.alpha_trace())];
    if draws.meta.spec.process == Process::PitmanYor {
        t.push(("discount", draws.discount_trace()));
    }
    t.push(("k", draws.k_trace()));
    t.push(("loglik", draws.loglik_trace()));
    t
}

pub fn diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let series = match load_spec(cfg)?.family {
        Family::PoissonFrequency => traces(&load::<FreqParams>(cfg)?),
        Family::NormalSeverity => traces(&load::<SevParams>(cfg)?),
    };
    let mut w = create(&path_in(cfg, "diagnostics.csv"))?;
    write!(w, "series,n,mean,ess,geweke_z")?;
    for lag in DEFAULT_LAGS {
        write!(w, ",acf_{lag}")?;
    }
    writeln!(w)?;
    for (name, x) in &series {
        match chain_diagnostics(x) {
            Ok(d) => {
                write!(w, "{name},{},{:?},{:?},{:?}", d.n, d.mean, d.ess, d.geweke_z)?;
                for lag in DEFAULT_LAGS {
                    match d.acf.iter().find(|(l, _)| *l == lag) {
                        Some((_, r)) => write!(w, ",{r:?}")?,
                        None => write!(w, ",NA")?,
                    }
                }
            }
            Err(e) => {
                log::warn!("{name}: {e}");
                let mean = if x.is_empty() { "NA".to_string() } else { format!("{:?}", x.iter().sum::<f64>() / x.len() as f64) };
                write!(w, "{name},{},{mean},NA,NA{}", x.len(), ",NA".repeat(DEFAULT_LAGS.len()))?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
