//! Flat `key = value` run configuration. Blank lines and `#` comments are ignored.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use super::split::{TrainSize, MIN_TRAIN};
use super::DataError;
use crate::model::{Family, GammaPrior, LogNormalPrior, ModelSpec, Process};
use crate::sampler::{HyperMode, PyTarget, SamplerConfig};

pub const DEFAULT_FREQ_TRAIN: usize = 2000;
pub const DEFAULT_SEV_TRAIN_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub process: Process,
    pub n0: f64,
    pub a: f64,
    pub b: f64,
    pub alpha_prior: GammaPrior,
    pub strength_prior: LogNormalPrior,
    pub iterations: usize,
    /// Defaults to half the iterations.
    pub burn_in: Option<usize>,
    pub thinning: usize,
    pub aux_components: usize,
    pub seed: u64,
    pub adapt_batch: usize,
    pub target_accept: f64,
    pub hyper: HyperMode,
    pub py_target: PyTarget,
    pub init_alpha: f64,
    pub init_discount: f64,
    pub freq_path: Option<PathBuf>,
    pub sev_path: Option<PathBuf>,
    pub covariates: Vec<String>,
    pub train_size: Option<usize>,
    pub train_fraction: Option<f64>,
    pub split_seed: u64,
    pub out_dir: PathBuf,
    pub y_max: usize,
    pub severity_points: usize,
    /// Dendrogram cut height for the point-estimate partition.
    pub cut: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = ModelSpec::frequency(Process::Dirichlet);
        let s = SamplerConfig::new(5000, 1);
        Self {
            process: spec.process,
            n0: spec.n0,
            a: spec.a,
            b: spec.b,
            alpha_prior: spec.alpha_prior,
            strength_prior: spec.strength_prior,
            iterations: s.iterations,
            burn_in: None,
            thinning: s.thinning,
            aux_components: s.aux_components,
            seed: s.seed,
            adapt_batch: s.adapt_batch,
            target_accept: s.target_accept,
            hyper: s.hyper,
            py_target: s.py_target,
            init_alpha: s.init_alpha,
            init_discount: s.init_discount,
            freq_path: None,
            sev_path: None,
            covariates: vec!["DriverAge".into(), "CarAge".into()],
            train_size: None,
            train_fraction: None,
            split_seed: 1,
            out_dir: PathBuf::from("run"),
            y_max: crate::predictive::DEFAULT_Y_MAX,
            severity_points: crate::predictive::DEFAULT_SEVERITY_POINTS,
            cut: 0.5,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, DataError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| DataError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

pub const KEYS: [&str; 31] = [
    "process", "n0", "a", "b", "alpha_shape", "alpha_rate", "strength_mu", "strength_sigma", "iterations",
    "burn_in", "thinning", "aux_components", "seed", "adapt_batch", "target_accept", "hyper", "py_target",
    "init_alpha", "init_discount", "freq_path", "sev_path", "covariates", "train_size", "train_fraction",
    "split_seed", "out_dir", "y_max", "severity_points", "cut", "family", "version",
];

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DataError> {
        let value = value.trim();
        match key.trim() {
            "process" => self.process = value.parse().map_err(DataError::Config)?,
            "n0" => self.n0 = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "alpha_shape" => self.alpha_prior.shape = parse(key, value)?,
            "alpha_rate" => self.alpha_prior.rate = parse(key, value)?,
            "strength_mu" => self.strength_prior.mu = parse(key, value)?,
            "strength_sigma" => self.strength_prior.sigma = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "burn_in" => self.burn_in = Some(parse(key, value)?),
            "thinning" => self.thinning = parse(key, value)?,
            "aux_components" => self.aux_components = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "adapt_batch" => self.adapt_batch = parse(key, value)?,
            "target_accept" => self.target_accept = parse(key, value)?,
            "hyper" => {
                self.hyper = match value {
                    "update" => HyperMode::Update,
                    "fixed" => HyperMode::Fixed,
                    v => return Err(DataError::Config(format!("hyper: expected update or fixed, got '{v}'"))),
                }
            }
            "py_target" => {
                self.py_target = match value {
                    "cluster-count" => PyTarget::ClusterCount,
                    "eppf" => PyTarget::Eppf,
                    v => return Err(DataError::Config(format!("py_target: expected cluster-count or eppf, got '{v}'"))),
                }
            }
            "init_alpha" => self.init_alpha = parse(key, value)?,
            "init_discount" => self.init_discount = parse(key, value)?,
            "freq_path" => self.freq_path = Some(PathBuf::from(value)),
            "sev_path" => self.sev_path = Some(PathBuf::from(value)),
            "covariates" => {
                self.covariates = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            "train_size" => {
                self.train_size = Some(parse(key, value)?);
                self.train_fraction = None;
            }
            "train_fraction" => {
                self.train_fraction = Some(parse(key, value)?);
                self.train_size = None;
            }
            "split_seed" => self.split_seed = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "y_max" => self.y_max = parse(key, value)?,
            "severity_points" => self.severity_points = parse(key, value)?,
            "cut" => self.cut = parse(key, value)?,
            // informational keys written into manifests
            "family" | "version" => {}
            other => return Err(DataError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), DataError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DataError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v).map_err(|e| DataError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn model_spec(&self, family: Family) -> ModelSpec {
        ModelSpec {
            family,
            process: self.process,
            n0: self.n0,
            a: self.a,
            b: self.b,
            alpha_prior: self.alpha_prior,
            strength_prior: self.strength_prior,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let mut s = SamplerConfig::new(self.iterations, self.seed);
        if let Some(b) = self.burn_in {
            s.burn_in = b;
        }
        s.thinning = self.thinning;
        s.aux_components = self.aux_components;
        s.adapt_batch = self.adapt_batch;
        s.target_accept = self.target_accept;
        s.hyper = self.hyper;
        s.py_target = self.py_target;
        s.init_alpha = self.init_alpha;
        s.init_discount = self.init_discount;
        s
    }

    /// Training-set size rule for `family`, falling back to the family default.
    pub fn train(&self, family: Family) -> TrainSize {
        match (self.train_size, self.train_fraction) {
            (Some(n), _) => TrainSize::Count(n),
            (None, Some(f)) => TrainSize::Fraction(f),
            (None, None) => match family {
                Family::PoissonFrequency => TrainSize::Count(DEFAULT_FREQ_TRAIN),
                Family::NormalSeverity => TrainSize::Fraction(DEFAULT_SEV_TRAIN_FRACTION),
            },
        }
    }

    pub fn covariate_refs(&self) -> Vec<&str> {
        self.covariates.iter().map(String::as_str).collect()
    }

    /// Checks settings that do not depend on the data.
    pub fn check(&self) -> Result<(), DataError> {
        if matches!(self.train_size, Some(n) if n < MIN_TRAIN) {
            return Err(DataError::Config(format!("train_size must be at least {MIN_TRAIN}")));
        }
        if matches!(self.train_fraction, Some(f) if !(f > 0.0 && f < 1.0)) {
            return Err(DataError::Config("train_fraction must lie in (0, 1)".into()));
        }
        for (name, v) in [
            ("n0", self.n0),
            ("a", self.a),
            ("b", self.b),
            ("alpha_shape", self.alpha_prior.shape),
            ("alpha_rate", self.alpha_prior.rate),
            ("strength_sigma", self.strength_prior.sigma),
        ] {
            if !(v > 0.0) {
                return Err(DataError::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.cut > 0.0 && self.cut < 1.0) {
            return Err(DataError::Config(format!("cut = {} must lie in (0, 1)", self.cut)));
        }
        self.sampler_config().check().map_err(|e| DataError::Config(e.to_string()))
    }

    /// Renders every setting so that `apply_text` reproduces it.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("process", self.process.to_string());
        kv("n0", self.n0.to_string());
        kv("a", self.a.to_string());
        kv("b", self.b.to_string());
        kv("alpha_shape", self.alpha_prior.shape.to_string());
        kv("alpha_rate", self.alpha_prior.rate.to_string());
        kv("strength_mu", self.strength_prior.mu.to_string());
        kv("strength_sigma", self.strength_prior.sigma.to_string());
        kv("iterations", self.iterations.to_string());
        kv("burn_in", self.sampler_config().burn_in.to_string());
        kv("thinning", self.thinning.to_string());
        kv("aux_components", self.aux_components.to_string());
        kv("seed", self.seed.to_string());
        kv("adapt_batch", self.adapt_batch.to_string());
        kv("target_accept", self.target_accept.to_string());
        kv("hyper", if self.hyper == HyperMode::Fixed { "fixed" } else { "update" }.into());
        kv("py_target", if self.py_target == PyTarget::Eppf { "eppf" } else { "cluster-count" }.into());
        kv("init_alpha", self.init_alpha.to_string());
        kv("init_discount", self.init_discount.to_string());
        if let Some(p) = &self.freq_path {
            kv("freq_path", p.display().to_string());
        }
        if let Some(p) = &self.sev_path {
            kv("sev_path", p.display().to_string());
        }
        kv("covariates", self.covariates.join(","));
        if let Some(n) = self.train_size {
            kv("train_size", n.to_string());
        }
        if let Some(f) = self.train_fraction {
            kv("train_fraction", f.to_string());
        }
        kv("split_seed", self.split_seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("y_max", self.y_max.to_string());
        kv("severity_points", self.severity_points.to_string());
        kv("cut", self.cut.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# run\nprocess = py\niterations = 300 \nburn_in=100\ncovariates = x1, x2\ntrain_size = 50\nhyper = fixed # pinned\n")
            .unwrap();
        assert_eq!(cfg.process, Process::PitmanYor);
        assert_eq!(cfg.sampler_config().burn_in, 100);
        assert_eq!(cfg.covariates, vec!["x1", "x2"]);
        assert_eq!(cfg.train(Family::NormalSeverity), TrainSize::Count(50));
        assert_eq!(cfg.hyper, HyperMode::Fixed);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("iterations 5").unwrap_err().to_string().contains("line 1"));
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("seed = -1").is_err());
        cfg.apply_text("train_size = 5").unwrap();
        assert!(cfg.check().is_err());
    }

    #[test]
    fn family_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train(Family::PoissonFrequency), TrainSize::Count(2000));
        assert_eq!(cfg.train(Family::NormalSeverity), TrainSize::Fraction(0.1));
        assert_eq!(cfg.model_spec(Family::NormalSeverity), ModelSpec::severity(Process::Dirichlet));
        cfg.check().unwrap();
    }
}
