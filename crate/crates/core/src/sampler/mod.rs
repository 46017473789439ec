//! MCMC for DP and Pitman–Yor mixtures: Algorithm 8 sweeps, cluster-parameter
//! refresh and hyperparameter updates.

mod components;
pub mod hyper;
mod sweep;

pub use components::{
    independence_mh_step, update_phi_conjugate, update_phi_mh, ComponentModel, FlatLikelihood,
    MoveCount, NormalRegression, PoissonRegression,
};
pub use sweep::{neal8_sweep, prior_log_weights};

use std::time::Instant;

use rand::SeedableRng;
use thiserror::Error;

use crate::kernels::{ChainRng, NumericError};
use crate::model::{
    validate, AcceptanceRates, ClusterState, Dataset, DrawsMeta, Family, ModelSpec, PosteriorDraws,
    Process, SavedState, ValidationReport,
};
use hyper::{kn_log_pmf, py_log_eppf, update_alpha_dp, update_py_hyper, AdaptiveScales};

/// Whether process hyperparameters are sampled or held at their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperMode {
    Update,
    Fixed,
}

/// Likelihood used for the Pitman–Yor (d, α) update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PyTarget {
    /// Distribution of the number of occupied clusters.
    ClusterCount,
    /// Exchangeable partition probability of the full cluster sizes.
    Eppf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Auxiliary components per reassignment.
    pub aux_components: usize,
    pub seed: u64,
    pub adapt_batch: usize,
    pub target_accept: f64,
    /// Random-walk log-scales for logit(d) and ln(α + d).
    pub proposal_log_scales: [f64; 2],
    pub hyper: HyperMode,
    pub py_target: PyTarget,
    pub init_alpha: f64,
    pub init_discount: f64,
}

impl SamplerConfig {
    /// Defaults with burn-in at half the iterations.
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: iterations / 2,
            thinning: 1,
            aux_components: 3,
            seed,
            adapt_batch: 50,
            target_accept: 0.44,
            proposal_log_scales: [0.0, 0.0],
            hyper: HyperMode::Update,
            py_target: PyTarget::ClusterCount,
            init_alpha: 1.0,
            init_discount: 0.1,
        }
    }

    pub fn check(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Config(m));
        if self.iterations <= self.burn_in {
            return bad(format!("iterations ({}) must exceed burn-in ({})", self.iterations, self.burn_in));
        }
        if self.thinning == 0 {
            return bad("thinning must be at least 1".into());
        }
        if self.aux_components == 0 {
            return bad("need at least one auxiliary component".into());
        }
        if self.adapt_batch == 0 {
            return bad("adaptation batch must be at least 1".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!("target acceptance {} outside (0, 1)", self.target_accept));
        }
        if !(self.init_alpha > 0.0) {
            return bad(format!("initial alpha {} must be positive", self.init_alpha));
        }
        if !(0.0..1.0).contains(&self.init_discount) {
            return bad(format!("initial discount {} outside [0, 1)", self.init_discount));
        }
        Ok(())
    }

    /// Number of saved states, `(iterations - burn_in) / thinning`.
    pub fn saved_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("dataset failed validation:\n{0}")]
    Validation(ValidationReport),
    #[error("numeric failure at iteration {iteration}: {source}")]
    Numeric { iteration: usize, source: NumericError },
}

fn state_loglik<M: ComponentModel>(model: &M, state: &ClusterState<M::Params>) -> f64 {
    (0..model.len()).map(|i| model.log_likelihood(i, state.params_of(i))).sum()
}

fn rate(accepted: usize, attempted: usize) -> Option<f64> {
    (attempted > 0).then(|| accepted as f64 / attempted as f64)
}

/// Runs one chain: sweep, φ refresh, hyperparameter update, save.
pub fn run_chain<M: ComponentModel>(
    model: &M,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws<M::Params>, SamplerError> {
    cfg.check()?;
    let n = model.len();
    if n == 0 {
        return Err(SamplerError::Config("no observations".into()));
    }
    let started = Instant::now();
    let mut rng = ChainRng::seed_from_u64(cfg.seed);
    let num = |iteration: usize| move |source| SamplerError::Numeric { iteration, source };

    let discount = match spec.process {
        Process::Dirichlet => 0.0,
        Process::PitmanYor => cfg.init_discount,
    };
    let init = model.draw_prior(&mut rng).map_err(num(0))?;
    let mut state = ClusterState::single_cluster(n, init, cfg.init_alpha, discount);
    if let Err(e) = state.check_invariants() {
        return Err(SamplerError::Config(format!("initial state: {e}")));
    }
    let mut scales =
        AdaptiveScales::new(cfg.proposal_log_scales, cfg.adapt_batch, cfg.target_accept);
    let mut phi = MoveCount::default();
    let mut hyper_acc = [0usize; 2];
    let mut hyper_tries = 0usize;
    let mut draws = Vec::with_capacity(cfg.saved_draws());

    for it in 1..=cfg.iterations {
        let burning = it <= cfg.burn_in;
        neal8_sweep(&mut state, model, cfg.aux_components, &mut rng).map_err(num(it))?;
        let moves = model.refresh(&mut state, &mut rng).map_err(num(it))?;
        if !burning {
            phi += moves;
        }

        if cfg.hyper == HyperMode::Update {
            match spec.process {
                Process::Dirichlet => {
                    let a = update_alpha_dp(state.alpha(), state.k(), n, spec.alpha_prior, &mut rng)
                        .map_err(num(it))?;
                    state.set_alpha(a);
                }
                Process::PitmanYor => {
                    let k = state.k();
                    let sizes: Vec<usize> = state.clusters().values().map(|c| c.size).collect();
                    let target = cfg.py_target;
                    let loglik = |d: f64, a: f64| {
                        let r = match target {
                            PyTarget::ClusterCount => kn_log_pmf(n, k, d, a),
                            PyTarget::Eppf => py_log_eppf(&sizes, d, a),
                        };
                        r.unwrap_or(f64::NEG_INFINITY)
                    };
                    let step = update_py_hyper(
                        state.discount(),
                        state.alpha(),
                        spec.strength_prior,
                        scales.log_scales,
                        loglik,
                        &mut rng,
                    )
                    .map_err(num(it))?;
                    state.set_discount(step.discount);
                    state.set_alpha(step.alpha);
                    if burning {
                        scales.record(step.accepted);
                    } else {
                        hyper_tries += 1;
                        for (acc, a) in hyper_acc.iter_mut().zip(step.accepted) {
                            *acc += a as usize;
                        }
                    }
                }
            }
        }
        debug_assert!(state.check_invariants().is_ok(), "iteration {it}: {:?}", state.check_invariants());

        if it % 100 == 0 {
            log::info!(
                "iter {it}: K={} alpha={:.4} d={:.4} accept phi={} d={} s={}",
                state.k(),
                state.alpha(),
                state.discount(),
                fmt_rate(rate(phi.accepted, phi.attempted)),
                fmt_rate(rate(hyper_acc[0], hyper_tries)),
                fmt_rate(rate(hyper_acc[1], hyper_tries)),
            );
        }
        if !burning && (it - cfg.burn_in) % cfg.thinning == 0 {
            let loglik = state_loglik(model, &state);
            draws.push(SavedState { iteration: it, loglik, state: state.clone() });
        }
    }
    log::info!("chain finished: {} iterations in {:.2?}", cfg.iterations, started.elapsed());

    let acceptance = AcceptanceRates {
        phi: rate(phi.accepted, phi.attempted),
        discount: rate(hyper_acc[0], hyper_tries),
        strength: rate(hyper_acc[1], hyper_tries),
    };
    let meta = DrawsMeta {
        spec: *spec,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        thinning: cfg.thinning,
        seed: cfg.seed,
        aux_components: cfg.aux_components,
        acceptance,
    };
    Ok(PosteriorDraws { meta, draws })
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn check_data(data: &Dataset, spec: &ModelSpec, family: Family) -> Result<(), SamplerError> {
    if spec.family != family || data.family != family {
        return Err(SamplerError::Config(format!(
            "expected a {family} model and dataset, got {} and {}",
            spec.family, data.family
        )));
    }
    let report = validate(data, spec);
    if report.is_ok() {
        Ok(())
    } else {
        Err(SamplerError::Validation(report))
    }
}

/// Validates and fits a Poisson-regression mixture.
pub fn fit_frequency(
    data: &Dataset,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws<crate::model::FreqParams>, SamplerError> {
    check_data(data, spec, Family::PoissonFrequency)?;
    run_chain(&PoissonRegression { data }, spec, cfg)
}

/// Validates and fits a normal-regression mixture of log claim amounts.
pub fn fit_severity(
    data: &Dataset,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws<crate::model::SevParams>, SamplerError> {
    check_data(data, spec, Family::NormalSeverity)?;
    run_chain(&NormalRegression::new(data, spec), spec, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::random::{poisson, standard_normal, uniform};
    use crate::model::format::write_draws;

    fn two_component_freq(n: usize, seed: u64) -> Dataset {
        let mut rng = ChainRng::seed_from_u64(seed);
        let mut cov = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let z = standard_normal(&mut rng);
            let beta = if i % 2 == 0 { [-1.0, 1.0] } else { [1.0, -1.0] };
            let ti = uniform(&mut rng, 0.5, 1.5).unwrap();
            y.push(poisson(&mut rng, ti * (beta[0] + beta[1] * z).exp()).unwrap() as f64);
            cov.push(vec![z]);
            t.push(ti);
        }
        Dataset::from_covariates(Family::PoissonFrequency, &["z"], &cov, t, y)
    }

    #[test]
    fn config_checks() {
        let mut cfg = SamplerConfig::new(100, 1);
        assert_eq!(cfg.burn_in, 50);
        assert_eq!(cfg.saved_draws(), 50);
        cfg.thinning = 3;
        assert_eq!(cfg.saved_draws(), 16);
        cfg.check().unwrap();
        cfg.burn_in = 100;
        assert!(cfg.check().is_err());
    }

    #[test]
    fn saved_count_and_seed_reproducibility() {
        let data = two_component_freq(40, 51);
        let spec = ModelSpec::frequency(Process::PitmanYor);
        let mut cfg = SamplerConfig::new(60, 9);
        cfg.thinning = 4;
        let a = fit_frequency(&data, &spec, &cfg).unwrap();
        let b = fit_frequency(&data, &spec, &cfg).unwrap();
        assert_eq!(a.len(), cfg.saved_draws());
        let (mut fa, mut fb) = (Vec::new(), Vec::new());
        write_draws(&a, &mut fa).unwrap();
        write_draws(&b, &mut fb).unwrap();
        assert_eq!(fa, fb);
        for d in &a.draws {
            d.state.check_invariants().unwrap();
        }
    }

    #[test]
    fn hyper_updates_leave_partition() {
        let data = two_component_freq(30, 52);
        let spec = ModelSpec::frequency(Process::Dirichlet);
        let model = PoissonRegression { data: &data };
        let mut rng = ChainRng::seed_from_u64(3);
        let mut state = ClusterState::single_cluster(30, model.draw_prior(&mut rng).unwrap(), 1.0, 0.0);
        for _ in 0..5 {
            neal8_sweep(&mut state, &model, 3, &mut rng).unwrap();
        }
        let before = state.assignments().to_vec();
        model.refresh(&mut state, &mut rng).unwrap();
        let a = update_alpha_dp(state.alpha(), state.k(), 30, spec.alpha_prior, &mut rng).unwrap();
        state.set_alpha(a);
        assert_eq!(state.assignments(), &before[..]);
    }

    #[test]
    fn wrong_family_rejected() {
        let data = two_component_freq(20, 53);
        let cfg = SamplerConfig::new(10, 1);
        let err = fit_severity(&data, &ModelSpec::severity(Process::Dirichlet), &cfg).unwrap_err();
        assert!(matches!(err, SamplerError::Config(_)));
        let mut bad = data.clone();
        bad.exposure[0] = 0.0;
        let err = fit_frequency(&bad, &ModelSpec::frequency(Process::Dirichlet), &cfg).unwrap_err();
        assert!(matches!(err, SamplerError::Validation(_)));
    }

    #[test]
    fn single_component_prefers_one_cluster() {
        let mut rng = ChainRng::seed_from_u64(54);
        let n = 150;
        let cov: Vec<Vec<f64>> = (0..n).map(|_| vec![standard_normal(&mut rng)]).collect();
        let y: Vec<f64> =
            cov.iter().map(|c| poisson(&mut rng, (0.3 + 0.5 * c[0]).exp()).unwrap() as f64).collect();
        let data = Dataset::from_covariates(Family::PoissonFrequency, &["z"], &cov, vec![1.0; n], y);
        let draws =
            fit_frequency(&data, &ModelSpec::frequency(Process::Dirichlet), &SamplerConfig::new(1000, 7))
                .unwrap();
        let mut hist = std::collections::BTreeMap::<usize, usize>::new();
        for d in &draws.draws {
            *hist.entry(d.state.k()).or_default() += 1;
        }
        let one = hist.get(&1).copied().unwrap_or(0);
        assert!(hist.values().all(|&c| c <= one), "{hist:?}");
    }
}
