//! Posterior predictive distributions of a new response given covariates.
//!
//! For each saved state with strength α, discount d, clusters (n_j, φ_j) and n
//! observations, the predictive is
//! `[(α + dK) B(y) + Σ_j (n_j − d) f(y | φ_j)] / (α + n)`, averaged over states,
//! where B is the base-measure marginal. Grouping the data term by cluster keeps
//! every weight positive for d < 1, so no clamping is needed.

use std::collections::HashMap;
use std::sync::RwLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{dot, ln_factorial, log_sum_exp, NumericError};
use crate::likelihood::{laplace_marginal_freq, nig_marginal_sev_ln, normal_ln_pdf};
use crate::model::{ComponentParams, Family, FreqParams, ModelSpec, PosteriorDraws, SevParams};

#[derive(Debug, Error)]
pub enum PredictiveError {
    #[error("no posterior draws")]
    NoDraws,
    #[error("invalid input: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("predictive mass beyond the grid is about {tail:.3e}")]
    TailMassTooLarge { tail: f64 },
}

/// Whether `mass` holds probabilities on integers or density values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Pmf,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub kind: GridKind,
    pub grid: Vec<f64>,
    pub mass: Vec<f64>,
    /// Standardized design row the prediction is for.
    pub x_new: Vec<f64>,
    pub t_new: f64,
    pub model: String,
}

impl PredictiveDistribution {
    pub fn mean(&self) -> Result<f64, PredictiveError> {
        predictive_mean(self)
    }
}

/// Geometric-tail estimate of the pmf mass beyond the last grid point.
fn pmf_tail(mass: &[f64]) -> f64 {
    match mass {
        [.., prev, last] if *last > 0.0 => {
            let r = last / prev;
            if r < 1.0 {
                last * r / (1.0 - r)
            } else {
                f64::INFINITY
            }
        }
        [.., _] => 0.0,
        [] => 0.0,
    }
}

fn trapezoid(grid: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    grid.windows(2).enumerate().map(|(i, w)| 0.5 * (w[1] - w[0]) * (f(i) + f(i + 1))).sum()
}

/// Σ y·mass for a pmf, trapezoid ∫ y·density for a density.
pub fn predictive_mean(dist: &PredictiveDistribution) -> Result<f64, PredictiveError> {
    if dist.grid.len() != dist.mass.len() || dist.grid.is_empty() {
        return Err(PredictiveError::InvalidParameter("grid and mass lengths differ".into()));
    }
    match dist.kind {
        GridKind::Pmf => {
            let tail = pmf_tail(&dist.mass);
            if tail >= 1e-6 {
                return Err(PredictiveError::TailMassTooLarge { tail });
            }
            Ok(dist.grid.iter().zip(&dist.mass).map(|(y, m)| y * m).sum())
        }
        GridKind::Density => {
            let total = trapezoid(&dist.grid, |i| dist.mass[i]);
            let tail = (1.0 - total).abs();
            if tail >= 1e-3 {
                return Err(PredictiveError::TailMassTooLarge { tail });
            }
            Ok(trapezoid(&dist.grid, |i| dist.grid[i] * dist.mass[i]))
        }
    }
}

/// Base-marginal values keyed by (y, t, x); identical keys give identical values.
#[derive(Debug, Default)]
pub struct LaplaceCache {
    map: RwLock<HashMap<Vec<u64>, f64>>,
}

impl LaplaceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ln of the Laplace-approximated frequency base marginal.
    pub fn log_marginal(&self, y: f64, t: f64, x: &[f64]) -> Result<f64, NumericError> {
        let mut key = Vec::with_capacity(x.len() + 2);
        key.push(y.to_bits());
        key.push(t.to_bits());
        key.extend(x.iter().map(|v| v.to_bits()));
        if let Some(v) = self.map.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = laplace_marginal_freq(y, t, x)?.log_marginal;
        self.map.write().expect("cache lock").insert(key, v);
        Ok(v)
    }
}

/// One cluster of one saved state: log mixture weight and the two numbers that
/// determine its component density (ln μ for Poisson; mean and σ² for normal).
struct Term {
    ln_w: f64,
    a: f64,
    b: f64,
}

struct Flattened {
    terms: Vec<Term>,
    /// ln Σ_t (α + dK)/(α + n).
    ln_base_weight: f64,
    ln_t: f64,
}

fn flatten<P: ComponentParams>(
    draws: &PosteriorDraws<P>,
    component: impl Fn(&P) -> (f64, f64),
) -> Result<Flattened, PredictiveError> {
    if draws.is_empty() {
        return Err(PredictiveError::NoDraws);
    }
    let mut terms = Vec::new();
    let mut base = Vec::with_capacity(draws.len());
    for d in &draws.draws {
        let s = &d.state;
        let denom = (s.alpha() + s.n() as f64).ln();
        base.push((s.alpha() + s.discount() * s.k() as f64).ln() - denom);
        for cl in s.clusters().values() {
            let (a, b) = component(&cl.params);
            terms.push(Term { ln_w: (cl.size as f64 - s.discount()).ln() - denom, a, b });
        }
    }
    Ok(Flattened { terms, ln_base_weight: log_sum_exp(&base), ln_t: (draws.len() as f64).ln() })
}

fn mixture_mass(
    flat: &Flattened,
    grid: &[f64],
    ln_base: impl Fn(f64) -> Result<f64, NumericError>,
    ln_component: impl Fn(f64, &Term) -> f64,
) -> Result<Vec<f64>, PredictiveError> {
    let mut buf = Vec::with_capacity(flat.terms.len() + 1);
    grid.iter()
        .map(|&y| {
            buf.clear();
            buf.extend(flat.terms.iter().map(|t| t.ln_w + ln_component(y, t)));
            buf.push(flat.ln_base_weight + ln_base(y)?);
            Ok((log_sum_exp(&buf) - flat.ln_t).exp())
        })
        .collect()
}

fn model_id(spec: &ModelSpec) -> String {
    format!("{}/{}", spec.family, spec.process)
}

fn check_dim(expected: Option<usize>, x: &[f64]) -> Result<(), PredictiveError> {
    match expected {
        Some(p) if p != x.len() => Err(PredictiveError::InvalidParameter(format!(
            "covariate row has length {}, draws have {p} coefficients",
            x.len()
        ))),
        _ => Ok(()),
    }
}

fn draws_dim<P: ComponentParams>(draws: &PosteriorDraws<P>, f: impl Fn(&P) -> usize) -> Option<usize> {
    draws.draws.first().and_then(|d| d.state.clusters().values().next()).map(|c| f(&c.params))
}

/// Predictive pmf of the claim count on 0..=y_max at covariates `x_new` and exposure `t_new`.
pub fn predictive_freq(
    draws: &PosteriorDraws<FreqParams>,
    x_new: &[f64],
    t_new: f64,
    y_max: usize,
    cache: &LaplaceCache,
) -> Result<PredictiveDistribution, PredictiveError> {
    if !(t_new > 0.0) || !t_new.is_finite() {
        return Err(PredictiveError::InvalidParameter(format!("exposure {t_new} must be positive")));
    }
    check_dim(draws_dim(draws, |p| p.beta.len()), x_new)?;
    let ln_t = t_new.ln();
    let flat = flatten(draws, |p| (ln_t + dot(x_new, p.beta.as_slice()), 0.0))?;
    let grid: Vec<f64> = (0..=y_max).map(|y| y as f64).collect();
    let mass = mixture_mass(
        &flat,
        &grid,
        |y| cache.log_marginal(y, t_new, x_new),
        |y, t| y * t.a - t.a.exp() - ln_factorial(y),
    )?;
    Ok(PredictiveDistribution {
        kind: GridKind::Pmf,
        grid,
        mass,
        x_new: x_new.to_vec(),
        t_new,
        model: model_id(&draws.meta.spec),
    })
}

/// Predictive density of the log claim amount on `y_grid` at covariates `x_new`.
pub fn predictive_sev(
    draws: &PosteriorDraws<SevParams>,
    x_new: &[f64],
    y_grid: &[f64],
) -> Result<PredictiveDistribution, PredictiveError> {
    if y_grid.iter().any(|y| !y.is_finite()) {
        return Err(PredictiveError::InvalidParameter("non-finite grid value".into()));
    }
    check_dim(draws_dim(draws, |p| p.beta.len()), x_new)?;
    let spec = draws.meta.spec;
    let flat = flatten(draws, |p| (dot(x_new, p.beta.as_slice()), p.sigma2))?;
    let mass = mixture_mass(
        &flat,
        y_grid,
        |y| nig_marginal_sev_ln(y, x_new, spec.n0, spec.a, spec.b),
        |y, t| normal_ln_pdf(y, t.a, t.b),
    )?;
    Ok(PredictiveDistribution {
        kind: GridKind::Density,
        grid: y_grid.to_vec(),
        mass,
        x_new: x_new.to_vec(),
        t_new: 1.0,
        model: model_id(&spec),
    })
}

/// One predictive per (design row, exposure), evaluated in parallel; output order
/// follows the input.
pub fn predictive_freq_batch(
    draws: &PosteriorDraws<FreqParams>,
    rows: &[(Vec<f64>, f64)],
    y_max: usize,
) -> Result<Vec<PredictiveDistribution>, PredictiveError> {
    let cache = LaplaceCache::new();
    rows.par_iter().map(|(x, t)| predictive_freq(draws, x, *t, y_max, &cache)).collect()
}

pub fn predictive_sev_batch(
    draws: &PosteriorDraws<SevParams>,
    rows: &[Vec<f64>],
    y_grid: &[f64],
) -> Result<Vec<PredictiveDistribution>, PredictiveError> {
    rows.par_iter().map(|x| predictive_sev(draws, x, y_grid)).collect()
}

/// Predictive mean of the claim count in closed form: cluster means
/// `t exp(xᵀβ)` and the base-measure mean `t exp(|x|²/2)` under the predictive weights.
/// Unlike [`predictive_mean`] it needs no grid, so heavy base tails are handled exactly.
pub fn predictive_freq_mean(
    draws: &PosteriorDraws<FreqParams>,
    x_new: &[f64],
    t_new: f64,
) -> Result<f64, PredictiveError> {
    if !(t_new > 0.0) || !t_new.is_finite() {
        return Err(PredictiveError::InvalidParameter(format!("exposure {t_new} must be positive")));
    }
    check_dim(draws_dim(draws, |p| p.beta.len()), x_new)?;
    let ln_t = t_new.ln();
    let flat = flatten(draws, |p| (ln_t + dot(x_new, p.beta.as_slice()), 0.0))?;
    let mut terms: Vec<f64> = flat.terms.iter().map(|t| t.ln_w + t.a).collect();
    terms.push(flat.ln_base_weight + ln_t + 0.5 * dot(x_new, x_new));
    Ok((log_sum_exp(&terms) - flat.ln_t).exp())
}

/// Predictive mean of the log claim amount in closed form; the base-measure
/// marginal is a Student t centred at 0.
pub fn predictive_sev_mean(draws: &PosteriorDraws<SevParams>, x_new: &[f64]) -> Result<f64, PredictiveError> {
    check_dim(draws_dim(draws, |p| p.beta.len()), x_new)?;
    let flat = flatten(draws, |p| (dot(x_new, p.beta.as_slice()), p.sigma2))?;
    let t = (-flat.ln_t).exp();
    Ok(flat.terms.iter().map(|term| term.ln_w.exp() * term.a).sum::<f64>() * t)
}

pub const DEFAULT_Y_MAX: usize = 50;
pub const DEFAULT_SEVERITY_POINTS: usize = 513;

/// `points` equally spaced values over [min − 4 sd, max + 4 sd] of the training responses.
pub fn default_severity_grid(train_response: &[f64], points: usize) -> Result<Vec<f64>, PredictiveError> {
    if train_response.len() < 2 || points < 2 {
        return Err(PredictiveError::InvalidParameter("need two responses and two grid points".into()));
    }
    let n = train_response.len() as f64;
    let mean = train_response.iter().sum::<f64>() / n;
    let sd = (train_response.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let lo = train_response.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * sd;
    let hi = train_response.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * sd;
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + h * i as f64).collect())
}

/// Checks the family of a draws file's spec before picking a parameter type.
pub fn expect_family(spec: &ModelSpec, family: Family) -> Result<(), PredictiveError> {
    if spec.family == family {
        Ok(())
    } else {
        Err(PredictiveError::InvalidParameter(format!("draws are {}, expected {family}", spec.family)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{freq_loglik, nig_marginal_sev};
    use crate::model::{ClusterState, DrawsMeta, Process, SavedState};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use std::collections::BTreeMap;

    fn meta(spec: ModelSpec) -> DrawsMeta {
        DrawsMeta {
            spec,
            iterations: 2,
            burn_in: 1,
            thinning: 1,
            seed: 0,
            aux_components: 3,
            acceptance: Default::default(),
        }
    }

    fn fp(b: &[f64]) -> FreqParams {
        FreqParams { beta: DVector::from_column_slice(b) }
    }

    fn one_draw_freq(alpha: f64, d: f64) -> PosteriorDraws<FreqParams> {
        let state = ClusterState::single_cluster(1, fp(&[0.2, -0.5]), alpha, d);
        PosteriorDraws {
            meta: meta(ModelSpec::frequency(Process::Dirichlet)),
            draws: vec![SavedState { iteration: 2, loglik: 0.0, state }],
        }
    }

    #[test]
    fn single_draw_collapse_frequency() {
        let draws = one_draw_freq(1.0, 0.0);
        let x = [1.0, 0.7];
        let t = 0.8;
        let cache = LaplaceCache::new();
        let p = predictive_freq(&draws, &x, t, 20, &cache).unwrap();
        for y in 0..=20 {
            let yf = y as f64;
            let lap = laplace_marginal_freq(yf, t, &x).unwrap().log_marginal.exp();
            let pois = freq_loglik(yf, t, &x, &[0.2, -0.5]).exp();
            assert_relative_eq!(p.mass[y], 0.5 * lap + 0.5 * pois, max_relative = 1e-13);
        }
        assert_eq!(cache.len(), 21);
    }

    #[test]
    fn single_draw_collapse_severity() {
        let spec = ModelSpec::severity(Process::Dirichlet);
        let params = SevParams { beta: DVector::from_vec(vec![1.0, 0.3]), sigma2: 0.6 };
        let state = ClusterState::single_cluster(1, params, 1.0, 0.0);
        let draws = PosteriorDraws { meta: meta(spec), draws: vec![SavedState { iteration: 2, loglik: 0.0, state }] };
        let x = [1.0, -1.2];
        let grid: Vec<f64> = (0..50).map(|i| -3.0 + 0.15 * i as f64).collect();
        let p = predictive_sev(&draws, &x, &grid).unwrap();
        for (y, m) in grid.iter().zip(&p.mass) {
            let expect = 0.5 * nig_marginal_sev(*y, &x, 0.5, 3.0, 5.0).unwrap()
                + 0.5 * normal_ln_pdf(*y, 1.0 - 0.36, 0.6).exp();
            assert_relative_eq!(*m, expect, max_relative = 1e-13);
        }
    }

    fn mixed_draws(d: f64) -> PosteriorDraws<SevParams> {
        let spec = ModelSpec::severity(if d > 0.0 { Process::PitmanYor } else { Process::Dirichlet });
        let mk = |b0: f64, s2: f64| SevParams { beta: DVector::from_vec(vec![b0, 0.5]), sigma2: s2 };
        let mut draws = Vec::new();
        for t in 0..4 {
            let params: BTreeMap<usize, SevParams> =
                [(0, mk(-1.0 + 0.1 * t as f64, 0.5)), (5, mk(2.0, 1.0 + 0.2 * t as f64))].into_iter().collect();
            let labels = if t % 2 == 0 { vec![0, 0, 5, 5, 5] } else { vec![0, 5, 5, 5, 5] };
            let state = ClusterState::from_assignments(labels, params, 0.8 + 0.1 * t as f64, d).unwrap();
            draws.push(SavedState { iteration: t, loglik: 0.0, state });
        }
        PosteriorDraws { meta: meta(spec), draws }
    }

    #[test]
    fn closed_form_means_match_grid() {
        let draws = mixed_draws(0.3);
        let x = [1.0, 0.4];
        let grid: Vec<f64> = (0..6001).map(|i| -30.0 + 0.01 * i as f64).collect();
        let on_grid = predictive_sev(&draws, &x, &grid).unwrap().mean().unwrap();
        assert!((predictive_sev_mean(&draws, &x).unwrap() - on_grid).abs() < 1e-3);

        let draws = one_draw_freq(1.0, 0.0);
        let (x, t) = ([1.0, 0.3], 0.9);
        let exact = predictive_freq_mean(&draws, &x, t).unwrap();
        let expect = 0.5 * t * (0.2f64 - 0.15).exp() + 0.5 * t * (0.5f64 * 1.09).exp();
        assert_relative_eq!(exact, expect, max_relative = 1e-13);
        let on_grid = predictive_freq(&draws, &x, t, 200, &LaplaceCache::new()).unwrap().mean().unwrap();
        assert!((exact - on_grid).abs() / exact < 0.02, "{exact} {on_grid}");
    }

    #[test]
    fn severity_density_integrates_to_one() {
        let draws = mixed_draws(0.3);
        let grid: Vec<f64> = (0..6001).map(|i| -30.0 + 0.01 * i as f64).collect();
        let p = predictive_sev(&draws, &[1.0, 0.4], &grid).unwrap();
        let total = trapezoid(&grid, |i| p.mass[i]);
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        assert!(p.mass.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn duplicating_draws_changes_nothing() {
        let draws = mixed_draws(0.2);
        let mut doubled = draws.clone();
        doubled.draws.extend(draws.draws.clone());
        let grid: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64).collect();
        let a = predictive_sev(&draws, &[1.0, 0.1], &grid).unwrap();
        let b = predictive_sev(&doubled, &[1.0, 0.1], &grid).unwrap();
        for (x, y) in a.mass.iter().zip(&b.mass) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn relabeling_changes_nothing() {
        let draws = mixed_draws(0.2);
        let mut relabeled = draws.clone();
        for d in &mut relabeled.draws {
            let s = &d.state;
            let params: BTreeMap<usize, SevParams> =
                s.clusters().iter().map(|(l, c)| (100 - l, c.params.clone())).collect();
            let labels = s.assignments().iter().map(|l| 100 - l).collect();
            d.state = ClusterState::from_assignments(labels, params, s.alpha(), s.discount()).unwrap();
        }
        let grid = [-1.0, 0.0, 2.5];
        let a = predictive_sev(&draws, &[1.0, 0.3], &grid).unwrap();
        let b = predictive_sev(&relabeled, &[1.0, 0.3], &grid).unwrap();
        assert_eq!(a.mass, b.mass);
    }

    #[test]
    fn mean_examples() {
        let point = PredictiveDistribution {
            kind: GridKind::Pmf,
            grid: vec![0.0, 1.0, 2.0, 3.0],
            mass: vec![0.0, 0.0, 1.0, 0.0],
            x_new: vec![1.0],
            t_new: 1.0,
            model: String::new(),
        };
        assert_eq!(predictive_mean(&point).unwrap(), 2.0);

        let grid: Vec<f64> = (0..=60).map(|y| y as f64).collect();
        let mass: Vec<f64> = grid.iter().map(|&y| freq_loglik(y, 3.0, &[1.0], &[0.0]).exp()).collect();
        let pois = PredictiveDistribution { grid, mass, ..point.clone() };
        assert!((predictive_mean(&pois).unwrap() - 3.0).abs() < 1e-6);

        let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
        let mass: Vec<f64> = grid.iter().map(|&y| normal_ln_pdf(y, 0.0, 1.0).exp()).collect();
        let normal = PredictiveDistribution { kind: GridKind::Density, grid, mass, ..point.clone() };
        assert!(predictive_mean(&normal).unwrap().abs() < 1e-6);

        let grid: Vec<f64> = (0..=5).map(|y| y as f64).collect();
        let mass: Vec<f64> = grid.iter().map(|&y| freq_loglik(y, 3.0, &[1.0], &[0.0]).exp()).collect();
        let short = PredictiveDistribution { grid, mass, ..point };
        assert!(matches!(predictive_mean(&short), Err(PredictiveError::TailMassTooLarge { .. })));
    }

    #[test]
    fn frequency_pmf_mass_and_validation() {
        let draws = one_draw_freq(0.5, 0.0);
        let cache = LaplaceCache::new();
        let p = predictive_freq(&draws, &[1.0, -0.3], 1.0, DEFAULT_Y_MAX, &cache).unwrap();
        let total: f64 = p.mass.iter().sum();
        assert!(total >= 0.999 && total <= 1.0 + 1e-2, "{total}");
        assert!(predictive_freq(&draws, &[1.0, -0.3], 0.0, 5, &cache).is_err());
        assert!(predictive_freq(&draws, &[1.0], 1.0, 5, &cache).is_err());
        let empty = PosteriorDraws { meta: draws.meta.clone(), draws: vec![] };
        assert!(matches!(predictive_freq(&empty, &[1.0, 0.0], 1.0, 5, &cache), Err(PredictiveError::NoDraws)));
    }

    #[test]
    fn severity_grid_bounds() {
        let g = default_severity_grid(&[1.0, 3.0], DEFAULT_SEVERITY_POINTS).unwrap();
        let sd = 2f64.sqrt();
        assert_eq!(g.len(), 513);
        assert_relative_eq!(g[0], 1.0 - 4.0 * sd);
        assert_relative_eq!(g[512], 3.0 + 4.0 * sd, epsilon = 1e-12);
    }
}
