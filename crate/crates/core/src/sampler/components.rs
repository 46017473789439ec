//! Per-family likelihood evaluation, base-measure draws and cluster-parameter
//! refresh moves.

use nalgebra::DVector;
use rand::Rng;

use crate::kernels::random::{mvn, mvn_log_density};
use crate::kernels::{NumericError, Objective};
use crate::likelihood::{
    base_draw_freq, base_draw_sev, freq_loglik, laplace_cluster_proposal, nig_posterior,
    normal_ln_pdf, ClusterLogPosterior, GaussianProposal,
};
use crate::model::{ClusterState, ComponentParams, Dataset, FreqParams, ModelSpec, SevParams};

/// Accepted and attempted Metropolis moves in one refresh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveCount {
    pub accepted: usize,
    pub attempted: usize,
}

impl std::ops::AddAssign for MoveCount {
    fn add_assign(&mut self, rhs: Self) {
        self.accepted += rhs.accepted;
        self.attempted += rhs.attempted;
    }
}

/// What the sampler needs from a mixture component family.
pub trait ComponentModel {
    type Params: ComponentParams;

    /// Number of observations.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn log_likelihood(&self, i: usize, params: &Self::Params) -> f64;

    fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::Params, NumericError>;

    /// Redraws φ for every occupied cluster. Returns Metropolis counts
    /// (zero attempts for exact Gibbs moves).
    fn refresh<R: Rng + ?Sized>(
        &self,
        state: &mut ClusterState<Self::Params>,
        rng: &mut R,
    ) -> Result<MoveCount, NumericError>;
}

/// Poisson regression with exposure offset and N(0, I) base measure.
#[derive(Debug, Clone, Copy)]
pub struct PoissonRegression<'a> {
    pub data: &'a Dataset,
}

impl ComponentModel for PoissonRegression<'_> {
    type Params = FreqParams;

    fn len(&self) -> usize {
        self.data.len()
    }

    fn log_likelihood(&self, i: usize, params: &FreqParams) -> f64 {
        let o = self.data.obs(i);
        freq_loglik(o.response, o.exposure, o.x, params.beta.as_slice())
    }

    fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FreqParams, NumericError> {
        Ok(base_draw_freq(self.data.dim(), rng))
    }

    fn refresh<R: Rng + ?Sized>(
        &self,
        state: &mut ClusterState<FreqParams>,
        rng: &mut R,
    ) -> Result<MoveCount, NumericError> {
        update_phi_mh(state, self.data, rng)
    }
}

/// Normal regression with the conjugate normal-inverse-gamma base measure.
#[derive(Debug, Clone, Copy)]
pub struct NormalRegression<'a> {
    pub data: &'a Dataset,
    pub n0: f64,
    pub a: f64,
    pub b: f64,
}

impl<'a> NormalRegression<'a> {
    pub fn new(data: &'a Dataset, spec: &ModelSpec) -> Self {
        Self { data, n0: spec.n0, a: spec.a, b: spec.b }
    }
}

impl ComponentModel for NormalRegression<'_> {
    type Params = SevParams;

    fn len(&self) -> usize {
        self.data.len()
    }

    fn log_likelihood(&self, i: usize, params: &SevParams) -> f64 {
        let o = self.data.obs(i);
        let mean: f64 = o.x.iter().zip(params.beta.iter()).map(|(x, b)| x * b).sum();
        normal_ln_pdf(o.response, mean, params.sigma2)
    }

    fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SevParams, NumericError> {
        base_draw_sev(self.data.dim(), self.n0, self.a, self.b, rng)
    }

    fn refresh<R: Rng + ?Sized>(
        &self,
        state: &mut ClusterState<SevParams>,
        rng: &mut R,
    ) -> Result<MoveCount, NumericError> {
        update_phi_conjugate(state, self.data, self.n0, self.a, self.b, rng)?;
        Ok(MoveCount::default())
    }
}

/// Likelihood ≡ 1 with no parameters: the sweep then samples the urn prior.
#[derive(Debug, Clone, Copy)]
pub struct FlatLikelihood {
    pub n: usize,
}

impl ComponentModel for FlatLikelihood {
    type Params = ();

    fn len(&self) -> usize {
        self.n
    }

    fn log_likelihood(&self, _i: usize, _params: &()) -> f64 {
        0.0
    }

    fn draw_prior<R: Rng + ?Sized>(&self, _rng: &mut R) -> Result<(), NumericError> {
        Ok(())
    }

    fn refresh<R: Rng + ?Sized>(
        &self,
        _state: &mut ClusterState<()>,
        _rng: &mut R,
    ) -> Result<MoveCount, NumericError> {
        Ok(MoveCount::default())
    }
}

/// Conjugate Gibbs draw of (β, σ²) for every occupied severity cluster.
pub fn update_phi_conjugate<R: Rng + ?Sized>(
    state: &mut ClusterState<SevParams>,
    data: &Dataset,
    n0: f64,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<(), NumericError> {
    for (label, members) in state.members() {
        let post = nig_posterior(members.iter().map(|&i| (&data.x[i][..], data.response[i])), n0, a, b)?;
        let draw = post.draw(rng)?;
        state.clusters_mut().get_mut(&label).expect("occupied cluster").params = draw;
    }
    Ok(())
}

/// One independence Metropolis–Hastings step for a target known up to a constant.
/// Returns the new point and whether the proposal was accepted.
pub fn independence_mh_step<O: Objective + ?Sized, R: Rng + ?Sized>(
    current: &DVector<f64>,
    target: &O,
    proposal: &GaussianProposal,
    rng: &mut R,
) -> (DVector<f64>, bool) {
    let cand = mvn(rng, &proposal.mean, &proposal.chol);
    let log_ratio = target.value(&cand) - target.value(current)
        + mvn_log_density(current, &proposal.mean, &proposal.chol)
        - mvn_log_density(&cand, &proposal.mean, &proposal.chol);
    let u: f64 = rng.random();
    if log_ratio.is_finite() && u.ln() < log_ratio {
        (cand, true)
    } else {
        (current.clone(), false)
    }
}

/// Independence MH refresh of β for every occupied Poisson cluster, with the
/// Laplace approximation of the cluster posterior as proposal.
pub fn update_phi_mh<R: Rng + ?Sized>(
    state: &mut ClusterState<FreqParams>,
    data: &Dataset,
    rng: &mut R,
) -> Result<MoveCount, NumericError> {
    let mut count = MoveCount::default();
    for (label, members) in state.members() {
        let rows: Vec<_> = members.iter().map(|&i| data.obs(i)).collect();
        let proposal = match laplace_cluster_proposal(&rows) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("cluster {label}: Laplace proposal failed ({e}); using N(0, I)");
                GaussianProposal::prior(data.dim())
            }
        };
        let target = ClusterLogPosterior { rows };
        let cluster = state.clusters_mut().get_mut(&label).expect("occupied cluster");
        let (beta, accepted) = independence_mh_step(&cluster.params.beta, &target, &proposal, rng);
        cluster.params.beta = beta;
        count.attempted += 1;
        count.accepted += accepted as usize;
    }
    Ok(count)
}
