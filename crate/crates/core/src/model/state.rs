use std::collections::BTreeMap;

use thiserror::Error;

use super::{ComponentParams, ModelSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("observation {obs} refers to missing cluster {label}")]
    DanglingAssignment { obs: usize, label: usize },
    #[error("cluster {label} records size {recorded} but has {actual} members")]
    SizeMismatch { label: usize, recorded: usize, actual: usize },
    #[error("cluster {label} is empty")]
    EmptyCluster { label: usize },
    #[error("cluster {label} has invalid parameters")]
    InvalidParams { label: usize },
    #[error("discount {0} outside [0, 1)")]
    Discount(f64),
    #[error("strength {alpha} must exceed -discount ({discount})")]
    Strength { alpha: f64, discount: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<P> {
    pub params: P,
    pub size: usize,
}

/// A partition of the observations with one parameter value per block,
/// plus the process hyperparameters. Labels are opaque.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState<P> {
    assignments: Vec<usize>,
    clusters: BTreeMap<usize, Cluster<P>>,
    alpha: f64,
    discount: f64,
}

const UNASSIGNED: usize = usize::MAX;

impl<P: ComponentParams> ClusterState<P> {
    /// Builds a state from labels and per-label parameters. Sizes are counted
    /// from `assignments`; labels without members are dropped.
    pub fn from_assignments(
        assignments: Vec<usize>,
        mut params: BTreeMap<usize, P>,
        alpha: f64,
        discount: f64,
    ) -> Result<Self, StateError> {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &assignments {
            *sizes.entry(c).or_default() += 1;
        }
        let mut clusters = BTreeMap::new();
        for (obs, &c) in assignments.iter().enumerate() {
            if !params.contains_key(&c) && !clusters.contains_key(&c) {
                return Err(StateError::DanglingAssignment { obs, label: c });
            }
            if let Some(p) = params.remove(&c) {
                clusters.insert(c, Cluster { params: p, size: sizes[&c] });
            }
        }
        let state = Self { assignments, clusters, alpha, discount };
        state.check_invariants()?;
        Ok(state)
    }

    /// Everything in cluster 0.
    pub fn single_cluster(n: usize, params: P, alpha: f64, discount: f64) -> Self {
        let mut clusters = BTreeMap::new();
        if n > 0 {
            clusters.insert(0, Cluster { params, size: n });
        }
        Self { assignments: vec![0; n], clusters, alpha, discount }
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    /// Number of occupied clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    pub fn set_discount(&mut self, discount: f64) {
        self.discount = discount;
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn label_of(&self, i: usize) -> usize {
        self.assignments[i]
    }

    pub fn clusters(&self) -> &BTreeMap<usize, Cluster<P>> {
        &self.clusters
    }

    pub fn params_of(&self, i: usize) -> &P {
        &self.clusters[&self.assignments[i]].params
    }

    /// Observation indices per cluster, in label order.
    pub fn members(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> =
            self.clusters.keys().map(|&l| (l, Vec::new())).collect();
        for (i, c) in self.assignments.iter().enumerate() {
            out.get_mut(c).expect("assignment to missing cluster").push(i);
        }
        out
    }

    /// Labels renumbered 0, 1, … in order of first appearance.
    pub fn canonical_labels(&self) -> Vec<usize> {
        canonical_labels(&self.assignments)
    }

    pub fn check_invariants(&self) -> Result<(), StateError> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(StateError::Discount(self.discount));
        }
        if !(self.alpha > -self.discount) {
            return Err(StateError::Strength { alpha: self.alpha, discount: self.discount });
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for (obs, &c) in self.assignments.iter().enumerate() {
            if !self.clusters.contains_key(&c) {
                return Err(StateError::DanglingAssignment { obs, label: c });
            }
            *counts.entry(c).or_default() += 1;
        }
        for (&label, cl) in &self.clusters {
            let actual = counts.get(&label).copied().unwrap_or(0);
            if actual == 0 {
                return Err(StateError::EmptyCluster { label });
            }
            if actual != cl.size {
                return Err(StateError::SizeMismatch { label, recorded: cl.size, actual });
            }
            if !cl.params.is_valid() {
                return Err(StateError::InvalidParams { label });
            }
        }
        Ok(())
    }

    /// Detaches observation `i`. Returns the cluster's parameters when `i` was
    /// its only member (the cluster is then deleted).
    pub(crate) fn detach(&mut self, i: usize) -> Option<P> {
        let label = self.assignments[i];
        self.assignments[i] = UNASSIGNED;
        let cl = self.clusters.get_mut(&label).expect("detach from missing cluster");
        cl.size -= 1;
        if cl.size == 0 {
            self.clusters.remove(&label).map(|c| c.params)
        } else {
            None
        }
    }

    pub(crate) fn attach(&mut self, i: usize, label: usize) {
        debug_assert_eq!(self.assignments[i], UNASSIGNED);
        self.clusters.get_mut(&label).expect("attach to missing cluster").size += 1;
        self.assignments[i] = label;
    }

    /// Opens a new cluster holding only `i`, using the smallest free label.
    pub(crate) fn attach_new(&mut self, i: usize, params: P) -> usize {
        let mut label = 0;
        for &l in self.clusters.keys() {
            if l != label {
                break;
            }
            label += 1;
        }
        self.clusters.insert(label, Cluster { params, size: 1 });
        self.assignments[i] = label;
        label
    }

    pub(crate) fn clusters_mut(&mut self) -> &mut BTreeMap<usize, Cluster<P>> {
        &mut self.clusters
    }
}

pub fn canonical_labels(assignments: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    assignments
        .iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect()
}

/// One saved iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedState<P> {
    pub iteration: usize,
    /// Σᵢ ln f(yᵢ | φ_{cᵢ}) at this state.
    pub loglik: f64,
    pub state: ClusterState<P>,
}

/// Post-burn-in acceptance rates; `None` where the move does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcceptanceRates {
    pub phi: Option<f64>,
    pub discount: Option<f64>,
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawsMeta {
    pub spec: ModelSpec,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub aux_components: usize,
    pub acceptance: AcceptanceRates,
}

/// Thinned post-burn-in chain states.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws<P> {
    pub meta: DrawsMeta,
    pub draws: Vec<SavedState<P>>,
}

impl<P: ComponentParams> PosteriorDraws<P> {
    /// Number of observations the chain was fitted to.
    pub fn n(&self) -> usize {
        self.draws.first().map_or(0, |d| d.state.n())
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn alpha_trace(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.state.alpha()).collect()
    }

    pub fn discount_trace(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.state.discount()).collect()
    }

    pub fn k_trace(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.state.k() as f64).collect()
    }

    pub fn loglik_trace(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.loglik).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FreqParams;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn p(v: f64) -> FreqParams {
        FreqParams { beta: DVector::from_vec(vec![v]) }
    }

    #[test]
    fn detach_and_attach_keep_invariants() {
        let params: BTreeMap<usize, FreqParams> = [(3, p(0.0)), (7, p(1.0))].into_iter().collect();
        let mut s = ClusterState::from_assignments(vec![3, 3, 7], params, 1.0, 0.0).unwrap();
        assert_eq!(s.k(), 2);
        let orphan = s.detach(2);
        assert_eq!(orphan, Some(p(1.0)));
        assert_eq!(s.k(), 1);
        let label = s.attach_new(2, p(2.0));
        assert_eq!(label, 0);
        s.check_invariants().unwrap();
        assert!(s.detach(0).is_none());
        s.attach(0, 0);
        s.check_invariants().unwrap();
        assert_eq!(s.clusters()[&0].size, 2);
    }

    #[test]
    fn dangling_label_rejected() {
        let params: BTreeMap<usize, FreqParams> = [(0, p(0.0))].into_iter().collect();
        let err = ClusterState::from_assignments(vec![0, 1], params, 1.0, 0.0).unwrap_err();
        assert_eq!(err, StateError::DanglingAssignment { obs: 1, label: 1 });
    }

    #[test]
    fn hyperparameter_support_checked() {
        let s = ClusterState::single_cluster(2, p(0.0), -0.5, 0.2);
        assert!(matches!(s.check_invariants(), Err(StateError::Strength { .. })));
        let s = ClusterState::single_cluster(2, p(0.0), 1.0, 1.0);
        assert!(matches!(s.check_invariants(), Err(StateError::Discount(_))));
    }

    proptest! {
        #[test]
        fn k_and_sizes_from_assignments(labels in prop::collection::vec(0usize..6, 1..40)) {
            let params: BTreeMap<usize, FreqParams> =
                labels.iter().map(|&l| (l, p(l as f64))).collect();
            let s = ClusterState::from_assignments(labels.clone(), params, 1.0, 0.0).unwrap();
            let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
            prop_assert_eq!(s.k(), distinct.len());
            prop_assert_eq!(s.clusters().values().map(|c| c.size).sum::<usize>(), labels.len());
        }
    }
}
