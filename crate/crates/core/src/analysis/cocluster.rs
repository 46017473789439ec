//! Posterior dissimilarity between observations and an average-linkage point
//! partition built from it.

use rayon::prelude::*;

use super::AnalysisError;
use crate::model::{ComponentParams, PosteriorDraws};

/// Fraction of saved states in which two observations sit in different clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    /// From a full row-major n×n matrix. Symmetry, zero diagonal and range are checked.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(AnalysisError::InvalidParameter("dissimilarity matrix is not square".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        let d = Self { n, values };
        for i in 0..n {
            if d.get(i, i) != 0.0 {
                return Err(AnalysisError::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = d.get(i, j);
                if v != d.get(j, i) || !(0.0..=1.0).contains(&v) {
                    return Err(AnalysisError::InvalidParameter(format!("bad entry at ({i}, {j})")));
                }
            }
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// D[i][j] = fraction of draws with c_i ≠ c_j. Parallel over rows.
pub fn dissimilarity_matrix<P: ComponentParams>(
    draws: &PosteriorDraws<P>,
) -> Result<DissimilarityMatrix, AnalysisError> {
    if draws.is_empty() {
        return Err(AnalysisError::NoDraws);
    }
    let n = draws.n();
    let t = draws.len();
    // Per-observation label sequences so each pair scans two contiguous slices.
    let mut by_obs = vec![0usize; n * t];
    for (s, d) in draws.draws.iter().enumerate() {
        if d.state.n() != n {
            return Err(AnalysisError::InvalidParameter("draws disagree on n".into()));
        }
        for (i, &c) in d.state.assignments().iter().enumerate() {
            by_obs[i * t + s] = c;
        }
    }
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let li = &by_obs[i * t..(i + 1) * t];
        for (j, v) in row.iter_mut().enumerate() {
            if j != i {
                let lj = &by_obs[j * t..(j + 1) * t];
                let diff = li.iter().zip(lj).filter(|(a, b)| a != b).count();
                *v = diff as f64 / t as f64;
            }
        }
    });
    Ok(DissimilarityMatrix { n, values })
}

/// Cluster labels (0, 1, … by first appearance) and the dendrogram leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPartition {
    pub labels: Vec<usize>,
    pub leaf_order: Vec<usize>,
    pub merges: Vec<Merge>,
}

impl PointPartition {
    pub fn num_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// Two clusters, identified by their smallest member, joined at `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Average-linkage agglomerative clustering (nearest-neighbour chain), cut at `cut`.
pub fn point_partition(d: &DissimilarityMatrix, cut: f64) -> Result<PointPartition, AnalysisError> {
    if !(cut > 0.0 && cut < 1.0) {
        return Err(AnalysisError::InvalidParameter(format!("cut {cut} outside (0, 1)")));
    }
    let n = d.n();
    if n == 0 {
        return Ok(PointPartition { labels: vec![], leaf_order: vec![], merges: vec![] });
    }
    let mut dist: Vec<f64> = d.values.clone();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;
    while remaining > 1 {
        if chain.is_empty() {
            chain.push((0..n).find(|&i| active[i]).expect("active cluster"));
        }
        loop {
            let a = *chain.last().expect("nonempty chain");
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            // Nearest active neighbour; ties prefer the previous chain element,
            // then the smallest index.
            let mut best = None::<(usize, f64)>;
            for j in 0..n {
                if j == a || !active[j] {
                    continue;
                }
                let v = dist[a * n + j];
                let better = match best {
                    None => true,
                    Some((bj, bv)) => v < bv || (v == bv && Some(j) == prev && Some(bj) != prev),
                };
                if better {
                    best = Some((j, v));
                }
            }
            let (b, h) = best.expect("at least two active clusters");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                let (keep, gone) = (a.min(b), a.max(b));
                raw.push((keep, gone, h));
                let (sk, sg) = (size[keep] as f64, size[gone] as f64);
                for k in 0..n {
                    if active[k] && k != keep && k != gone {
                        let v = (sk * dist[keep * n + k] + sg * dist[gone * n + k]) / (sk + sg);
                        dist[keep * n + k] = v;
                        dist[k * n + keep] = v;
                    }
                }
                size[keep] += size[gone];
                active[gone] = false;
                remaining -= 1;
                break;
            }
            chain.push(b);
        }
    }

    // Replay merges by height to get the dendrogram; the representative index of
    // a merged cluster is the smaller one, which is also its smallest member.
    raw.sort_by(|x, y| x.2.total_cmp(&y.2));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut rep_min: Vec<usize> = (0..n).collect();
    // Subtree leaf sequence per root.
    let mut leaves: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::with_capacity(raw.len());
    let mut cut_parent: Vec<usize> = (0..n).collect();
    for &(x, y, h) in &raw {
        let rx = find(&mut parent, x);
        let ry = find(&mut parent, y);
        let (first, second) = if rep_min[rx] <= rep_min[ry] { (rx, ry) } else { (ry, rx) };
        merges.push(Merge { a: rep_min[first], b: rep_min[second], height: h });
        let moved = std::mem::take(&mut leaves[second]);
        leaves[first].extend(moved);
        parent[second] = first;
        rep_min[first] = rep_min[first].min(rep_min[second]);
        if h <= cut {
            let cx = find(&mut cut_parent, x);
            let cy = find(&mut cut_parent, y);
            cut_parent[cx.max(cy)] = cx.min(cy);
        }
    }
    let root = find(&mut parent, 0);
    let leaf_order = std::mem::take(&mut leaves[root]);
    let roots: Vec<usize> = (0..n).map(|i| find(&mut cut_parent, i)).collect();
    let labels = crate::model::canonical_labels(&roots);
    Ok(PointPartition { labels, leaf_order, merges })
}
