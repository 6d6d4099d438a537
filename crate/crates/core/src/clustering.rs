//! Temporal-difference clustering inputs, per-class k-means and environments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::numerics::cosine_similarity;
use crate::{Error, Result, Rng};

/// `d[0] = 0`, `d[t] = 1 - cos(seq[t-1], seq[t])`.
pub fn temporal_difference(sequence: &[Vec<f64>]) -> Result<Vec<f64>> {
    if sequence.is_empty() {
        return Err(Error::invalid("temporal difference of an empty sequence"));
    }
    let mut d = Vec::with_capacity(sequence.len());
    d.push(0.0);
    for pair in sequence.windows(2) {
        d.push((1.0 - cosine_similarity(&pair[0], &pair[1])?).clamp(0.0, 2.0));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ClusterInput {
    /// Reduced features only.
    #[serde(rename = "NC")]
    Naive,
    /// Reduced features with the temporal difference appended.
    #[default]
    #[serde(rename = "PC")]
    Temporal,
}

/// Per-coordinate z-scoring fitted on the training split. Coordinates with
/// zero spread are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("standardizer needs samples"))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::invalid("ragged feature rows"));
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-24 { libm::sqrt(v) } else { 1.0 })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Builds one clustering vector per frame. `reduced` holds each video's
/// reduced features in frame order; `standardizer` is applied to the feature
/// part only, and the temporal difference is computed on the raw reduced
/// features and appended unweighted.
pub fn build_cluster_inputs(
    reduced: &[Vec<Vec<f64>>],
    standardizer: &Standardizer,
    mode: ClusterInput,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for video in reduced {
        let d = match mode {
            ClusterInput::Temporal => Some(temporal_difference(video)?),
            ClusterInput::Naive => None,
        };
        for (t, h) in video.iter().enumerate() {
            let mut z = standardizer.transform(h);
            if let Some(d) = &d {
                z.push(d[t]);
            }
            out.push(z);
        }
    }
    Ok(out)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after each assignment/update iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Empty clusters that had to be re-seeded.
    pub repairs: usize,
}

pub const MAX_ITERATIONS: usize = 100;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

/// Lloyd's k-means with k-means++ seeding. Stops after [`MAX_ITERATIONS`] or
/// when the objective changes by less than [`RELATIVE_TOLERANCE`] relative.
/// An empty cluster takes the point farthest from its centroid in the
/// currently largest cluster.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!("{} samples cannot form {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("ragged clustering inputs"));
    }

    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.below(points.len())].clone());
    let mut dist: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let next = rng.weighted_index(&dist).unwrap_or_else(|| rng.below(points.len()));
        centroids.push(points[next].clone());
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut assignments = vec![0; points.len()];
    let mut trace = Vec::new();
    let mut repairs = 0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }
        repairs += repair_empty(points, &mut assignments, &mut centroids);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        let objective: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| squared_distance(p, &centroids[a]))
            .sum();
        let converged = trace.last().is_some_and(|&prev: &f64| {
            libm::fabs(prev - objective) <= RELATIVE_TOLERANCE * prev.max(f64::MIN_POSITIVE)
        });
        trace.push(objective);
        if converged || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    Ok(KMeansFit { centroids, assignments, objective_trace: trace, iterations, repairs })
}

fn repair_empty(points: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>]) -> usize {
    let k = centroids.len();
    let mut repairs = 0;
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repairs;
        };
        let largest = (0..k).max_by_key(|&c| (counts[c], core::cmp::Reverse(c))).unwrap_or(0);
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if assignments[i] == largest {
                let d = squared_distance(p, &centroids[largest]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        let Some(i) = far else { return repairs };
        assignments[i] = empty;
        centroids[empty] = points[i].clone();
        repairs += 1;
    }
}

/// Location of one training frame inside the per-class clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSlot {
    pub class: usize,
    pub cluster: usize,
}

/// `K` clusters per class over the training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub input_mode: ClusterInput,
    /// `fits[y]` holds class `y`'s k-means result over its own frames.
    pub fits: Vec<KMeansFit>,
    /// Global frame index -> slot.
    pub slots: Vec<ClusterSlot>,
    /// `members[y][k]` = global frame indices of `C_k^y`, ascending.
    pub members: Vec<Vec<Vec<usize>>>,
}

impl ClusterModel {
    /// Fits `k` clusters within each class. Class `y` uses child stream `y` of `seed`.
    pub fn fit(vectors: &[Vec<f64>], labels: &[Label], k: usize, input_mode: ClusterInput, seed: u64) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::invalid("one label per clustering vector required"));
        }
        let root = Rng::new(seed);
        let mut fits = Vec::with_capacity(Label::ALL.len());
        let mut slots = vec![ClusterSlot { class: 0, cluster: 0 }; vectors.len()];
        let mut members = Vec::with_capacity(Label::ALL.len());
        for class in Label::ALL {
            let index: Vec<usize> = (0..vectors.len()).filter(|&i| labels[i] == class).collect();
            let points: Vec<Vec<f64>> = index.iter().map(|&i| vectors[i].clone()).collect();
            let fit = kmeans(&points, k, &mut root.split(class.index() as u64)).map_err(|e| match e {
                Error::InvalidInput(m) => Error::invalid(format!("class {}: {m}", class.index())),
                other => other,
            })?;
            let mut class_members = vec![Vec::new(); k];
            for (&global, &cluster) in index.iter().zip(&fit.assignments) {
                slots[global] = ClusterSlot { class: class.index(), cluster };
                class_members[cluster].push(global);
            }
            members.push(class_members);
            fits.push(fit);
        }
        Ok(ClusterModel { k, input_mode, fits, slots, members })
    }

    pub fn size(&self, class: usize, cluster: usize) -> usize {
        self.members[class][cluster].len()
    }
}

/// Environment `k` merges real cluster `real_cluster` with fake cluster `fake_cluster`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub index: usize,
    pub real_cluster: usize,
    pub fake_cluster: usize,
}

/// A uniformly random bijection between real and fake clusters, one
/// environment per real cluster.
pub fn form_environments(k: usize, rng: &mut Rng) -> Vec<Environment> {
    let mut fake: Vec<usize> = (0..k).collect();
    rng.shuffle(&mut fake);
    fake.into_iter()
        .enumerate()
        .map(|(index, fake_cluster)| Environment { index, real_cluster: index, fake_cluster })
        .collect()
}

/// Environment index of every cluster slot under `envs`: `lookup[class][cluster]`.
pub fn environment_lookup(envs: &[Environment]) -> [Vec<usize>; 2] {
    let k = envs.len();
    let mut real = vec![0; k];
    let mut fake = vec![0; k];
    for e in envs {
        real[e.real_cluster] = e.index;
        fake[e.fake_cluster] = e.index;
    }
    [real, fake]
}
