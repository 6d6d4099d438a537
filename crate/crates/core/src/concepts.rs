//! Concept vectors, concept sensitivity scores and bias-aware sampling weights.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::data::Label;
use crate::model::{forward_values, softmax, MlpParams};
use crate::numerics::{dot, norm, population_variance, Matrix};
use crate::{Error, Result, Rng};

pub const PROBE_L2: f64 = 1e-3;
pub const PROBE_TOLERANCE: f64 = 1e-6;
pub const PROBE_MAX_ITERATIONS: usize = 200_000;
pub const HOLDOUT_FRACTION: f64 = 0.2;
pub const LOW_QUALITY_ACCURACY: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub name: String,
    /// Unit normal of the probe's decision boundary, pointing at the positives.
    pub direction: Vec<f64>,
    /// Accuracy on the held-out fifth (on the training part when that is empty).
    pub accuracy: f64,
    pub low_quality: bool,
}

/// Fits an L2-regularized logistic probe by full-batch gradient descent and
/// returns its normal. Inputs are centered and divided by one global RMS
/// radius first, which leaves directions unchanged and makes the fit
/// invariant to a uniform rescaling of the features.
pub fn fit_concept_vector(name: &str, positives: &[Vec<f64>], negatives: &[Vec<f64>], seed: u64) -> Result<ConceptVector> {
    if positives.len() < 2 || negatives.len() < 2 {
        return Err(Error::invalid(format!("concept {name}: need at least two samples per side")));
    }
    let dim = positives[0].len();
    if positives.iter().chain(negatives).any(|x| x.len() != dim) || dim == 0 {
        return Err(Error::invalid(format!("concept {name}: ragged features")));
    }
    let mut rng = Rng::new(seed);
    let mut split = |n: usize| {
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        let hold = libm::floor(HOLDOUT_FRACTION * n as f64) as usize;
        let train = idx.split_off(hold);
        (train, idx)
    };
    let (pos_train, pos_hold) = split(positives.len());
    let (neg_train, neg_hold) = split(negatives.len());

    let mut train: Vec<(&[f64], f64)> = pos_train.iter().map(|&i| (positives[i].as_slice(), 1.0)).collect();
    train.extend(neg_train.iter().map(|&i| (negatives[i].as_slice(), -1.0)));
    let mut held: Vec<(&[f64], f64)> = pos_hold.iter().map(|&i| (positives[i].as_slice(), 1.0)).collect();
    held.extend(neg_hold.iter().map(|&i| (negatives[i].as_slice(), -1.0)));

    let n = train.len() as f64;
    let mut center = vec![0.0; dim];
    for (x, _) in &train {
        for (c, v) in center.iter_mut().zip(x.iter()) {
            *c += v / n;
        }
    }
    let radius = libm::sqrt(
        train
            .iter()
            .map(|(x, _)| x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>())
            .sum::<f64>()
            / n,
    );
    let radius = if radius > 1e-300 { radius } else { 1.0 };
    let scaled = |x: &[f64]| -> Vec<f64> { x.iter().zip(&center).map(|(a, c)| (a - c) / radius).collect() };
    let xs: Vec<(Vec<f64>, f64)> = train.iter().map(|(x, y)| (scaled(x), *y)).collect();

    // Smoothness bound of the mean logistic loss with bias: 0.25 * (mean |x|^2 + 1) + lambda.
    let step = 1.0 / (0.25 * 2.0 + PROBE_L2);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; dim];
    for _ in 0..PROBE_MAX_ITERATIONS {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, y) in &xs {
            let margin = y * (dot(&w, x) + b);
            // d/dm log(1 + e^{-m}) = -1 / (1 + e^{m})
            let coeff = -y / (1.0 + libm::exp(margin)) / n;
            for (g, xi) in grad_w.iter_mut().zip(x) {
                *g += coeff * xi;
            }
            grad_b += coeff;
        }
        for (g, wi) in grad_w.iter_mut().zip(&w) {
            *g += PROBE_L2 * wi;
        }
        let gnorm = libm::sqrt(dot(&grad_w, &grad_w) + grad_b * grad_b);
        if gnorm < PROBE_TOLERANCE {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&grad_w) {
            *wi -= step * g;
        }
        b -= step * grad_b;
    }

    let wn = norm(&w);
    let direction = if wn > 0.0 {
        w.iter().map(|v| v / wn).collect()
    } else {
        log::warn!("concept {name}: probe weights vanished, direction defaults to the first axis");
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    };
    let eval: &[(&[f64], f64)] = if held.is_empty() { &train } else { &held };
    let correct = eval
        .iter()
        .filter(|(x, y)| (dot(&w, &scaled(x)) + b > 0.0) == (*y > 0.0))
        .count();
    let accuracy = correct as f64 / eval.len() as f64;
    let low_quality = accuracy < LOW_QUALITY_ACCURACY;
    if low_quality {
        log::warn!("concept {name}: probe accuracy {accuracy:.3} below {LOW_QUALITY_ACCURACY}");
    }
    Ok(ConceptVector { name: name.into(), direction, accuracy, low_quality })
}

/// Gradient of the mean cross-entropy over an environment's batch members
/// with respect to the head weights `W3` (`C x D`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMatrix {
    pub environment: usize,
    pub matrix: Matrix,
}

/// Head gradient from precomputed `(feature, logits, label)` triples:
/// `mean (softmax(logits) - onehot(y)) h^T`.
pub fn head_gradient(environment: usize, members: &[(&[f64], &[f64], Label)]) -> Result<GradientMatrix> {
    let Some(&(h0, l0, _)) = members.first() else {
        return Err(Error::EmptyEnvironment(environment));
    };
    let (classes, dim) = (l0.len(), h0.len());
    let mut m = Matrix::zeros(classes, dim);
    let n = members.len() as f64;
    for &(h, logits, y) in members {
        let mut delta = softmax(logits);
        delta[y.index()] -= 1.0;
        for (c, d) in delta.iter().enumerate() {
            for (j, hj) in h.iter().enumerate() {
                let v = m.get(c, j) + d * hj / n;
                m.set(c, j, v);
            }
        }
    }
    Ok(GradientMatrix { environment, matrix: m })
}

pub fn gradient_matrix(params: &MlpParams, environment: usize, members: &[(&[f64], Label)]) -> Result<GradientMatrix> {
    let traces = members
        .iter()
        .map(|(x, _)| forward_values(params, x))
        .collect::<Result<Vec<_>>>()?;
    let triples: Vec<(&[f64], &[f64], Label)> = traces
        .iter()
        .zip(members)
        .map(|(t, (_, y))| (t.feature.as_slice(), t.logits.as_slice(), *y))
        .collect();
    head_gradient(environment, &triples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CssRecord {
    pub concept: String,
    /// Variance over environments of the projection at the dominant class.
    pub score: f64,
    /// Class the concept is most strongly associated with.
    pub class: usize,
    /// `score` at `class`, 0 elsewhere.
    pub masked: Vec<f64>,
    /// Per-environment projections at `class`.
    pub projections: Vec<f64>,
}

impl CssRecord {
    pub fn masked_score(&self, class: usize) -> f64 {
        self.masked[class]
    }
}

/// For each concept: `p_k = M_k v` per environment, dominant class
/// `argmax_y sum_k p_k[y]` (ties to the lower class), score
/// `Var_k(p_k[dominant])` with population variance.
pub fn css(concepts: &[ConceptVector], matrices: &[GradientMatrix]) -> Result<Vec<CssRecord>> {
    let first = matrices.first().ok_or_else(|| Error::invalid("CSS needs at least one gradient matrix"))?;
    let classes = first.matrix.rows();
    concepts
        .iter()
        .map(|c| {
            let proj = matrices
                .iter()
                .map(|m| m.matrix.mul_vec(&c.direction))
                .collect::<Result<Vec<_>>>()?;
            let mut totals = vec![0.0; classes];
            for p in &proj {
                if p.len() != classes {
                    return Err(Error::invalid("gradient matrices disagree on class count"));
                }
                for (t, v) in totals.iter_mut().zip(p) {
                    *t += v;
                }
            }
            let mut class = 0;
            for y in 1..classes {
                if totals[y] > totals[class] {
                    class = y;
                }
            }
            let projections: Vec<f64> = proj.iter().map(|p| p[class]).collect();
            let score = population_variance(&projections)?;
            let mut masked = vec![0.0; classes];
            masked[class] = score;
            Ok(CssRecord { concept: c.name.clone(), score, class, masked, projections })
        })
        .collect()
}

/// Indices of `records` sorted by score, highest first (ties keep bank order).
pub fn rank_by_score(records: &[CssRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].score.total_cmp(&records[a].score));
    order
}

/// Mean projection `<h, v_l>` over `features`, per concept.
pub fn mean_projections<'a>(features: impl IntoIterator<Item = &'a [f64]>, concepts: &[ConceptVector]) -> Vec<f64> {
    let mut sums = vec![0.0; concepts.len()];
    let mut n = 0usize;
    for h in features {
        for (s, c) in sums.iter_mut().zip(concepts) {
            *s += dot(h, &c.direction);
        }
        n += 1;
    }
    sums.into_iter().map(|s| s / n.max(1) as f64).collect()
}

/// Concepts whose mean projection over the cluster strictly exceeds the
/// training-wide mean.
pub fn concept_presence<'a>(
    cluster_features: impl IntoIterator<Item = &'a [f64]>,
    concepts: &[ConceptVector],
    global_means: &[f64],
) -> Vec<usize> {
    let means = mean_projections(cluster_features, concepts);
    means
        .iter()
        .zip(global_means)
        .enumerate()
        .filter(|(_, (m, g))| m > g)
        .map(|(l, _)| l)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Inverse cluster size only.
    #[serde(rename = "PS")]
    Proportional,
    /// Inverse cluster size times the concept-bias probability of the cluster.
    #[default]
    #[serde(rename = "BS")]
    BiasAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterWeight {
    pub size: usize,
    pub presence: Vec<usize>,
    /// Probability that at least one present concept's bias event occurs.
    pub bias_score: f64,
    /// `1 / |C_k^y|`, 0 for an empty cluster.
    pub size_weight: f64,
    pub weight: f64,
    /// `weight` normalized within the class.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingWeights {
    /// `clusters[y][k]`
    pub clusters: Vec<Vec<ClusterWeight>>,
    /// `concept_probability[y][l]`
    pub concept_probability: Vec<Vec<f64>>,
    /// Classes whose weights were all zero and fell back to uniform.
    pub uniform_fallback: Vec<bool>,
}

/// Union probability of independent events.
pub fn union_probability(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    1.0 - probabilities.into_iter().map(|p| 1.0 - p).product::<f64>()
}

fn finish_class(mut row: Vec<ClusterWeight>) -> (Vec<ClusterWeight>, bool) {
    let total: f64 = row.iter().map(|c| c.weight).sum();
    if total > 0.0 {
        row.iter_mut().for_each(|c| c.probability = c.weight / total);
        return (row, false);
    }
    let nonempty = row.iter().filter(|c| c.size > 0).count();
    row.iter_mut().for_each(|c| {
        c.probability = if c.size > 0 { 1.0 / nonempty as f64 } else { 0.0 };
    });
    (row, true)
}

fn size_weight(size: usize) -> f64 {
    if size == 0 {
        0.0
    } else {
        1.0 / size as f64
    }
}

/// Bias-aware weights `W(k, y) = S(k, y) r(k, y)`.
///
/// `sizes[y][k]` and `presence[y][k]` describe cluster `C_k^y`. The concept
/// probability of `l` in class `y` is its masked score over the masked scores
/// of all concepts present anywhere in class `y`.
pub fn bias_aware_weights(sizes: &[Vec<usize>], records: &[CssRecord], presence: &[Vec<Vec<usize>>]) -> SamplingWeights {
    let mut clusters = Vec::with_capacity(sizes.len());
    let mut concept_probability = Vec::with_capacity(sizes.len());
    let mut uniform_fallback = Vec::with_capacity(sizes.len());
    for (y, class_sizes) in sizes.iter().enumerate() {
        let mut in_class = vec![false; records.len()];
        for set in &presence[y] {
            for &l in set {
                in_class[l] = true;
            }
        }
        let denom: f64 = records
            .iter()
            .enumerate()
            .filter(|(l, _)| in_class[*l])
            .map(|(_, r)| r.masked_score(y))
            .sum();
        let p: Vec<f64> = records
            .iter()
            .enumerate()
            .map(|(l, r)| if in_class[l] && denom > 0.0 { r.masked_score(y) / denom } else { 0.0 })
            .collect();
        let row: Vec<ClusterWeight> = class_sizes
            .iter()
            .zip(&presence[y])
            .enumerate()
            .map(|(k, (&size, present))| {
                if size == 0 {
                    log::warn!("cluster {k} of class {y} is empty and gets weight 0");
                }
                let bias_score = union_probability(present.iter().map(|&l| p[l]));
                let r = size_weight(size);
                ClusterWeight {
                    size,
                    presence: present.clone(),
                    bias_score,
                    size_weight: r,
                    weight: bias_score * r,
                    probability: 0.0,
                }
            })
            .collect();
        let (row, fallback) = finish_class(row);
        clusters.push(row);
        concept_probability.push(p);
        uniform_fallback.push(fallback);
    }
    SamplingWeights { clusters, concept_probability, uniform_fallback }
}

/// Size-only weights `r(k, y) = 1/|C_k^y|`, normalized within each class.
pub fn proportional_weights(sizes: &[Vec<usize>]) -> SamplingWeights {
    let mut clusters = Vec::new();
    let mut uniform_fallback = Vec::new();
    for class_sizes in sizes {
        let row = class_sizes
            .iter()
            .map(|&size| ClusterWeight {
                size,
                presence: Vec::new(),
                bias_score: 1.0,
                size_weight: size_weight(size),
                weight: size_weight(size),
                probability: 0.0,
            })
            .collect();
        let (row, fallback) = finish_class(row);
        clusters.push(row);
        uniform_fallback.push(fallback);
    }
    SamplingWeights { clusters, concept_probability: vec![Vec::new(); sizes.len()], uniform_fallback }
}

/// `P_size(k, y) = r(k, y) / sum over all (k', y') of r(k', y')`, as `[y][k]`.
pub fn size_probabilities(sizes: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let total: f64 = sizes.iter().flatten().map(|&s| size_weight(s)).sum();
    sizes
        .iter()
        .map(|row| row.iter().map(|&s| if total > 0.0 { size_weight(s) / total } else { 0.0 }).collect())
        .collect()
}

pub fn cluster_sizes(model: &ClusterModel) -> Vec<Vec<usize>> {
    model.members.iter().map(|row| row.iter().map(|m| m.len()).collect()).collect()
}

/// Draws a same-class partner for training frame `item`: a cluster from the
/// class's normalized weights, then a member uniformly, avoiding `item`
/// itself whenever the cluster has another member.
pub fn sample_partner(item: usize, class: Label, weights: &SamplingWeights, model: &ClusterModel, rng: &mut Rng) -> Result<usize> {
    let y = class.index();
    let probs: Vec<f64> = weights.clusters[y].iter().map(|c| c.probability).collect();
    let k = rng
        .weighted_index(&probs)
        .ok_or_else(|| Error::invalid(format!("class {y} has no nonempty cluster")))?;
    let members = &model.members[y][k];
    match members.iter().position(|&m| m == item) {
        Some(pos) if members.len() >= 2 => {
            let mut j = rng.below(members.len() - 1);
            if j >= pos {
                j += 1;
            }
            Ok(members[j])
        }
        _ => Ok(members[rng.below(members.len())]),
    }
}
