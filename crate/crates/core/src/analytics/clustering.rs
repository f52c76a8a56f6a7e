use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::Serialize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AnalyticsError, CooccurrenceMatrix};

pub const DEFAULT_DAMPING: f64 = 0.7;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_CONVERGENCE_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApParams {
    pub preference: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub convergence_window: usize,
}

impl ApParams {
    pub fn with_preference(preference: f64) -> Self {
        Self {
            preference,
            damping: DEFAULT_DAMPING,
            max_iter: DEFAULT_MAX_ITER,
            convergence_window: DEFAULT_CONVERGENCE_WINDOW,
        }
    }
}

/// Exemplar-based partition of `n` points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    /// Point indices of the exemplars, ascending.
    pub exemplars: Vec<usize>,
    /// Exemplar point index of every point.
    pub labels: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.exemplars.len()
    }

    pub fn members(&self, exemplar: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == exemplar).collect()
    }
}

/// Median of the off-diagonal entries, the usual neutral preference.
pub fn median_off_diagonal(similarity: ArrayView2<'_, f64>) -> Option<f64> {
    let n = similarity.nrows();
    let mut v: Vec<f64> = similarity
        .indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, &s)| s)
        .collect();
    if v.is_empty() || n != similarity.ncols() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn validate(similarity: &ArrayView2<'_, f64>, params: &ApParams) -> Result<(), AnalyticsError> {
    if similarity.nrows() != similarity.ncols() {
        return Err(AnalyticsError::Shape(format!("similarity is {:?}, not square", similarity.dim())));
    }
    if similarity.is_empty() {
        return Err(AnalyticsError::Empty("no points to cluster".into()));
    }
    if !(0.5..1.0).contains(&params.damping) {
        return Err(AnalyticsError::InvalidParameter(format!(
            "damping must lie in [0.5, 1), got {}",
            params.damping
        )));
    }
    if params.max_iter == 0 || params.convergence_window == 0 {
        return Err(AnalyticsError::InvalidParameter(
            "max_iter and convergence_window must be positive".into(),
        ));
    }
    if !params.preference.is_finite() || similarity.iter().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::InvalidParameter("similarities and preference must be finite".into()));
    }
    Ok(())
}

/// Frey–Dueck message passing with damped responsibility and availability
/// updates. Stops once the exemplar set has been stable for
/// `convergence_window` iterations; otherwise returns the state after
/// `max_iter` iterations flagged as not converged.
pub fn affinity_propagation(
    similarity: ArrayView2<'_, f64>,
    params: &ApParams,
) -> Result<ClusterAssignment, AnalyticsError> {
    validate(&similarity, params)?;
    let n = similarity.nrows();
    if n == 1 {
        return Ok(ClusterAssignment {
            exemplars: vec![0],
            labels: vec![0],
            converged: true,
            iterations: 0,
        });
    }
    let mut s = similarity.to_owned();
    s.diag_mut().fill(params.preference);
    break_ties(&mut s);
    let d = params.damping;
    let mut r = Array2::<f64>::zeros((n, n));
    let mut a = Array2::<f64>::zeros((n, n));
    let mut last: Option<Vec<bool>> = None;
    let mut stable = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.max_iter {
        iterations = it;
        // responsibilities, row by row
        Zip::from(r.axis_iter_mut(Axis(0)))
            .and(s.axis_iter(Axis(0)))
            .and(a.axis_iter(Axis(0)))
            .par_for_each(|mut r_row, s_row, a_row| {
                let (mut best, mut second, mut best_k) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
                for k in 0..n {
                    let v = a_row[k] + s_row[k];
                    if v > best {
                        second = best;
                        best = v;
                        best_k = k;
                    } else if v > second {
                        second = v;
                    }
                }
                for k in 0..n {
                    let competitor = if k == best_k { second } else { best };
                    r_row[k] = d * r_row[k] + (1.0 - d) * (s_row[k] - competitor);
                }
            });
        // availabilities, from column sums of positive responsibilities
        let col_sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                (0..n)
                    .map(|i| if i == k { r[[k, k]] } else { r[[i, k]].max(0.0) })
                    .sum()
            })
            .collect();
        Zip::indexed(a.axis_iter_mut(Axis(0)))
            .and(r.axis_iter(Axis(0)))
            .par_for_each(|i, mut a_row, r_row| {
                for k in 0..n {
                    let new = if i == k {
                        col_sums[k] - r_row[k]
                    } else {
                        (col_sums[k] - r_row[k].max(0.0)).min(0.0)
                    };
                    a_row[k] = d * a_row[k] + (1.0 - d) * new;
                }
            });

        let exemplars: Vec<bool> = (0..n).map(|k| a[[k, k]] + r[[k, k]] > 0.0).collect();
        if last.as_ref() == Some(&exemplars) {
            stable += 1;
        } else {
            stable = 1;
            last = Some(exemplars);
        }
        if stable >= params.convergence_window && last.as_ref().is_some_and(|e| e.iter().any(|&x| x)) {
            converged = true;
            break;
        }
    }

    let flags = last.unwrap_or_default();
    let mut exemplars: Vec<usize> = (0..n).filter(|&k| flags[k]).collect();
    if exemplars.is_empty() {
        // degenerate run: fall back to the single strongest self-evidence
        let best = (0..n)
            .max_by(|&x, &y| (a[[x, x]] + r[[x, x]]).total_cmp(&(a[[y, y]] + r[[y, y]])).then(y.cmp(&x)))
            .expect("n > 1");
        exemplars.push(best);
        converged = false;
    }
    let labels = assign(&s, &exemplars);
    let exemplars = refine(&s, &exemplars, &labels);
    let labels = assign(&s, &exemplars);
    Ok(ClusterAssignment {
        exemplars,
        labels,
        converged,
        iterations,
    })
}

/// Perturbs similarities by a few ulps from a fixed seed so that exactly
/// symmetric configurations (duplicate points) cannot oscillate forever.
fn break_ties(s: &mut Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    s.mapv_inplace(|v| v + (f64::EPSILON * v + f64::MIN_POSITIVE * 100.0) * rng.sample::<f64, _>(StandardNormal));
}

/// Every point to its most similar exemplar; exemplars to themselves.
fn assign(s: &Array2<f64>, exemplars: &[usize]) -> Vec<usize> {
    (0..s.nrows())
        .map(|i| {
            if exemplars.contains(&i) {
                return i;
            }
            *exemplars
                .iter()
                .max_by(|&&x, &&y| s[[i, x]].total_cmp(&s[[i, y]]).then(y.cmp(&x)))
                .expect("nonempty")
        })
        .collect()
}

/// Within each cluster, the member with the highest total similarity to the
/// others becomes the exemplar.
fn refine(s: &Array2<f64>, exemplars: &[usize], labels: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = exemplars
        .iter()
        .map(|&e| {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == e).collect();
            *members
                .iter()
                .max_by(|&&x, &&y| {
                    let sx: f64 = members.iter().map(|&m| s[[m, x]]).sum();
                    let sy: f64 = members.iter().map(|&m| s[[m, y]]).sum();
                    sx.total_cmp(&sy).then(y.cmp(&x))
                })
                .expect("exemplar is its own member")
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Tag clusters keyed by exemplar name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagClusters {
    pub clusters: BTreeMap<String, Vec<String>>,
    pub preference: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Clusters tags by cosine similarity of their co-occurrence rows, with the
/// median similarity as preference.
pub fn cluster_tags(cooc: &CooccurrenceMatrix) -> Result<TagClusters, AnalyticsError> {
    let sim = cooc.cosine_similarity();
    let preference = median_off_diagonal(sim.view()).unwrap_or(0.0);
    let result = affinity_propagation(sim.view(), &ApParams::with_preference(preference))?;
    if !result.converged {
        log::warn!("affinity propagation did not converge in {} iterations", result.iterations);
    }
    let clusters = result
        .exemplars
        .iter()
        .map(|&e| {
            (
                cooc.tags[e].clone(),
                result.members(e).into_iter().map(|m| cooc.tags[m].clone()).collect(),
            )
        })
        .collect();
    Ok(TagClusters {
        clusters,
        preference,
        converged: result.converged,
        iterations: result.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal transcription of the message-passing rules with scalar loops.
    fn reference(sim: &Array2<f64>, p: &ApParams) -> (Vec<bool>, usize) {
        let n = sim.nrows();
        let mut s = sim.clone();
        for k in 0..n {
            s[[k, k]] = p.preference;
        }
        break_ties(&mut s);
        let mut r = vec![vec![0.0; n]; n];
        let mut a = vec![vec![0.0; n]; n];
        let mut hist: Vec<Vec<bool>> = Vec::new();
        for it in 1..=p.max_iter {
            for i in 0..n {
                for k in 0..n {
                    let mut m = f64::NEG_INFINITY;
                    for kk in 0..n {
                        if kk != k {
                            m = m.max(a[i][kk] + s[[i, kk]]);
                        }
                    }
                    r[i][k] = p.damping * r[i][k] + (1.0 - p.damping) * (s[[i, k]] - m);
                }
            }
            let old = a.clone();
            for i in 0..n {
                for k in 0..n {
                    let mut sum = 0.0;
                    for ii in 0..n {
                        if ii != i && ii != k {
                            sum += r[ii][k].max(0.0);
                        }
                    }
                    let new = if i == k { sum } else { (r[k][k] + sum).min(0.0) };
                    a[i][k] = p.damping * old[i][k] + (1.0 - p.damping) * new;
                }
            }
            let e: Vec<bool> = (0..n).map(|k| a[k][k] + r[k][k] > 0.0).collect();
            hist.push(e.clone());
            let w = p.convergence_window;
            if hist.len() >= w && hist[hist.len() - w..].iter().all(|h| *h == e) && e.iter().any(|&x| x) {
                return (e, it);
            }
        }
        (hist.pop().unwrap(), p.max_iter)
    }

    /// Three Gaussian blobs in the plane under negative squared distance.
    fn three_blobs(per: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = [(0.0, 0.0), (10.0, 0.0), (5.0, 8.66)];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (g, (cx, cy)) in centres.iter().enumerate() {
            for _ in 0..per {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                pts.push((cx + dx, cy + dy));
                truth.push(g);
            }
        }
        let n = pts.len();
        let s = Array2::from_shape_fn((n, n), |(i, j)| {
            let (a, b) = (pts[i], pts[j]);
            -((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
        });
        (s, truth)
    }

    fn matches_truth(result: &ClusterAssignment, truth: &[usize]) -> bool {
        let groups = *truth.iter().max().unwrap() + 1;
        if result.n_clusters() != groups {
            return false;
        }
        // same partition: labels agree iff truth agrees
        (0..truth.len()).all(|i| (0..truth.len()).all(|j| (truth[i] == truth[j]) == (result.labels[i] == result.labels[j])))
    }

    #[test]
    fn single_point() {
        let r = affinity_propagation(ndarray::array![[0.0]].view(), &ApParams::with_preference(-1.0)).unwrap();
        assert_eq!((r.exemplars.clone(), r.labels.clone()), (vec![0], vec![0]));
    }

    #[test]
    fn recovers_three_blobs() {
        let (s, truth) = three_blobs(10, 7);
        let p = ApParams::with_preference(median_off_diagonal(s.view()).unwrap());
        let r = affinity_propagation(s.view(), &p).unwrap();
        assert!(r.converged);
        assert!(matches_truth(&r, &truth), "{r:?}");
        for &e in &r.exemplars {
            assert_eq!(r.labels[e], e);
        }
    }

    #[test]
    fn agrees_with_scalar_reference() {
        for seed in 0..5 {
            let (s, _) = three_blobs(6, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = s.mapv(|v| v + rng.random_range(-0.5..0.5));
            let p = ApParams {
                max_iter: 200,
                convergence_window: 15,
                ..ApParams::with_preference(median_off_diagonal(noisy.view()).unwrap())
            };
            let fast = affinity_propagation(noisy.view(), &p).unwrap();
            let (flags, iters) = reference(&noisy, &p);
            let expected: Vec<usize> = (0..flags.len()).filter(|&k| flags[k]).collect();
            assert_eq!(fast.iterations, iters);
            // before refinement both agree on the exemplar set; refinement may only move
            // an exemplar within its cluster, so compare cluster structure
            assert_eq!(fast.n_clusters(), expected.len());
            let labels_ref = assign(&{
                let mut m = noisy.clone();
                m.diag_mut().fill(p.preference);
                break_ties(&mut m);
                m
            }, &expected);
            for i in 0..labels_ref.len() {
                for j in 0..labels_ref.len() {
                    assert_eq!(labels_ref[i] == labels_ref[j], fast.labels[i] == fast.labels[j]);
                }
            }
        }
    }

    #[test]
    fn high_preference_makes_everyone_an_exemplar() {
        let (s, _) = three_blobs(4, 1);
        let r = affinity_propagation(s.view(), &ApParams::with_preference(1e3)).unwrap();
        assert_eq!(r.n_clusters(), 12);
    }

    #[test]
    fn deterministic() {
        let (s, _) = three_blobs(8, 3);
        let p = ApParams::with_preference(median_off_diagonal(s.view()).unwrap());
        assert_eq!(affinity_propagation(s.view(), &p).unwrap(), affinity_propagation(s.view(), &p).unwrap());
    }

    #[test]
    fn parameter_validation() {
        let s = Array2::<f64>::zeros((3, 3));
        let bad = ApParams { damping: 1.0, ..ApParams::with_preference(0.0) };
        assert!(affinity_propagation(s.view(), &bad).is_err());
        assert!(affinity_propagation(Array2::<f64>::zeros((2, 3)).view(), &ApParams::with_preference(0.0)).is_err());
    }

    #[test]
    fn median_matches_hand_value() {
        let s = ndarray::array![[0.0, 1.0, 2.0], [3.0, 0.0, 4.0], [5.0, 6.0, 0.0]];
        assert_eq!(median_off_diagonal(s.view()), Some(3.5));
    }

    #[test]
    fn tag_clusters_follow_usage_groups() {
        use crate::corpus::TagAnnotations;
        let groups = [["calm", "serene", "gentle"], ["angry", "fierce", "harsh"], ["happy", "bright", "sunny"]];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<(String, Vec<&str>)> = (0..300)
            .map(|i| {
                let g = i % 3;
                let mut tags: Vec<&str> = groups[g].iter().copied().filter(|_| rng.random_bool(0.6)).collect();
                if tags.is_empty() {
                    tags.push(groups[g][i % 3]);
                }
                if rng.random_bool(0.05) {
                    tags.push(groups[(g + 1) % 3][0]);
                }
                (format!("t{i}"), tags)
            })
            .collect();
        let ann = TagAnnotations::from_named(rows).unwrap();
        let c = cluster_tags(&super::super::cooccurrence(&ann).unwrap()).unwrap();
        assert!(c.converged);
        assert_eq!(c.clusters.values().map(Vec::len).sum::<usize>(), 9);
        assert_eq!(c.clusters.len(), 3, "{:?}", c.clusters);
        for (exemplar, members) in &c.clusters {
            assert!(members.contains(exemplar));
            let g = groups.iter().position(|gr| gr.contains(&exemplar.as_str())).unwrap();
            assert!(members.iter().all(|m| groups[g].contains(&m.as_str())));
        }
    }
}
