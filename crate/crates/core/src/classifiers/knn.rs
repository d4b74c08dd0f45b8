//! k-nearest-neighbors output approximation: the weighted average of the
//! output vectors of the k references closest to the query.

use super::{ClassifierError, ReferenceSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    /// Weight base b in (0,1): weight(d) = b^(scale * d).
    pub weight_base: f64,
    pub weight_scale: f64,
}

impl KnnConfig {
    /// The strength-study configuration: 4 neighbors, base 0.9, with the
    /// scale interpolated log-linearly in the game sample size from 30 at
    /// G=2 down to 6 at G=85.
    pub fn strength(games_per_sample: usize) -> KnnConfig {
        KnnConfig {
            k: 4,
            weight_base: 0.9,
            weight_scale: strength_weight_scale(games_per_sample),
        }
    }

    /// The style-study configuration: base 0.8, scale 10.
    pub fn style(k: usize) -> KnnConfig {
        KnnConfig {
            k,
            weight_base: 0.8,
            weight_scale: 10.0,
        }
    }
}

pub fn strength_weight_scale(games_per_sample: usize) -> f64 {
    let g = (games_per_sample.max(1) as f64).ln();
    let (g_lo, g_hi) = (2.0f64.ln(), 85.0f64.ln());
    let t = ((g - g_lo) / (g_hi - g_lo)).clamp(0.0, 1.0);
    30.0 + (6.0 - 30.0) * t
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Approximate the query's output vector. Distance ties are broken by the
/// stable reference order; weights are normalized so the output stays in the
/// convex hull of the selected references.
pub fn knn(query: &[f64], refs: &ReferenceSet, config: &KnnConfig) -> Result<Vec<f64>, ClassifierError> {
    if refs.is_empty() {
        return Err(ClassifierError::EmptyReferences);
    }
    if config.k == 0 || config.k > refs.len() {
        return Err(ClassifierError::BadK {
            k: config.k,
            refs: refs.len(),
        });
    }
    if query.len() != refs.inputs[0].len() {
        return Err(ClassifierError::DimensionMismatch {
            expected: refs.inputs[0].len(),
            found: query.len(),
        });
    }

    let mut distances: Vec<(f64, usize)> = refs
        .inputs
        .iter()
        .enumerate()
        .map(|(i, input)| (euclidean(query, input), i))
        .collect();
    distances.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let selected = &distances[..config.k];

    // b^(M*d) underflows for far references; shifting by the nearest
    // distance leaves the normalized weights unchanged.
    let d_min = selected[0].0;
    let ln_base = config.weight_base.ln();
    let dims = refs.output_dim();
    let mut out = vec![0.0; dims];
    let mut weight_sum = 0.0;
    for &(d, i) in selected {
        let w = (config.weight_scale * ln_base * (d - d_min)).exp();
        weight_sum += w;
        for (o, r) in out.iter_mut().zip(&refs.outputs[i]) {
            *o += w * r;
        }
    }
    for o in out.iter_mut() {
        *o /= weight_sum;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::OutputDomain;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn refs_from(inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> ReferenceSet {
        let domain = OutputDomain::from_outputs(&outputs);
        ReferenceSet {
            subjects: (0..inputs.len()).map(|i| format!("s{}", i)).collect(),
            inputs,
            outputs,
            domain,
        }
    }

    #[test]
    fn k1_returns_nearest_output() {
        let refs = refs_from(
            vec![vec![0.0, 0.0], vec![5.0, 5.0]],
            vec![vec![1.0], vec![9.0]],
        );
        let config = KnnConfig { k: 1, weight_base: 0.9, weight_scale: 10.0 };
        assert_eq!(knn(&[0.5, 0.0], &refs, &config).unwrap(), vec![1.0]);
        assert_eq!(knn(&[5.0, 4.0], &refs, &config).unwrap(), vec![9.0]);
    }

    #[test]
    fn equidistant_pair_averages() {
        let refs = refs_from(
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![2.0, 4.0], vec![6.0, 0.0]],
        );
        let config = KnnConfig { k: 2, weight_base: 0.8, weight_scale: 10.0 };
        let out = knn(&[0.0, 0.0], &refs, &config).unwrap();
        assert!((out[0] - 4.0).abs() < 1e-12);
        assert!((out[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn query_on_reference_converges_to_it_as_k_shrinks(){
        let refs = refs_from(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![vec![10.0], vec![20.0], vec![40.0]],
        );
        let config = KnnConfig { k: 1, weight_base: 0.9, weight_scale: 5.0 };
        assert_eq!(knn(&[1.0], &refs, &config).unwrap(), vec![20.0]);
        // With k=3 the output stays inside the convex hull of outputs.
        let config = KnnConfig { k: 3, ..config };
        let out = knn(&[1.0], &refs, &config).unwrap()[0];
        assert!((10.0..=40.0).contains(&out));
    }

    #[test]
    fn matches_direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..100 {
            let dims = rng.gen_range(1..6);
            let count = rng.gen_range(4..12);
            let inputs: Vec<Vec<f64>> = (0..count)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let outputs: Vec<Vec<f64>> = (0..count)
                .map(|_| (0..dims).map(|_| rng.gen_range(1.0..10.0)).collect())
                .collect();
            let refs = refs_from(inputs.clone(), outputs.clone());
            // Alternate the published parameter sets.
            let config = if case % 2 == 0 {
                KnnConfig { k: 4, weight_base: 0.9, weight_scale: 12.0 }
            } else {
                KnnConfig { k: 2, weight_base: 0.8, weight_scale: 10.0 }
            };
            let query: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();

            // Oracle: unshifted direct summation of b^(M d) weights.
            let mut pairs: Vec<(f64, usize)> = inputs
                .iter()
                .enumerate()
                .map(|(i, inp)| (euclidean(&query, inp), i))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut expected = vec![0.0; dims];
            let mut total = 0.0;
            for &(d, i) in pairs.iter().take(config.k) {
                let w = config.weight_base.powf(config.weight_scale * d);
                total += w;
                for (e, o) in expected.iter_mut().zip(&outputs[i]) {
                    *e += w * o;
                }
            }
            let got = knn(&query, &refs, &config).unwrap();
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e / total).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn invariant_under_reference_reordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let inputs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let outputs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(0.0..5.0)]).collect();
        let refs = refs_from(inputs.clone(), outputs.clone());
        let reversed = refs_from(
            inputs.into_iter().rev().collect(),
            outputs.into_iter().rev().collect(),
        );
        let config = KnnConfig { k: 3, weight_base: 0.9, weight_scale: 8.0 };
        let query = vec![0.3, -0.2];
        let a = knn(&query, &refs, &config).unwrap();
        let b = knn(&query, &reversed, &config).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn strength_scale_endpoints() {
        assert!((strength_weight_scale(2) - 30.0).abs() < 1e-12);
        assert!((strength_weight_scale(85) - 6.0).abs() < 1e-12);
        let mid = strength_weight_scale(17);
        assert!(mid < 30.0 && mid > 6.0);
    }

    #[test]
    fn empty_refs_and_bad_k() {
        let refs = refs_from(vec![], vec![]);
        let config = KnnConfig { k: 1, weight_base: 0.9, weight_scale: 1.0 };
        assert!(matches!(knn(&[0.0], &refs, &config), Err(ClassifierError::EmptyReferences)));
        let refs = refs_from(vec![vec![0.0]], vec![vec![0.0]]);
        let config = KnnConfig { k: 2, ..config };
        assert!(matches!(knn(&[0.0], &refs, &config), Err(ClassifierError::BadK { .. })));
    }
}
