//! Sociomaps: a 2D layout of subjects that preserves the ordering of
//! pairwise difference significances via the three-way ordering criterion,
//! plus the PCA-based height field drawn over the layout.

use crate::stats::PcaModel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Pairwise difference-significance matrix. `values[i][j]` is the estimated
/// probability that two uniformly-drawn profiles lie closer (Manhattan) than
/// subjects i and j do, so larger means a more significant difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatrix {
    pub subjects: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ProfileMatrix {
    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Input distribution for the significance estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleRange {
    /// Uniform over each dimension's observed [min, max].
    Observed,
    /// Uniform over a fixed interval in every dimension.
    Fixed(f64, f64),
}

pub struct TeamProfile {
    pub matrix: ProfileMatrix,
    pub warnings: Vec<String>,
}

/// Estimate the difference-significance matrix by Monte Carlo: A_ij is the
/// empirical P(D < d_ij) where D is the Manhattan distance of two points
/// drawn uniformly over the input range.
pub fn team_profile(
    subjects: &[(String, Vec<f64>)],
    samples: usize,
    seed: u64,
    range: SampleRange,
) -> TeamProfile {
    assert!(samples >= 10_000, "need at least 10^4 Monte Carlo samples");
    assert!(!subjects.is_empty());
    let dims = subjects[0].1.len();
    assert!(subjects.iter().all(|(_, v)| v.len() == dims));

    let (lo, hi): (Vec<f64>, Vec<f64>) = match range {
        SampleRange::Fixed(a, b) => (vec![a; dims], vec![b; dims]),
        SampleRange::Observed => {
            let mut lo = vec![f64::INFINITY; dims];
            let mut hi = vec![f64::NEG_INFINITY; dims];
            for (_, v) in subjects {
                for d in 0..dims {
                    lo[d] = lo[d].min(v[d]);
                    hi[d] = hi[d].max(v[d]);
                }
            }
            (lo, hi)
        }
    };

    let mut warnings = Vec::new();
    if lo.iter().zip(&hi).all(|(a, b)| a == b) {
        warnings.push("all subject vectors identical: significance matrix is all zero".to_string());
    }

    // One shared distance sample serves every pair; sorting it makes each
    // A_ij a binary search.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<f64> = (0..samples)
        .map(|_| {
            (0..dims)
                .map(|d| {
                    if lo[d] == hi[d] {
                        0.0
                    } else {
                        let a: f64 = rng.gen_range(lo[d]..hi[d]);
                        let b: f64 = rng.gen_range(lo[d]..hi[d]);
                        (a - b).abs()
                    }
                })
                .sum()
        })
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n = subjects.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = manhattan(&subjects[i].1, &subjects[j].1);
            let below = draws.partition_point(|&x| x < d);
            let a = below as f64 / samples as f64;
            values[i][j] = a;
            values[j][i] = a;
        }
    }
    TeamProfile {
        matrix: ProfileMatrix {
            subjects: subjects.iter().map(|(s, _)| s.clone()).collect(),
            values,
        },
        warnings,
    }
}

/// The paper's three-case comparison: which of b, c lies closer to a.
pub fn delta(a: f64, b: f64, c: f64) -> i8 {
    let db = (a - b).abs();
    let dc = (a - c).abs();
    if db > dc {
        1
    } else if db == dc {
        0
    } else {
        -1
    }
}

fn delta_points(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> i8 {
    let db = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let dc = ((a.0 - c.0).powi(2) + (a.1 - c.1).powi(2)).sqrt();
    if db > dc {
        1
    } else if db == dc {
        0
    } else {
        -1
    }
}

fn significance_delta(a_ij: f64, a_ik: f64) -> i8 {
    // Ordering by significance: the more significant pair must come out
    // farther apart on the plane.
    if a_ij > a_ik {
        1
    } else if a_ij == a_ik {
        0
    } else {
        -1
    }
}

/// Fraction of ordered triples (i,j,k) of distinct subjects whose plane
/// ordering matches the significance ordering. Fewer than 3 subjects have no
/// triples; the score is 1 by convention.
pub fn three_way_score(matrix: &ProfileMatrix, positions: &[(f64, f64)]) -> f64 {
    let n = matrix.len();
    assert_eq!(positions.len(), n);
    if n < 3 {
        return 1.0;
    }
    let mut satisfied = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                total += 1;
                let a_side = significance_delta(matrix.values[i][j], matrix.values[i][k]);
                let plane = delta_points(positions[i], positions[j], positions[k]);
                if a_side == plane {
                    satisfied += 1;
                }
            }
        }
    }
    satisfied as f64 / total as f64
}

/// Triples involving a fixed subject; enough to score a single-subject
/// perturbation.
fn satisfied_involving(matrix: &ProfileMatrix, positions: &[(f64, f64)], subject: usize) -> usize {
    let n = matrix.len();
    let mut satisfied = 0usize;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                if i != subject && j != subject && k != subject {
                    continue;
                }
                let a_side = significance_delta(matrix.values[i][j], matrix.values[i][k]);
                if a_side == delta_points(positions[i], positions[j], positions[k]) {
                    satisfied += 1;
                }
            }
        }
    }
    satisfied
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub subjects: Vec<String>,
    pub positions: Vec<(f64, f64)>,
    pub score: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// Best-of-restarts stochastic hill climbing: random starts in the unit
/// square, Gaussian single-subject perturbations with an annealed scale,
/// keeping any move that does not lower the score.
pub fn layout(matrix: &ProfileMatrix, seed: u64, restarts: usize, iters: usize) -> Layout {
    assert!(!matrix.is_empty());
    let n = matrix.len();
    let mut best: Option<(f64, Vec<(f64, f64)>, usize)> = None;

    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let mut positions: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();

        if n < 3 {
            match &best {
                Some(_) => {}
                None => best = Some((1.0, positions, restart)),
            }
            continue;
        }

        let mut satisfied_total = {
            let score = three_way_score(matrix, &positions);
            (score * (n * (n - 1) * (n - 2)) as f64).round() as usize
        };
        let triple_count = n * (n - 1) * (n - 2);

        for iteration in 0..iters {
            let scale = 0.3 * (1.0 - iteration as f64 / iters as f64) + 0.01;
            let subject = rng.gen_range(0..n);
            let old = positions[subject];
            let before = satisfied_involving(matrix, &positions, subject);
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            positions[subject] = (old.0 + dx * scale, old.1 + dy * scale);
            let after = satisfied_involving(matrix, &positions, subject);
            if after < before {
                positions[subject] = old;
            } else {
                satisfied_total = satisfied_total + after - before;
                if satisfied_total == triple_count {
                    break;
                }
            }
        }

        let score = satisfied_total as f64 / triple_count as f64;
        let better = match &best {
            None => true,
            Some((s, _, _)) => score > *s,
        };
        if better {
            best = Some((score, positions, restart));
        }
    }

    let (score, positions, _) = best.unwrap();
    Layout {
        subjects: matrix.subjects.clone(),
        positions,
        score,
        iterations: iters,
        seed,
    }
}

pub struct HeightField {
    /// (subject, height) for each subject with a projection.
    pub heights: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

/// Node heights over the layout: the first two PCA coordinates weighted by
/// their eigenvalues, h = l1*R1 + l2*R2.
pub fn height_field(
    layout: &Layout,
    model: &PcaModel,
    pattern_vectors: &[(String, Vec<f64>)],
) -> HeightField {
    let mut heights = Vec::new();
    let mut warnings = Vec::new();
    for subject in &layout.subjects {
        let Some((_, vector)) = pattern_vectors.iter().find(|(s, _)| s == subject) else {
            warnings.push(format!("no pattern vector for {}, omitted from height field", subject));
            continue;
        };
        match model.project(vector) {
            Ok(r) => {
                let r1 = r.first().copied().unwrap_or(0.0);
                let r2 = r.get(1).copied().unwrap_or(0.0);
                let l1 = model.eigenvalues.first().copied().unwrap_or(0.0);
                let l2 = model.eigenvalues.get(1).copied().unwrap_or(0.0);
                heights.push((subject.clone(), l1 * r1 + l2 * r2));
            }
            Err(e) => warnings.push(format!("projection failed for {}: {}", subject, e)),
        }
    }
    HeightField { heights, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pca_fit;
    use rand::Rng;

    fn named(vectors: Vec<Vec<f64>>) -> Vec<(String, Vec<f64>)> {
        vectors.into_iter().enumerate().map(|(i, v)| (format!("s{}", i), v)).collect()
    }

    #[test]
    fn identical_subjects_give_zero_matrix() {
        let subjects = named(vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
        let profile = team_profile(&subjects, 10_000, 1, SampleRange::Observed);
        assert_eq!(profile.matrix.values[0][1], 0.0);
        assert!(!profile.warnings.is_empty());
    }

    #[test]
    fn diagonal_zero_and_symmetry_and_monotonicity() {
        let subjects = named(vec![
            vec![1.0, 1.0],
            vec![2.0, 1.5],
            vec![9.0, 8.0],
            vec![5.0, 5.0],
        ]);
        let profile = team_profile(&subjects, 50_000, 2, SampleRange::Observed).matrix;
        let n = profile.len();
        let mut max_pair = (0, 1);
        let mut max_distance = 0.0;
        for i in 0..n {
            assert_eq!(profile.values[i][i], 0.0);
            for j in 0..n {
                assert_eq!(profile.values[i][j], profile.values[j][i]);
                let d = manhattan(&subjects[i].1, &subjects[j].1);
                if d > max_distance {
                    max_distance = d;
                    max_pair = (i, j);
                }
            }
        }
        let max_a = profile.values[max_pair.0][max_pair.1];
        for i in 0..n {
            for j in 0..n {
                assert!(profile.values[i][j] <= max_a);
            }
        }
    }

    #[test]
    fn one_dim_closed_form() {
        // P(|U - V| < 0.5) = 3/4 for U,V uniform on [0,1].
        let subjects = named(vec![vec![0.0], vec![0.5], vec![1.0]]);
        let profile = team_profile(&subjects, 200_000, 3, SampleRange::Fixed(0.0, 1.0)).matrix;
        assert!((profile.values[0][1] - 0.75).abs() < 0.01);
    }

    #[test]
    fn delta_reference_case() {
        assert_eq!(delta(0.0, 1.0, 2.0), -1);
        assert_eq!(delta(0.0, 2.0, 1.0), 1);
        assert_eq!(delta(1.0, 0.0, 2.0), 0);
    }

    #[test]
    fn two_subjects_score_one() {
        let matrix = ProfileMatrix {
            subjects: vec!["a".to_string(), "b".to_string()],
            values: vec![vec![0.0, 0.5], vec![0.5, 0.0]],
        };
        assert_eq!(three_way_score(&matrix, &[(0.0, 0.0), (1.0, 0.0)]), 1.0);
    }

    #[test]
    fn matching_plane_ordering_scores_one() {
        // Three subjects whose plane distances replicate the significance
        // ordering exactly; exhaustive triple check via the score.
        let matrix = ProfileMatrix {
            subjects: vec!["a".into(), "b".into(), "c".into()],
            values: vec![
                vec![0.0, 0.2, 0.9],
                vec![0.2, 0.0, 0.5],
                vec![0.9, 0.5, 0.0],
            ],
        };
        // d(a,b) < d(b,c) < d(a,c) mirrors A_ab < A_bc < A_ac.
        let positions = [(0.0, 0.0), (1.0, 0.0), (3.0, 0.5)];
        assert_eq!(three_way_score(&matrix, &positions), 1.0);
        // Swapping two subjects breaks the ordering.
        let bad = [(3.0, 0.5), (1.0, 0.0), (0.0, 0.0)];
        assert!(three_way_score(&matrix, &bad) < 1.0);
    }

    #[test]
    fn score_invariant_under_monotone_transform_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let subjects = named(
            (0..6)
                .map(|_| (0..3).map(|_| rng.gen_range(1.0..10.0)).collect())
                .collect(),
        );
        let matrix = team_profile(&subjects, 20_000, 5, SampleRange::Observed).matrix;
        let positions: Vec<(f64, f64)> =
            (0..6).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
        let score = three_way_score(&matrix, &positions);

        // Strictly increasing transforms of A preserve every ordering.
        for power in [0.5, 1.0, 2.0, 3.0] {
            let transformed = ProfileMatrix {
                subjects: matrix.subjects.clone(),
                values: matrix
                    .values
                    .iter()
                    .map(|row| row.iter().map(|v| v.powf(power) * 3.0 + 1.0).collect())
                    .collect(),
            };
            assert_eq!(three_way_score(&transformed, &positions), score);
        }

        // Isometries and uniform scaling of the plane too.
        let rotated: Vec<(f64, f64)> = positions
            .iter()
            .map(|(x, y)| {
                let (s, c) = (0.6f64, 0.8f64);
                (2.0 * (c * x - s * y) + 5.0, 2.0 * (s * x + c * y) - 1.0)
            })
            .collect();
        assert!((three_way_score(&matrix, &rotated) - score).abs() < 1e-12);
    }

    #[test]
    fn three_subject_layout_reaches_one() {
        let subjects = named(vec![vec![1.0, 2.0], vec![4.0, 3.0], vec![9.0, 9.0]]);
        let matrix = team_profile(&subjects, 20_000, 6, SampleRange::Observed).matrix;
        let result = layout(&matrix, 7, 10, 2000);
        assert_eq!(result.score, 1.0);
    }

    #[test]
    fn single_subject_layout() {
        let matrix = ProfileMatrix {
            subjects: vec!["only".to_string()],
            values: vec![vec![0.0]],
        };
        let result = layout(&matrix, 1, 3, 100);
        assert_eq!(result.score, 1.0);
        assert_eq!(result.positions.len(), 1);
    }

    #[test]
    fn layout_deterministic() {
        let subjects = named(vec![
            vec![1.0, 2.0],
            vec![4.0, 3.0],
            vec![9.0, 9.0],
            vec![2.0, 8.0],
        ]);
        let matrix = team_profile(&subjects, 20_000, 8, SampleRange::Observed).matrix;
        let a = layout(&matrix, 21, 5, 1000);
        let b = layout(&matrix, 21, 5, 1000);
        assert_eq!(a, b);
    }

    #[test]
    fn height_field_linear_combination() {
        let data: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 2.0],
            vec![2.0, 1.0, 0.5],
            vec![3.0, -1.0, 1.0],
            vec![4.0, 0.5, 0.0],
        ];
        let model = pca_fit(&data, 2).unwrap();
        let vectors = named(data.clone());
        let l = Layout {
            subjects: vectors.iter().map(|(s, _)| s.clone()).collect(),
            positions: vec![(0.0, 0.0); 4],
            score: 1.0,
            iterations: 0,
            seed: 0,
        };
        let field = height_field(&l, &model, &vectors);
        assert_eq!(field.heights.len(), 4);
        for ((_, h), original) in field.heights.iter().zip(&data) {
            let r = model.project(original).unwrap();
            let expected = model.eigenvalues[0] * r[0] + model.eigenvalues[1] * r[1];
            assert!((h - expected).abs() < 1e-12);
        }

        // Missing projections are reported, not fatal.
        let mut l2 = l.clone();
        l2.subjects.push("ghost".to_string());
        l2.positions.push((0.5, 0.5));
        let field = height_field(&l2, &model, &vectors);
        assert_eq!(field.heights.len(), 4);
        assert_eq!(field.warnings.len(), 1);
    }
}
