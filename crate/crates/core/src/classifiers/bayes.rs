//! Naive Bayes over PCA-reduced inputs. The continuous output domain is
//! covered by classes of fixed width; each class gets per-dimension Gaussian
//! parameters, and classification returns the midpoint of the most probable
//! class.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesConfig {
    /// Output discretization width; class of value o is floor(o / width).
    pub class_width: f64,
    /// Use only the first `input_dims` coordinates of the input (the most
    /// significant PCA dimensions). `None` takes the full input.
    pub input_dims: Option<usize>,
}

impl Default for BayesConfig {
    fn default() -> Self {
        // 10/7 covers the ten-point style scale with 8 classes.
        BayesConfig {
            class_width: 10.0 / 7.0,
            input_dims: None,
        }
    }
}

pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BayesClass {
    pub index: i64,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesModel {
    pub class_width: f64,
    /// Observed classes, sorted by index.
    pub classes: Vec<BayesClass>,
}

pub struct BayesTrain {
    pub model: BayesModel,
    pub warnings: Vec<String>,
}

/// Estimate per-class Gaussian parameters from (input vector, output value)
/// pairs. Zero variances are floored with a warning.
pub fn bayes_train(pairs: &[(Vec<f64>, f64)], config: &BayesConfig) -> BayesTrain {
    assert!(!pairs.is_empty(), "empty training set");
    assert!(config.class_width > 0.0);
    let dims = pairs[0].0.len();

    let mut by_class: std::collections::BTreeMap<i64, Vec<&Vec<f64>>> = Default::default();
    for (input, output) in pairs {
        assert_eq!(input.len(), dims);
        let class = (output / config.class_width).floor() as i64;
        by_class.entry(class).or_default().push(input);
    }

    let mut warnings = Vec::new();
    let total = pairs.len() as f64;
    let classes = by_class
        .into_iter()
        .map(|(index, members)| {
            let count = members.len() as f64;
            let mut mean = vec![0.0; dims];
            for m in &members {
                for (s, v) in mean.iter_mut().zip(m.iter()) {
                    *s += v;
                }
            }
            for s in mean.iter_mut() {
                *s /= count;
            }
            let mut sd = vec![0.0; dims];
            for m in &members {
                for ((s, v), mu) in sd.iter_mut().zip(m.iter()).zip(&mean) {
                    *s += (v - mu) * (v - mu);
                }
            }
            for (d, s) in sd.iter_mut().enumerate() {
                *s = (*s / count).sqrt();
                if *s < SIGMA_FLOOR {
                    *s = SIGMA_FLOOR;
                    warnings.push(format!("class {} dim {}: zero variance floored", index, d));
                }
            }
            BayesClass {
                index,
                prior: count / total,
                mean,
                sd,
            }
        })
        .collect();
    BayesTrain {
        model: BayesModel {
            class_width: config.class_width,
            classes,
        },
        warnings,
    }
}

/// Log posterior (up to the shared evidence term) for every class.
pub fn bayes_log_posteriors(model: &BayesModel, input: &[f64]) -> Vec<(i64, f64)> {
    model
        .classes
        .iter()
        .map(|class| {
            let mut log_p = class.prior.ln();
            for ((x, mu), sd) in input.iter().zip(&class.mean).zip(&class.sd) {
                let z = (x - mu) / sd;
                log_p += -0.5 * (2.0 * std::f64::consts::PI * sd * sd).ln() - 0.5 * z * z;
            }
            (class.index, log_p)
        })
        .collect()
}

/// Most probable class for the input; the returned estimate is the class
/// midpoint `(c + 0.5) * width`.
pub fn bayes_classify(model: &BayesModel, input: &[f64]) -> f64 {
    let posteriors = bayes_log_posteriors(model, input);
    let best = posteriors
        .iter()
        .fold(None::<&(i64, f64)>, |best, candidate| match best {
            Some(b) if b.1 >= candidate.1 => Some(b),
            _ => Some(candidate),
        })
        .expect("model has at least one class");
    (best.0 as f64 + 0.5) * model.class_width
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_class_always_wins() {
        let pairs: Vec<(Vec<f64>, f64)> = (0..5).map(|i| (vec![i as f64], 3.0)).collect();
        let train = bayes_train(&pairs, &BayesConfig { class_width: 1.0, input_dims: None });
        assert_eq!(train.model.classes.len(), 1);
        assert_eq!(bayes_classify(&train.model, &[100.0]), 3.5);
    }

    #[test]
    fn likelihood_dominates_near_a_class() {
        // Two 1-dim classes around -5 and +5.
        let mut pairs = Vec::new();
        for d in [-0.8, -0.3, 0.0, 0.4, 0.7] {
            pairs.push((vec![-5.0 + d], 0.0));
            pairs.push((vec![5.0 + d], 7.0));
        }
        let train = bayes_train(&pairs, &BayesConfig { class_width: 1.0, input_dims: None });
        let estimate = bayes_classify(&train.model, &[4.8]);
        assert_eq!(estimate, 7.5);
        let estimate = bayes_classify(&train.model, &[-4.0]);
        assert_eq!(estimate, 0.5);
    }

    #[test]
    fn zero_variance_floored_with_warning() {
        let pairs = vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![2.0], 3.0)];
        let train = bayes_train(&pairs, &BayesConfig { class_width: 1.0, input_dims: None });
        assert!(!train.warnings.is_empty());
        assert!(train.model.classes.iter().all(|c| c.sd.iter().all(|s| *s >= SIGMA_FLOOR)));
    }

    #[test]
    fn scaling_likelihoods_keeps_argmax() {
        // Log-domain vs linear-domain with a large multiplicative constant:
        // the argmax class must agree.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pairs: Vec<(Vec<f64>, f64)> = (0..60)
            .map(|i| {
                let class = (i % 3) as f64;
                let input: Vec<f64> =
                    (0..4).map(|d| class * 2.0 + d as f64 * 0.1 + rng.gen_range(-0.5..0.5)).collect();
                (input, class * 1.5)
            })
            .collect();
        let model = bayes_train(&pairs, &BayesConfig { class_width: 1.4, input_dims: None }).model;
        for _ in 0..100 {
            let query: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..6.0)).collect();
            let log_best = bayes_log_posteriors(&model, &query)
                .into_iter()
                .fold((i64::MIN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
                .0;
            let linear_best = model
                .classes
                .iter()
                .map(|class| {
                    let mut p = class.prior * 1e30; // positive rescale
                    for ((x, mu), sd) in query.iter().zip(&class.mean).zip(&class.sd) {
                        let z = (x - mu) / sd;
                        p *= (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sd);
                    }
                    (class.index, p)
                })
                .fold((i64::MIN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
                .0;
            assert_eq!(log_best, linear_best);
        }
    }
}
