//! Feed-forward network trained with full-batch RPROP.
//!
//! Activation is the symmetric logistic `f(x) = 2/(1+e^-x) - 1` with range
//! (-1,1); targets must be pre-scaled into that range. The step-size update
//! uses the classic constants (eta+ 1.2, eta- 0.5, delta0 0.1, delta in
//! [1e-6, 50]) with the sign-change variant that zeroes the stored gradient
//! instead of backtracking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct NnConfig {
    /// Neurons per layer, input first. At least two layers.
    pub layers: Vec<usize>,
    /// Stop when batch MSE (per pattern and output) drops below this.
    pub target_error: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<usize>,
    /// `weights[l][to][from]`; index `layers[l]` is the bias unit.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub converged: bool,
    pub iterations: usize,
    pub final_mse: f64,
}

fn activation(x: f64) -> f64 {
    2.0 / (1.0 + (-x).exp()) - 1.0
}

/// Derivative in terms of the activation value: f'(x) = (1 - y^2) / 2.
fn activation_prime(y: f64) -> f64 {
    (1.0 - y * y) / 2.0
}

impl Network {
    pub fn new_random(layers: &[usize], seed: u64) -> Network {
        assert!(layers.len() >= 2, "need at least input and output layers");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = layers
            .windows(2)
            .map(|pair| {
                (0..pair[1])
                    .map(|_| (0..pair[0] + 1).map(|_| rng.gen_range(-0.3..0.3)).collect())
                    .collect()
            })
            .collect();
        Network {
            layers: layers.to_vec(),
            weights,
            converged: false,
            iterations: 0,
            final_mse: f64::INFINITY,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.weights.iter().map(|l| l.iter().map(|r| r.len()).sum::<usize>()).sum()
    }

    fn forward_all(&self, input: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(input.len(), self.layers[0]);
        let mut activations = vec![input.to_vec()];
        for layer in &self.weights {
            let prev = activations.last().unwrap();
            let next: Vec<f64> = layer
                .iter()
                .map(|row| {
                    let sum: f64 = row[..prev.len()].iter().zip(prev).map(|(w, y)| w * y).sum();
                    activation(sum + row[prev.len()])
                })
                .collect();
            activations.push(next);
        }
        activations
    }

    pub fn infer(&self, input: &[f64]) -> Vec<f64> {
        self.forward_all(input).pop().unwrap()
    }
}

/// Total squared error over the batch and its gradient with respect to every
/// weight, flattened in (layer, to, from) order.
pub fn batch_error_and_gradient(net: &Network, batch: &[(Vec<f64>, Vec<f64>)]) -> (f64, Vec<f64>) {
    let mut gradient: Vec<Vec<Vec<f64>>> = net
        .weights
        .iter()
        .map(|l| l.iter().map(|r| vec![0.0; r.len()]).collect())
        .collect();
    let mut error = 0.0;

    for (input, target) in batch {
        let activations = net.forward_all(input);
        let output = activations.last().unwrap();
        assert_eq!(target.len(), output.len());

        // dE/dnet for the output layer, E = sum (y - t)^2.
        let mut delta: Vec<f64> = output
            .iter()
            .zip(target)
            .map(|(y, t)| {
                error += (y - t) * (y - t);
                2.0 * (y - t) * activation_prime(*y)
            })
            .collect();

        for l in (0..net.weights.len()).rev() {
            let prev = &activations[l];
            for (to, d) in delta.iter().enumerate() {
                let row = &mut gradient[l][to];
                for (from, y) in prev.iter().enumerate() {
                    row[from] += d * y;
                }
                let bias = row.len() - 1;
                row[bias] += d;
            }
            if l > 0 {
                delta = (0..net.layers[l])
                    .map(|j| {
                        let upstream: f64 =
                            delta.iter().enumerate().map(|(to, d)| d * net.weights[l][to][j]).sum();
                        upstream * activation_prime(activations[l][j])
                    })
                    .collect();
            }
        }
    }

    let flat = gradient.into_iter().flatten().flatten().collect();
    (error, flat)
}

const ETA_PLUS: f64 = 1.2;
const ETA_MINUS: f64 = 0.5;
const DELTA_ZERO: f64 = 0.1;
const DELTA_MIN: f64 = 1e-6;
const DELTA_MAX: f64 = 50.0;

/// Train until the batch MSE drops below the target or the iteration budget
/// runs out. Outputs must already be scaled into (-1,1). Non-convergence is
/// reported through the `converged` flag, not an error.
pub fn nn_train(train: &[(Vec<f64>, Vec<f64>)], config: &NnConfig, seed: u64) -> Network {
    assert!(!train.is_empty(), "empty training set");
    assert_eq!(train[0].0.len(), config.layers[0], "input width mismatch");
    assert_eq!(
        train[0].1.len(),
        *config.layers.last().unwrap(),
        "output width mismatch"
    );

    let mut net = Network::new_random(&config.layers, seed);
    let weight_count = net.weight_count();
    let mut deltas = vec![DELTA_ZERO; weight_count];
    let mut prev_gradient = vec![0.0; weight_count];
    let denom = (train.len() * train[0].1.len()) as f64;

    for iteration in 1..=config.max_iters {
        let (error, gradient) = batch_error_and_gradient(&net, train);
        net.final_mse = error / denom;
        net.iterations = iteration - 1;
        if net.final_mse < config.target_error {
            net.converged = true;
            return net;
        }

        let mut index = 0;
        for layer in net.weights.iter_mut() {
            for row in layer.iter_mut() {
                for w in row.iter_mut() {
                    let g = gradient[index];
                    let sign_product = g * prev_gradient[index];
                    if sign_product > 0.0 {
                        deltas[index] = (deltas[index] * ETA_PLUS).min(DELTA_MAX);
                        *w -= g.signum() * deltas[index];
                        prev_gradient[index] = g;
                    } else if sign_product < 0.0 {
                        deltas[index] = (deltas[index] * ETA_MINUS).max(DELTA_MIN);
                        prev_gradient[index] = 0.0;
                    } else {
                        if g != 0.0 {
                            *w -= g.signum() * deltas[index];
                        }
                        prev_gradient[index] = g;
                    }
                    index += 1;
                }
            }
        }
    }

    let (error, _) = batch_error_and_gradient(&net, train);
    net.final_mse = error / denom;
    net.iterations = config.max_iters;
    net.converged = net.final_mse < config.target_error;
    net
}

pub fn nn_infer(net: &Network, input: &[f64]) -> Vec<f64> {
    net.infer(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_network_outputs_zero() {
        let mut net = Network::new_random(&[3, 2, 2], 1);
        for layer in net.weights.iter_mut() {
            for row in layer.iter_mut() {
                for w in row.iter_mut() {
                    *w = 0.0;
                }
            }
        }
        let out = net.infer(&[0.4, -0.2, 0.9]);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn single_neuron_hand_computed() {
        // One input, one output neuron: y = f(w x + b).
        let mut net = Network::new_random(&[1, 1], 1);
        net.weights[0][0][0] = 0.5;
        net.weights[0][0][1] = -0.25;
        let x = 0.8f64;
        let expected = 2.0 / (1.0 + (-(0.5 * x - 0.25)).exp()) - 1.0;
        let got = net.infer(&[x])[0];
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn inference_deterministic() {
        let net = Network::new_random(&[4, 3, 2], 9);
        let input = vec![0.1, -0.4, 0.9, 0.0];
        assert_eq!(net.infer(&input), net.infer(&input));
        let again = Network::new_random(&[4, 3, 2], 9);
        assert_eq!(net.weights, again.weights);
    }

    #[test]
    fn constant_target_fits_quickly() {
        let train: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
            .map(|i| (vec![i as f64 / 6.0, -(i as f64) / 6.0], vec![0.37]))
            .collect();
        let config = NnConfig {
            layers: vec![2, 3, 1],
            target_error: 1e-4,
            max_iters: 100,
        };
        let net = nn_train(&train, &config, 5);
        assert!(net.converged, "constant fit should converge, mse {}", net.final_mse);
        assert!(net.final_mse < 1e-4);
    }

    #[test]
    fn xor_trains_below_target() {
        let train: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![0.0, 0.0], vec![-1.0]),
            (vec![0.0, 1.0], vec![1.0]),
            (vec![1.0, 0.0], vec![1.0]),
            (vec![1.0, 1.0], vec![-1.0]),
        ];
        let config = NnConfig {
            layers: vec![2, 2, 1],
            target_error: 0.0005,
            max_iters: 1000,
        };
        let net = nn_train(&train, &config, 3);
        assert!(net.converged, "xor mse {} after {} iters", net.final_mse, net.iterations);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut net = Network::new_random(&[3, 4, 2], 17);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![0.2, -0.5, 0.8], vec![0.3, -0.6]),
            (vec![-0.9, 0.1, 0.4], vec![-0.2, 0.7]),
        ];
        let (_, analytic) = batch_error_and_gradient(&net, &batch);
        let eps = 1e-4;
        let mut index = 0;
        for l in 0..net.weights.len() {
            for to in 0..net.weights[l].len() {
                for from in 0..net.weights[l][to].len() {
                    let original = net.weights[l][to][from];
                    net.weights[l][to][from] = original + eps;
                    let (e_plus, _) = batch_error_and_gradient(&net, &batch);
                    net.weights[l][to][from] = original - eps;
                    let (e_minus, _) = batch_error_and_gradient(&net, &batch);
                    net.weights[l][to][from] = original;
                    let numeric = (e_plus - e_minus) / (2.0 * eps);
                    let denom = analytic[index].abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        ((analytic[index] - numeric) / denom).abs() <= 1e-4,
                        "gradient {} analytic {} numeric {}",
                        index,
                        analytic[index],
                        numeric
                    );
                    index += 1;
                }
            }
        }
    }
}
