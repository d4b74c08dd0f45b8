//! Output-vector approximators: k-NN, feed-forward NN, naive Bayes, the
//! direct PCA calibration, and the random/joint baselines.

pub mod bayes;
pub mod knn;
pub mod nn;

pub use bayes::{bayes_classify, bayes_log_posteriors, bayes_train, BayesConfig, BayesModel};
pub use knn::{knn, strength_weight_scale, KnnConfig};
pub use nn::{batch_error_and_gradient, nn_infer, nn_train, Network, NnConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierError {
    EmptyReferences,
    BadK { k: usize, refs: usize },
    DimensionMismatch { expected: usize, found: usize },
    Format(String),
}

impl fmt::Display for ClassifierError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierError::EmptyReferences => write!(f, "empty reference set"),
            ClassifierError::BadK { k, refs } => write!(f, "k = {} with {} references", k, refs),
            ClassifierError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {}, found {}", expected, found)
            }
            ClassifierError::Format(m) => write!(f, "model format error: {}", m),
        }
    }
}

impl std::error::Error for ClassifierError {}

/// Per-dimension output bounds. Estimates are clamped into the domain and
/// the random baseline draws uniformly from it.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl OutputDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> OutputDomain {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        OutputDomain { lo, hi }
    }

    pub fn uniform(lo: f64, hi: f64, dims: usize) -> OutputDomain {
        OutputDomain::new(vec![lo; dims], vec![hi; dims])
    }

    /// Observed bounds of a reference output set.
    pub fn from_outputs(outputs: &[Vec<f64>]) -> OutputDomain {
        let dims = outputs.first().map_or(0, |o| o.len());
        let mut lo = vec![f64::INFINITY; dims];
        let mut hi = vec![f64::NEG_INFINITY; dims];
        for o in outputs {
            for d in 0..dims {
                lo[d] = lo[d].min(o[d]);
                hi[d] = hi[d].max(o[d]);
            }
        }
        if outputs.is_empty() {
            return OutputDomain { lo: vec![], hi: vec![] };
        }
        OutputDomain { lo, hi }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp(&self, values: &mut [f64]) {
        for (v, (lo, hi)) in values.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Reference pairs of input vectors (pattern vectors or their PCA
/// reductions) and known output vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub subjects: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub domain: OutputDomain,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |i| i.len())
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.first().map_or(0, |o| o.len())
    }

    pub fn subset(&self, indices: &[usize]) -> ReferenceSet {
        ReferenceSet {
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: indices.iter().map(|&i| self.outputs[i].clone()).collect(),
            domain: self.domain.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Knn(KnnConfig),
    Nn(NnConfig),
    Bayes(BayesConfig),
    /// Affine calibration of the first PCA coordinate, least-squares fit on
    /// the references.
    PcaDirect,
    Random,
    /// One constituent method per output dimension.
    Joint(Vec<Method>),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Knn(c) => format!("k-NN (k={})", c.k),
            Method::Nn(_) => "Neural network".to_string(),
            Method::Bayes(_) => "Naive Bayes".to_string(),
            Method::PcaDirect => "PCA".to_string(),
            Method::Random => "Random class.".to_string(),
            Method::Joint(_) => "Joint classifier".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Knn {
        config: KnnConfig,
        refs: ReferenceSet,
    },
    Nn {
        network: Network,
        domain: OutputDomain,
    },
    Bayes {
        per_dim: Vec<BayesModel>,
        domain: OutputDomain,
    },
    PcaDirect {
        slope: Vec<f64>,
        intercept: Vec<f64>,
        domain: OutputDomain,
    },
    Random {
        domain: OutputDomain,
        seed: u64,
        rng: ChaCha8Rng,
    },
    Joint(Vec<TrainedModel>),
}

fn scale_to_unit(value: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return 0.0;
    }
    2.0 * (value - lo) / (hi - lo) - 1.0
}

fn scale_from_unit(value: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return lo;
    }
    (value + 1.0) / 2.0 * (hi - lo) + lo
}

/// Train `method` on the references. `seed` drives weight initialization and
/// the random baseline; deterministic for a fixed seed.
pub fn train(method: &Method, refs: &ReferenceSet, seed: u64) -> Result<TrainedModel, ClassifierError> {
    if refs.is_empty() {
        return Err(ClassifierError::EmptyReferences);
    }
    match method {
        Method::Knn(config) => {
            if config.k == 0 || config.k > refs.len() {
                return Err(ClassifierError::BadK {
                    k: config.k,
                    refs: refs.len(),
                });
            }
            Ok(TrainedModel::Knn {
                config: *config,
                refs: refs.clone(),
            })
        }
        Method::Nn(config) => {
            let mut config = config.clone();
            if config.layers.len() < 2 {
                return Err(ClassifierError::Format("network needs two layers".to_string()));
            }
            config.layers[0] = refs.input_dim();
            *config.layers.last_mut().unwrap() = refs.output_dim();
            let domain = refs.domain.clone();
            let train_set: Vec<(Vec<f64>, Vec<f64>)> = refs
                .inputs
                .iter()
                .zip(&refs.outputs)
                .map(|(input, output)| {
                    let scaled = output
                        .iter()
                        .zip(domain.lo.iter().zip(&domain.hi))
                        .map(|(v, (lo, hi))| scale_to_unit(*v, *lo, *hi))
                        .collect();
                    (input.clone(), scaled)
                })
                .collect();
            let network = nn_train(&train_set, &config, seed);
            Ok(TrainedModel::Nn { network, domain })
        }
        Method::Bayes(config) => {
            let dims = config.input_dims.unwrap_or(refs.input_dim()).min(refs.input_dim());
            if dims == 0 {
                return Err(ClassifierError::DimensionMismatch { expected: 1, found: 0 });
            }
            let per_dim = (0..refs.output_dim())
                .map(|d| {
                    let pairs: Vec<(Vec<f64>, f64)> = refs
                        .inputs
                        .iter()
                        .zip(&refs.outputs)
                        .map(|(i, o)| (i[..dims].to_vec(), o[d]))
                        .collect();
                    bayes_train(&pairs, config).model
                })
                .collect();
            Ok(TrainedModel::Bayes {
                per_dim,
                domain: refs.domain.clone(),
            })
        }
        Method::PcaDirect => {
            let x: Vec<f64> = refs.inputs.iter().map(|i| i[0]).collect();
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let var: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
            let dims = refs.output_dim();
            let mut slope = vec![0.0; dims];
            let mut intercept = vec![0.0; dims];
            for d in 0..dims {
                let my = refs.outputs.iter().map(|o| o[d]).sum::<f64>() / n;
                if var > 0.0 {
                    let cov: f64 = refs
                        .inputs
                        .iter()
                        .zip(&refs.outputs)
                        .map(|(i, o)| (i[0] - mx) * (o[d] - my))
                        .sum::<f64>()
                        / n;
                    slope[d] = cov / var;
                }
                intercept[d] = my - slope[d] * mx;
            }
            Ok(TrainedModel::PcaDirect {
                slope,
                intercept,
                domain: refs.domain.clone(),
            })
        }
        Method::Random => Ok(TrainedModel::Random {
            domain: refs.domain.clone(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }),
        Method::Joint(per_dim) => {
            if per_dim.len() != refs.output_dim() {
                return Err(ClassifierError::DimensionMismatch {
                    expected: refs.output_dim(),
                    found: per_dim.len(),
                });
            }
            let models = per_dim
                .iter()
                .map(|m| train(m, refs, seed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(TrainedModel::Joint(models))
        }
    }
}

impl TrainedModel {
    /// Approximate the output vector for one input. Mutable because the
    /// random baseline consumes RNG state.
    pub fn predict(&mut self, input: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        match self {
            TrainedModel::Knn { config, refs } => knn(input, refs, config),
            TrainedModel::Nn { network, domain } => {
                if input.len() != network.layers[0] {
                    return Err(ClassifierError::DimensionMismatch {
                        expected: network.layers[0],
                        found: input.len(),
                    });
                }
                let mut out: Vec<f64> = network
                    .infer(input)
                    .iter()
                    .zip(domain.lo.iter().zip(&domain.hi))
                    .map(|(y, (lo, hi))| scale_from_unit(*y, *lo, *hi))
                    .collect();
                domain.clamp(&mut out);
                Ok(out)
            }
            TrainedModel::Bayes { per_dim, domain } => {
                // Models may have been trained on a prefix of the input (the
                // most significant PCA dimensions).
                let dims = per_dim
                    .first()
                    .and_then(|m| m.classes.first())
                    .map(|c| c.mean.len())
                    .unwrap_or(input.len());
                if input.len() < dims {
                    return Err(ClassifierError::DimensionMismatch {
                        expected: dims,
                        found: input.len(),
                    });
                }
                let mut out: Vec<f64> = per_dim
                    .iter()
                    .map(|model| bayes_classify(model, &input[..dims]))
                    .collect();
                domain.clamp(&mut out);
                Ok(out)
            }
            TrainedModel::PcaDirect {
                slope,
                intercept,
                domain,
            } => {
                if input.is_empty() {
                    return Err(ClassifierError::DimensionMismatch { expected: 1, found: 0 });
                }
                let mut out: Vec<f64> = slope
                    .iter()
                    .zip(intercept.iter())
                    .map(|(a, b)| a * input[0] + b)
                    .collect();
                domain.clamp(&mut out);
                Ok(out)
            }
            TrainedModel::Random { domain, rng, .. } => Ok(domain
                .lo
                .iter()
                .zip(&domain.hi)
                .map(|(lo, hi)| if lo == hi { *lo } else { rng.gen_range(*lo..*hi) })
                .collect()),
            TrainedModel::Joint(models) => {
                let mut out = Vec::with_capacity(models.len());
                for (d, model) in models.iter_mut().enumerate() {
                    out.push(model.predict(input)?[d]);
                }
                Ok(out)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Model file serialization (text, bit-exact floats)
// ---------------------------------------------------------------------------

fn floats_field(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(field: &str) -> Result<Vec<f64>, ClassifierError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(' ')
        .map(|s| s.parse::<f64>().map_err(|_| ClassifierError::Format(format!("bad float '{}'", s))))
        .collect()
}

fn write_domain(out: &mut String, domain: &OutputDomain) {
    out.push_str(&format!(
        "domain\t{}\t{}\n",
        floats_field(&domain.lo),
        floats_field(&domain.hi)
    ));
}

impl TrainedModel {
    pub fn write_text(&self, out: &mut String) {
        match self {
            TrainedModel::Knn { config, refs } => {
                out.push_str(&format!(
                    "knn\t{}\t{}\t{}\n",
                    config.k, config.weight_base, config.weight_scale
                ));
                write_domain(out, &refs.domain);
                for ((subject, input), output) in
                    refs.subjects.iter().zip(&refs.inputs).zip(&refs.outputs)
                {
                    out.push_str(&format!(
                        "ref\t{}\t{}\t{}\n",
                        subject,
                        floats_field(input),
                        floats_field(output)
                    ));
                }
            }
            TrainedModel::Nn { network, domain } => {
                let layers: Vec<String> = network.layers.iter().map(|l| l.to_string()).collect();
                out.push_str(&format!("nn\t{}\n", layers.join(" ")));
                write_domain(out, domain);
                out.push_str(&format!(
                    "trained\t{}\t{}\t{}\n",
                    network.converged, network.iterations, network.final_mse
                ));
                for layer in &network.weights {
                    for row in layer {
                        out.push_str(&format!("w\t{}\n", floats_field(row)));
                    }
                }
            }
            TrainedModel::Bayes { per_dim, domain } => {
                out.push_str(&format!("bayes\t{}\n", per_dim.len()));
                write_domain(out, domain);
                for (d, model) in per_dim.iter().enumerate() {
                    out.push_str(&format!("bdim\t{}\t{}\n", d, model.class_width));
                    for class in &model.classes {
                        out.push_str(&format!(
                            "class\t{}\t{}\t{}\t{}\n",
                            class.index,
                            class.prior,
                            floats_field(&class.mean),
                            floats_field(&class.sd)
                        ));
                    }
                }
            }
            TrainedModel::PcaDirect {
                slope,
                intercept,
                domain,
            } => {
                out.push_str("pcadirect\n");
                write_domain(out, domain);
                out.push_str(&format!("slope\t{}\n", floats_field(slope)));
                out.push_str(&format!("intercept\t{}\n", floats_field(intercept)));
            }
            TrainedModel::Random { domain, seed, .. } => {
                out.push_str(&format!("random\t{}\n", seed));
                write_domain(out, domain);
            }
            TrainedModel::Joint(models) => {
                out.push_str(&format!("joint\t{}\n", models.len()));
                for model in models {
                    out.push_str("begin\n");
                    model.write_text(out);
                    out.push_str("end\n");
                }
            }
        }
    }

    pub fn read_text(lines: &mut std::iter::Peekable<std::str::Lines<'_>>) -> Result<TrainedModel, ClassifierError> {
        let fail = |m: &str| ClassifierError::Format(m.to_string());
        let header = lines.next().ok_or_else(|| fail("missing model header"))?;
        let head: Vec<&str> = header.split('\t').collect();
        let read_domain = |lines: &mut std::iter::Peekable<std::str::Lines<'_>>| {
            let line = lines.next().ok_or_else(|| fail("missing domain"))?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[0] != "domain" {
                return Err(fail("bad domain line"));
            }
            Ok(OutputDomain::new(parse_floats(fields[1])?, parse_floats(fields[2])?))
        };
        match head[0] {
            "knn" => {
                if head.len() != 4 {
                    return Err(fail("bad knn header"));
                }
                let config = KnnConfig {
                    k: head[1].parse().map_err(|_| fail("bad k"))?,
                    weight_base: head[2].parse().map_err(|_| fail("bad base"))?,
                    weight_scale: head[3].parse().map_err(|_| fail("bad scale"))?,
                };
                let domain = read_domain(lines)?;
                let mut refs = ReferenceSet {
                    subjects: vec![],
                    inputs: vec![],
                    outputs: vec![],
                    domain,
                };
                while matches!(lines.peek(), Some(l) if l.starts_with("ref\t")) {
                    let fields: Vec<&str> = lines.next().unwrap().split('\t').collect();
                    if fields.len() != 4 {
                        return Err(fail("bad ref line"));
                    }
                    refs.subjects.push(fields[1].to_string());
                    refs.inputs.push(parse_floats(fields[2])?);
                    refs.outputs.push(parse_floats(fields[3])?);
                }
                Ok(TrainedModel::Knn { config, refs })
            }
            "nn" => {
                let layers: Vec<usize> = head
                    .get(1)
                    .ok_or_else(|| fail("bad nn header"))?
                    .split(' ')
                    .map(|s| s.parse().map_err(|_| fail("bad layer size")))
                    .collect::<Result<_, _>>()?;
                let domain = read_domain(lines)?;
                let trained = lines.next().ok_or_else(|| fail("missing trained line"))?;
                let tf: Vec<&str> = trained.split('\t').collect();
                if tf.len() != 4 || tf[0] != "trained" {
                    return Err(fail("bad trained line"));
                }
                let mut weights = Vec::new();
                for pair in layers.windows(2) {
                    let mut layer = Vec::new();
                    for _ in 0..pair[1] {
                        let line = lines.next().ok_or_else(|| fail("missing weight row"))?;
                        let row = line.strip_prefix("w\t").ok_or_else(|| fail("bad weight row"))?;
                        let row = parse_floats(row)?;
                        if row.len() != pair[0] + 1 {
                            return Err(fail("weight row width mismatch"));
                        }
                        layer.push(row);
                    }
                    weights.push(layer);
                }
                Ok(TrainedModel::Nn {
                    network: Network {
                        layers,
                        weights,
                        converged: tf[1] == "true",
                        iterations: tf[2].parse().map_err(|_| fail("bad iterations"))?,
                        final_mse: tf[3].parse().map_err(|_| fail("bad mse"))?,
                    },
                    domain,
                })
            }
            "bayes" => {
                let dims: usize = head
                    .get(1)
                    .ok_or_else(|| fail("bad bayes header"))?
                    .parse()
                    .map_err(|_| fail("bad bayes dims"))?;
                let domain = read_domain(lines)?;
                let mut per_dim = Vec::with_capacity(dims);
                for _ in 0..dims {
                    let line = lines.next().ok_or_else(|| fail("missing bdim"))?;
                    let fields: Vec<&str> = line.split('\t').collect();
                    if fields.len() != 3 || fields[0] != "bdim" {
                        return Err(fail("bad bdim line"));
                    }
                    let class_width: f64 = fields[2].parse().map_err(|_| fail("bad width"))?;
                    let mut classes = Vec::new();
                    while matches!(lines.peek(), Some(l) if l.starts_with("class\t")) {
                        let fields: Vec<&str> = lines.next().unwrap().split('\t').collect();
                        if fields.len() != 5 {
                            return Err(fail("bad class line"));
                        }
                        classes.push(bayes::BayesClass {
                            index: fields[1].parse().map_err(|_| fail("bad class index"))?,
                            prior: fields[2].parse().map_err(|_| fail("bad prior"))?,
                            mean: parse_floats(fields[3])?,
                            sd: parse_floats(fields[4])?,
                        });
                    }
                    per_dim.push(BayesModel { class_width, classes });
                }
                Ok(TrainedModel::Bayes { per_dim, domain })
            }
            "pcadirect" => {
                let domain = read_domain(lines)?;
                let slope = lines
                    .next()
                    .and_then(|l| l.strip_prefix("slope\t"))
                    .ok_or_else(|| fail("missing slope"))?;
                let slope = parse_floats(slope)?;
                let intercept = lines
                    .next()
                    .and_then(|l| l.strip_prefix("intercept\t"))
                    .ok_or_else(|| fail("missing intercept"))?;
                let intercept = parse_floats(intercept)?;
                Ok(TrainedModel::PcaDirect {
                    slope,
                    intercept,
                    domain,
                })
            }
            "random" => {
                let seed: u64 = head
                    .get(1)
                    .ok_or_else(|| fail("bad random header"))?
                    .parse()
                    .map_err(|_| fail("bad seed"))?;
                let domain = read_domain(lines)?;
                Ok(TrainedModel::Random {
                    domain,
                    seed,
                    rng: ChaCha8Rng::seed_from_u64(seed),
                })
            }
            "joint" => {
                let count: usize = head
                    .get(1)
                    .ok_or_else(|| fail("bad joint header"))?
                    .parse()
                    .map_err(|_| fail("bad joint count"))?;
                let mut models = Vec::with_capacity(count);
                for _ in 0..count {
                    if lines.next() != Some("begin") {
                        return Err(fail("missing begin"));
                    }
                    models.push(TrainedModel::read_text(lines)?);
                    if lines.next() != Some("end") {
                        return Err(fail("missing end"));
                    }
                }
                Ok(TrainedModel::Joint(models))
            }
            other => Err(fail(&format!("unknown model kind '{}'", other))),
        }
    }
}
