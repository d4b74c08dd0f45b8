//! End-to-end studies: per-rank strength estimation (game-sample protocol)
//! and per-player style inference (k-fold cross-validation), taking SGF
//! collections all the way to report tables.

use crate::board::replay;
use crate::classifiers::{
    self, BayesConfig, ClassifierError, KnnConfig, Method, NnConfig, OutputDomain, ReferenceSet,
    TrainedModel,
};
use crate::config::{Study, StudyConfig};
use crate::pattern::dict::DictError;
use crate::pattern::{build_dictionary, extract_move_pattern, ExtractOptions, PatternDictionary};
use crate::sgf::{
    scan_collection, CollectionFilter, Color, Game, GroupKey, ScanResult, SgfError, SubjectGame,
};
use crate::stats::{crossval, pca_fit_auto, pearson, PcaModel, StatsError};
use crate::vectors::{build_index, normalize, Normalization, PatternIndex, PatternVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum PipelineError {
    Sgf(SgfError),
    Dict(DictError),
    Stats(StatsError),
    Classifier(ClassifierError),
    Io(std::io::Error),
    Data(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Sgf(e) => write!(f, "{}", e),
            PipelineError::Dict(e) => write!(f, "{}", e),
            PipelineError::Stats(e) => write!(f, "{}", e),
            PipelineError::Classifier(e) => write!(f, "{}", e),
            PipelineError::Io(e) => write!(f, "io error: {}", e),
            PipelineError::Data(m) => write!(f, "data error: {}", m),
        }
    }
}

impl std::error::Error for PipelineError {}

impl From<SgfError> for PipelineError {
    fn from(e: SgfError) -> Self {
        PipelineError::Sgf(e)
    }
}
impl From<DictError> for PipelineError {
    fn from(e: DictError) -> Self {
        PipelineError::Dict(e)
    }
}
impl From<StatsError> for PipelineError {
    fn from(e: StatsError) -> Self {
        PipelineError::Stats(e)
    }
}
impl From<ClassifierError> for PipelineError {
    fn from(e: ClassifierError) -> Self {
        PipelineError::Classifier(e)
    }
}
impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e)
    }
}

fn data_error<T>(message: impl Into<String>) -> Result<T, PipelineError> {
    Err(PipelineError::Data(message.into()))
}

/// Deterministic sub-seed derivation for independent pipeline stages.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    seed.wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

// ---------------------------------------------------------------------------
// Corpus extraction
// ---------------------------------------------------------------------------

/// Patternspec streams for a whole corpus, interned for cheap resampling.
pub struct ExtractedCorpus {
    /// Intern id to patternspec text.
    pub spec_table: Vec<String>,
    /// One entry per stone move of each game, in replay order.
    pub per_game: BTreeMap<String, Vec<(Color, u32)>>,
    /// Occurrence counts over all moves of all games, by intern id.
    pub global_counts: Vec<u64>,
    pub warnings: Vec<String>,
}

pub fn extract_corpus<'a>(
    games: impl IntoIterator<Item = &'a Game>,
    dictionary: &PatternDictionary,
    options: &ExtractOptions,
) -> ExtractedCorpus {
    let mut spec_ids: HashMap<String, u32> = HashMap::new();
    let mut spec_table = Vec::new();
    let mut per_game = BTreeMap::new();
    let mut global_counts: Vec<u64> = Vec::new();
    let mut warnings = Vec::new();

    for game in games {
        let mut stream = Vec::new();
        let result = replay(&game.record, |before, mv, effect| {
            let pattern = extract_move_pattern(before, mv, effect, dictionary, options);
            let spec = pattern.to_string();
            let id = *spec_ids.entry(spec.clone()).or_insert_with(|| {
                spec_table.push(spec);
                global_counts.push(0);
                (spec_table.len() - 1) as u32
            });
            global_counts[id as usize] += 1;
            stream.push((mv.color, id));
        });
        match result {
            Ok(_) => {
                per_game.insert(game.source.clone(), stream);
            }
            Err(e) => {
                // Undo this game's contribution; features must never come
                // from an inconsistent board.
                for (_, id) in stream {
                    global_counts[id as usize] -= 1;
                }
                warnings.push(format!("skipping {}: {}", game.source, e));
            }
        }
    }

    ExtractedCorpus {
        spec_table,
        per_game,
        global_counts,
        warnings,
    }
}

impl ExtractedCorpus {
    pub fn global_count_map(&self) -> HashMap<String, u64> {
        self.spec_table
            .iter()
            .cloned()
            .zip(self.global_counts.iter().copied())
            .filter(|(_, c)| *c > 0)
            .collect()
    }

    /// Map index slots to intern ids; `None` for patterns absent here.
    pub fn index_slots(&self, index: &PatternIndex) -> Vec<Option<u32>> {
        let ids: HashMap<&str, u32> = self
            .spec_table
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        index.specs.iter().map(|s| ids.get(s.as_str()).copied()).collect()
    }

    /// Counts of collected moves only: each (game, color) membership
    /// contributes that color's patterns.
    pub fn count_map_over(&self, memberships: &[(&str, Color)]) -> HashMap<String, u64> {
        let mut by_id: HashMap<u32, u64> = HashMap::new();
        for (source, color) in memberships {
            let Some(stream) = self.per_game.get(*source) else {
                continue;
            };
            for (c, id) in stream {
                if c == color {
                    *by_id.entry(*id).or_insert(0) += 1;
                }
            }
        }
        by_id
            .into_iter()
            .map(|(id, count)| (self.spec_table[id as usize].clone(), count))
            .collect()
    }

    /// Raw counts over the index for a set of (game source, subject color)
    /// memberships. Returns the counts and the number of games found.
    pub fn sample_raw(&self, memberships: &[(&str, Color)], slots: &[Option<u32>]) -> (Vec<u64>, u32) {
        let mut by_id: HashMap<u32, u64> = HashMap::new();
        let mut games_used = 0;
        for (source, color) in memberships {
            let Some(stream) = self.per_game.get(*source) else {
                continue;
            };
            games_used += 1;
            for (c, id) in stream {
                if c == color {
                    *by_id.entry(*id).or_insert(0) += 1;
                }
            }
        }
        let raw = slots
            .iter()
            .map(|slot| slot.and_then(|id| by_id.get(&id).copied()).unwrap_or(0))
            .collect();
        (raw, games_used)
    }
}

pub fn dedupe_games(scan: &ScanResult) -> Vec<Game> {
    let mut by_source: BTreeMap<&str, &Game> = BTreeMap::new();
    for members in scan.groups.values() {
        for member in members {
            by_source.entry(member.game.source.as_str()).or_insert(&member.game);
        }
    }
    by_source.into_values().cloned().collect()
}

// ---------------------------------------------------------------------------
// Style reference data
// ---------------------------------------------------------------------------

pub const STYLE_DIMS: [&str; 4] = ["tau", "omega", "alpha", "theta"];

/// The paper's expected tau-theta correlation; the shipped means reproduce
/// it within the logged tolerance.
pub const TAU_THETA_REFERENCE: f64 = 0.721;

#[derive(Debug, Clone, PartialEq)]
pub struct StyleReference {
    pub player: String,
    pub means: [f64; 4],
    pub sds: [f64; 4],
    /// Not used at all (Go Seigen).
    pub excluded: bool,
    /// Kept for classification but left out of the PCA fit.
    pub exclude_pca: bool,
    /// Only games up to this year count, when games are supplied.
    pub games_until: Option<i32>,
    pub year: Option<f64>,
}

pub fn load_style_references(path: &Path) -> Result<Vec<StyleReference>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return data_error("empty style reference file");
    };
    let expected = "player\ttau\ttau_sd\tomega\tomega_sd\talpha\talpha_sd\ttheta\ttheta_sd\tflags\tyear";
    if header != expected {
        return data_error(format!("bad style reference header, expected '{}'", expected));
    }
    let mut refs = Vec::new();
    for (i, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 11 {
            return data_error(format!("line {}: expected 11 fields", i + 1));
        }
        let num = |s: &str| -> Result<f64, PipelineError> {
            s.parse().map_err(|_| PipelineError::Data(format!("line {}: bad number '{}'", i + 1, s)))
        };
        let mut reference = StyleReference {
            player: fields[0].to_string(),
            means: [num(fields[1])?, num(fields[3])?, num(fields[5])?, num(fields[7])?],
            sds: [num(fields[2])?, num(fields[4])?, num(fields[6])?, num(fields[8])?],
            excluded: false,
            exclude_pca: false,
            games_until: None,
            year: if fields[10].is_empty() { None } else { Some(num(fields[10])?) },
        };
        for flag in fields[9].split(',').filter(|f| !f.is_empty()) {
            if flag == "exclude" {
                reference.excluded = true;
            } else if flag == "exclude_pca" {
                reference.exclude_pca = true;
            } else if let Some(year) = flag.strip_prefix("games_until:") {
                reference.games_until = Some(year.parse().map_err(|_| {
                    PipelineError::Data(format!("line {}: bad games_until '{}'", i + 1, year))
                })?);
            } else {
                return data_error(format!("line {}: unknown flag '{}'", i + 1, flag));
            }
        }
        refs.push(reference);
    }
    if refs.is_empty() {
        return data_error("style reference file has no players");
    }
    Ok(refs)
}

fn game_year(game: &Game) -> Option<i32> {
    game.meta.date.as_ref().and_then(|d| d.get(..4)).and_then(|y| y.parse().ok())
}

// ---------------------------------------------------------------------------
// Strength study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct StrengthRow {
    pub method: String,
    pub g: Option<usize>,
    pub mse: f64,
    pub sigma: f64,
    pub cmp: f64,
}

#[derive(Debug)]
pub struct StrengthReport {
    pub rows: Vec<StrengthRow>,
    /// Pearson r between the first PCA coordinate of the per-rank reference
    /// vectors and the rank value.
    pub first_axis_rank_r: f64,
    pub ranks: Vec<i32>,
    pub pca_components: usize,
    pub index_size: usize,
    pub warnings: Vec<String>,
}

impl StrengthReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tG\tMSE\tsigma\tCmp\n");
        for row in &self.rows {
            let g = row.g.map(|g| g.to_string()).unwrap_or_else(|| "N/A".to_string());
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", row.method, g, row.mse, row.sigma, row.cmp));
        }
        out.push_str(&format!("# first_axis_rank_r\t{}\n", self.first_axis_rank_r));
        out
    }
}

struct MethodAccumulator {
    sum_sq: f64,
    count: usize,
}

pub fn run_strength_study(
    config: &StudyConfig,
    paths: &[PathBuf],
) -> Result<StrengthReport, PipelineError> {
    let scan = scan_collection(paths, &CollectionFilter::ByRank { even_only: true })?;
    let mut warnings = scan.warnings.clone();
    if scan.groups.len() < 2 {
        return data_error(format!(
            "strength study needs at least 2 rank groups, found {}",
            scan.groups.len()
        ));
    }
    let games = dedupe_games(&scan);
    let options = ExtractOptions {
        no_contiguity: config.contiguity_disabled(),
    };
    let dict_build = build_dictionary(&games, config.radii, config.dict_min_count)?;
    warnings.extend(dict_build.warnings);
    let corpus = extract_corpus(games.iter(), &dict_build.dictionary, &options);
    warnings.extend(corpus.warnings.clone());

    // The index counts only collected (subject) moves.
    let all_memberships: Vec<(&str, Color)> = scan
        .groups
        .values()
        .flatten()
        .map(|m| (m.game.source.as_str(), m.color))
        .collect();
    let index_build = build_index(&corpus.count_map_over(&all_memberships), config.n);
    warnings.extend(index_build.warnings);
    let index = index_build.index;
    let slots = corpus.index_slots(&index);

    // One aggregate reference vector per rank.
    let mut ranks = Vec::new();
    let mut reference_vectors = Vec::new();
    let mut memberships_by_rank: Vec<(i32, Vec<(&str, Color)>)> = Vec::new();
    for (key, members) in &scan.groups {
        let GroupKey::Rank(rank) = key else { continue };
        let memberships: Vec<(&str, Color)> =
            members.iter().map(|m| (m.game.source.as_str(), m.color)).collect();
        let (raw, games_used) = corpus.sample_raw(&memberships, &slots);
        if games_used == 0 {
            warnings.push(format!("rank {}: no usable games, group dropped", rank));
            continue;
        }
        ranks.push(*rank);
        reference_vectors.push(normalize(&raw, config.normalization));
        memberships_by_rank.push((*rank, memberships));
    }
    if ranks.len() < 2 {
        return data_error("fewer than 2 usable rank groups after extraction");
    }

    let requested_m = config.m.unwrap_or(ranks.len());
    let (pca, used_m) = pca_fit_auto(&reference_vectors, requested_m)?;
    if used_m < requested_m {
        warnings.push(format!("PCA components clamped from {} to {}", requested_m, used_m));
    }

    let projected: Vec<Vec<f64>> = reference_vectors
        .iter()
        .map(|v| pca.project(v))
        .collect::<Result<_, _>>()?;
    let rank_values: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    let first_axis: Vec<f64> = projected.iter().map(|p| p[0]).collect();
    let first_axis_rank_r = pearson(&first_axis, &rank_values).unwrap_or(0.0);

    let domain = OutputDomain::new(
        vec![rank_values.iter().cloned().fold(f64::INFINITY, f64::min)],
        vec![rank_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)],
    );
    let refs = ReferenceSet {
        subjects: ranks.iter().map(|r| format!("rank:{}", r)).collect(),
        inputs: projected,
        outputs: rank_values.iter().map(|&r| vec![r]).collect(),
        domain: domain.clone(),
    };

    let mut nn_model = classifiers::train(
        &Method::Nn(NnConfig {
            layers: vec![used_m, config.nn_hidden, 1],
            target_error: config.nn_target_error,
            max_iters: config.nn_max_iters,
        }),
        &refs,
        mix_seed(config.seed, 1, 0),
    )?;
    let mut pca_model = classifiers::train(&Method::PcaDirect, &refs, 0)?;
    let mut random_model = classifiers::train(&Method::Random, &refs, mix_seed(config.seed, 2, 0))?;

    // Evaluation: repeatedly draw disjoint G-game samples per rank (without
    // replacement within a repetition, reshuffled across repetitions).
    let method_names = ["k-NN", "Neural Network", "PCA"];
    let mut accumulators: BTreeMap<(usize, usize), MethodAccumulator> = BTreeMap::new();
    let mut random_acc = MethodAccumulator { sum_sq: 0.0, count: 0 };
    let mut evaluated_gs: Vec<usize> = Vec::new();

    for &g in &config.g_values {
        let knn_config = KnnConfig {
            k: 4.min(refs.len()),
            ..KnnConfig::strength(g)
        };
        let mut any_sample = false;
        for repetition in 0..config.repetitions {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, g as u64, repetition as u64));
            for (rank, memberships) in &memberships_by_rank {
                if memberships.len() < g {
                    continue;
                }
                let mut pool = memberships.clone();
                pool.shuffle(&mut rng);
                for sample in pool.chunks_exact(g) {
                    let (raw, games_used) = corpus.sample_raw(sample, &slots);
                    if (games_used as usize) < g {
                        continue;
                    }
                    any_sample = true;
                    let vector = normalize(&raw, config.normalization);
                    let reduced = pca.project(&vector)?;
                    let truth = *rank as f64;

                    let predictions = [
                        classifiers::knn(&reduced, &refs, &knn_config)?[0],
                        nn_model.predict(&reduced)?[0],
                        pca_model.predict(&reduced)?[0],
                    ];
                    for (mi, prediction) in predictions.iter().enumerate() {
                        let entry = accumulators
                            .entry((mi, g))
                            .or_insert(MethodAccumulator { sum_sq: 0.0, count: 0 });
                        entry.sum_sq += (prediction - truth) * (prediction - truth);
                        entry.count += 1;
                    }
                    let random_prediction = random_model.predict(&reduced)?[0];
                    random_acc.sum_sq += (random_prediction - truth) * (random_prediction - truth);
                    random_acc.count += 1;
                }
            }
        }
        if any_sample {
            evaluated_gs.push(g);
        } else {
            warnings.push(format!("G={}: no rank has enough games, row skipped", g));
        }
    }

    if random_acc.count == 0 {
        return data_error("no evaluable samples for any G");
    }
    let random_mse = random_acc.sum_sq / random_acc.count as f64;
    let random_sigma = random_mse.sqrt();

    let mut rows = Vec::new();
    let mut gs_desc = evaluated_gs.clone();
    gs_desc.sort_unstable_by(|a, b| b.cmp(a));
    for (mi, name) in method_names.iter().enumerate() {
        for &g in &gs_desc {
            let Some(acc) = accumulators.get(&(mi, g)) else { continue };
            let mse = acc.sum_sq / acc.count as f64;
            let sigma = mse.sqrt();
            rows.push(StrengthRow {
                method: name.to_string(),
                g: Some(g),
                mse,
                sigma,
                cmp: random_sigma / sigma,
            });
        }
    }
    rows.push(StrengthRow {
        method: "Rnd".to_string(),
        g: None,
        mse: random_mse,
        sigma: random_sigma,
        cmp: 1.0,
    });

    Ok(StrengthReport {
        rows,
        first_axis_rank_r,
        ranks,
        pca_components: used_m,
        index_size: index.len(),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Style study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct StyleRow {
    pub classifier: String,
    pub mse: [f64; 4],
    pub mean: f64,
    pub cmp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub eigenvalue: f64,
    pub explained: f64,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub normalization: String,
    pub prior_names: Vec<String>,
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("axis\teigenvalue\texplained");
        for name in &self.prior_names {
            out.push_str(&format!("\tr_{}", name));
        }
        out.push('\n');
        for (axis, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}", axis + 1, row.eigenvalue, row.explained));
            for r in &row.r {
                out.push_str(&format!("\t{}", r));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisPattern {
    pub axis: usize,
    pub coefficient: f64,
    pub spec: String,
}

/// The `per_side` strongest positive and negative projection coefficients of
/// the first `axes` PCA axes, named by patternspec.
pub fn top_axis_patterns(
    pca: &PcaModel,
    specs: &[String],
    axes: usize,
    per_side: usize,
) -> Vec<AxisPattern> {
    let mut out = Vec::new();
    for axis in 0..axes.min(pca.projection.len()) {
        let mut coefficients: Vec<(f64, usize)> = pca.projection[axis]
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        coefficients.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(c, i) in coefficients.iter().take(per_side) {
            out.push(AxisPattern {
                axis: axis + 1,
                coefficient: c,
                spec: specs[i].clone(),
            });
        }
        for &(c, i) in coefficients.iter().rev().take(per_side) {
            out.push(AxisPattern {
                axis: axis + 1,
                coefficient: c,
                spec: specs[i].clone(),
            });
        }
    }
    out
}

pub fn axis_patterns_tsv(patterns: &[AxisPattern]) -> String {
    let mut out = String::from("axis\tcoefficient\tpatternspec\n");
    for p in patterns {
        out.push_str(&format!("{}\t{}\t{}\n", p.axis, p.coefficient, p.spec));
    }
    out
}

#[derive(Debug)]
pub struct StyleReport {
    /// Classifier comparison rows, best mean MSE first.
    pub rows: Vec<StyleRow>,
    /// Which constituent won each style dimension in the joint classifier.
    pub joint_assignment: [String; 4],
    pub pca_linear: CorrelationTable,
    pub pca_extended: CorrelationTable,
    /// Strongest positive and negative projection coefficients per axis.
    pub top_patterns: Vec<AxisPattern>,
    pub tau_theta_r: f64,
    pub pca_components: usize,
    pub index_size: usize,
    pub warnings: Vec<String>,
}

pub fn style_rows_tsv(rows: &[StyleRow], joint_assignment: &[String; 4]) -> String {
    let mut out = String::from("classifier\ttau\tomega\talpha\ttheta\tmean\tCmp\n");
    for row in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            row.classifier, row.mse[0], row.mse[1], row.mse[2], row.mse[3], row.mean, row.cmp
        ));
    }
    out.push_str(&format!(
        "# joint\t{}\t{}\t{}\t{}\n",
        joint_assignment[0], joint_assignment[1], joint_assignment[2], joint_assignment[3]
    ));
    out
}

impl StyleReport {
    pub fn classifier_tsv(&self) -> String {
        let mut out = style_rows_tsv(&self.rows, &self.joint_assignment);
        out.push_str(&format!("# tau_theta_r\t{}\n", self.tau_theta_r));
        out
    }

    pub fn top_patterns_tsv(&self) -> String {
        axis_patterns_tsv(&self.top_patterns)
    }
}

pub fn correlation_table(
    label: &str,
    vectors: &[Vec<f64>],
    priors: &[Vec<f64>],
    prior_names: &[String],
    m: usize,
    max_axes: usize,
) -> Result<CorrelationTable, PipelineError> {
    let (model, used) = pca_fit_auto(vectors, m)?;
    let projected: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| model.project(v))
        .collect::<Result<_, _>>()?;
    let fractions = model.explained_fractions();
    let mut rows = Vec::new();
    for axis in 0..used.min(max_axes) {
        let coords: Vec<f64> = projected.iter().map(|p| p[axis]).collect();
        let r = priors
            .iter()
            .map(|prior| pearson(&coords, prior).unwrap_or(0.0))
            .collect();
        rows.push(CorrelationRow {
            eigenvalue: model.eigenvalues[axis],
            explained: fractions[axis],
            r,
        });
    }
    Ok(CorrelationTable {
        normalization: label.to_string(),
        prior_names: prior_names.to_vec(),
        rows,
    })
}

/// The classifier-comparison half of the style study, runnable from a saved
/// vector file: match subjects to reference marks, reduce with PCA, run the
/// cross-validated comparison and assemble the joint classifier.
pub struct StyleCv {
    pub rows: Vec<StyleRow>,
    pub joint_assignment: [String; 4],
    pub pca_components: usize,
    pub warnings: Vec<String>,
}

pub fn style_crossval(
    config: &StudyConfig,
    vectors: &[(String, Vec<f64>)],
    references: &[StyleReference],
) -> Result<StyleCv, PipelineError> {
    let mut warnings = Vec::new();
    let mut players: Vec<&StyleReference> = Vec::new();
    let mut player_vectors: Vec<&Vec<f64>> = Vec::new();
    for (subject, values) in vectors {
        match references.iter().find(|r| &r.player == subject) {
            Some(r) if r.excluded => {
                warnings.push(format!("{}: excluded by reference flags", subject));
            }
            Some(r) => {
                players.push(r);
                player_vectors.push(values);
            }
            None => warnings.push(format!("{}: no reference marks, skipped", subject)),
        }
    }
    for reference in references.iter().filter(|r| !r.excluded) {
        if !players.iter().any(|p| p.player == reference.player) {
            warnings.push(format!("{}: missing reference vector, excluded", reference.player));
        }
    }
    if players.len() < config.folds.max(2) {
        return data_error(format!(
            "only {} players with vectors and marks, need at least {}",
            players.len(),
            config.folds.max(2)
        ));
    }

    // The PCA fit leaves out the outlier-flagged players; everyone is
    // projected for classification.
    let fit_vectors: Vec<Vec<f64>> = players
        .iter()
        .zip(&player_vectors)
        .filter(|(p, _)| !p.exclude_pca)
        .map(|(_, v)| (*v).clone())
        .collect();
    if fit_vectors.len() < 2 {
        return data_error("fewer than 2 players available for the PCA fit");
    }
    let requested_m = config.m.unwrap_or(23);
    let (pca, used_m) = pca_fit_auto(&fit_vectors, requested_m)?;
    if used_m < requested_m {
        warnings.push(format!("PCA components clamped from {} to {}", requested_m, used_m));
    }

    let inputs: Vec<Vec<f64>> = player_vectors
        .iter()
        .map(|v| pca.project(v))
        .collect::<Result<_, _>>()?;
    let outputs: Vec<Vec<f64>> = players.iter().map(|p| p.means.to_vec()).collect();
    let refs = ReferenceSet {
        subjects: players.iter().map(|p| p.player.clone()).collect(),
        inputs,
        outputs: outputs.clone(),
        domain: OutputDomain::uniform(1.0, 10.0, 4),
    };

    let bayes_dims = config.bayes_dims.min(used_m);
    let candidate_methods: Vec<Method> = vec![
        Method::Knn(KnnConfig::style(1)),
        Method::Knn(KnnConfig::style(2)),
        Method::Knn(KnnConfig::style(3)),
        Method::Knn(KnnConfig::style(4)),
        Method::Nn(NnConfig {
            layers: vec![used_m, config.nn_hidden, 4],
            target_error: config.nn_target_error,
            max_iters: config.nn_max_iters,
        }),
        Method::Bayes(BayesConfig {
            class_width: config.bayes_class_width,
            input_dims: Some(bayes_dims),
        }),
    ];

    let evaluate = |method: &Method| -> Result<crate::stats::CrossvalResult, PipelineError> {
        let method = method.clone();
        let refs = &refs;
        let result = crossval(&outputs, config.folds, config.runs, config.seed, |train, test, seed| {
            let train_refs = refs.subset(train);
            let mut model = classifiers::train(&method, &train_refs, seed)
                .expect("training on a non-empty fold");
            test.iter()
                .map(|&t| model.predict(&refs.inputs[t]).expect("prediction"))
                .collect()
        })?;
        Ok(result)
    };

    let mut rows: Vec<StyleRow> = Vec::new();
    let mut per_method: Vec<(Method, [f64; 4])> = Vec::new();
    for method in &candidate_methods {
        let result = evaluate(method)?;
        let mse: [f64; 4] = result.per_dim_mse.clone().try_into().unwrap();
        per_method.push((method.clone(), mse));
        rows.push(StyleRow {
            classifier: method.label(),
            mse,
            mean: result.mean_mse,
            cmp: 0.0,
        });
    }

    let random_result = evaluate(&Method::Random)?;
    rows.push(StyleRow {
        classifier: "Random class.".to_string(),
        mse: random_result.per_dim_mse.clone().try_into().unwrap(),
        mean: random_result.mean_mse,
        cmp: 1.0,
    });

    // Joint classifier: the per-dimension winner, re-validated from scratch.
    let mut joint_methods = Vec::with_capacity(4);
    let mut joint_assignment: [String; 4] = Default::default();
    for d in 0..4 {
        let best = per_method
            .iter()
            .min_by(|a, b| a.1[d].partial_cmp(&b.1[d]).unwrap())
            .map(|(m, _)| m.clone())
            .unwrap();
        joint_assignment[d] = best.label();
        joint_methods.push(best);
    }
    let joint_result = evaluate(&Method::Joint(joint_methods))?;
    rows.push(StyleRow {
        classifier: "Joint classifier".to_string(),
        mse: joint_result.per_dim_mse.clone().try_into().unwrap(),
        mean: joint_result.mean_mse,
        cmp: 0.0,
    });

    for row in rows.iter_mut() {
        row.cmp = random_result.mean_mse / row.mean;
    }
    rows.sort_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap());

    Ok(StyleCv {
        rows,
        joint_assignment,
        pca_components: used_m,
        warnings,
    })
}

pub fn run_style_study(
    config: &StudyConfig,
    paths: &[PathBuf],
    references_path: &Path,
) -> Result<StyleReport, PipelineError> {
    let references = load_style_references(references_path)?;
    let active: Vec<&StyleReference> = references.iter().filter(|r| !r.excluded).collect();
    if active.len() < 10 {
        return data_error(format!(
            "style study needs at least 10 reference players, found {}",
            active.len()
        ));
    }

    // tau-theta correlation over the full shipped table.
    let tau: Vec<f64> = references.iter().map(|r| r.means[0]).collect();
    let theta: Vec<f64> = references.iter().map(|r| r.means[3]).collect();
    let tau_theta_r = pearson(&tau, &theta).unwrap_or(0.0);

    let names: Vec<String> = active.iter().map(|r| r.player.clone()).collect();
    let scan = scan_collection(paths, &CollectionFilter::Explicit(names))?;
    let mut warnings = scan.warnings.clone();
    warnings.push(format!(
        "tau-theta r over shipped marks: {} (paper value {}, deviation {:.3})",
        tau_theta_r,
        TAU_THETA_REFERENCE,
        (tau_theta_r - TAU_THETA_REFERENCE).abs()
    ));

    let games = dedupe_games(&scan);
    let options = ExtractOptions {
        no_contiguity: config.contiguity_disabled(),
    };
    let dict_build = build_dictionary(&games, config.radii, config.dict_min_count)?;
    warnings.extend(dict_build.warnings);
    let corpus = extract_corpus(games.iter(), &dict_build.dictionary, &options);
    warnings.extend(corpus.warnings.clone());

    // Per-player memberships, honoring per-player game-year caps.
    let mut memberships_by_player: Vec<(&StyleReference, Vec<(&str, Color)>)> = Vec::new();
    for reference in &active {
        let key = GroupKey::Player(reference.player.clone());
        let members: &[SubjectGame] = scan.groups.get(&key).map(|v| v.as_slice()).unwrap_or(&[]);
        let memberships: Vec<(&str, Color)> = members
            .iter()
            .filter(|m| match (reference.games_until, game_year(&m.game)) {
                (Some(cap), Some(year)) => year <= cap,
                _ => true,
            })
            .map(|m| (m.game.source.as_str(), m.color))
            .collect();
        memberships_by_player.push((reference, memberships));
    }

    // The index counts only collected (subject) moves.
    let all_memberships: Vec<(&str, Color)> = memberships_by_player
        .iter()
        .flat_map(|(_, m)| m.iter().copied())
        .collect();
    let index_build = build_index(&corpus.count_map_over(&all_memberships), config.n);
    warnings.extend(index_build.warnings);
    let index = index_build.index;
    let slots = corpus.index_slots(&index);

    let mut players: Vec<&StyleReference> = Vec::new();
    let mut raw_counts: Vec<Vec<u64>> = Vec::new();
    for (reference, memberships) in &memberships_by_player {
        let (raw, games_used) = corpus.sample_raw(memberships, &slots);
        if games_used == 0 {
            continue; // style_crossval reports the missing vector
        }
        players.push(reference);
        raw_counts.push(raw);
    }

    let linear_vectors: Vec<(String, Vec<f64>)> = players
        .iter()
        .zip(&raw_counts)
        .map(|(p, raw)| (p.player.clone(), normalize(raw, config.normalization)))
        .collect();

    let cv = style_crossval(config, &linear_vectors, &references)?;
    warnings.extend(cv.warnings);

    // Correlation tables in both normalizations, over the PCA-fit players.
    let prior_names: Vec<String> = STYLE_DIMS.iter().map(|s| s.to_string()).collect();
    let fit_players: Vec<&&StyleReference> = players.iter().filter(|p| !p.exclude_pca).collect();
    let priors: Vec<Vec<f64>> = (0..4)
        .map(|d| fit_players.iter().map(|p| p.means[d]).collect())
        .collect();
    let fit_linear: Vec<Vec<f64>> = players
        .iter()
        .zip(&linear_vectors)
        .filter(|(p, _)| !p.exclude_pca)
        .map(|(_, (_, v))| v.clone())
        .collect();
    let fit_extended: Vec<Vec<f64>> = players
        .iter()
        .zip(&raw_counts)
        .filter(|(p, _)| !p.exclude_pca)
        .map(|(_, raw)| normalize(raw, Normalization::Extended { c: config.xnorm_c }))
        .collect();
    if fit_linear.len() < 2 {
        return data_error("fewer than 2 players available for the PCA fit");
    }
    let requested_m = config.m.unwrap_or(23);
    let pca_linear = correlation_table("linear", &fit_linear, &priors, &prior_names, requested_m, 10)?;
    let pca_extended =
        correlation_table("extended", &fit_extended, &priors, &prior_names, requested_m, 10)?;

    // Characteristic patterns per axis: extreme projection coefficients of
    // the linear-normalization PCA.
    let (pca, used_m) = pca_fit_auto(&fit_linear, requested_m)?;
    let top_patterns = top_axis_patterns(&pca, &index.specs, used_m.min(3), 3);

    Ok(StyleReport {
        rows: cv.rows,
        joint_assignment: cv.joint_assignment,
        pca_linear,
        pca_extended,
        top_patterns,
        tau_theta_r,
        pca_components: cv.pca_components,
        index_size: index.len(),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Saved study models (train / classify CLI)
// ---------------------------------------------------------------------------

pub struct StudyModel {
    pub study: Study,
    pub pca: PcaModel,
    pub model: TrainedModel,
}

impl StudyModel {
    pub fn classify(&mut self, vector: &[f64]) -> Result<Vec<f64>, PipelineError> {
        let reduced = self.pca.project(vector)?;
        Ok(self.model.predict(&reduced)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut out = format!("# gomine model v1\nstudy\t{}\n[pca]\n", self.study);
        out.push_str(&format!("total_variance\t{}\n", self.pca.total_variance));
        out.push_str("mean");
        for v in &self.pca.mean {
            out.push_str(&format!("\t{}", v));
        }
        out.push('\n');
        for (l, row) in self.pca.eigenvalues.iter().zip(&self.pca.projection) {
            out.push_str(&format!("axis\t{}", l));
            for v in row {
                out.push_str(&format!("\t{}", v));
            }
            out.push('\n');
        }
        out.push_str("[classifier]\n");
        self.model.write_text(&mut out);
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<StudyModel, PipelineError> {
        let text = fs::read_to_string(path)?;
        let Some((head, classifier)) = text.split_once("[classifier]\n") else {
            return data_error("missing [classifier] section");
        };
        let mut study = None;
        let mut mean = None;
        let mut total_variance = 0.0;
        let mut eigenvalues = Vec::new();
        let mut projection = Vec::new();
        for line in head.lines() {
            if line.starts_with('#') || line.is_empty() || line == "[pca]" {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "study" => {
                    study = Some(match fields.get(1).copied() {
                        Some("strength") => Study::Strength,
                        Some("style") => Study::Style,
                        other => {
                            return data_error(format!("unknown study '{:?}'", other));
                        }
                    })
                }
                "total_variance" => {
                    total_variance = fields[1]
                        .parse()
                        .map_err(|_| PipelineError::Data("bad total_variance".to_string()))?
                }
                "mean" => {
                    mean = Some(
                        fields[1..]
                            .iter()
                            .map(|s| s.parse::<f64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| PipelineError::Data("bad mean".to_string()))?,
                    )
                }
                "axis" => {
                    eigenvalues.push(
                        fields[1]
                            .parse::<f64>()
                            .map_err(|_| PipelineError::Data("bad eigenvalue".to_string()))?,
                    );
                    projection.push(
                        fields[2..]
                            .iter()
                            .map(|s| s.parse::<f64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| PipelineError::Data("bad axis row".to_string()))?,
                    );
                }
                other => return data_error(format!("unknown record '{}'", other)),
            }
        }
        let model = TrainedModel::read_text(&mut classifier.lines().peekable())?;
        Ok(StudyModel {
            study: study.ok_or_else(|| PipelineError::Data("missing study".to_string()))?,
            pca: PcaModel {
                mean: mean.ok_or_else(|| PipelineError::Data("missing mean".to_string()))?,
                projection,
                eigenvalues,
                total_variance,
            },
            model,
        })
    }
}

/// Assemble a reference set for `train` from a vector file plus either rank
/// subjects ("rank:N") or a style reference table.
pub fn reference_outputs(
    study: Study,
    vectors: &[PatternVector],
    style_refs: Option<&[StyleReference]>,
) -> Result<(Vec<usize>, Vec<Vec<f64>>, OutputDomain), PipelineError> {
    match study {
        Study::Strength => {
            let mut kept = Vec::new();
            let mut outputs = Vec::new();
            for (i, v) in vectors.iter().enumerate() {
                let Some(rank) = v.subject.strip_prefix("rank:").and_then(|r| r.parse::<f64>().ok())
                else {
                    continue;
                };
                kept.push(i);
                outputs.push(vec![rank]);
            }
            if kept.is_empty() {
                return data_error("no 'rank:N' subjects in vector file");
            }
            let domain = OutputDomain::from_outputs(&outputs);
            Ok((kept, outputs, domain))
        }
        Study::Style => {
            let refs = style_refs
                .ok_or_else(|| PipelineError::Data("style training needs a reference table".to_string()))?;
            let mut kept = Vec::new();
            let mut outputs = Vec::new();
            for (i, v) in vectors.iter().enumerate() {
                let Some(reference) = refs.iter().find(|r| r.player == v.subject && !r.excluded)
                else {
                    continue;
                };
                kept.push(i);
                outputs.push(reference.means.to_vec());
            }
            if kept.is_empty() {
                return data_error("no vector subjects found in the style reference table");
            }
            Ok((kept, outputs, OutputDomain::uniform(1.0, 10.0, 4)))
        }
    }
}
