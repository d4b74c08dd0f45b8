//! Command-line front end for the corpus analysis pipelines.

use clap::{Parser, Subcommand};
use gomine::classifiers::{BayesConfig, KnnConfig, Method, NnConfig};
use gomine::config::{Study, StudyConfig};
use gomine::pattern::{ExtractOptions, PatternDictionary};
use gomine::pipeline::{
    self, axis_patterns_tsv, correlation_table, dedupe_games, load_style_references,
    reference_outputs, style_rows_tsv, top_axis_patterns, PipelineError, StudyModel,
};
use gomine::sgf::{scan_collection, CollectionFilter};
use gomine::sociomap::{height_field, layout, team_profile, SampleRange};
use gomine::stats::pca_fit_auto;
use gomine::vectors::{
    build_index, load_vectors, normalize, rank_frequency, save_vectors, Normalization,
    PatternVector,
};
use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gomine",
    version,
    about = "Mine Go game records for per-move patterns and infer player strength and style"
)]
struct Cli {
    /// Seed for every stochastic stage; identical seeds give byte-identical
    /// outputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key-value config file providing study defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic SGF corpus with planted group biases.
    Synth {
        #[arg(long, value_parser = parse_study)]
        study: Study,
        /// Output directory for the SGF files.
        #[arg(long)]
        out: PathBuf,
        /// Number of rank groups (strength study).
        #[arg(long, default_value_t = 30)]
        groups: usize,
        /// Games per group.
        #[arg(long, default_value_t = 40)]
        games: usize,
        /// Moves per game.
        #[arg(long, default_value_t = 80)]
        moves: usize,
        /// Style reference table (style study).
        #[arg(long)]
        refs: Option<PathBuf>,
    },
    /// Build the spatial pattern dictionary from SGF games.
    Dict {
        /// SGF files or directories.
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Minimum occurrences for a configuration to enter the dictionary.
        #[arg(long)]
        min_count: Option<u64>,
        /// Radius range, e.g. 2..9.
        #[arg(long)]
        radii: Option<String>,
    },
    /// Extract per-subject patternspec streams (one line per move).
    Extract {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grouping: by-rank, by-player, or list (with --players).
        #[arg(long, default_value = "by-player")]
        group: String,
        /// Comma-separated player names for --group list.
        #[arg(long)]
        players: Option<String>,
        /// Keep handicap/non-standard-komi games in by-rank grouping.
        #[arg(long)]
        include_uneven: bool,
        /// Drop the contiguity pattern features.
        #[arg(long)]
        no_contiguity: bool,
    },
    /// Build the pattern index and normalized vectors from a stream.
    Vector {
        /// Patternspec stream from `extract`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Index size (most frequent patterns).
        #[arg(long)]
        n: Option<usize>,
        /// linear or extended:<c>.
        #[arg(long)]
        norm: Option<String>,
        /// Rank-frequency plot data output.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Fit a PCA model on a vector file.
    Pca {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Component count; clamped to what the data supports.
        #[arg(long)]
        m: Option<usize>,
        /// Eigenvalue summary (axis, eigenvalue, explained fraction).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Correlate PCA coordinates with style reference dimensions.
    Correlate {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        m: Option<usize>,
        /// Per-axis extreme-coefficient patterns output.
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Train a classifier and save it with its PCA front end.
    Train {
        #[arg(long, value_parser = parse_study)]
        study: Study,
        /// knn, nn, bayes, pca or random.
        #[arg(long)]
        method: String,
        #[arg(long)]
        vectors: PathBuf,
        /// Style reference table (style study).
        #[arg(long)]
        refs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        m: Option<usize>,
        /// Neighbors for knn.
        #[arg(long)]
        k: Option<usize>,
        /// Games per classified sample (strength knn weight scale).
        #[arg(long, default_value_t = 9)]
        g: usize,
    },
    /// Classify subjects from a vector file with a saved model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Study evaluation: the strength game-sample protocol or the style
    /// k-fold comparison table.
    Crossval {
        #[arg(long, value_parser = parse_study)]
        study: Study,
        /// SGF files or directories (strength study).
        #[arg(long, num_args = 1..)]
        games: Vec<PathBuf>,
        /// Vector file (style study).
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Style reference table (style study).
        #[arg(long)]
        refs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Strength sample sizes, e.g. 2,9,17.
        #[arg(long)]
        g_values: Option<String>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Team-profile a set of style vectors and lay them out in the plane.
    Sociomap {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pattern vector file for the height field.
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        /// Monte Carlo samples for the significance estimate.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// observed, or lo:hi for a fixed range.
        #[arg(long, default_value = "observed")]
        range: String,
    },
}

fn parse_study(s: &str) -> Result<Study, String> {
    match s {
        "strength" => Ok(Study::Strength),
        "style" => Ok(Study::Style),
        other => Err(format!("unknown study '{}' (use strength or style)", other)),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(2);
    }
}

fn resolve_config(
    config_path: &Option<PathBuf>,
    seed: Option<u64>,
    study: Study,
) -> Result<StudyConfig, Box<dyn Error>> {
    let mut config = match config_path {
        Some(path) => {
            let loaded = StudyConfig::load(path)?;
            if loaded.study != study {
                return Err(format!(
                    "config file is for the {} study, command runs {}",
                    loaded.study, study
                )
                .into());
            }
            loaded
        }
        None => StudyConfig::for_study(study),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {}", w);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    let seed = cli.seed;
    let config_path = cli.config.clone();
    match cli.command {
        Command::Synth {
            study,
            out,
            groups,
            games,
            moves,
            refs,
        } => {
            let config = resolve_config(&config_path, seed, study)?;
            let profile = match study {
                Study::Strength => gomine::synth::strength_profile(groups, games, moves),
                Study::Style => {
                    let refs_path = refs.ok_or("style synth needs --refs")?;
                    let references = load_style_references(&refs_path)?;
                    let players: Vec<(String, [f64; 4])> = references
                        .iter()
                        .filter(|r| !r.excluded)
                        .map(|r| (r.player.clone(), r.means))
                        .collect();
                    gomine::synth::style_profile(&players, games, moves)
                }
            };
            fs::create_dir_all(&out)?;
            let corpus = gomine::synth::generate_corpus(&profile, config.seed);
            let count = corpus.len();
            for (name, text) in corpus {
                fs::write(out.join(name), text)?;
            }
            eprintln!("wrote {} games to {}", count, out.display());
        }

        Command::Dict {
            input,
            out,
            min_count,
            radii,
        } => {
            let defaults = StudyConfig::strength();
            let min_count = min_count.unwrap_or(defaults.dict_min_count);
            let radii = match radii {
                Some(spec) => {
                    let (lo, hi) = spec.split_once("..").ok_or("radii must be lo..hi")?;
                    (lo.parse()?, hi.parse()?)
                }
                None => defaults.radii,
            };
            let (games, warnings) = load_all_games(&input)?;
            warn_all(&warnings);
            let build = gomine::pattern::build_dictionary(&games, radii, min_count)?;
            warn_all(&build.warnings);
            build.dictionary.save(&out)?;
            eprintln!("dictionary: {} entries", build.dictionary.len());
        }

        Command::Extract {
            input,
            dict,
            out,
            group,
            players,
            include_uneven,
            no_contiguity,
        } => {
            let filter = match group.as_str() {
                "by-rank" => CollectionFilter::ByRank {
                    even_only: !include_uneven,
                },
                "by-player" => CollectionFilter::ByPlayer,
                "list" => {
                    let names = players
                        .ok_or("--group list needs --players")?
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .collect();
                    CollectionFilter::Explicit(names)
                }
                other => return Err(format!("unknown group mode '{}'", other).into()),
            };
            let scan = scan_collection(&input, &filter)?;
            warn_all(&scan.warnings);
            if scan.excluded_games > 0 {
                eprintln!("excluded {} games", scan.excluded_games);
            }
            let dictionary = PatternDictionary::load(&dict)?;
            let games = dedupe_games(&scan);
            let options = ExtractOptions { no_contiguity };
            let corpus = pipeline::extract_corpus(games.iter(), &dictionary, &options);
            warn_all(&corpus.warnings);
            let mut text = String::from("subject\tgame\tpatternspec\n");
            for (key, members) in &scan.groups {
                for member in members {
                    let Some(stream) = corpus.per_game.get(&member.game.source) else {
                        continue;
                    };
                    for (color, id) in stream {
                        if *color == member.color {
                            text.push_str(&format!(
                                "{}\t{}\t{}\n",
                                key,
                                member.game.source,
                                corpus.spec_table[*id as usize]
                            ));
                        }
                    }
                }
            }
            fs::write(&out, text)?;
        }

        Command::Vector {
            input,
            out,
            n,
            norm,
            plot,
        } => {
            let defaults = StudyConfig::strength();
            let n = n.unwrap_or(defaults.n);
            let normalization = match norm {
                Some(spec) => Normalization::parse(&spec)
                    .ok_or_else(|| format!("bad normalization '{}'", spec))?,
                None => defaults.normalization,
            };
            let text = fs::read_to_string(&input)?;
            let mut global: std::collections::HashMap<String, u64> = Default::default();
            type SubjectAggregate = (
                std::collections::HashMap<String, u64>,
                std::collections::BTreeSet<String>,
            );
            let mut per_subject: BTreeMap<String, SubjectAggregate> = Default::default();
            for (i, line) in text.lines().enumerate() {
                if i == 0 && line.starts_with("subject\t") {
                    continue;
                }
                if line.is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(format!("stream line {}: expected 3 fields", i + 1).into());
                }
                *global.entry(fields[2].to_string()).or_insert(0) += 1;
                let entry = per_subject.entry(fields[0].to_string()).or_default();
                *entry.0.entry(fields[2].to_string()).or_insert(0) += 1;
                entry.1.insert(fields[1].to_string());
            }
            if per_subject.is_empty() {
                return Err("empty pattern stream".into());
            }
            let index_build = build_index(&global, n);
            warn_all(&index_build.warnings);
            let index = index_build.index;
            let vectors: Vec<PatternVector> = per_subject
                .iter()
                .map(|(subject, (counts, games))| {
                    let raw = gomine::vectors::raw_vector(counts, &index);
                    PatternVector {
                        subject: subject.clone(),
                        values: normalize(&raw, normalization),
                        normalization,
                        games_count: games.len() as u32,
                    }
                })
                .collect();
            save_vectors(&out, &index, &vectors)?;
            if let Some(plot_path) = plot {
                let mut plot_text = String::from("rank\tlog10_count\n");
                for (rank, log_count) in rank_frequency(&global) {
                    plot_text.push_str(&format!("{}\t{}\n", rank, log_count));
                }
                fs::write(plot_path, plot_text)?;
            }
        }

        Command::Pca {
            vectors,
            out,
            m,
            report,
        } => {
            let (_, loaded) = load_vectors(&vectors)?;
            let values: Vec<Vec<f64>> = loaded.iter().map(|v| v.values.clone()).collect();
            if values.len() < 2 {
                return Err("need at least 2 vectors".into());
            }
            let requested = m.unwrap_or(values.len().min(values[0].len()));
            let (model, used) = pca_fit_auto(&values, requested)?;
            if used < requested {
                eprintln!("warning: PCA components clamped from {} to {}", requested, used);
            }
            model.save(&out)?;
            if let Some(report_path) = report {
                let mut text = String::from("axis\teigenvalue\texplained\n");
                for (i, (l, f)) in model
                    .eigenvalues
                    .iter()
                    .zip(model.explained_fractions())
                    .enumerate()
                {
                    text.push_str(&format!("{}\t{}\t{}\n", i + 1, l, f));
                }
                fs::write(report_path, text)?;
            }
        }

        Command::Correlate {
            vectors,
            refs,
            out,
            m,
            patterns,
        } => {
            let (specs, loaded) = load_vectors(&vectors)?;
            let references = load_style_references(&refs)?;
            let mut fit_vectors = Vec::new();
            let mut priors: Vec<Vec<f64>> = vec![Vec::new(); 4];
            for v in &loaded {
                let Some(r) = references
                    .iter()
                    .find(|r| r.player == v.subject && !r.excluded && !r.exclude_pca)
                else {
                    continue;
                };
                fit_vectors.push(v.values.clone());
                for d in 0..4 {
                    priors[d].push(r.means[d]);
                }
            }
            if fit_vectors.len() < 3 {
                return Err("fewer than 3 subjects matched the reference table".into());
            }
            let normalization_label = loaded
                .first()
                .map(|v| v.normalization.to_string())
                .unwrap_or_default();
            let m = m.unwrap_or(23);
            let prior_names: Vec<String> =
                pipeline::STYLE_DIMS.iter().map(|s| s.to_string()).collect();
            let table =
                correlation_table(&normalization_label, &fit_vectors, &priors, &prior_names, m, 10)?;
            fs::write(&out, table.to_tsv())?;
            if let Some(patterns_path) = patterns {
                let (model, used) = pca_fit_auto(&fit_vectors, m)?;
                let top = top_axis_patterns(&model, &specs, used.min(3), 3);
                fs::write(patterns_path, axis_patterns_tsv(&top))?;
            }
        }

        Command::Train {
            study,
            method,
            vectors,
            refs,
            out,
            m,
            k,
            g,
        } => {
            let config = resolve_config(&config_path, seed, study)?;
            let (_, loaded) = load_vectors(&vectors)?;
            let references = match refs {
                Some(path) => Some(load_style_references(&path)?),
                None => None,
            };
            let (kept, outputs, domain) = reference_outputs(study, &loaded, references.as_deref())?;
            let kept_vectors: Vec<Vec<f64>> =
                kept.iter().map(|&i| loaded[i].values.clone()).collect();
            let requested_m = m.or(config.m).unwrap_or(kept_vectors.len());
            let (pca, used_m) = pca_fit_auto(&kept_vectors, requested_m)?;
            if used_m < requested_m {
                eprintln!("warning: PCA components clamped from {} to {}", requested_m, used_m);
            }
            let inputs: Vec<Vec<f64>> = kept_vectors
                .iter()
                .map(|v| pca.project(v))
                .collect::<Result<_, _>>()?;
            let refs_set = gomine::classifiers::ReferenceSet {
                subjects: kept.iter().map(|&i| loaded[i].subject.clone()).collect(),
                inputs,
                outputs,
                domain,
            };
            let method = match method.as_str() {
                "knn" => match study {
                    Study::Strength => Method::Knn(KnnConfig {
                        k: k.unwrap_or(4).min(refs_set.len()),
                        ..KnnConfig::strength(g)
                    }),
                    Study::Style => Method::Knn(KnnConfig::style(k.unwrap_or(2))),
                },
                "nn" => Method::Nn(NnConfig {
                    layers: vec![used_m, config.nn_hidden, refs_set.output_dim()],
                    target_error: config.nn_target_error,
                    max_iters: config.nn_max_iters,
                }),
                "bayes" => Method::Bayes(BayesConfig {
                    class_width: config.bayes_class_width,
                    input_dims: Some(config.bayes_dims.min(used_m)),
                }),
                "pca" => Method::PcaDirect,
                "random" => Method::Random,
                other => return Err(format!("unknown method '{}'", other).into()),
            };
            let model = gomine::classifiers::train(&method, &refs_set, config.seed)?;
            StudyModel { study, pca, model }.save(&out)?;
        }

        Command::Classify {
            model,
            vectors,
            out,
        } => {
            let mut study_model = StudyModel::load(&model)?;
            let (_, loaded) = load_vectors(&vectors)?;
            let dims = match study_model.study {
                Study::Strength => vec!["rank"],
                Study::Style => vec!["tau", "omega", "alpha", "theta"],
            };
            let mut text = String::from("subject");
            for d in &dims {
                text.push('\t');
                text.push_str(d);
            }
            text.push('\n');
            for v in &loaded {
                let output = study_model.classify(&v.values)?;
                text.push_str(&v.subject);
                for value in output {
                    text.push_str(&format!("\t{}", value));
                }
                text.push('\n');
            }
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{}", text),
            }
        }

        Command::Crossval {
            study,
            games,
            vectors,
            refs,
            out,
            runs,
            folds,
            g_values,
            repetitions,
        } => {
            let mut config = resolve_config(&config_path, seed, study)?;
            if let Some(runs) = runs {
                config.runs = runs;
            }
            if let Some(folds) = folds {
                config.folds = folds;
            }
            if let Some(reps) = repetitions {
                config.repetitions = reps;
            }
            if let Some(spec) = g_values {
                config.g_values = spec
                    .split(',')
                    .map(|v| v.trim().parse())
                    .collect::<Result<_, _>>()?;
            }
            match study {
                Study::Strength => {
                    if games.is_empty() {
                        return Err("strength crossval needs --games".into());
                    }
                    let report = pipeline::run_strength_study(&config, &games)?;
                    warn_all(&report.warnings);
                    fs::write(&out, report.to_tsv())?;
                }
                Study::Style => {
                    let vectors_path = vectors.ok_or("style crossval needs --vectors")?;
                    let refs_path = refs.ok_or("style crossval needs --refs")?;
                    let (_, loaded) = load_vectors(&vectors_path)?;
                    let references = load_style_references(&refs_path)?;
                    let named: Vec<(String, Vec<f64>)> = loaded
                        .iter()
                        .map(|v| (v.subject.clone(), v.values.clone()))
                        .collect();
                    let cv = pipeline::style_crossval(&config, &named, &references)?;
                    warn_all(&cv.warnings);
                    fs::write(&out, style_rows_tsv(&cv.rows, &cv.joint_assignment))?;
                }
            }
        }

        Command::Sociomap {
            refs,
            out,
            vectors,
            restarts,
            iters,
            samples,
            range,
        } => {
            let config = resolve_config(&config_path, seed, Study::Style)?;
            let references = load_style_references(&refs)?;
            let subjects: Vec<(String, Vec<f64>)> = references
                .iter()
                .filter(|r| !r.excluded)
                .map(|r| (r.player.clone(), r.means.to_vec()))
                .collect();
            if subjects.is_empty() {
                return Err("no subjects in the reference table".into());
            }
            let range = match range.as_str() {
                "observed" => SampleRange::Observed,
                spec => {
                    let (lo, hi) = spec
                        .split_once(':')
                        .ok_or("range must be observed or lo:hi")?;
                    SampleRange::Fixed(lo.parse()?, hi.parse()?)
                }
            };
            let profile = team_profile(&subjects, samples, config.seed, range);
            warn_all(&profile.warnings);
            let result = layout(&profile.matrix, config.seed, restarts, iters);

            let mut heights: BTreeMap<String, f64> = Default::default();
            if let Some(vectors_path) = vectors {
                let (_, loaded) = load_vectors(&vectors_path)?;
                let named: Vec<(String, Vec<f64>)> = loaded
                    .iter()
                    .map(|v| (v.subject.clone(), v.values.clone()))
                    .collect();
                let fit: Vec<Vec<f64>> = named
                    .iter()
                    .filter(|(s, _)| {
                        references
                            .iter()
                            .any(|r| &r.player == s && !r.excluded && !r.exclude_pca)
                    })
                    .map(|(_, v)| v.clone())
                    .collect();
                if fit.len() >= 2 {
                    let (model, _) = pca_fit_auto(&fit, 2.min(fit.len()))?;
                    let field = height_field(&result, &model, &named);
                    warn_all(&field.warnings);
                    heights = field.heights.into_iter().collect();
                } else {
                    eprintln!("warning: too few matched vectors for a height field");
                }
            }

            let mut text = String::from("subject\tx\ty\theight\tscore\n");
            for (subject, (x, y)) in result.subjects.iter().zip(&result.positions) {
                let height = heights.get(subject).copied().unwrap_or(0.0);
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    subject, x, y, height, result.score
                ));
            }
            fs::write(&out, text)?;
            eprintln!("layout score: {}", result.score);
        }
    }
    Ok(())
}

fn load_all_games(paths: &[PathBuf]) -> Result<(Vec<gomine::sgf::Game>, Vec<String>), PipelineError> {
    // Scanning with the by-player filter would drop anonymous games; walk
    // and parse directly instead.
    let mut files = Vec::new();
    collect_sgf(paths, &mut files)?;
    let mut games = Vec::new();
    let mut warnings = Vec::new();
    for file in files {
        let text = match fs::read_to_string(&file) {
            Ok(t) => t,
            Err(e) => {
                warnings.push(format!("skipping {}: {}", file.display(), e));
                continue;
            }
        };
        let name = file.display().to_string();
        match gomine::sgf::parse_sgf_named(&text, &name) {
            Ok(parsed) => games.extend(parsed),
            Err(e) => warnings.push(format!("skipping {}: {}", file.display(), e)),
        }
    }
    Ok((games, warnings))
}

fn collect_sgf(paths: &[PathBuf], out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .map_err(PipelineError::Io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            entries.sort();
            collect_sgf(&entries, out)?;
        } else if path.extension().map_or(false, |e| e == "sgf") {
            out.push(path.clone());
        }
    }
    Ok(())
}
