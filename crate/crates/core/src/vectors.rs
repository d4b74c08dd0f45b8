//! Pattern vectors: per-subject counts of the globally most frequent
//! patterns, rescaled to [-1, 1].

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

/// The shared mapping from vector elements to patterns: the `n` globally
/// most frequent patternspecs, ordered by decreasing count with ties broken
/// by patternspec text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternIndex {
    pub specs: Vec<String>,
    pub counts: Vec<u64>,
}

impl PatternIndex {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

pub struct IndexBuild {
    pub index: PatternIndex,
    pub warnings: Vec<String>,
}

pub fn build_index(global_counts: &HashMap<String, u64>, n: usize) -> IndexBuild {
    assert!(n >= 1);
    let mut pairs: Vec<(&String, &u64)> = global_counts.iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let mut warnings = Vec::new();
    if pairs.len() < n {
        warnings.push(format!(
            "only {} distinct patterns available, index truncated from {}",
            pairs.len(),
            n
        ));
    }
    let taken = &pairs[..n.min(pairs.len())];
    IndexBuild {
        index: PatternIndex {
            specs: taken.iter().map(|(s, _)| (*s).clone()).collect(),
            counts: taken.iter().map(|(_, c)| **c).collect(),
        },
        warnings,
    }
}

/// Per-pattern counts for one subject, laid out in index order. Patterns the
/// subject never played count zero.
pub fn raw_vector(subject_counts: &HashMap<String, u64>, index: &PatternIndex) -> Vec<u64> {
    index
        .specs
        .iter()
        .map(|s| subject_counts.get(s).copied().unwrap_or(0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    Linear,
    Extended { c: f64 },
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::Linear => write!(f, "linear"),
            Normalization::Extended { c } => write!(f, "extended:{}", c),
        }
    }
}

impl Normalization {
    pub fn parse(text: &str) -> Option<Normalization> {
        if text == "linear" {
            return Some(Normalization::Linear);
        }
        let c = text.strip_prefix("extended:")?.parse().ok()?;
        Some(Normalization::Extended { c })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternVector {
    pub subject: String,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    pub games_count: u32,
}

fn affine_to_unit_range(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| 2.0 * (v - min) / (max - min) - 1.0)
        .collect()
}

/// Rescale raw counts so the most frequent pattern maps to 1 and the least
/// frequent to -1. All-equal counts map to all zeros.
pub fn normalize_linear(raw: &[u64]) -> Vec<f64> {
    assert!(!raw.is_empty());
    let as_f: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
    affine_to_unit_range(&as_f)
}

/// Extended rescaling: log pre-processing, the linear map, then a logistic
/// post-processing step that spreads the crowded low end of the spectrum.
pub fn normalize_extended(raw: &[u64], c: f64) -> Vec<f64> {
    assert!(!raw.is_empty());
    assert!(c > 0.0);
    let logs: Vec<f64> = raw.iter().map(|&v| ((v + 1) as f64).ln()).collect();
    affine_to_unit_range(&logs)
        .into_iter()
        .map(|y| 2.0 / (1.0 + (-c * y).exp()) - 1.0)
        .collect()
}

pub fn normalize(raw: &[u64], normalization: Normalization) -> Vec<f64> {
    match normalization {
        Normalization::Linear => normalize_linear(raw),
        Normalization::Extended { c } => normalize_extended(raw, c),
    }
}

/// Rank-frequency table for plotting: (1-based rank, log10 count), counts
/// non-increasing.
pub fn rank_frequency(global_counts: &HashMap<String, u64>) -> Vec<(usize, f64)> {
    let mut counts: Vec<u64> = global_counts.values().copied().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i + 1, (c as f64).log10()))
        .collect()
}

// ---------------------------------------------------------------------------
// Vector file format
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum VectorFileError {
    Format { line: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for VectorFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorFileError::Format { line, message } => {
                write!(f, "vector file error at line {}: {}", line, message)
            }
            VectorFileError::Io(e) => write!(f, "vector file io error: {}", e),
        }
    }
}

impl std::error::Error for VectorFileError {}

impl From<std::io::Error> for VectorFileError {
    fn from(e: std::io::Error) -> Self {
        VectorFileError::Io(e)
    }
}

/// TSV layout: a header row naming the index patternspecs, then one row per
/// subject with (subject id, games count, n values, normalization tag).
pub fn save_vectors(
    path: &Path,
    index: &PatternIndex,
    vectors: &[PatternVector],
) -> Result<(), VectorFileError> {
    let mut out = String::from("subject\tgames");
    for spec in &index.specs {
        out.push('\t');
        out.push_str(spec);
    }
    out.push_str("\tnorm\n");
    for v in vectors {
        out.push_str(&v.subject);
        out.push('\t');
        out.push_str(&v.games_count.to_string());
        for value in &v.values {
            out.push('\t');
            out.push_str(&value.to_string());
        }
        out.push('\t');
        out.push_str(&v.normalization.to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<(Vec<String>, Vec<PatternVector>), VectorFileError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(VectorFileError::Format {
        line: 1,
        message: "empty file".to_string(),
    })?;
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.len() < 3 || columns[0] != "subject" || columns[1] != "games" || *columns.last().unwrap() != "norm" {
        return Err(VectorFileError::Format {
            line: 1,
            message: "bad header".to_string(),
        });
    }
    let specs: Vec<String> = columns[2..columns.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut vectors = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let fail = |message: String| VectorFileError::Format {
            line: i + 1,
            message,
        };
        if fields.len() != specs.len() + 3 {
            return Err(fail(format!(
                "expected {} fields, found {}",
                specs.len() + 3,
                fields.len()
            )));
        }
        let games_count: u32 = fields[1].parse().map_err(|_| fail("bad games count".into()))?;
        let values = fields[2..fields.len() - 1]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| fail("bad value".into()))?;
        let normalization = Normalization::parse(fields[fields.len() - 1])
            .ok_or_else(|| fail("bad normalization tag".into()))?;
        vectors.push(PatternVector {
            subject: fields[0].to_string(),
            values,
            normalization,
            games_count,
        });
    }
    Ok((specs, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts(pairs: &[(&str, u64)]) -> HashMap<String, u64> {
        pairs.iter().map(|(s, c)| (s.to_string(), *c)).collect()
    }

    #[test]
    fn index_top_n() {
        let build = build_index(&counts(&[("a", 5), ("b", 3), ("c", 1)]), 2);
        assert_eq!(build.index.specs, vec!["a", "b"]);
        assert_eq!(build.index.counts, vec![5, 3]);
        assert!(build.warnings.is_empty());
    }

    #[test]
    fn index_tie_broken_by_text() {
        let build = build_index(&counts(&[("b", 3), ("a", 3)]), 1);
        assert_eq!(build.index.specs, vec!["a"]);
    }

    #[test]
    fn index_short_corpus_warns() {
        let build = build_index(&counts(&[("a", 1)]), 500);
        assert_eq!(build.index.len(), 1);
        assert_eq!(build.warnings.len(), 1);
    }

    #[test]
    fn raw_vector_zero_for_unseen() {
        let index = build_index(&counts(&[("a", 5), ("b", 3)]), 2).index;
        assert_eq!(raw_vector(&counts(&[("z", 9)]), &index), vec![0, 0]);
        assert_eq!(raw_vector(&counts(&[("b", 2)]), &index), vec![0, 2]);
    }

    #[test]
    fn single_subject_raw_equals_index_counts() {
        let global = counts(&[("a", 5), ("b", 3), ("c", 1)]);
        let index = build_index(&global, 3).index;
        assert_eq!(raw_vector(&global, &index), index.counts);
    }

    #[test]
    fn linear_normalization_reference_values() {
        let values = normalize_linear(&[9, 4, 0]);
        assert_eq!(values[0], 1.0);
        assert!((values[1] - (-1.0 / 9.0)).abs() < 1e-12);
        assert_eq!(values[2], -1.0);
        assert_eq!(normalize_linear(&[5, 5]), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_endpoints_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let len = rng.gen_range(2..40);
            let raw: Vec<u64> = (0..len).map(|_| rng.gen_range(0..1000)).collect();
            let normalized = normalize_linear(&raw);
            let max_raw = *raw.iter().max().unwrap();
            let min_raw = *raw.iter().min().unwrap();
            if max_raw != min_raw {
                let argmax = raw.iter().position(|&v| v == max_raw).unwrap();
                let argmin = raw.iter().position(|&v| v == min_raw).unwrap();
                assert_eq!(normalized[argmax], 1.0);
                assert_eq!(normalized[argmin], -1.0);
            }
            let scaled: Vec<u64> = raw.iter().map(|&v| v * 7).collect();
            let renormalized = normalize_linear(&scaled);
            for (a, b) in normalized.iter().zip(&renormalized) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extended_midpoint_and_spot_value() {
        // The logistic midpoint stays put; y = 1 maps to 2/(1+e^-6)-1.
        let values = normalize_extended(&[0, 10], 6.0);
        assert!((values[1] - 0.9950547536867307).abs() < 1e-12);
        assert!((values[0] + 0.9950547536867307).abs() < 1e-12);
    }

    #[test]
    fn extended_preserves_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..200 {
            let len = rng.gen_range(2..40);
            let raw: Vec<u64> = (0..len).map(|_| rng.gen_range(0..1000)).collect();
            let linear = normalize_linear(&raw);
            let extended = normalize_extended(&raw, 6.0);
            for i in 0..len {
                for j in 0..len {
                    if raw[i] > raw[j] {
                        assert!(linear[i] >= linear[j]);
                        assert!(extended[i] > extended[j]);
                    }
                }
            }
            assert!(extended.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn rank_frequency_non_increasing() {
        let table = rank_frequency(&counts(&[("a", 100), ("b", 10), ("c", 10), ("d", 1)]));
        assert_eq!(table.len(), 4);
        for pair in table.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
            assert_eq!(pair[1].0, pair[0].0 + 1);
        }
    }

    #[test]
    fn vector_file_round_trip() {
        let index = build_index(&counts(&[("a", 5), ("b", 3)]), 2).index;
        let vectors = vec![
            PatternVector {
                subject: "s1".to_string(),
                values: vec![1.0, -1.0],
                normalization: Normalization::Linear,
                games_count: 4,
            },
            PatternVector {
                subject: "s2".to_string(),
                values: vec![0.25, -0.125],
                normalization: Normalization::Extended { c: 6.0 },
                games_count: 7,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.tsv");
        save_vectors(&path, &index, &vectors).unwrap();
        let (specs, loaded) = load_vectors(&path).unwrap();
        assert_eq!(specs, index.specs);
        assert_eq!(loaded, vectors);
    }
}
