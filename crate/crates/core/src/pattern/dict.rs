//! Spatial pattern dictionary: canonical configurations seen often enough in
//! a game stream, with dense ids assigned by decreasing occurrence count.

use super::spatial::{
    canonical_form, spatial_configuration, CellContent, MAX_RADIUS, MIN_RADIUS,
};
use crate::board::replay;
use crate::sgf::Game;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    pub id: u32,
    pub radius: u8,
    pub hash: u64,
    pub count: u64,
    pub cells: Vec<CellContent>,
}

#[derive(Debug, Clone, Default)]
pub struct PatternDictionary {
    entries: Vec<DictEntry>,
    by_hash: HashMap<u64, u32>,
    pub min_count: u64,
    pub radii: (u8, u8),
}

#[derive(Debug)]
pub enum DictError {
    /// Two distinct canonical serializations hashed identically.
    HashCollision { hash: u64 },
    BadRadii { lo: u8, hi: u8 },
    Format { line: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for DictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DictError::HashCollision { hash } => {
                write!(f, "canonical hash collision on {:016x}", hash)
            }
            DictError::BadRadii { lo, hi } => write!(
                f,
                "radii {}..{} outside supported {}..{}",
                lo, hi, MIN_RADIUS, MAX_RADIUS
            ),
            DictError::Format { line, message } => {
                write!(f, "dictionary format error at line {}: {}", line, message)
            }
            DictError::Io(e) => write!(f, "dictionary io error: {}", e),
        }
    }
}

impl std::error::Error for DictError {}

impl From<std::io::Error> for DictError {
    fn from(e: std::io::Error) -> Self {
        DictError::Io(e)
    }
}

pub struct DictBuild {
    pub dictionary: PatternDictionary,
    pub warnings: Vec<String>,
}

/// Count canonical configurations at every radius in range over all moves of
/// all games, then keep those occurring at least `min_count` times. Ids are
/// assigned by decreasing count, ties by hash.
pub fn build_dictionary(
    games: &[Game],
    radii: (u8, u8),
    min_count: u64,
) -> Result<DictBuild, DictError> {
    let (lo, hi) = radii;
    if lo < MIN_RADIUS || hi > MAX_RADIUS || lo > hi {
        return Err(DictError::BadRadii { lo, hi });
    }
    assert!(min_count >= 1, "min_count must be at least 1");

    let mut warnings = Vec::new();
    let mut counts: HashMap<u64, (u8, Vec<CellContent>, u64)> = HashMap::new();
    let mut collision: Option<u64> = None;

    for game in games {
        let result = replay(&game.record, |before, mv, _effect| {
            let point = mv.point.expect("replay only visits placements");
            for radius in lo..=hi {
                let config = spatial_configuration(before, point, radius, mv.color);
                let canon = canonical_form(&config);
                match counts.entry(canon.hash) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        if e.get().1 != canon.cells {
                            collision = Some(canon.hash);
                        }
                        e.get_mut().2 += 1;
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert((radius, canon.cells, 1));
                    }
                }
            }
        });
        if let Err(e) = result {
            warnings.push(format!("skipping {}: {}", game.source, e));
        }
    }
    if let Some(hash) = collision {
        return Err(DictError::HashCollision { hash });
    }
    if counts.is_empty() {
        warnings.push("empty game stream: dictionary is empty".to_string());
    }

    let mut entries: Vec<DictEntry> = counts
        .into_iter()
        .filter(|(_, (_, _, count))| *count >= min_count)
        .map(|(hash, (radius, cells, count))| DictEntry {
            id: 0,
            radius,
            hash,
            count,
            cells,
        })
        .collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then(a.hash.cmp(&b.hash)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.id = i as u32;
    }
    let by_hash = entries.iter().map(|e| (e.hash, e.id)).collect();
    Ok(DictBuild {
        dictionary: PatternDictionary {
            entries,
            by_hash,
            min_count,
            radii,
        },
        warnings,
    })
}

impl PatternDictionary {
    pub fn contains(&self, hash: u64) -> bool {
        self.by_hash.contains_key(&hash)
    }

    pub fn lookup(&self, hash: u64) -> Option<&DictEntry> {
        self.by_hash.get(&hash).map(|&id| &self.entries[id as usize])
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<(), DictError> {
        let mut out = format!(
            "# gomine dictionary v1 min_count={} radii={}..{}\n",
            self.min_count, self.radii.0, self.radii.1
        );
        for e in &self.entries {
            let cells: String = e.cells.iter().map(|c| c.code() as char).collect();
            out.push_str(&format!(
                "{}\t{}\t{:016x}\t{}\t{}\n",
                e.id, e.radius, e.hash, e.count, cells
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PatternDictionary, DictError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let header = lines.next().ok_or(DictError::Format {
            line: 1,
            message: "empty file".to_string(),
        })?;
        let (min_count, radii) = parse_header(header.1).ok_or(DictError::Format {
            line: 1,
            message: "bad header".to_string(),
        })?;
        let mut entries = Vec::new();
        let mut by_hash = HashMap::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let fail = |message: &str| DictError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            if fields.len() != 5 {
                return Err(fail("expected 5 fields"));
            }
            let id: u32 = fields[0].parse().map_err(|_| fail("bad id"))?;
            let radius: u8 = fields[1].parse().map_err(|_| fail("bad radius"))?;
            let hash = u64::from_str_radix(fields[2], 16).map_err(|_| fail("bad hash"))?;
            let count: u64 = fields[3].parse().map_err(|_| fail("bad count"))?;
            let cells = fields[4]
                .bytes()
                .map(CellContent::from_code)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| fail("bad cell code"))?;
            if id as usize != entries.len() {
                return Err(fail("ids not dense"));
            }
            if by_hash.insert(hash, id).is_some() {
                return Err(DictError::HashCollision { hash });
            }
            entries.push(DictEntry {
                id,
                radius,
                hash,
                count,
                cells,
            });
        }
        Ok(PatternDictionary {
            entries,
            by_hash,
            min_count,
            radii,
        })
    }
}

fn parse_header(line: &str) -> Option<(u64, (u8, u8))> {
    let rest = line.strip_prefix("# gomine dictionary v1 ")?;
    let mut min_count = None;
    let mut radii = None;
    for part in rest.split(' ') {
        if let Some(v) = part.strip_prefix("min_count=") {
            min_count = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("radii=") {
            let (lo, hi) = v.split_once("..")?;
            radii = Some((lo.parse().ok()?, hi.parse().ok()?));
        }
    }
    Some((min_count?, radii?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgf::parse_sgf;

    fn one_move_game() -> Game {
        parse_sgf("(;FF[4]SZ[19];B[jj])").unwrap().remove(0)
    }

    #[test]
    fn single_move_all_radii_counted_once() {
        let build = build_dictionary(&[one_move_game()], (2, 9), 1).unwrap();
        let dict = build.dictionary;
        assert_eq!(dict.len(), 8);
        assert!(dict.entries().iter().all(|e| e.count == 1));
        let radii: Vec<u8> = {
            let mut r: Vec<u8> = dict.entries().iter().map(|e| e.radius).collect();
            r.sort();
            r
        };
        assert_eq!(radii, vec![2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn min_count_two_over_identical_games() {
        let games = vec![one_move_game(), one_move_game()];
        let build = build_dictionary(&games, (2, 9), 2).unwrap();
        assert_eq!(build.dictionary.len(), 8);
        assert!(build.dictionary.entries().iter().all(|e| e.count == 2));

        // A third, different game contributes configurations seen only once.
        let mut games = games;
        games.push(parse_sgf("(;FF[4]SZ[19];B[cc])").unwrap().remove(0));
        let build = build_dictionary(&games, (2, 9), 2).unwrap();
        assert_eq!(build.dictionary.len(), 8);
    }

    #[test]
    fn empty_stream_warns() {
        let build = build_dictionary(&[], (2, 9), 1).unwrap();
        assert!(build.dictionary.is_empty());
        assert_eq!(build.warnings.len(), 1);
    }

    #[test]
    fn ids_ordered_by_count_then_hash() {
        let games = vec![
            one_move_game(),
            one_move_game(),
            parse_sgf("(;FF[4]SZ[19];B[cc];W[qq];B[jd])").unwrap().remove(0),
        ];
        let dict = build_dictionary(&games, (2, 5), 1).unwrap().dictionary;
        for pair in dict.entries().windows(2) {
            assert!(
                pair[0].count > pair[1].count
                    || (pair[0].count == pair[1].count && pair[0].hash < pair[1].hash)
            );
        }
    }

    #[test]
    fn save_load_round_trip() {
        let games = vec![
            one_move_game(),
            parse_sgf("(;FF[4]SZ[19];B[cc];W[qq];B[jd];W[dd])").unwrap().remove(0),
        ];
        let dict = build_dictionary(&games, (2, 9), 1).unwrap().dictionary;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.tsv");
        dict.save(&path).unwrap();
        let loaded = PatternDictionary::load(&path).unwrap();
        assert_eq!(loaded.entries(), dict.entries());
        assert_eq!(loaded.min_count, dict.min_count);
        assert_eq!(loaded.radii, dict.radii);
    }
}
