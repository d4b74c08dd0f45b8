//! Synthetic SGF corpora with planted, group-dependent move biases.
//!
//! Each group draws its moves from a fixed menu (corner openings high and
//! low, side extensions, contact plays, shoulder hits, second-line crawls)
//! with group-specific weights, so pattern distributions shift with the
//! group parameter in a controlled way. Games are legal by construction and
//! byte-identical for a fixed seed.

use crate::board::BoardState;
use crate::sgf::{write_minimal_sgf, Color, Coord, GameMeta, GameRecord, Move, RankLabel, BOARD_SIZE};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveWeights {
    pub corner_low: f64,
    pub corner_high: f64,
    pub side_low: f64,
    pub side_high: f64,
    pub contact: f64,
    pub shoulder: f64,
    pub extend: f64,
    pub crawl: f64,
    pub random_far: f64,
}

impl MoveWeights {
    pub fn neutral() -> MoveWeights {
        MoveWeights {
            corner_low: 4.0,
            corner_high: 4.0,
            side_low: 3.0,
            side_high: 3.0,
            contact: 3.0,
            shoulder: 2.0,
            extend: 3.0,
            crawl: 2.0,
            random_far: 2.0,
        }
    }

    /// Monotone family for the strength corpus; `t` in [0,1].
    pub fn monotone(t: f64) -> MoveWeights {
        MoveWeights {
            corner_low: 9.0 - 8.0 * t,
            corner_high: 1.0 + 8.0 * t,
            side_low: 6.0 - 5.0 * t,
            side_high: 1.0 + 5.0 * t,
            contact: 6.0 - 4.0 * t,
            shoulder: 1.0 + t,
            extend: 2.0 + 3.0 * t,
            crawl: 5.0 - 4.0 * t,
            random_far: 3.0 - 2.0 * t,
        }
    }

    /// Style-planted family; marks are the (tau, omega, alpha, theta) means
    /// on the 1..10 scale.
    pub fn from_style(marks: [f64; 4]) -> MoveWeights {
        let unit = |v: f64| ((v - 1.0) / 9.0).clamp(0.0, 1.0);
        let (t, o, a, h) = (unit(marks[0]), unit(marks[1]), unit(marks[2]), unit(marks[3]));
        MoveWeights {
            corner_low: 1.0 + 8.0 * t,
            corner_high: 9.0 - 8.0 * t,
            side_low: 6.0 - 4.0 * o,
            shoulder: 1.0 + 6.0 * o,
            contact: 1.0 + 8.0 * a,
            extend: 7.0 - 5.0 * a,
            crawl: 1.0 + 6.0 * h,
            side_high: 7.0 - 5.0 * h,
            random_far: 2.0,
        }
    }

    fn as_array(&self) -> [f64; 9] {
        [
            self.corner_low,
            self.corner_high,
            self.side_low,
            self.side_high,
            self.contact,
            self.shoulder,
            self.extend,
            self.crawl,
            self.random_far,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SynthGroup {
    /// Player name written to PB/PW.
    pub name: String,
    /// Rank tag written to BR/WR, when the group models a rank.
    pub rank: Option<String>,
    pub games: usize,
    pub weights: MoveWeights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Opponent {
    /// Both colors play from the group's own weights (rank studies).
    SameGroup,
    /// White plays from neutral weights (style studies).
    Neutral,
}

#[derive(Debug, Clone)]
pub struct SynthProfile {
    pub groups: Vec<SynthGroup>,
    pub moves_per_game: usize,
    pub opponent: Opponent,
}

/// 30-kyu .. 1-kyu ladder with monotone move biases.
pub fn strength_profile(groups: usize, games_per_group: usize, moves_per_game: usize) -> SynthProfile {
    assert!((2..=30).contains(&groups));
    SynthProfile {
        groups: (0..groups)
            .map(|i| {
                let kyu = 30 - i;
                let t = i as f64 / (groups - 1) as f64;
                SynthGroup {
                    name: format!("Synth{}k", kyu),
                    rank: Some(format!("{}k", kyu)),
                    games: games_per_group,
                    weights: MoveWeights::monotone(t),
                }
            })
            .collect(),
        moves_per_game,
        opponent: Opponent::SameGroup,
    }
}

/// One group per reference player, biases planted from their style marks.
pub fn style_profile(
    players: &[(String, [f64; 4])],
    games_per_player: usize,
    moves_per_game: usize,
) -> SynthProfile {
    SynthProfile {
        groups: players
            .iter()
            .map(|(name, marks)| SynthGroup {
                name: name.clone(),
                rank: None,
                games: games_per_player,
                weights: MoveWeights::from_style(*marks),
            })
            .collect(),
        moves_per_game,
        opponent: Opponent::Neutral,
    }
}

const CATEGORIES: usize = 9;

fn corner_points(low: bool) -> Vec<Coord> {
    let max = (BOARD_SIZE - 1) as i32;
    let offsets: &[(i32, i32)] = if low {
        &[(2, 2), (2, 3), (3, 2)]
    } else {
        &[(3, 3), (3, 4), (4, 3), (4, 4)]
    };
    let mut points = Vec::new();
    for &(a, b) in offsets {
        for &(x, y) in &[(a, b), (max - a, b), (a, max - b), (max - a, max - b)] {
            points.push(Coord::new(x as u8, y as u8));
        }
    }
    points.sort();
    points.dedup();
    points
}

fn line_points(line: u8) -> Vec<Coord> {
    let max = (BOARD_SIZE - 1) as u8;
    let mut points = Vec::new();
    for v in 5..=(max - 5) {
        points.push(Coord::new(v, line));
        points.push(Coord::new(v, max - line));
        points.push(Coord::new(line, v));
        points.push(Coord::new(max - line, v));
    }
    points.sort();
    points.dedup();
    points
}

fn isolated(board: &BoardState, point: Coord) -> bool {
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            let x = point.x as i32 + dx;
            let y = point.y as i32 + dy;
            if (0..BOARD_SIZE as i32).contains(&x) && (0..BOARD_SIZE as i32).contains(&y) {
                if board.stone(Coord::new(x as u8, y as u8)).is_some() {
                    return false;
                }
            }
        }
    }
    true
}

fn neighbors_of(point: Coord, diagonal: bool) -> Vec<Coord> {
    let offsets: &[(i32, i32)] = if diagonal {
        &[(-1, -1), (1, -1), (-1, 1), (1, 1)]
    } else {
        &[(0, -1), (-1, 0), (1, 0), (0, 1)]
    };
    offsets
        .iter()
        .filter_map(|&(dx, dy)| {
            let x = point.x as i32 + dx;
            let y = point.y as i32 + dy;
            if (0..BOARD_SIZE as i32).contains(&x) && (0..BOARD_SIZE as i32).contains(&y) {
                Some(Coord::new(x as u8, y as u8))
            } else {
                None
            }
        })
        .collect()
}

fn category_candidates(board: &BoardState, color: Color, category: usize) -> Vec<Coord> {
    let empty = |c: &Coord| board.stone(*c).is_none();
    match category {
        0 => corner_points(true).into_iter().filter(|c| empty(c) && isolated(board, *c)).collect(),
        1 => corner_points(false).into_iter().filter(|c| empty(c) && isolated(board, *c)).collect(),
        2 => line_points(2).into_iter().filter(|c| empty(c) && isolated(board, *c)).collect(),
        3 => line_points(3).into_iter().filter(|c| empty(c) && isolated(board, *c)).collect(),
        // Contact and shoulder answer the opponent's last stone.
        4 => board
            .last_move
            .map(|l| neighbors_of(l, false).into_iter().filter(empty).collect())
            .unwrap_or_default(),
        5 => board
            .last_move
            .map(|l| neighbors_of(l, true).into_iter().filter(empty).collect())
            .unwrap_or_default(),
        // Solid extension from the player's own previous stone.
        6 => board
            .second_last_move
            .map(|l| neighbors_of(l, false).into_iter().filter(empty).collect())
            .unwrap_or_default(),
        // Second-line crawl alongside any own stone.
        7 => {
            let max = (BOARD_SIZE - 1) as u8;
            let mut candidates = Vec::new();
            for y in 0..BOARD_SIZE as u8 {
                for x in 0..BOARD_SIZE as u8 {
                    let c = Coord::new(x, y);
                    let low = x <= 1 || y <= 1 || x >= max - 1 || y >= max - 1;
                    if low && empty(&c) && neighbors_of(c, false).iter().any(|n| board.stone(*n) == Some(color)) {
                        candidates.push(c);
                    }
                }
            }
            candidates
        }
        8 => {
            let mut candidates = Vec::new();
            for y in 0..BOARD_SIZE as u8 {
                for x in 0..BOARD_SIZE as u8 {
                    let c = Coord::new(x, y);
                    if empty(&c) {
                        candidates.push(c);
                    }
                }
            }
            candidates
        }
        _ => unreachable!(),
    }
}

fn pick_move(board: &mut BoardState, color: Color, weights: &MoveWeights, rng: &mut ChaCha8Rng) -> Option<Coord> {
    let raw = weights.as_array();
    let index = WeightedIndex::new(raw.iter().map(|w| w.max(1e-9))).unwrap();
    let mut tried = [false; CATEGORIES];
    for _ in 0..CATEGORIES * 3 {
        let category = index.sample(rng);
        if tried[category] {
            continue;
        }
        tried[category] = true;
        let mut candidates = category_candidates(board, color, category);
        candidates.shuffle(rng);
        for candidate in candidates {
            if board.play(color, candidate).is_ok() {
                return Some(candidate);
            }
        }
    }
    // Fall back to any legal point.
    let mut all = category_candidates(board, color, 8);
    all.shuffle(rng);
    for candidate in all {
        if board.play(color, candidate).is_ok() {
            return Some(candidate);
        }
    }
    None
}

fn generate_game(
    group: &SynthGroup,
    opponent_weights: &MoveWeights,
    opponent_name: &str,
    moves_per_game: usize,
    rng: &mut ChaCha8Rng,
) -> (GameRecord, GameMeta) {
    let mut board = BoardState::new();
    let mut record = GameRecord {
        board_size: BOARD_SIZE as u8,
        ..GameRecord::default()
    };
    let mut color = Color::Black;
    for _ in 0..moves_per_game {
        let weights = if color == Color::Black {
            &group.weights
        } else {
            opponent_weights
        };
        match pick_move(&mut board, color, weights, rng) {
            Some(point) => record.moves.push(Move {
                color,
                point: Some(point),
            }),
            None => break,
        }
        color = color.opponent();
    }
    let rank = group.rank.as_deref().and_then(crate::sgf::parse_rank);
    let meta = GameMeta {
        black_name: Some(group.name.clone()),
        white_name: Some(opponent_name.to_string()),
        black_rank: rank.clone(),
        white_rank: rank,
        komi: Some(6.5),
        date: Some("2000-01-01".to_string()),
        result: None,
        even_game: true,
    };
    (record, meta)
}

/// Generate the whole corpus: one (file name, SGF text) pair per game,
/// deterministic in the seed.
pub fn generate_corpus(profile: &SynthProfile, seed: u64) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for (gi, group) in profile.groups.iter().enumerate() {
        let (opponent_weights, opponent_name) = match profile.opponent {
            Opponent::SameGroup => (group.weights, group.name.as_str()),
            Opponent::Neutral => (MoveWeights::neutral(), "Sparring"),
        };
        for game_index in 0..group.games {
            let game_seed = seed
                .wrapping_add((gi as u64) << 32)
                .wrapping_add(game_index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(game_seed);
            let (record, meta) = generate_game(
                group,
                &opponent_weights,
                opponent_name,
                profile.moves_per_game,
                &mut rng,
            );
            let file_name = format!("{}_{:03}.sgf", sanitize(&group.name), game_index);
            files.push((file_name, write_minimal_sgf(&record, &meta)));
        }
    }
    files
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Convenience wrapper: parse the rank tags back out of a profile.
pub fn rank_value(label: &str) -> Option<i32> {
    crate::sgf::parse_rank(label).map(|r: RankLabel| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgf::parse_sgf;

    #[test]
    fn corpus_is_deterministic() {
        let profile = strength_profile(3, 2, 40);
        let a = generate_corpus(&profile, 9);
        let b = generate_corpus(&profile, 9);
        assert_eq!(a, b);
        let c = generate_corpus(&profile, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn games_parse_and_replay() {
        let profile = strength_profile(4, 2, 60);
        for (_, text) in generate_corpus(&profile, 5) {
            let games = parse_sgf(&text).unwrap();
            assert_eq!(games.len(), 1);
            let game = &games[0];
            assert!(game.meta.even_game);
            assert!(game.meta.black_rank.is_some());
            let replayed = crate::board::replay(&game.record, |_, _, _| {});
            assert!(replayed.is_ok());
            assert!(game.record.moves.len() >= 50);
        }
    }

    #[test]
    fn disjoint_menus_give_anticorrelated_coordinates() {
        // Two groups with opposite extremes of the monotone family end up
        // playing from (mostly) disjoint opening menus.
        let low = MoveWeights::monotone(0.0);
        let high = MoveWeights::monotone(1.0);
        assert!(low.corner_low > high.corner_low);
        assert!(low.corner_high < high.corner_high);

        let profile = SynthProfile {
            groups: vec![
                SynthGroup {
                    name: "low".to_string(),
                    rank: Some("20k".to_string()),
                    games: 6,
                    weights: low,
                },
                SynthGroup {
                    name: "high".to_string(),
                    rank: Some("5k".to_string()),
                    games: 6,
                    weights: high,
                },
            ],
            moves_per_game: 60,
            opponent: Opponent::SameGroup,
        };
        let corpus = generate_corpus(&profile, 11);
        // Count low-corner vs high-corner first moves per group.
        let mut low_first = (0, 0);
        let mut high_first = (0, 0);
        for (name, text) in &corpus {
            let game = &parse_sgf(text).unwrap()[0];
            let first = game.record.moves[0].point.unwrap();
            let min_line = first.x.min(first.y).min(18 - first.x).min(18 - first.y);
            let counters = if name.starts_with("low") { &mut low_first } else { &mut high_first };
            if min_line <= 2 {
                counters.0 += 1;
            } else {
                counters.1 += 1;
            }
        }
        // The low group opens low more often than the high group.
        assert!(low_first.0 > high_first.0);
    }

    #[test]
    fn style_profile_has_one_group_per_player() {
        let players = vec![
            ("A".to_string(), [1.0, 5.0, 9.0, 5.0]),
            ("B".to_string(), [10.0, 5.0, 1.0, 5.0]),
        ];
        let profile = style_profile(&players, 3, 50);
        assert_eq!(profile.groups.len(), 2);
        assert_eq!(profile.opponent, Opponent::Neutral);
        let corpus = generate_corpus(&profile, 2);
        assert_eq!(corpus.len(), 6);
        let game = &parse_sgf(&corpus[0].1).unwrap()[0];
        assert_eq!(game.meta.black_name.as_deref(), Some("A"));
        assert_eq!(game.meta.white_name.as_deref(), Some("Sparring"));
    }
}
