//! Per-move pattern features: tactical flags, contiguity, border distance
//! and the canonical spatial configuration matched against a dictionary.

pub mod dict;
pub mod spatial;

pub use dict::{build_dictionary, PatternDictionary};
pub use spatial::{
    canonical_form, gridcular_distance, spatial_configuration, CellContent, SpatialConfiguration,
    MAX_RADIUS, MIN_RADIUS,
};

use crate::board::{BoardState, MoveEffect};
use crate::sgf::{Coord, Move, BOARD_SIZE};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BorderDistance {
    /// Edge lines are counted from 1; only distances up to 4 are kept.
    Line(u8),
    Far,
}

impl BorderDistance {
    fn of(point: Coord) -> BorderDistance {
        let max = (BOARD_SIZE - 1) as u8;
        let d = point
            .x
            .min(point.y)
            .min(max - point.x)
            .min(max - point.y)
            + 1;
        if d <= 4 {
            BorderDistance::Line(d)
        } else {
            BorderDistance::Far
        }
    }
}

/// Reference to a dictionary spatial configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpatialRef {
    pub radius: u8,
    pub hash: u64,
}

/// One move's pattern feature combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pattern {
    pub capture: bool,
    pub atari: bool,
    pub atari_escape: bool,
    pub cont_last: bool,
    pub cont_second_last: bool,
    pub border_distance: BorderDistance,
    pub spatial: Option<SpatialRef>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions {
    /// Force the contiguity flags off; used when small game samples make
    /// pattern diversity a problem.
    pub no_contiguity: bool,
}

fn chebyshev(a: Coord, b: Coord) -> u8 {
    let dx = (a.x as i16 - b.x as i16).unsigned_abs();
    let dy = (a.y as i16 - b.y as i16).unsigned_abs();
    dx.max(dy) as u8
}

/// Build the pattern for one stone placement. `state_before` is the board
/// before the move, `effect` the result of applying it.
pub fn extract_move_pattern(
    state_before: &BoardState,
    mv: Move,
    effect: &MoveEffect,
    dictionary: &PatternDictionary,
    options: &ExtractOptions,
) -> Pattern {
    let point = mv.point.expect("pass moves carry no pattern");
    let cont_last = !options.no_contiguity
        && state_before
            .last_move
            .map_or(false, |l| chebyshev(l, point) == 1);
    let cont_second_last = !options.no_contiguity
        && state_before
            .second_last_move
            .map_or(false, |l| chebyshev(l, point) == 1);

    // Largest dictionary-matched radius wins; smaller radii are implied.
    let mut spatial = None;
    for radius in (MIN_RADIUS..=MAX_RADIUS).rev() {
        let config = spatial_configuration(state_before, point, radius, mv.color);
        let canon = canonical_form(&config);
        if dictionary.contains(canon.hash) {
            spatial = Some(SpatialRef {
                radius,
                hash: canon.hash,
            });
            break;
        }
    }

    Pattern {
        capture: effect.captured_stones > 0,
        atari: effect.opponent_groups_in_atari_after > 0,
        atari_escape: effect.own_group_was_in_atari_before
            && effect.self_group_liberties_after >= 2,
        cont_last,
        cont_second_last,
        border_distance: BorderDistance::of(point),
        spatial,
    }
}

// ---------------------------------------------------------------------------
// patternspec text form
// ---------------------------------------------------------------------------

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(cap:{} atari:{} esc:{} cl:{} cl2:{} bd:",
            self.capture as u8,
            self.atari as u8,
            self.atari_escape as u8,
            self.cont_last as u8,
            self.cont_second_last as u8,
        )?;
        match self.border_distance {
            BorderDistance::Line(d) => write!(f, "{}", d)?,
            BorderDistance::Far => write!(f, "far")?,
        }
        match self.spatial {
            Some(s) => write!(f, " s:{}:{:016x})", s.radius, s.hash),
            None => write!(f, " s:none)"),
        }
    }
}

pub fn format_patternspec(pattern: &Pattern) -> String {
    pattern.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternspecError {
    pub text: String,
    pub reason: &'static str,
}

impl fmt::Display for PatternspecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad patternspec '{}': {}", self.text, self.reason)
    }
}

impl std::error::Error for PatternspecError {}

pub fn parse_patternspec(text: &str) -> Result<Pattern, PatternspecError> {
    let err = |reason| PatternspecError {
        text: text.to_string(),
        reason,
    };
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| err("missing parentheses"))?;
    let fields: Vec<&str> = inner.split(' ').collect();
    if fields.len() != 7 {
        return Err(err("expected 7 fields"));
    }
    let flag = |field: &str, key: &'static str| -> Result<bool, PatternspecError> {
        match field.strip_prefix(key).and_then(|f| f.strip_prefix(':')) {
            Some("0") => Ok(false),
            Some("1") => Ok(true),
            _ => Err(PatternspecError {
                text: text.to_string(),
                reason: "bad flag field",
            }),
        }
    };
    let capture = flag(fields[0], "cap")?;
    let atari = flag(fields[1], "atari")?;
    let atari_escape = flag(fields[2], "esc")?;
    let cont_last = flag(fields[3], "cl")?;
    let cont_second_last = flag(fields[4], "cl2")?;

    let bd = fields[5].strip_prefix("bd:").ok_or_else(|| err("bad bd field"))?;
    let border_distance = match bd {
        "far" => BorderDistance::Far,
        d => {
            let d: u8 = d.parse().map_err(|_| err("bad bd value"))?;
            if !(1..=4).contains(&d) {
                return Err(err("bd out of range"));
            }
            BorderDistance::Line(d)
        }
    };

    let s = fields[6].strip_prefix("s:").ok_or_else(|| err("bad s field"))?;
    let spatial = if s == "none" {
        None
    } else {
        let (radius, hash) = s.split_once(':').ok_or_else(|| err("bad s field"))?;
        let radius: u8 = radius.parse().map_err(|_| err("bad s radius"))?;
        if !(MIN_RADIUS..=MAX_RADIUS).contains(&radius) {
            return Err(err("s radius out of range"));
        }
        if hash.len() != 16 {
            return Err(err("bad s hash length"));
        }
        let hash = u64::from_str_radix(hash, 16).map_err(|_| err("bad s hash"))?;
        Some(SpatialRef { radius, hash })
    };

    Ok(Pattern {
        capture,
        atari,
        atari_escape,
        cont_last,
        cont_second_last,
        border_distance,
        spatial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_false_far() -> Pattern {
        Pattern {
            capture: false,
            atari: false,
            atari_escape: false,
            cont_last: false,
            cont_second_last: false,
            border_distance: BorderDistance::Far,
            spatial: None,
        }
    }

    #[test]
    fn patternspec_reference_form() {
        assert_eq!(
            format_patternspec(&all_false_far()),
            "(cap:0 atari:0 esc:0 cl:0 cl2:0 bd:far s:none)"
        );
    }

    fn random_pattern(rng: &mut ChaCha8Rng) -> Pattern {
        Pattern {
            capture: rng.gen_bool(0.5),
            atari: rng.gen_bool(0.5),
            atari_escape: rng.gen_bool(0.5),
            cont_last: rng.gen_bool(0.5),
            cont_second_last: rng.gen_bool(0.5),
            border_distance: if rng.gen_bool(0.4) {
                BorderDistance::Far
            } else {
                BorderDistance::Line(rng.gen_range(1..=4))
            },
            spatial: if rng.gen_bool(0.5) {
                Some(SpatialRef {
                    radius: rng.gen_range(MIN_RADIUS..=MAX_RADIUS),
                    hash: rng.gen(),
                })
            } else {
                None
            },
        }
    }

    #[test]
    fn patternspec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = random_pattern(&mut rng);
            assert_eq!(parse_patternspec(&format_patternspec(&p)).unwrap(), p);
        }
    }

    #[test]
    fn distinct_patterns_have_distinct_text() {
        // Exhaustive over flag combinations x border values, no spatial.
        let mut seen = std::collections::HashSet::new();
        for bits in 0..32u8 {
            for bd in 0..5u8 {
                let p = Pattern {
                    capture: bits & 1 != 0,
                    atari: bits & 2 != 0,
                    atari_escape: bits & 4 != 0,
                    cont_last: bits & 8 != 0,
                    cont_second_last: bits & 16 != 0,
                    border_distance: if bd == 0 {
                        BorderDistance::Far
                    } else {
                        BorderDistance::Line(bd)
                    },
                    spatial: None,
                };
                assert!(seen.insert(format_patternspec(&p)));
            }
        }
        assert_eq!(seen.len(), 160);
    }

    #[test]
    fn malformed_patternspec_rejected() {
        assert!(parse_patternspec("cap:0").is_err());
        assert!(parse_patternspec("(cap:0 atari:0 esc:0 cl:0 cl2:0 bd:9 s:none)").is_err());
        assert!(parse_patternspec("(cap:2 atari:0 esc:0 cl:0 cl2:0 bd:far s:none)").is_err());
        assert!(parse_patternspec("(cap:0 atari:0 esc:0 cl:0 cl2:0 bd:far s:1:aa)").is_err());
    }

    #[test]
    fn border_distance_lines() {
        assert_eq!(BorderDistance::of(Coord::new(0, 9)), BorderDistance::Line(1));
        assert_eq!(BorderDistance::of(Coord::new(3, 3)), BorderDistance::Line(4));
        assert_eq!(BorderDistance::of(Coord::new(9, 9)), BorderDistance::Far);
        assert_eq!(BorderDistance::of(Coord::new(18, 18)), BorderDistance::Line(1));
        assert_eq!(BorderDistance::of(Coord::new(15, 3)), BorderDistance::Line(4));
    }
}
