//! Spatial stone configurations around a move point.
//!
//! Neighborhoods are circles in the gridcular metric
//! `d(x,y) = |dx| + |dy| + max(|dx|, |dy|)`, radii 2..=9. A configuration is
//! canonicalized to be invariant under the 8 dihedral board transforms;
//! translation invariance holds because offsets are move-relative, and
//! black-to-play normalization happens upstream (cell contents are
//! friend/foe relative to the player to move).

use crate::board::BoardState;
use crate::sgf::{Color, Coord, BOARD_SIZE};
use std::sync::OnceLock;

pub const MIN_RADIUS: u8 = 2;
pub const MAX_RADIUS: u8 = 9;

pub fn gridcular_distance(p: (i32, i32), q: (i32, i32)) -> i32 {
    let dx = (p.0 - q.0).abs();
    let dy = (p.1 - q.1).abs();
    dx + dy + dx.max(dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellContent {
    Empty,
    Friend,
    Foe,
    OffBoard,
}

impl CellContent {
    pub fn code(self) -> u8 {
        match self {
            CellContent::Empty => b'.',
            CellContent::Friend => b'X',
            CellContent::Foe => b'O',
            CellContent::OffBoard => b'#',
        }
    }

    pub fn from_code(b: u8) -> Option<CellContent> {
        match b {
            b'.' => Some(CellContent::Empty),
            b'X' => Some(CellContent::Friend),
            b'O' => Some(CellContent::Foe),
            b'#' => Some(CellContent::OffBoard),
            _ => None,
        }
    }
}

/// Cell contents around a move point, in the fixed offset enumeration order
/// for the given radius. The move point itself is excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialConfiguration {
    pub radius: u8,
    pub cells: Vec<CellContent>,
}

/// The eight dihedral transforms of the square grid.
const TRANSFORMS: [fn(i32, i32) -> (i32, i32); 8] = [
    |x, y| (x, y),
    |x, y| (-y, x),
    |x, y| (-x, -y),
    |x, y| (y, -x),
    |x, y| (x, -y),
    |x, y| (-x, y),
    |x, y| (y, x),
    |x, y| (-y, -x),
];

struct RadiusTable {
    /// Offsets with gridcular distance in [1, radius], sorted by
    /// (distance, dx, dy). Offsets for radius r are a prefix of those for
    /// any larger radius.
    offsets: Vec<(i32, i32)>,
    /// For each transform t: position i holds the index of t(offsets[i]).
    perms: [Vec<usize>; 8],
}

fn radius_table(radius: u8) -> &'static RadiusTable {
    static TABLES: OnceLock<Vec<RadiusTable>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (MIN_RADIUS..=MAX_RADIUS)
            .map(|r| {
                let mut offsets = Vec::new();
                let r = r as i32;
                for dy in -r..=r {
                    for dx in -r..=r {
                        if (dx, dy) == (0, 0) {
                            continue;
                        }
                        if gridcular_distance((0, 0), (dx, dy)) <= r {
                            offsets.push((dx, dy));
                        }
                    }
                }
                offsets.sort_by_key(|&(dx, dy)| (gridcular_distance((0, 0), (dx, dy)), dx, dy));
                let perms = std::array::from_fn(|t| {
                    offsets
                        .iter()
                        .map(|&(dx, dy)| {
                            let moved = TRANSFORMS[t](dx, dy);
                            offsets
                                .iter()
                                .position(|&o| o == moved)
                                .expect("gridcular ball is dihedral-closed")
                        })
                        .collect()
                });
                RadiusTable { offsets, perms }
            })
            .collect()
    });
    &tables[(radius - MIN_RADIUS) as usize]
}

/// The offsets within gridcular distance `radius` of the origin, origin
/// excluded, in enumeration order.
pub fn offsets_within(radius: u8) -> &'static [(i32, i32)] {
    &radius_table(radius).offsets
}

/// Read the neighborhood of `point` from the board, relative to
/// `color_to_play` (friend = mover's color).
pub fn spatial_configuration(
    state: &BoardState,
    point: Coord,
    radius: u8,
    color_to_play: Color,
) -> SpatialConfiguration {
    assert!((MIN_RADIUS..=MAX_RADIUS).contains(&radius));
    let cells = offsets_within(radius)
        .iter()
        .map(|&(dx, dy)| {
            let x = point.x as i32 + dx;
            let y = point.y as i32 + dy;
            if !(0..BOARD_SIZE as i32).contains(&x) || !(0..BOARD_SIZE as i32).contains(&y) {
                CellContent::OffBoard
            } else {
                match state.stone(Coord::new(x as u8, y as u8)) {
                    None => CellContent::Empty,
                    Some(c) if c == color_to_play => CellContent::Friend,
                    Some(_) => CellContent::Foe,
                }
            }
        })
        .collect();
    SpatialConfiguration { radius, cells }
}

/// A canonicalized configuration: the lexicographically minimal cell
/// serialization over the 8 dihedral transforms, plus its hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub radius: u8,
    pub hash: u64,
    pub cells: Vec<CellContent>,
    /// Index of the transform that produced the minimum.
    pub transform: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn canonical_form(config: &SpatialConfiguration) -> CanonicalForm {
    let table = radius_table(config.radius);
    debug_assert_eq!(config.cells.len(), table.offsets.len());
    let mut best: Option<(Vec<u8>, usize)> = None;
    for (t, perm) in table.perms.iter().enumerate() {
        // Serialization of the transformed configuration: cell i of the
        // result is the original cell that maps onto offset i.
        let bytes: Vec<u8> = perm.iter().map(|&j| config.cells[j].code()).collect();
        match &best {
            Some((b, _)) if *b <= bytes => {}
            _ => best = Some((bytes, t)),
        }
    }
    let (bytes, transform) = best.unwrap();
    let mut hashed = Vec::with_capacity(bytes.len() + 1);
    hashed.push(config.radius);
    hashed.extend_from_slice(&bytes);
    CanonicalForm {
        radius: config.radius,
        hash: fnv1a(&hashed),
        cells: bytes.iter().map(|&b| CellContent::from_code(b).unwrap()).collect(),
        transform,
    }
}
