//! Board state and move execution for 19x19 Go.
//!
//! The engine replays recorded games and answers the tactical queries the
//! feature extractor needs (captures, liberties, atari). Ko is not enforced:
//! records are assumed legal as played, and games with genuinely illegal
//! moves are skipped by the caller.

use crate::sgf::{Color, Coord, GameRecord, Move, BOARD_SIZE};
use std::fmt;

const CELLS: usize = BOARD_SIZE * BOARD_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveError {
    Occupied,
    Suicide,
}

impl fmt::Display for MoveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoveError::Occupied => write!(f, "destination occupied"),
            MoveError::Suicide => write!(f, "suicide move"),
        }
    }
}

impl std::error::Error for MoveError {}

/// What a completed move did to the board, as seen by the feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveEffect {
    pub captured_stones: usize,
    pub self_group_liberties_after: usize,
    /// Opponent groups adjacent to the played stone left with exactly one
    /// liberty.
    pub opponent_groups_in_atari_after: usize,
    /// Whether a friendly group adjacent to the move point had exactly one
    /// liberty before the move.
    pub own_group_was_in_atari_before: bool,
}

#[derive(Clone)]
pub struct BoardState {
    cells: [Option<Color>; CELLS],
    pub last_move: Option<Coord>,
    pub second_last_move: Option<Coord>,
    pub move_number: u32,
}

impl Default for BoardState {
    fn default() -> Self {
        Self::new()
    }
}

fn index(c: Coord) -> usize {
    c.y as usize * BOARD_SIZE + c.x as usize
}

fn neighbors(c: Coord) -> impl Iterator<Item = Coord> {
    const OFFSETS: [(i16, i16); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
    OFFSETS.into_iter().filter_map(move |(dx, dy)| {
        let x = c.x as i16 + dx;
        let y = c.y as i16 + dy;
        if (0..BOARD_SIZE as i16).contains(&x) && (0..BOARD_SIZE as i16).contains(&y) {
            Some(Coord::new(x as u8, y as u8))
        } else {
            None
        }
    })
}

impl BoardState {
    pub fn new() -> BoardState {
        BoardState {
            cells: [None; CELLS],
            last_move: None,
            second_last_move: None,
            move_number: 0,
        }
    }

    pub fn stone(&self, c: Coord) -> Option<Color> {
        self.cells[index(c)]
    }

    pub fn stones_on_board(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Place a setup stone (handicap, AW) without capture processing.
    pub fn place_setup(&mut self, color: Color, c: Coord) -> Result<(), MoveError> {
        if self.cells[index(c)].is_some() {
            return Err(MoveError::Occupied);
        }
        self.cells[index(c)] = Some(color);
        Ok(())
    }

    /// Collect the maximal connected group through `c` and its liberty count.
    /// `c` must hold a stone.
    fn group(&self, c: Coord) -> (Vec<Coord>, usize) {
        let color = self.cells[index(c)].expect("group query on empty point");
        let mut seen = [false; CELLS];
        let mut stack = vec![c];
        let mut stones = Vec::new();
        let mut liberty_mark = [false; CELLS];
        let mut liberties = 0;
        seen[index(c)] = true;
        while let Some(p) = stack.pop() {
            stones.push(p);
            for n in neighbors(p) {
                let ni = index(n);
                match self.cells[ni] {
                    None => {
                        if !liberty_mark[ni] {
                            liberty_mark[ni] = true;
                            liberties += 1;
                        }
                    }
                    Some(col) if col == color && !seen[ni] => {
                        seen[ni] = true;
                        stack.push(n);
                    }
                    _ => {}
                }
            }
        }
        (stones, liberties)
    }

    /// Number of distinct empty points adjacent to the group through `c`.
    pub fn liberties(&self, c: Coord) -> usize {
        self.group(c).1
    }

    /// Play a stone, removing captured opponent groups and reporting the
    /// move's tactical effects.
    pub fn play(&mut self, color: Color, c: Coord) -> Result<MoveEffect, MoveError> {
        if self.cells[index(c)].is_some() {
            return Err(MoveError::Occupied);
        }

        let own_in_atari_before = neighbors(c)
            .any(|n| self.cells[index(n)] == Some(color) && self.group(n).1 == 1);

        self.cells[index(c)] = Some(color);

        // Remove adjacent opponent groups with no liberties left.
        let mut captured = 0;
        let mut processed = [false; CELLS];
        for n in neighbors(c) {
            let ni = index(n);
            if self.cells[ni] == Some(color.opponent()) && !processed[ni] {
                let (stones, libs) = self.group(n);
                for s in &stones {
                    processed[index(*s)] = true;
                }
                if libs == 0 {
                    captured += stones.len();
                    for s in stones {
                        self.cells[index(s)] = None;
                    }
                }
            }
        }

        let (_, self_liberties) = self.group(c);
        if self_liberties == 0 {
            // Captures always open a liberty, so this is a true suicide.
            self.cells[index(c)] = None;
            return Err(MoveError::Suicide);
        }

        let mut atari_groups = 0;
        let mut counted = [false; CELLS];
        for n in neighbors(c) {
            let ni = index(n);
            if self.cells[ni] == Some(color.opponent()) && !counted[ni] {
                let (stones, libs) = self.group(n);
                for s in &stones {
                    counted[index(*s)] = true;
                }
                if libs == 1 {
                    atari_groups += 1;
                }
            }
        }

        self.second_last_move = self.last_move;
        self.last_move = Some(c);
        self.move_number += 1;

        Ok(MoveEffect {
            captured_stones: captured,
            self_group_liberties_after: self_liberties,
            opponent_groups_in_atari_after: atari_groups,
            own_group_was_in_atari_before: own_in_atari_before,
        })
    }

    pub fn pass(&mut self) {
        self.second_last_move = self.last_move;
        self.last_move = None;
        self.move_number += 1;
    }

    /// Count groups with zero liberties. Always zero after a legal move;
    /// exposed for exhaustive replay checks.
    pub fn zero_liberty_groups(&self) -> usize {
        let mut seen = [false; CELLS];
        let mut count = 0;
        for y in 0..BOARD_SIZE as u8 {
            for x in 0..BOARD_SIZE as u8 {
                let c = Coord::new(x, y);
                if self.cells[index(c)].is_some() && !seen[index(c)] {
                    let (stones, libs) = self.group(c);
                    for s in &stones {
                        seen[index(*s)] = true;
                    }
                    if libs == 0 {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayError {
    pub move_number: usize,
    pub error: MoveError,
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "illegal move #{}: {}", self.move_number, self.error)
    }
}

impl std::error::Error for ReplayError {}

/// Replay a record, invoking `visit` with the pre-move board, the move and
/// its effect for every stone placement. Passes advance the move counter but
/// are not visited.
pub fn replay<F>(record: &GameRecord, mut visit: F) -> Result<BoardState, ReplayError>
where
    F: FnMut(&BoardState, Move, &MoveEffect),
{
    let mut board = BoardState::new();
    for &c in &record.handicap_placements {
        board.place_setup(Color::Black, c).map_err(|error| ReplayError {
            move_number: 0,
            error,
        })?;
    }
    for &c in &record.white_setup {
        board.place_setup(Color::White, c).map_err(|error| ReplayError {
            move_number: 0,
            error,
        })?;
    }
    for (i, mv) in record.moves.iter().enumerate() {
        match mv.point {
            None => board.pass(),
            Some(point) => {
                let before = board.clone();
                let effect = board.play(mv.color, point).map_err(|error| ReplayError {
                    move_number: i + 1,
                    error,
                })?;
                visit(&before, *mv, &effect);
            }
        }
    }
    Ok(board)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: u8, y: u8) -> Coord {
        Coord::new(x, y)
    }

    #[test]
    fn lone_stone_liberties() {
        let mut board = BoardState::new();
        let effect = board.play(Color::Black, c(9, 9)).unwrap();
        assert_eq!(effect.captured_stones, 0);
        assert_eq!(effect.self_group_liberties_after, 4);

        let mut corner = BoardState::new();
        let effect = corner.play(Color::Black, c(0, 0)).unwrap();
        assert_eq!(effect.self_group_liberties_after, 2);
    }

    #[test]
    fn corner_capture() {
        // White A1 (0,18 in SGF coords = bottom-left); black at A2 then B1
        // takes the last liberty.
        let mut board = BoardState::new();
        board.play(Color::White, c(0, 18)).unwrap();
        board.play(Color::Black, c(0, 17)).unwrap();
        let effect = board.play(Color::Black, c(1, 18)).unwrap();
        assert_eq!(effect.captured_stones, 1);
        assert_eq!(board.stone(c(0, 18)), None);
    }

    #[test]
    fn capture_implies_atari_before() {
        let mut board = BoardState::new();
        board.place_setup(Color::White, c(5, 5)).unwrap();
        board.place_setup(Color::Black, c(5, 4)).unwrap();
        board.place_setup(Color::Black, c(5, 6)).unwrap();
        board.place_setup(Color::Black, c(4, 5)).unwrap();
        assert_eq!(board.liberties(c(5, 5)), 1);
        let effect = board.play(Color::Black, c(6, 5)).unwrap();
        assert_eq!(effect.captured_stones, 1);
        assert_eq!(board.zero_liberty_groups(), 0);
    }

    #[test]
    fn atari_flag_counts_adjacent_groups() {
        let mut board = BoardState::new();
        board.place_setup(Color::White, c(5, 5)).unwrap();
        board.place_setup(Color::Black, c(5, 4)).unwrap();
        board.place_setup(Color::Black, c(5, 6)).unwrap();
        let effect = board.play(Color::Black, c(4, 5)).unwrap();
        assert_eq!(effect.opponent_groups_in_atari_after, 1);
    }

    #[test]
    fn escape_from_atari() {
        let mut board = BoardState::new();
        board.place_setup(Color::Black, c(5, 5)).unwrap();
        board.place_setup(Color::White, c(5, 4)).unwrap();
        board.place_setup(Color::White, c(5, 6)).unwrap();
        board.place_setup(Color::White, c(4, 5)).unwrap();
        // Black extends out of atari.
        let effect = board.play(Color::Black, c(6, 5)).unwrap();
        assert!(effect.own_group_was_in_atari_before);
        assert!(effect.self_group_liberties_after >= 2);
    }

    #[test]
    fn occupied_and_suicide_rejected() {
        let mut board = BoardState::new();
        board.play(Color::Black, c(3, 3)).unwrap();
        assert_eq!(board.play(Color::White, c(3, 3)), Err(MoveError::Occupied));

        // White surrounded corner point: playing into it is suicide.
        let mut board = BoardState::new();
        board.place_setup(Color::White, c(0, 1)).unwrap();
        board.place_setup(Color::White, c(1, 0)).unwrap();
        assert_eq!(board.play(Color::Black, c(0, 0)), Err(MoveError::Suicide));
        assert_eq!(board.stone(c(0, 0)), None);
    }

    // Flood-fill oracle independent of BoardState::group: recursive marking
    // over a plain grid snapshot.
    fn oracle_liberties(cells: &[Option<Color>], start: (usize, usize)) -> usize {
        let color = cells[start.1 * BOARD_SIZE + start.0].unwrap();
        let mut in_group = vec![false; CELLS];
        let mut frontier = vec![start];
        in_group[start.1 * BOARD_SIZE + start.0] = true;
        while let Some((x, y)) = frontier.pop() {
            let mut push = |nx: isize, ny: isize| {
                if nx < 0 || ny < 0 || nx >= BOARD_SIZE as isize || ny >= BOARD_SIZE as isize {
                    return;
                }
                let ni = ny as usize * BOARD_SIZE + nx as usize;
                if cells[ni] == Some(color) && !in_group[ni] {
                    in_group[ni] = true;
                    frontier.push((nx as usize, ny as usize));
                }
            };
            push(x as isize - 1, y as isize);
            push(x as isize + 1, y as isize);
            push(x as isize, y as isize - 1);
            push(x as isize, y as isize + 1);
        }
        let mut libs = 0;
        for y in 0..BOARD_SIZE {
            for x in 0..BOARD_SIZE {
                if cells[y * BOARD_SIZE + x].is_none() {
                    let adjacent = [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(dx, dy)| {
                            let nx = x as isize + dx;
                            let ny = y as isize + dy;
                            nx >= 0
                                && ny >= 0
                                && nx < BOARD_SIZE as isize
                                && ny < BOARD_SIZE as isize
                                && in_group[ny as usize * BOARD_SIZE + nx as usize]
                        });
                    if adjacent {
                        libs += 1;
                    }
                }
            }
        }
        libs
    }

    #[test]
    fn liberties_match_flood_fill_oracle_on_random_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut board = BoardState::new();
            let mut cells = vec![None; CELLS];
            // Random sprinkle of stones; setup placement, legality not needed
            // for a pure liberty query.
            for _ in 0..rng.gen_range(5..120) {
                let x = rng.gen_range(0..BOARD_SIZE as u8);
                let y = rng.gen_range(0..BOARD_SIZE as u8);
                let color = if rng.gen_bool(0.5) { Color::Black } else { Color::White };
                if board.stone(c(x, y)).is_none() {
                    board.place_setup(color, c(x, y)).unwrap();
                    cells[y as usize * BOARD_SIZE + x as usize] = Some(color);
                }
            }
            // Query a random occupied point, if any.
            let occupied: Vec<(usize, usize)> = (0..CELLS)
                .filter(|i| cells[*i].is_some())
                .map(|i| (i % BOARD_SIZE, i / BOARD_SIZE))
                .collect();
            if occupied.is_empty() {
                continue;
            }
            let (x, y) = occupied[rng.gen_range(0..occupied.len())];
            assert_eq!(
                board.liberties(c(x as u8, y as u8)),
                oracle_liberties(&cells, (x, y))
            );
        }
    }

    #[test]
    fn conservation_under_random_play() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut board = BoardState::new();
        let mut color = Color::Black;
        for _ in 0..400 {
            let x = rng.gen_range(0..BOARD_SIZE as u8);
            let y = rng.gen_range(0..BOARD_SIZE as u8);
            let before = board.stones_on_board();
            match board.play(color, c(x, y)) {
                Ok(effect) => {
                    assert_eq!(
                        board.stones_on_board(),
                        before + 1 - effect.captured_stones
                    );
                    assert_eq!(board.zero_liberty_groups(), 0);
                    color = color.opponent();
                }
                Err(_) => {}
            }
        }
    }
}
