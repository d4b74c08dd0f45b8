//! SGF (Smart Game Format) parsing for Go game records.
//!
//! Handles FF[3] and FF[4] files, extracts the main variation only, and
//! exposes the metadata (ranks, names, handicap, result, date) the analysis
//! pipelines filter on. Only 19x19 boards are supported.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

pub const BOARD_SIZE: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Color::Black => write!(f, "black"),
            Color::White => write!(f, "white"),
        }
    }
}

/// A point on the 19x19 grid. `x` is the column, `y` the row, both 0-based
/// from the top-left corner as in SGF coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub x: u8,
    pub y: u8,
}

impl Coord {
    pub fn new(x: u8, y: u8) -> Coord {
        debug_assert!((x as usize) < BOARD_SIZE && (y as usize) < BOARD_SIZE);
        Coord { x, y }
    }

    pub fn sgf(self) -> String {
        let a = b'a';
        String::from_utf8(vec![a + self.x, a + self.y]).unwrap()
    }
}

/// One move of the main line. `point == None` is a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub color: Color,
    pub point: Option<Coord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GameRecord {
    pub moves: Vec<Move>,
    pub handicap: u32,
    pub handicap_placements: Vec<Coord>,
    /// White setup stones (AW). Rare in game records but honored on replay.
    pub white_setup: Vec<Coord>,
    pub board_size: u8,
}

/// A player rank as written in the record ("6k", "2d") plus its numeric
/// value: kyu ranks map to the kyu number, d-dan maps to `1 - d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankLabel {
    pub raw: String,
    pub value: i32,
}

/// Parse a rank tag. Qualifiers after the k/d letter ("6k*", "2d?") are
/// dropped; anything that does not look like a rank yields `None`, which
/// excludes the game from rank-filtered pipelines.
pub fn parse_rank(text: &str) -> Option<RankLabel> {
    let trimmed = text.trim();
    let digits: String = trimmed.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let rest = &trimmed[digits.len()..];
    let letter = rest.chars().next()?;
    let number: i32 = digits.parse().ok()?;
    let value = match letter.to_ascii_lowercase() {
        'k' if (1..=30).contains(&number) => number,
        'd' if (1..=9).contains(&number) => 1 - number,
        _ => return None,
    };
    Some(RankLabel {
        raw: trimmed.to_string(),
        value,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GameMeta {
    pub black_rank: Option<RankLabel>,
    pub white_rank: Option<RankLabel>,
    pub black_name: Option<String>,
    pub white_name: Option<String>,
    pub result: Option<String>,
    pub date: Option<String>,
    pub komi: Option<f64>,
    /// No handicap and, when a komi tag is present, a standard (>= 4.5) komi.
    pub even_game: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub record: GameRecord,
    pub meta: GameMeta,
    /// Identifier used in diagnostics: file name plus game index.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SgfError {
    /// Malformed property or tree syntax, with the byte offset of the fault.
    Syntax { offset: usize, message: String },
    UnsupportedSize { size: u32 },
    /// Two consecutive moves by the same color (review artifacts, corrupt
    /// records): the whole game is rejected.
    InconsistentRecord { detail: String },
    Io { path: PathBuf, message: String },
}

impl fmt::Display for SgfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SgfError::Syntax { offset, message } => {
                write!(f, "sgf syntax error at byte {}: {}", offset, message)
            }
            SgfError::UnsupportedSize { size } => {
                write!(f, "unsupported board size {} (only 19 supported)", size)
            }
            SgfError::InconsistentRecord { detail } => {
                write!(f, "inconsistent record: {}", detail)
            }
            SgfError::Io { path, message } => {
                write!(f, "cannot read {}: {}", path.display(), message)
            }
        }
    }
}

impl std::error::Error for SgfError {}

// ---------------------------------------------------------------------------
// Low-level tree parser
// ---------------------------------------------------------------------------

type RawProperty = (String, Vec<String>);

struct RawNode {
    properties: Vec<RawProperty>,
}

struct RawTree {
    nodes: Vec<RawNode>,
    children: Vec<RawTree>,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> SgfError {
        SgfError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, ch: u8) -> Result<(), SgfError> {
        self.skip_whitespace();
        match self.peek() {
            Some(b) if b == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => Err(self.error(format!("expected '{}', found '{}'", ch as char, b as char))),
            None => Err(self.error(format!("expected '{}', found end of input", ch as char))),
        }
    }

    fn collection(&mut self) -> Result<Vec<RawTree>, SgfError> {
        let mut trees = Vec::new();
        loop {
            self.skip_whitespace();
            match self.peek() {
                Some(b'(') => trees.push(self.tree()?),
                Some(b) => {
                    return Err(self.error(format!("expected '(' or end of input, found '{}'", b as char)))
                }
                None => break,
            }
        }
        if trees.is_empty() {
            return Err(self.error("no game tree found"));
        }
        Ok(trees)
    }

    fn tree(&mut self) -> Result<RawTree, SgfError> {
        self.expect(b'(')?;
        let mut nodes = Vec::new();
        loop {
            self.skip_whitespace();
            if self.peek() == Some(b';') {
                nodes.push(self.node()?);
            } else {
                break;
            }
        }
        if nodes.is_empty() {
            return Err(self.error("empty game tree"));
        }
        let mut children = Vec::new();
        loop {
            self.skip_whitespace();
            if self.peek() == Some(b'(') {
                children.push(self.tree()?);
            } else {
                break;
            }
        }
        self.expect(b')')?;
        Ok(RawTree { nodes, children })
    }

    fn node(&mut self) -> Result<RawNode, SgfError> {
        self.expect(b';')?;
        let mut properties = Vec::new();
        loop {
            self.skip_whitespace();
            match self.peek() {
                Some(b) if b.is_ascii_uppercase() => properties.push(self.property()?),
                _ => break,
            }
        }
        Ok(RawNode { properties })
    }

    fn property(&mut self) -> Result<RawProperty, SgfError> {
        let mut ident = String::new();
        while let Some(b) = self.peek() {
            // FF[3] allows lowercase letters in identifiers ("CoPyright");
            // they carry no meaning and are dropped.
            if b.is_ascii_uppercase() {
                ident.push(b as char);
                self.pos += 1;
            } else if b.is_ascii_lowercase() {
                self.pos += 1;
            } else {
                break;
            }
        }
        let mut values = Vec::new();
        loop {
            self.skip_whitespace();
            if self.peek() == Some(b'[') {
                values.push(self.value()?);
            } else {
                break;
            }
        }
        if values.is_empty() {
            return Err(self.error(format!("property {} has no value", ident)));
        }
        Ok((ident, values))
    }

    fn value(&mut self) -> Result<String, SgfError> {
        self.expect(b'[')?;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error("unterminated property value")),
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        None => return Err(self.error("unterminated escape")),
                        // Escaped newline is a soft break and disappears.
                        Some(b'\n') => {
                            self.pos += 1;
                            if self.peek() == Some(b'\r') {
                                self.pos += 1;
                            }
                        }
                        Some(b'\r') => {
                            self.pos += 1;
                            if self.peek() == Some(b'\n') {
                                self.pos += 1;
                            }
                        }
                        Some(b) => {
                            out.push(b as char);
                            self.pos += 1;
                        }
                    }
                }
                Some(b) => {
                    out.push(b as char);
                    self.pos += 1;
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Record assembly
// ---------------------------------------------------------------------------

fn parse_coord(value: &str, offset_hint: usize) -> Result<Option<Coord>, SgfError> {
    if value.is_empty() {
        return Ok(None); // FF[4] pass
    }
    let bytes = value.as_bytes();
    if bytes.len() != 2 {
        return Err(SgfError::Syntax {
            offset: offset_hint,
            message: format!("bad coordinate '{}'", value),
        });
    }
    if value == "tt" {
        return Ok(None); // FF[3] pass on boards <= 19
    }
    let x = bytes[0].wrapping_sub(b'a');
    let y = bytes[1].wrapping_sub(b'a');
    if (x as usize) >= BOARD_SIZE || (y as usize) >= BOARD_SIZE {
        return Err(SgfError::Syntax {
            offset: offset_hint,
            message: format!("coordinate '{}' off the 19x19 board", value),
        });
    }
    Ok(Some(Coord { x, y }))
}

/// Flatten one game tree into the main line: the root node sequence followed
/// by the first child, recursively. Side variations are review material and
/// are skipped.
fn main_line(tree: &RawTree) -> Vec<&RawNode> {
    let mut nodes: Vec<&RawNode> = tree.nodes.iter().collect();
    let mut current = tree;
    while let Some(first) = current.children.first() {
        nodes.extend(first.nodes.iter());
        current = first;
    }
    nodes
}

fn assemble_game(tree: &RawTree, source: String) -> Result<Game, SgfError> {
    let mut record = GameRecord {
        board_size: BOARD_SIZE as u8,
        ..GameRecord::default()
    };
    let mut meta = GameMeta::default();
    let mut last_color: Option<Color> = None;

    for node in main_line(tree) {
        for (ident, values) in &node.properties {
            match ident.as_str() {
                "SZ" => {
                    let size: u32 = values[0].trim().parse().map_err(|_| SgfError::Syntax {
                        offset: 0,
                        message: format!("bad SZ value '{}'", values[0]),
                    })?;
                    if size != BOARD_SIZE as u32 {
                        return Err(SgfError::UnsupportedSize { size });
                    }
                }
                "B" | "W" => {
                    let color = if ident == "B" { Color::Black } else { Color::White };
                    if last_color == Some(color) {
                        return Err(SgfError::InconsistentRecord {
                            detail: format!(
                                "{}: two consecutive {} moves at move {}",
                                source,
                                color,
                                record.moves.len() + 1
                            ),
                        });
                    }
                    last_color = Some(color);
                    let point = parse_coord(values[0].trim(), 0)?;
                    record.moves.push(Move { color, point });
                }
                "AB" => {
                    for v in values {
                        if let Some(c) = parse_coord(v.trim(), 0)? {
                            record.handicap_placements.push(c);
                        }
                    }
                }
                "AW" => {
                    for v in values {
                        if let Some(c) = parse_coord(v.trim(), 0)? {
                            record.white_setup.push(c);
                        }
                    }
                }
                "HA" => {
                    record.handicap = values[0].trim().parse().unwrap_or(0);
                }
                "BR" => meta.black_rank = parse_rank(&values[0]),
                "WR" => meta.white_rank = parse_rank(&values[0]),
                "PB" => meta.black_name = Some(values[0].trim().to_string()),
                "PW" => meta.white_name = Some(values[0].trim().to_string()),
                "RE" => meta.result = Some(values[0].trim().to_string()),
                "DT" => meta.date = Some(values[0].trim().to_string()),
                "KM" => meta.komi = values[0].trim().parse().ok(),
                _ => {} // every other property is ignored
            }
        }
    }

    meta.even_game = record.handicap == 0
        && record.handicap_placements.is_empty()
        && meta.komi.map_or(true, |k| k >= 4.5);
    Ok(Game {
        record,
        meta,
        source,
    })
}

/// Parse all game trees in `text`. One `Game` per top-level tree, main
/// variation only.
pub fn parse_sgf(text: &str) -> Result<Vec<Game>, SgfError> {
    parse_sgf_named(text, "<string>")
}

pub fn parse_sgf_named(text: &str, name: &str) -> Result<Vec<Game>, SgfError> {
    let trees = Parser::new(text).collection()?;
    let multi = trees.len() > 1;
    trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let source = if multi {
                format!("{}#{}", name, i + 1)
            } else {
                name.to_string()
            };
            assemble_game(t, source)
        })
        .collect()
}

/// Serialize a record back to minimal SGF. Only the fields `GameRecord`
/// carries are written; used by the round-trip tests and the synthetic
/// corpus generator.
pub fn write_minimal_sgf(record: &GameRecord, meta: &GameMeta) -> String {
    let mut out = String::from("(;FF[4]GM[1]SZ[19]");
    if record.handicap > 0 {
        out.push_str(&format!("HA[{}]", record.handicap));
    }
    if !record.handicap_placements.is_empty() {
        out.push_str("AB");
        for c in &record.handicap_placements {
            out.push_str(&format!("[{}]", c.sgf()));
        }
    }
    if !record.white_setup.is_empty() {
        out.push_str("AW");
        for c in &record.white_setup {
            out.push_str(&format!("[{}]", c.sgf()));
        }
    }
    if let Some(name) = &meta.black_name {
        out.push_str(&format!("PB[{}]", name));
    }
    if let Some(name) = &meta.white_name {
        out.push_str(&format!("PW[{}]", name));
    }
    if let Some(rank) = &meta.black_rank {
        out.push_str(&format!("BR[{}]", rank.raw));
    }
    if let Some(rank) = &meta.white_rank {
        out.push_str(&format!("WR[{}]", rank.raw));
    }
    if let Some(komi) = meta.komi {
        out.push_str(&format!("KM[{}]", komi));
    }
    if let Some(date) = &meta.date {
        out.push_str(&format!("DT[{}]", date));
    }
    if let Some(result) = &meta.result {
        out.push_str(&format!("RE[{}]", result));
    }
    for mv in &record.moves {
        let tag = match mv.color {
            Color::Black => "B",
            Color::White => "W",
        };
        match mv.point {
            Some(c) => out.push_str(&format!(";{}[{}]", tag, c.sgf())),
            None => out.push_str(&format!(";{}[]", tag)),
        }
    }
    out.push(')');
    out
}

// ---------------------------------------------------------------------------
// Collection scanning
// ---------------------------------------------------------------------------

/// How games are grouped into analysis subjects.
#[derive(Debug, Clone)]
pub enum CollectionFilter {
    /// Group by declared rank; games must be even with both ranks clear.
    ByRank { even_only: bool },
    /// Group by player name (PB/PW), annotating the subject's color.
    ByPlayer,
    /// Like `ByPlayer` but restricted to the given names.
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupKey {
    Rank(i32),
    Player(String),
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Rank(r) => write!(f, "rank:{}", r),
            GroupKey::Player(p) => write!(f, "{}", p),
        }
    }
}

/// One game seen from the analysis subject's side.
#[derive(Debug, Clone)]
pub struct SubjectGame {
    pub game: Game,
    pub color: Color,
}

#[derive(Debug, Default)]
pub struct ScanResult {
    pub groups: BTreeMap<GroupKey, Vec<SubjectGame>>,
    /// Games that failed the filter (missing ranks, handicap, ...).
    pub excluded_games: usize,
    /// Files that failed to parse, skipped with a warning.
    pub skipped_files: usize,
    pub warnings: Vec<String>,
}

fn collect_sgf_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), SgfError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| SgfError::Io {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for entry in entries {
            collect_sgf_files(&entry, out)?;
        }
    } else if path.extension().map_or(false, |e| e == "sgf") {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Scan SGF files (or directories of them) and group the games by analysis
/// subject. Unparseable files are skipped with a warning; empty groups are
/// reported and dropped.
pub fn scan_collection(paths: &[PathBuf], filter: &CollectionFilter) -> Result<ScanResult, SgfError> {
    let mut files = Vec::new();
    for p in paths {
        collect_sgf_files(p, &mut files)?;
    }
    let mut result = ScanResult::default();
    for file in &files {
        let text = match fs::read_to_string(file) {
            Ok(t) => t,
            Err(e) => {
                result.skipped_files += 1;
                result.warnings.push(format!("skipping {}: {}", file.display(), e));
                continue;
            }
        };
        // Full paths keep game ids unique across directories.
        let name = file.display().to_string();
        let games = match parse_sgf_named(&text, &name) {
            Ok(g) => g,
            Err(e) => {
                result.skipped_files += 1;
                result.warnings.push(format!("skipping {}: {}", file.display(), e));
                continue;
            }
        };
        for game in games {
            group_game(game, filter, &mut result);
        }
    }
    if let CollectionFilter::Explicit(names) = filter {
        for name in names {
            let key = GroupKey::Player(name.clone());
            if !result.groups.contains_key(&key) {
                result.warnings.push(format!("group {} is empty, dropped", key));
            }
        }
    }
    Ok(result)
}

fn group_game(game: Game, filter: &CollectionFilter, result: &mut ScanResult) {
    match filter {
        CollectionFilter::ByRank { even_only } => {
            if *even_only && !game.meta.even_game {
                result.excluded_games += 1;
                return;
            }
            let (black, white) = (&game.meta.black_rank, &game.meta.white_rank);
            let (Some(black), Some(white)) = (black, white) else {
                result.excluded_games += 1;
                return;
            };
            let (bv, wv) = (black.value, white.value);
            result
                .groups
                .entry(GroupKey::Rank(bv))
                .or_default()
                .push(SubjectGame {
                    game: game.clone(),
                    color: Color::Black,
                });
            result
                .groups
                .entry(GroupKey::Rank(wv))
                .or_default()
                .push(SubjectGame {
                    game,
                    color: Color::White,
                });
        }
        CollectionFilter::ByPlayer => {
            let names: Vec<(Option<String>, Color)> = vec![
                (game.meta.black_name.clone(), Color::Black),
                (game.meta.white_name.clone(), Color::White),
            ];
            let mut used = false;
            for (name, color) in names {
                if let Some(name) = name {
                    result
                        .groups
                        .entry(GroupKey::Player(name))
                        .or_default()
                        .push(SubjectGame {
                            game: game.clone(),
                            color,
                        });
                    used = true;
                }
            }
            if !used {
                result.excluded_games += 1;
            }
        }
        CollectionFilter::Explicit(list) => {
            let mut used = false;
            for (name, color) in [
                (game.meta.black_name.clone(), Color::Black),
                (game.meta.white_name.clone(), Color::White),
            ] {
                if let Some(name) = name {
                    if list.iter().any(|n| n == &name) {
                        result
                            .groups
                            .entry(GroupKey::Player(name))
                            .or_default()
                            .push(SubjectGame {
                                game: game.clone(),
                                color,
                            });
                        used = true;
                    }
                }
            }
            if !used {
                result.excluded_games += 1;
            }
        }
    }
}
