//! Slippery Frozen Lake.
//!
//! Actions are 0 = left, 1 = down, 2 = right, 3 = up. The agent moves in the
//! intended direction or either perpendicular one with probability 1/3 each;
//! moves off the grid leave it in place. Holes end the episode as a loss, the
//! goal as a win, and running out of steps counts as a loss.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FitnessEstimate, FitnessFunction};
use crate::genome::{Genome, GenomeSpec};
use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_GAMES: usize = 2000;
pub const DEFAULT_MAX_STEPS: usize = 200;
pub const ACTION_NAMES: [&str; 4] = ["left", "down", "right", "up"];

pub const STANDARD_8X8: [&str; 8] = [
    "SFFFFFFF", "FFFFFFFF", "FFFHFFFF", "FFFFFHFF", "FFFHFFFF", "FHHFFFHF", "FHFFHFHF",
    "FFFHFFFG",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tile {
    Start,
    Frozen,
    Hole,
    Goal,
}

impl Tile {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'S' => Some(Tile::Start),
            'F' => Some(Tile::Frozen),
            'H' => Some(Tile::Hole),
            'G' => Some(Tile::Goal),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Tile::Start => 'S',
            Tile::Frozen => 'F',
            Tile::Hole => 'H',
            Tile::Goal => 'G',
        }
    }

    fn is_terminal(self) -> bool {
        matches!(self, Tile::Hole | Tile::Goal)
    }
}

/// A rectangular lake. Every non-terminal tile gets a gene index in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LakeMap {
    rows: usize,
    cols: usize,
    tiles: Vec<Tile>,
    frozen_index: Vec<Option<usize>>,
    indexable: usize,
    start: usize,
}

impl LakeMap {
    pub fn standard() -> Self {
        Self::from_rows(&STANDARD_8X8).expect("built-in map is valid")
    }

    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Map("no rows".into()));
        }
        let cols = rows[0].as_ref().chars().count();
        if cols == 0 {
            return Err(Error::Map("empty row".into()));
        }
        let mut tiles = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != cols {
                return Err(Error::Map(format!("row {r} has a different width")));
            }
            for c in row.chars() {
                tiles.push(
                    Tile::from_char(c)
                        .ok_or_else(|| Error::Map(format!("unknown tile `{c}` in row {r}")))?,
                );
            }
        }
        let count = |t: Tile| tiles.iter().filter(|&&x| x == t).count();
        if count(Tile::Start) != 1 || count(Tile::Goal) != 1 {
            return Err(Error::Map("need exactly one S and one G".into()));
        }
        let mut indexable = 0;
        let frozen_index = tiles
            .iter()
            .map(|t| {
                (!t.is_terminal()).then(|| {
                    indexable += 1;
                    indexable - 1
                })
            })
            .collect();
        let start = tiles.iter().position(|&t| t == Tile::Start).unwrap();
        Ok(Self {
            rows: rows.len(),
            cols,
            tiles,
            frozen_index,
            indexable,
            start,
        })
    }

    /// Parses the text format: one line per row over `S`, `F`, `H`, `G`.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile(&self, pos: usize) -> Tile {
        self.tiles[pos]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Gene index of the tile at `pos`, `None` for holes and the goal.
    pub fn frozen_index(&self, pos: usize) -> Option<usize> {
        self.frozen_index[pos]
    }

    /// Number of tiles an action can be taken from (the genome length).
    pub fn indexable(&self) -> usize {
        self.indexable
    }

    pub fn genome_spec(&self) -> GenomeSpec {
        GenomeSpec {
            length: self.indexable,
            alphabet_size: 4,
        }
    }

    /// Tile reached by moving from `pos` in direction `dir`.
    pub fn step(&self, pos: usize, dir: u8) -> usize {
        let (r, c) = (pos / self.cols, pos % self.cols);
        let (r, c) = match dir {
            0 => (r, c.saturating_sub(1)),
            1 => ((r + 1).min(self.rows - 1), c),
            2 => (r, (c + 1).min(self.cols - 1)),
            3 => (r.saturating_sub(1), c),
            _ => panic!("invalid action {dir}"),
        };
        r * self.cols + c
    }

    /// The three equally likely destinations of taking `action` at `pos`:
    /// the intended direction and both perpendicular ones.
    pub fn destinations(&self, pos: usize, action: u8) -> [usize; 3] {
        [
            self.step(pos, (action + 3) % 4),
            self.step(pos, action),
            self.step(pos, (action + 1) % 4),
        ]
    }

    /// Per-tile destinations under a fixed policy.
    fn policy_table(&self, policy: &Genome) -> Result<Vec<[usize; 3]>> {
        self.genome_spec().check(policy)?;
        Ok((0..self.tiles.len())
            .map(|pos| match self.frozen_index[pos] {
                Some(i) => self.destinations(pos, policy.genes[i]),
                None => [pos; 3],
            })
            .collect())
    }
}

impl fmt::Display for LakeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: String = self.tiles[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|t| t.as_char())
                .collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// Runs one episode; `true` on reaching the goal.
fn play_episode<R: Rng + ?Sized>(
    map: &LakeMap,
    table: &[[usize; 3]],
    max_steps: usize,
    rng: &mut R,
) -> bool {
    let mut pos = map.start;
    for _ in 0..max_steps {
        pos = table[pos][rng.gen_range(0..3)];
        match map.tiles[pos] {
            Tile::Goal => return true,
            Tile::Hole => return false,
            _ => {}
        }
    }
    false
}

pub fn frozen_lake_fitness<R: Rng + ?Sized>(
    map: &LakeMap,
    policy: &Genome,
    games: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<FitnessEstimate> {
    if games == 0 {
        return Err(Error::invalid("games must be at least 1"));
    }
    let table = map.policy_table(policy)?;
    let wins = (0..games)
        .filter(|_| play_episode(map, &table, max_steps, rng))
        .count();
    Ok(FitnessEstimate::from_score(wins as i64, games))
}

/// Probability of reaching the goal from every tile under `policy`.
///
/// With `max_steps = Some(t)` this is the probability of arriving within `t`
/// moves. Unbounded values solve the absorbing-chain linear system over the
/// tiles that can reach the goal at all; tiles that cannot (including closed
/// loops that never absorb) are worth 0.
pub fn win_probabilities(
    map: &LakeMap,
    policy: &Genome,
    max_steps: Option<usize>,
) -> Result<Vec<f64>> {
    let table = map.policy_table(policy)?;
    let n = map.tiles.len();
    let terminal_value = |pos: usize| match map.tiles[pos] {
        Tile::Goal => Some(1.0),
        Tile::Hole => Some(0.0),
        _ => None,
    };

    if let Some(horizon) = max_steps {
        let mut v: Vec<f64> = (0..n).map(|p| terminal_value(p).unwrap_or(0.0)).collect();
        for _ in 0..horizon {
            v = (0..n)
                .map(|p| {
                    terminal_value(p).unwrap_or_else(|| {
                        table[p].iter().map(|&d| v[d]).sum::<f64>() / 3.0
                    })
                })
                .collect();
        }
        return Ok(v);
    }

    // Tiles with a positive-probability path to the goal.
    let mut reaches = vec![false; n];
    for (p, r) in reaches.iter_mut().enumerate() {
        *r = map.tiles[p] == Tile::Goal;
    }
    loop {
        let mut changed = false;
        for p in 0..n {
            if !reaches[p] && !map.tiles[p].is_terminal() && table[p].iter().any(|&d| reaches[d]) {
                reaches[p] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let transient: Vec<usize> = (0..n)
        .filter(|&p| reaches[p] && !map.tiles[p].is_terminal())
        .collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &p) in transient.iter().enumerate() {
        slot[p] = i;
    }
    let m = transient.len();
    let mut v: Vec<f64> = (0..n).map(|p| terminal_value(p).unwrap_or(0.0)).collect();
    if m == 0 {
        return Ok(v);
    }
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &p) in transient.iter().enumerate() {
        for &d in &table[p] {
            if map.tiles[d] == Tile::Goal {
                b[i] += 1.0 / 3.0;
            } else if slot[d] != usize::MAX {
                a[(i, slot[d])] -= 1.0 / 3.0;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::invalid("absorbing system is singular"))?;
    for (i, &p) in transient.iter().enumerate() {
        v[p] = x[i];
    }
    Ok(v)
}

/// Exact win probability from the start tile.
pub fn frozen_lake_exact_value(
    map: &LakeMap,
    policy: &Genome,
    max_steps: Option<usize>,
) -> Result<f64> {
    Ok(win_probabilities(map, policy, max_steps)?[map.start])
}

/// Frozen Lake as a fitness function: `wins / games`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenLake {
    pub map: LakeMap,
    pub games: usize,
    pub max_steps: usize,
}

impl Default for FrozenLake {
    fn default() -> Self {
        Self {
            map: LakeMap::standard(),
            games: DEFAULT_GAMES,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl FitnessFunction for FrozenLake {
    fn spec(&self) -> GenomeSpec {
        self.map.genome_spec()
    }

    fn evaluate(&self, genome: &Genome, rng: &mut rng::Rng) -> Result<f64> {
        frozen_lake_fitness(&self.map, genome, self.games, self.max_steps, rng).map(|f| f.normalized)
    }
}
