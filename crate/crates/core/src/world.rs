//! A minimal coin-collector text game.
//!
//! Levels are a corridor of rooms laid out by a seeded self-avoiding walk on
//! a grid, with optional dead-end rooms hanging off the corridor. The agent
//! starts at one end, the coin sits at the other, and the only reward is 1
//! for taking the coin.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const GENERATION_ATTEMPTS: usize = 200;
pub const COIN_SENTENCE: &str = "There is a coin on the floor.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("cannot place level: {0}")]
    Infeasible(String),
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("level snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error("episode already finished")]
    EpisodeFinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoomId(pub usize);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }

    fn offset(self) -> (i32, i32) {
        match self {
            Direction::North => (0, 1),
            Direction::South => (0, -1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        }
    }

    /// The observation sentence announcing an exit in this direction.
    pub fn exit_sentence(self) -> String {
        format!("There is an unguarded exit to the {}.", self.name())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown direction `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    GoNorth,
    GoSouth,
    GoEast,
    GoWest,
    TakeCoin,
}

impl Action {
    /// Canonical order, also the tie-break order everywhere.
    pub const ALL: [Action; 5] = [Action::GoNorth, Action::GoSouth, Action::GoEast, Action::GoWest, Action::TakeCoin];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn go(dir: Direction) -> Action {
        Self::ALL[dir.index()]
    }

    pub fn direction(self) -> Option<Direction> {
        Direction::ALL.get(self.index()).copied()
    }

    /// Name of the logic proposition standing for this action.
    pub fn proposition(self) -> &'static str {
        match self {
            Action::GoNorth => "go_north",
            Action::GoSouth => "go_south",
            Action::GoEast => "go_east",
            Action::GoWest => "go_west",
            Action::TakeCoin => "take_coin",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.proposition())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub position: (i32, i32),
    /// Indexed by [`Direction::index`].
    pub exits: [Option<RoomId>; 4],
}

impl Room {
    pub fn exit(&self, dir: Direction) -> Option<RoomId> {
        self.exits[dir.index()]
    }

    pub fn degree(&self) -> usize {
        self.exits.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomGraph {
    pub rooms: Vec<Room>,
    pub start_room: RoomId,
    pub coin_room: RoomId,
}

impl RoomGraph {
    pub fn room(&self, id: RoomId) -> &Room {
        &self.rooms[id.0]
    }

    pub fn len(&self) -> usize {
        self.rooms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rooms.is_empty()
    }

    /// Checks exit symmetry, self-loops, id ranges, connectivity and that the
    /// coin is not in the start room.
    pub fn validate(&self) -> Result<(), WorldError> {
        let invalid = |m: String| Err(WorldError::InvalidLevel(m));
        let n = self.rooms.len();
        if n < 2 {
            return invalid("a level needs at least two rooms".into());
        }
        if self.start_room.0 >= n || self.coin_room.0 >= n {
            return invalid("start or coin room out of range".into());
        }
        if self.start_room == self.coin_room {
            return invalid("coin cannot start in the start room".into());
        }
        for (i, room) in self.rooms.iter().enumerate() {
            for dir in Direction::ALL {
                let Some(other) = room.exit(dir) else { continue };
                if other.0 >= n {
                    return invalid(format!("room {i} exits {} to missing room {other}", dir.name()));
                }
                if other.0 == i {
                    return invalid(format!("room {i} has a self-loop"));
                }
                if self.rooms[other.0].exit(dir.opposite()) != Some(RoomId(i)) {
                    return invalid(format!("exit {} of room {i} is not mirrored by room {other}", dir.name()));
                }
            }
        }
        if self.reachable_from(self.start_room).len() != n {
            return invalid("level is not connected".into());
        }
        Ok(())
    }

    fn reachable_from(&self, from: RoomId) -> BTreeSet<RoomId> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(r) = queue.pop_front() {
            for next in self.room(r).exits.iter().flatten() {
                if seen.insert(*next) {
                    queue.push_back(*next);
                }
            }
        }
        seen
    }

    /// Shortest sequence of moves from `from` to `to`.
    pub fn shortest_path(&self, from: RoomId, to: RoomId) -> Option<Vec<Direction>> {
        let mut prev: Vec<Option<(RoomId, Direction)>> = vec![None; self.rooms.len()];
        let mut seen = vec![false; self.rooms.len()];
        seen[from.0] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(r) = queue.pop_front() {
            if r == to {
                let mut path = Vec::new();
                let mut cur = to;
                while let Some((p, d)) = prev[cur.0] {
                    path.push(d);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for dir in Direction::ALL {
                if let Some(next) = self.room(r).exit(dir) {
                    if !seen[next.0] {
                        seen[next.0] = true;
                        prev[next.0] = Some((r, dir));
                        queue.push_back(next);
                    }
                }
            }
        }
        None
    }

    /// Versioned text snapshot used for regression fixtures.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from("coin-world-level 1\n");
        out.push_str(&format!("start {}\ncoin {}\n", self.start_room, self.coin_room));
        for (i, room) in self.rooms.iter().enumerate() {
            out.push_str(&format!("room {i} {} {}", room.position.0, room.position.1));
            for dir in Direction::ALL {
                if let Some(other) = room.exit(dir) {
                    out.push_str(&format!(" {}={other}", dir.name()));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<RoomGraph, WorldError> {
        let mut start = None;
        let mut coin = None;
        let mut rooms: Vec<Room> = Vec::new();
        let mut header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| WorldError::Snapshot { line, message };
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("expected a number, found `{s}`")));
            match fields.as_slice() {
                ["coin-world-level", version] => {
                    if *version != "1" {
                        return Err(err(format!("unsupported snapshot version {version}")));
                    }
                    header = true;
                }
                _ if !header => return Err(err("missing `coin-world-level 1` header".into())),
                ["start", id] => start = Some(RoomId(num(id)?)),
                ["coin", id] => coin = Some(RoomId(num(id)?)),
                ["room", id, x, y, exits @ ..] => {
                    if num(id)? != rooms.len() {
                        return Err(err(format!("rooms must be listed in order, expected {}", rooms.len())));
                    }
                    let coord = |s: &str| s.parse::<i32>().map_err(|_| err(format!("bad coordinate `{s}`")));
                    let mut room = Room { position: (coord(x)?, coord(y)?), exits: [None; 4] };
                    for exit in exits {
                        let (dir, target) = exit
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected `direction=room`, found `{exit}`")))?;
                        let dir: Direction = dir.parse().map_err(err)?;
                        room.exits[dir.index()] = Some(RoomId(num(target)?));
                    }
                    rooms.push(room);
                }
                _ => return Err(err(format!("unrecognized line `{raw}`"))),
            }
        }
        let missing = |what: &str| WorldError::Snapshot { line: 0, message: format!("missing `{what}` line") };
        let graph = RoomGraph {
            rooms,
            start_room: start.ok_or_else(|| missing("start"))?,
            coin_room: coin.ok_or_else(|| missing("coin"))?,
        };
        graph.validate()?;
        Ok(graph)
    }
}

/// Generates a corridor of `length + 1` rooms from start to coin plus
/// `distractors` dead-end rooms attached to interior corridor rooms.
/// Deterministic in `(length, distractors, seed)`.
pub fn generate_level(length: usize, distractors: usize, seed: u64) -> Result<RoomGraph, WorldError> {
    if length == 0 {
        return Err(WorldError::Infeasible("corridor length must be at least 1".into()));
    }
    if distractors > 0 && length < 2 {
        return Err(WorldError::Infeasible("dead ends need an interior corridor room".into()));
    }
    // Each interior room keeps at most two exits free for dead ends.
    if distractors > 2 * (length - 1) {
        return Err(WorldError::Infeasible(format!(
            "{distractors} dead ends exceed the {} free sides of a length-{length} corridor",
            2 * (length - 1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..GENERATION_ATTEMPTS {
        let mut rooms = vec![Room { position: (0, 0), exits: [None; 4] }];
        let mut occupied = HashSet::from([(0, 0)]);
        let link = |rooms: &mut Vec<Room>, from: usize, dir: Direction| {
            let (x, y) = rooms[from].position;
            let (dx, dy) = dir.offset();
            let id = rooms.len();
            let mut room = Room { position: (x + dx, y + dy), exits: [None; 4] };
            room.exits[dir.opposite().index()] = Some(RoomId(from));
            rooms[from].exits[dir.index()] = Some(RoomId(id));
            rooms.push(room);
        };
        for step in 0..length {
            let (x, y) = rooms[step].position;
            let free: Vec<Direction> = Direction::ALL
                .into_iter()
                .filter(|d| {
                    let (dx, dy) = d.offset();
                    !occupied.contains(&(x + dx, y + dy))
                })
                .collect();
            let Some(&dir) = free.choose(&mut rng) else { continue 'attempt };
            link(&mut rooms, step, dir);
            occupied.insert(rooms[step + 1].position);
        }
        for _ in 0..distractors {
            let slots: Vec<(usize, Direction)> = (1..length)
                .flat_map(|i| Direction::ALL.into_iter().map(move |d| (i, d)))
                .filter(|&(i, d)| {
                    let (x, y) = rooms[i].position;
                    let (dx, dy) = d.offset();
                    rooms[i].exit(d).is_none() && !occupied.contains(&(x + dx, y + dy))
                })
                .collect();
            let Some(&(at, dir)) = slots.choose(&mut rng) else { continue 'attempt };
            link(&mut rooms, at, dir);
            occupied.insert(rooms.last().expect("just pushed").position);
        }
        let graph = RoomGraph { rooms, start_room: RoomId(0), coin_room: RoomId(length) };
        debug_assert!(graph.validate().is_ok());
        return Ok(graph);
    }
    Err(WorldError::Infeasible(format!(
        "no layout for length {length} with {distractors} dead ends after {GENERATION_ATTEMPTS} attempts"
    )))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    pub current_room: RoomId,
    pub visited: BTreeSet<RoomId>,
    pub coin_taken: bool,
    pub steps: usize,
    /// Visited rooms that turned out not to hold the coin.
    pub coin_seen_absent: BTreeSet<RoomId>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub text: String,
    pub reward: f64,
    pub done: bool,
}

/// Title line naming the room, in the style of text-adventure headers.
pub fn room_title(room: RoomId) -> String {
    format!("-= Room {room} =-")
}

/// Room title, one sentence per exit in north/south/east/west order, then
/// the coin sentence when the untaken coin is here. One item per line.
pub fn render_text(graph: &RoomGraph, state: &GameState) -> String {
    let room = graph.room(state.current_room);
    let mut lines = vec![room_title(state.current_room)];
    lines.extend(Direction::ALL.into_iter().filter(|d| room.exit(*d).is_some()).map(Direction::exit_sentence));
    if state.current_room == graph.coin_room && !state.coin_taken {
        lines.push(COIN_SENTENCE.to_string());
    }
    lines.join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoinWorld {
    graph: RoomGraph,
    max_steps: usize,
}

impl CoinWorld {
    pub fn new(graph: RoomGraph, max_steps: usize) -> Result<Self, WorldError> {
        graph.validate()?;
        if max_steps == 0 {
            return Err(WorldError::InvalidLevel("max_steps must be at least 1".into()));
        }
        Ok(Self { graph, max_steps })
    }

    pub fn graph(&self) -> &RoomGraph {
        &self.graph
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn reset(&self) -> (GameState, Observation) {
        let start = self.graph.start_room;
        let state = GameState {
            current_room: start,
            visited: BTreeSet::from([start]),
            coin_taken: false,
            steps: 0,
            coin_seen_absent: BTreeSet::from([start]),
            done: false,
        };
        let obs = Observation { text: render_text(&self.graph, &state), reward: 0.0, done: false };
        (state, obs)
    }

    /// Pure transition. Blocked moves and misplaced `TakeCoin` are legal
    /// no-ops that still cost a step.
    pub fn step(&self, state: &GameState, action: Action) -> Result<(GameState, Observation), WorldError> {
        if state.done {
            return Err(WorldError::EpisodeFinished);
        }
        let mut next = state.clone();
        next.steps += 1;
        let mut reward = 0.0;
        match action.direction() {
            Some(dir) => {
                if let Some(room) = self.graph.room(state.current_room).exit(dir) {
                    next.current_room = room;
                    next.visited.insert(room);
                    if room != self.graph.coin_room {
                        next.coin_seen_absent.insert(room);
                    }
                }
            }
            None => {
                if state.current_room == self.graph.coin_room && !state.coin_taken {
                    next.coin_taken = true;
                    reward = 1.0;
                }
            }
        }
        next.done = next.coin_taken || next.steps >= self.max_steps;
        let obs = Observation { text: render_text(&self.graph, &next), reward, done: next.done };
        Ok((next, obs))
    }
}
