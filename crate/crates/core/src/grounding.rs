//! Rule-based semantic parser from observation text to crisp propositions.
//!
//! The grounder reads only the observation text and its own episode memory;
//! it never looks at the hidden level layout.

use std::collections::{BTreeMap, BTreeSet};

use crate::logic::{PropositionState, TruthBounds};
use crate::world::{Action, Direction, RoomId, COIN_SENTENCE};

pub const VISITED_ALL: &str = "visited_all_connected_rooms";
pub const FOUND_COIN: &str = "found_coin_in_the_room";

pub fn found_room(dir: Direction) -> String {
    format!("found_{}_room", dir.name())
}

pub fn visited_room(dir: Direction) -> String {
    format!("visited_{}_room", dir.name())
}

pub fn no_coin_in_room(dir: Direction) -> String {
    format!("no_coin_in_{}_room", dir.name())
}

/// What one observation says, sentence by sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedObservation {
    pub room: Option<RoomId>,
    pub exits: [bool; 4],
    pub coin: bool,
    /// Sentences that matched no template.
    pub unrecognized: usize,
}

pub fn parse_observation(text: &str) -> ParsedObservation {
    let mut parsed = ParsedObservation::default();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(id) = line
            .strip_prefix("-= Room ")
            .and_then(|rest| rest.strip_suffix(" =-"))
            .and_then(|id| id.parse().ok())
        {
            parsed.room = Some(RoomId(id));
        } else if line == COIN_SENTENCE {
            parsed.coin = true;
        } else if let Some(dir) = Direction::ALL.into_iter().find(|d| line == d.exit_sentence()) {
            parsed.exits[dir.index()] = true;
        } else {
            parsed.unrecognized += 1;
        }
    }
    parsed
}

/// Per-episode knowledge: where the agent has been, which of those rooms
/// had no coin, and which exits lead where.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundingMemory {
    pub visited: BTreeSet<RoomId>,
    pub coin_seen_absent: BTreeSet<RoomId>,
    pub adjacency: BTreeMap<(RoomId, Direction), RoomId>,
}

impl GroundingMemory {
    /// Fresh memory for an episode starting in `room`.
    pub fn start(room: RoomId, coin_present: bool) -> Self {
        let mut memory = Self::default();
        memory.enter(room, coin_present);
        memory
    }

    fn enter(&mut self, room: RoomId, coin_present: bool) {
        self.visited.insert(room);
        if !coin_present {
            self.coin_seen_absent.insert(room);
        }
    }

    /// Records a transition `prev_room --action--> new_room`. Exits are
    /// symmetric, so the reverse adjacency is recorded too.
    pub fn update(&mut self, prev_room: RoomId, action: Action, new_room: RoomId, coin_present: bool) {
        if let Some(dir) = action.direction() {
            if prev_room != new_room {
                self.adjacency.insert((prev_room, dir), new_room);
                self.adjacency.insert((new_room, dir.opposite()), prev_room);
            }
        }
        self.enter(new_room, coin_present);
    }

    pub fn neighbour(&self, room: RoomId, dir: Direction) -> Option<RoomId> {
        self.adjacency.get(&(room, dir)).copied()
    }
}

/// Functional form of [`GroundingMemory::update`].
pub fn update_memory(
    memory: &GroundingMemory,
    prev_room: RoomId,
    action: Action,
    new_room: RoomId,
    coin_present: bool,
) -> GroundingMemory {
    let mut next = memory.clone();
    next.update(prev_room, action, new_room, coin_present);
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grounded {
    pub state: PropositionState,
    pub room: Option<RoomId>,
    pub unrecognized: usize,
}

/// Emits, for every direction, `found_<d>_room`, `visited_<d>_room` and
/// `no_coin_in_<d>_room`, plus `visited_all_connected_rooms` and
/// `found_coin_in_the_room`. All values are crisp. Action propositions are
/// left out so they stay unknown.
pub fn ground(text: &str, memory: &GroundingMemory) -> Grounded {
    let parsed = parse_observation(text);
    if parsed.unrecognized > 0 {
        log::warn!("grounding skipped {} unrecognized sentence(s)", parsed.unrecognized);
    }
    let mut state = PropositionState::new();
    let mut all_visited = true;
    for dir in Direction::ALL {
        let found = parsed.exits[dir.index()];
        let neighbour = parsed.room.and_then(|r| memory.neighbour(r, dir));
        let visited = found && neighbour.is_some_and(|n| memory.visited.contains(&n));
        let no_coin = found && neighbour.is_some_and(|n| memory.coin_seen_absent.contains(&n));
        all_visited &= !found || visited;
        state.set(found_room(dir), TruthBounds::crisp(found));
        state.set(visited_room(dir), TruthBounds::crisp(visited));
        state.set(no_coin_in_room(dir), TruthBounds::crisp(no_coin));
    }
    state.set(VISITED_ALL, TruthBounds::crisp(all_visited));
    state.set(FOUND_COIN, TruthBounds::crisp(parsed.coin));
    Grounded { state, room: parsed.room, unrecognized: parsed.unrecognized }
}
