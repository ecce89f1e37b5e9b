//! Model-free Q-learning baseline over grounded propositional features.

mod qnet;

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grounding::{found_room, no_coin_in_room, FOUND_COIN, VISITED_ALL};
use crate::logic::PropositionState;
use crate::world::{Action, Direction, RoomId};

pub use qnet::{learn_step, QFunction};

/// Length of [`FeatureVector`].
pub const FEATURE_LEN: usize = 14;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Binary input to the Q-function, in this fixed order:
///
/// | index | feature |
/// |-------|---------|
/// | 0–3   | `found_<d>_room` for north, south, east, west |
/// | 4–7   | `no_coin_in_<d>_room`, same order |
/// | 8     | `visited_all_connected_rooms` |
/// | 9     | `found_coin_in_the_room` |
/// | 10–13 | blocked north, south, east, west (no exit) |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector([f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn from_array(values: [f64; FEATURE_LEN]) -> Self {
        Self(values)
    }

    pub fn from_state(state: &PropositionState) -> Self {
        let mut v = [0.0; FEATURE_LEN];
        let bit = |name: &str| if state.is_true(name) { 1.0 } else { 0.0 };
        for dir in Direction::ALL {
            let i = dir.index();
            v[i] = bit(&found_room(dir));
            v[4 + i] = bit(&no_coin_in_room(dir));
            v[10 + i] = 1.0 - v[i];
        }
        v[8] = bit(VISITED_ALL);
        v[9] = bit(FOUND_COIN);
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub features: FeatureVector,
    pub action: Action,
    /// Environment reward plus any exploration bonus.
    pub reward: f64,
    pub next_features: FeatureVector,
    /// True only for real terminal states (coin taken); timeouts bootstrap.
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QInit {
    #[default]
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which ε falls linearly from start to end.
    pub epsilon_decay_episodes: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between target-network syncs.
    pub target_sync: usize,
    /// Reward added on the first arrival in a room each episode; 0 disables it.
    pub novelty_bonus: f64,
    pub hidden_units: usize,
    pub q_init: QInit,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_episodes: 20,
            learning_rate: 0.01,
            gamma: 0.9,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync: 100,
            novelty_bonus: 0.1,
            hidden_units: 64,
            q_init: QInit::Random,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon_end) || !(0.0..=1.0).contains(&self.epsilon_start) {
            return fail("epsilon values must lie in [0, 1]");
        }
        if self.epsilon_end > self.epsilon_start {
            return fail("epsilon_end must not exceed epsilon_start");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return fail("need 0 < batch_size <= replay_capacity");
        }
        if self.target_sync == 0 || self.hidden_units == 0 {
            return fail("target_sync and hidden_units must be positive");
        }
        if !(self.novelty_bonus >= 0.0 && self.novelty_bonus.is_finite()) {
            return fail("novelty_bonus must be a finite non-negative number");
        }
        Ok(())
    }

    /// Linear ε schedule.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.epsilon_decay_episodes == 0 {
            return self.epsilon_end;
        }
        let frac = (episode as f64 / self.epsilon_decay_episodes as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn init_q<R: Rng + ?Sized>(&self, rng: &mut R) -> QFunction {
        match self.q_init {
            QInit::Random => QFunction::random(self.hidden_units, rng),
            QInit::Zero => QFunction::zeros(self.hidden_units),
        }
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// FIFO experience replay.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Transition> {
        (0..n).map(|_| self.items[rng.gen_range(0..self.items.len())].clone()).collect()
    }
}

/// Actions by descending Q; ties keep the canonical action order.
pub fn ranked_actions(q: &[f64; Action::COUNT]) -> [Action; Action::COUNT] {
    let mut order = Action::ALL;
    order.sort_by(|a, b| q[b.index()].total_cmp(&q[a.index()]));
    order
}

/// ε-greedy: with probability ε a uniform action, otherwise the greedy one.
pub fn select_baseline<R: Rng + ?Sized>(qf: &QFunction, features: &FeatureVector, epsilon: f64, rng: &mut R) -> Action {
    let zeta: f64 = rng.gen();
    if zeta < epsilon {
        Action::ALL[rng.gen_range(0..Action::COUNT)]
    } else {
        ranked_actions(&qf.q_values(features))[0]
    }
}

/// Arrivals per room within the current episode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpisodeVisits {
    counts: HashMap<RoomId, u32>,
}

impl EpisodeVisits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn arrive(&mut self, room: RoomId) -> u32 {
        let c = self.counts.entry(room).or_insert(0);
        *c += 1;
        *c
    }

    pub fn count(&self, room: RoomId) -> u32 {
        self.counts.get(&room).copied().unwrap_or(0)
    }

    pub fn clear(&mut self) {
        self.counts.clear();
    }
}

/// `coefficient` when `room` has been arrived at exactly once this episode.
pub fn novelty_bonus(room: RoomId, visits: &EpisodeVisits, coefficient: f64) -> f64 {
    if visits.count(room) == 1 {
        coefficient
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_digest: String,
    pub hidden_units: usize,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(qf: &QFunction, config: &AgentConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_digest: config.digest(),
            hidden_units: qf.hidden(),
            params: qf.params(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parses and checks version and config digest.
    pub fn restore(json: &str, config: &AgentConfig) -> Result<QFunction, AgentError> {
        let ck: Checkpoint = serde_json::from_str(json).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        if ck.config_digest != config.digest() {
            return Err(AgentError::Checkpoint("config digest mismatch".into()));
        }
        let mut qf = QFunction::zeros(ck.hidden_units);
        qf.set_params(&ck.params).map_err(AgentError::Checkpoint)?;
        Ok(qf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::TruthBounds;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn feature_layout() {
        let state = PropositionState::new()
            .with("found_east_room", TruthBounds::TRUE)
            .with("no_coin_in_north_room", TruthBounds::TRUE)
            .with(VISITED_ALL, TruthBounds::FALSE)
            .with(FOUND_COIN, TruthBounds::TRUE);
        let f = FeatureVector::from_state(&state);
        let expected = [0., 0., 1., 0., 1., 0., 0., 0., 0., 1., 1., 1., 0., 1.];
        assert_eq!(f.as_slice(), &expected);
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(ranked_actions(&[0.0; 5]), Action::ALL);
        assert_eq!(ranked_actions(&[0.1, 0.2, 0.0, 0.3, 0.9])[0], Action::TakeCoin);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let q: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let ranked = ranked_actions(&q);
            let mut oracle: Vec<(f64, usize)> = q.iter().copied().zip(0..).collect();
            oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let oracle: Vec<Action> = oracle.into_iter().map(|(_, i)| Action::ALL[i]).collect();
            assert_eq!(ranked.to_vec(), oracle);
        }
    }

    #[test]
    fn greedy_and_seeded_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut qf = QFunction::zeros(4);
        let mut p = qf.params();
        let n = p.len();
        p[n - 2] = 1.0; // output bias of GoWest
        qf.set_params(&p).unwrap();
        let f = FeatureVector::from_array([0.0; FEATURE_LEN]);
        for _ in 0..50 {
            assert_eq!(select_baseline(&qf, &f, 0.0, &mut rng), Action::GoWest);
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| select_baseline(&qf, &f, 0.5, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn replay_is_fifo_and_bounded() {
        let f = FeatureVector::from_array([0.0; FEATURE_LEN]);
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(Transition { features: f, action: Action::GoNorth, reward: f64::from(i), next_features: f, done: false });
            assert!(buf.len() <= 3);
        }
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn novelty_examples() {
        let mut visits = EpisodeVisits::new();
        visits.arrive(RoomId(2));
        assert_eq!(novelty_bonus(RoomId(2), &visits, 0.25), 0.25);
        visits.arrive(RoomId(2));
        assert_eq!(novelty_bonus(RoomId(2), &visits, 0.25), 0.0);
        visits.arrive(RoomId(3));
        assert_eq!(novelty_bonus(RoomId(3), &visits, 0.0), 0.0);
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = AgentConfig::default();
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(10) - 0.55).abs() < 1e-12);
        assert!((cfg.epsilon(1000) - 0.1).abs() < 1e-12);
        cfg.validate().unwrap();
        assert!(AgentConfig { gamma: 0.0, ..AgentConfig::default() }.validate().is_err());
        assert!(AgentConfig { epsilon_end: 0.5, epsilon_start: 0.2, ..AgentConfig::default() }.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = AgentConfig::default();
        let qf = QFunction::random(cfg.hidden_units, &mut ChaCha8Rng::seed_from_u64(1));
        let json = Checkpoint::new(&qf, &cfg).to_json();
        assert_eq!(Checkpoint::restore(&json, &cfg).unwrap(), qf);
        let other = AgentConfig { gamma: 0.5, ..cfg };
        assert!(Checkpoint::restore(&json, &other).is_err());
    }
}
