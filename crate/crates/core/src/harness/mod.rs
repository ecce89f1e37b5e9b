//! Experiment driver: baseline, shielded and guided agents on coin-world.

mod compare;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    learn_step, novelty_bonus, select_baseline, AgentConfig, AgentError, EpisodeVisits, FeatureVector, ReplayBuffer,
    Transition,
};
use crate::constraint::{candidate_ranking, guide_pick, shield_filter, GuideDistribution, LogicAdvisor, ShieldConfig, TruthTerm};
use crate::grounding::{ground, parse_observation, GroundingMemory};
use crate::logic::{InferenceConfig, LogicError, LogicGraph, UnknownNames};
use crate::rules::{default_knowledge, parse_rules, RuleError};
use crate::world::{generate_level, Action, CoinWorld, RoomId, WorldError};

pub use compare::{
    compare, read_csv, summarize, write_csv, ComparisonReport, MethodSummary, SeedSummary, CSV_HEADER,
};
pub use metrics::{episodes_to_threshold, mean, median, moving_average, std_dev, CurveSummary};

/// Trailing window of the reward moving average.
pub const DEFAULT_WINDOW: usize = 5;
/// Moving-average reward that counts as converged.
pub const DEFAULT_THRESHOLD: f64 = 0.9;
/// Environment variable that caps the worker pool for comparisons.
pub const WORKERS_ENV: &str = "LNN_RL_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("rules: {0}")]
    Rules(#[from] RuleError),
    #[error("grounding: {0}")]
    Grounding(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Shield,
    Guide,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Baseline, Method::Shield, Method::Guide];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Shield => "shield",
            Method::Guide => "guide",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected baseline, shield or guide)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelConfig {
    pub length: usize,
    pub distractors: usize,
    /// Each run plays the level generated from `seed + run seed`.
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self { length: 15, distractors: 3, seed: 0, max_steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuideConfig {
    pub truth_term: TruthTerm,
}

impl Default for GuideConfig {
    fn default() -> Self {
        Self { truth_term: TruthTerm::Unpinned }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub episodes: usize,
    /// Seeds the agent (initialisation, exploration, replay sampling) and
    /// offsets the level seed.
    pub seed: u64,
    /// Rule file; the built-in coin-collector rules when absent.
    pub rules: Option<PathBuf>,
    pub level: LevelConfig,
    pub agent: AgentConfig,
    pub shield: ShieldConfig,
    pub guide: GuideConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Baseline,
            episodes: 300,
            seed: 0,
            rules: None,
            level: LevelConfig::default(),
            agent: AgentConfig::default(),
            shield: ShieldConfig::default(),
            guide: GuideConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses the `key = value` (TOML) config format.
    pub fn from_toml(text: &str, path: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| HarnessError::Config { path: path.to_string(), message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(HarnessError::Invalid("episodes must be at least 1".into()));
        }
        if self.level.max_steps == 0 {
            return Err(HarnessError::Invalid("level.max_steps must be at least 1".into()));
        }
        self.agent.validate()?;
        self.shield.validate()?;
        Ok(())
    }

    pub fn with_method(&self, method: Method) -> Self {
        Self { method, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn level_seed(&self) -> u64 {
        self.level.seed.wrapping_add(self.seed)
    }

    fn load_graph(&self) -> Result<LogicGraph> {
        let rules = match &self.rules {
            Some(path) => parse_rules(&std::fs::read_to_string(path)?)?,
            None => default_knowledge(),
        };
        let mut graph = LogicGraph::build(&rules)?;
        // Grounding emits propositions a rule base may not mention.
        graph.set_config(InferenceConfig { unknown_names: UnknownNames::Ignore, ..InferenceConfig::default() });
        Ok(graph)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub method: Method,
    pub seed: u64,
    pub episode: usize,
    pub reward: f64,
    pub steps: usize,
    pub fallbacks: usize,
    pub wall_time_ms: f64,
}

/// Per-step record for `--trace` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub method: Method,
    pub seed: u64,
    pub episode: usize,
    pub step: usize,
    pub state: BTreeMap<String, [f64; 2]>,
    pub candidates: Vec<Action>,
    /// Contradiction of each action in canonical order (empty for baseline).
    pub contradictions: Vec<f64>,
    /// Guide probabilities in canonical order (empty unless guided).
    pub p_lnn: Vec<f64>,
    pub action: Action,
    pub fallback: bool,
}

/// Runs one configuration. Fully deterministic given the config.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    run_experiment_traced(cfg, None)
}

struct Choice {
    action: Action,
    candidates: Vec<Action>,
    contradictions: Vec<f64>,
    p_lnn: Vec<f64>,
    fallback: bool,
}

pub fn run_experiment_traced(cfg: &RunConfig, mut trace: Option<&mut dyn FnMut(&StepTrace)>) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    let world = CoinWorld::new(generate_level(cfg.level.length, cfg.level.distractors, cfg.level_seed())?, cfg.level.max_steps)?;
    let mut advisor = match cfg.method {
        Method::Baseline => None,
        Method::Shield | Method::Guide => Some(LogicAdvisor::new(cfg.load_graph()?)?),
    };
    let agent = &cfg.agent;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut qf = agent.init_q(&mut rng);
    let mut target = qf.clone();
    let mut replay = ReplayBuffer::new(agent.replay_capacity);
    let mut total_steps = 0usize;
    let mut negative_q = 0usize;
    let mut records = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let started = Instant::now();
        let epsilon = agent.epsilon(episode);
        let (mut state, obs) = world.reset();
        let parsed = parse_observation(&obs.text);
        let mut room = parsed.room.ok_or_else(|| HarnessError::Grounding("observation has no room title".into()))?;
        let mut memory = GroundingMemory::start(room, parsed.coin);
        let mut visits = EpisodeVisits::new();
        visits.arrive(room);
        let mut grounded = ground(&obs.text, &memory);
        let mut features = FeatureVector::from_state(&grounded.state);
        let (mut reward, mut fallbacks) = (0.0, 0usize);

        loop {
            let q = qf.q_values(&features);
            let choice = match (cfg.method, advisor.as_mut()) {
                (Method::Baseline, _) => {
                    let action = select_baseline(&qf, &features, epsilon, &mut rng);
                    Choice { action, candidates: vec![action], contradictions: Vec::new(), p_lnn: Vec::new(), fallback: false }
                }
                (Method::Shield, Some(adv)) => {
                    let assessment = adv.assess(&grounded.state)?;
                    let ranking = candidate_ranking(&q, epsilon, &mut rng);
                    let d = shield_filter(&assessment.contradiction, &ranking, &cfg.shield);
                    Choice {
                        action: d.action,
                        candidates: ranking.to_vec(),
                        contradictions: assessment.contradiction.to_vec(),
                        p_lnn: Vec::new(),
                        fallback: d.fallback,
                    }
                }
                (Method::Guide, Some(adv)) => {
                    let assessment = adv.assess(&grounded.state)?;
                    let dist = GuideDistribution::from_assessment(&assessment, cfg.guide.truth_term);
                    let d = guide_pick(&dist, &q, epsilon, &mut rng);
                    negative_q += usize::from(d.negative_q);
                    Choice {
                        action: d.action,
                        candidates: vec![d.action],
                        contradictions: assessment.contradiction.to_vec(),
                        p_lnn: dist.probabilities.to_vec(),
                        fallback: false,
                    }
                }
                _ => unreachable!("constraint methods always carry an advisor"),
            };
            fallbacks += usize::from(choice.fallback);
            if let Some(sink) = trace.as_deref_mut() {
                sink(&StepTrace {
                    method: cfg.method,
                    seed: cfg.seed,
                    episode,
                    step: state.steps,
                    state: grounded.state.iter().map(|(k, b)| (k.to_string(), [b.lower, b.upper])).collect(),
                    candidates: choice.candidates,
                    contradictions: choice.contradictions,
                    p_lnn: choice.p_lnn,
                    action: choice.action,
                    fallback: choice.fallback,
                });
            }

            let action = choice.action;
            let (next_state, obs) = world.step(&state, action)?;
            let parsed = parse_observation(&obs.text);
            let next_room = parsed.room.ok_or_else(|| HarnessError::Grounding("observation has no room title".into()))?;
            memory.update(room, action, next_room, parsed.coin);
            let mut bonus = 0.0;
            if next_room != room {
                visits.arrive(next_room);
                bonus = novelty_bonus(next_room, &visits, agent.novelty_bonus);
            }
            let next_grounded = ground(&obs.text, &memory);
            let next_features = FeatureVector::from_state(&next_grounded.state);
            replay.push(Transition {
                features,
                action,
                reward: obs.reward + bonus,
                next_features,
                done: next_state.coin_taken,
            });
            if replay.len() >= agent.batch_size {
                let batch = replay.sample(agent.batch_size, &mut rng);
                learn_step(&mut qf, &target, &batch, agent.gamma, agent.learning_rate);
            }
            total_steps += 1;
            if total_steps.is_multiple_of(agent.target_sync) {
                target = qf.clone();
            }

            reward += obs.reward;
            state = next_state;
            room = next_room;
            grounded = next_grounded;
            features = next_features;
            if obs.done {
                break;
            }
        }

        records.push(EpisodeRecord {
            method: cfg.method,
            seed: cfg.seed,
            episode,
            reward,
            steps: state.steps,
            fallbacks,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    if negative_q > 0 {
        log::warn!("{negative_q} guided greedy choices compared negative Q values");
    }
    Ok(records)
}

/// Room-id helper for tests and tools that replay a level by hand.
pub fn start_room(cfg: &RunConfig) -> Result<RoomId> {
    Ok(generate_level(cfg.level.length, cfg.level.distractors, cfg.level_seed())?.start_room)
}
