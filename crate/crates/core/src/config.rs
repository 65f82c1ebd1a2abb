//! Run configuration.
//!
//! The config file is flat UTF-8 `key = value` lines with `#` comments. Every
//! key is also accepted as a command-line override (`--key value`, with `-`
//! and `_` interchangeable). Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error};
use crate::evolve::EvolutionParams;
use crate::network::NetworkParams;
use crate::userbase::ScenarioParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub species_theta: f64,
    pub species_area_replicates: usize,
    pub species_area_max_n: usize,
    pub succession_window: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self { species_theta: 0.10, species_area_replicates: 10, species_area_max_n: 100, succession_window: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Not part of the simulated state, so it is left out of snapshots.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub scenario: ScenarioParams,
    pub evolution: EvolutionParams,
    pub network: NetworkParams,
    pub prune_every: u64,
    pub stats_every: u64,
    pub stats_threshold: f64,
    pub analysis: AnalysisParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            scenario: ScenarioParams::default(),
            evolution: EvolutionParams::default(),
            network: NetworkParams::default(),
            prune_every: 50,
            stats_every: 100,
            stats_threshold: 0.5,
            analysis: AnalysisParams::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| ConfigError::InvalidValue { key: key.to_string(), msg: format!("`{value}`: {e}") })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::InvalidValue { key: key.to_string(), msg: format!("`{value}` is not a boolean") }),
    }
}

/// Every recognised key, in the order `dump` writes them.
pub const KEYS: &[&str] = &[
    "master_seed",
    "output_dir",
    "num_users",
    "num_communities",
    "initial_agents_per_user",
    "requests_per_new_agent",
    "total_requests",
    "initial_coverage",
    "request_sets",
    "max_set_size",
    "noise_prob",
    "gap_closing_prob",
    "agent_desc_max",
    "a_max",
    "v_max",
    "crossover_fraction",
    "mutation_fraction",
    "beta",
    "pop_base",
    "pop_per_len",
    "pop_min",
    "pop_max",
    "max_generations",
    "stagnation_window",
    "d_miss",
    "stored_copy_prob",
    "seed_len_max",
    "k0",
    "p_init",
    "alpha_s",
    "alpha_f",
    "window",
    "p_prune",
    "shortcuts_enabled",
    "pool_capacity",
    "prune_every",
    "stats_every",
    "stats_threshold",
    "species_theta",
    "species_area_replicates",
    "species_area_max_n",
    "succession_window",
];

pub fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = normalize_key(key);
        let v = value.trim();
        let k = key.as_str();
        let s = &mut self.scenario;
        let e = &mut self.evolution;
        let n = &mut self.network;
        let a = &mut self.analysis;
        match k {
            "master_seed" => self.master_seed = parse(k, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "num_users" => s.num_users = parse(k, v)?,
            "num_communities" => s.num_communities = parse(k, v)?,
            "initial_agents_per_user" => s.initial_agents_per_user = parse(k, v)?,
            "requests_per_new_agent" => s.requests_per_new_agent = parse(k, v)?,
            "total_requests" => s.total_requests = parse(k, v)?,
            "initial_coverage" => s.initial_coverage = parse(k, v)?,
            "request_sets" => s.request_sets = parse(k, v)?,
            "max_set_size" => s.max_set_size = parse(k, v)?,
            "noise_prob" => s.noise_prob = parse(k, v)?,
            "gap_closing_prob" => s.gap_closing_prob = parse(k, v)?,
            "agent_desc_max" => s.agent_desc_max = parse(k, v)?,
            "a_max" => s.space.a_max = parse(k, v)?,
            "v_max" => s.space.v_max = parse(k, v)?,
            "crossover_fraction" => e.crossover_fraction = parse(k, v)?,
            "mutation_fraction" => e.mutation_fraction = parse(k, v)?,
            "beta" => e.beta = parse(k, v)?,
            "pop_base" => e.pop_base = parse(k, v)?,
            "pop_per_len" => e.pop_per_len = parse(k, v)?,
            "pop_min" => e.pop_min = parse(k, v)?,
            "pop_max" => e.pop_max = parse(k, v)?,
            "max_generations" => e.max_generations = parse(k, v)?,
            "stagnation_window" => e.stagnation_window = parse(k, v)?,
            "d_miss" => e.d_miss = parse(k, v)?,
            "stored_copy_prob" => e.stored_copy_prob = parse(k, v)?,
            "seed_len_max" => e.seed_len_max = parse(k, v)?,
            "k0" => n.k0 = parse(k, v)?,
            "p_init" => n.p_init = parse(k, v)?,
            "alpha_s" => n.alpha_s = parse(k, v)?,
            "alpha_f" => n.alpha_f = parse(k, v)?,
            "window" => n.window = parse(k, v)?,
            "p_prune" => n.p_prune = parse(k, v)?,
            "shortcuts_enabled" => n.shortcuts_enabled = parse_bool(k, v)?,
            "pool_capacity" => n.pool_capacity = parse(k, v)?,
            "prune_every" => self.prune_every = parse(k, v)?,
            "stats_every" => self.stats_every = parse(k, v)?,
            "stats_threshold" => self.stats_threshold = parse(k, v)?,
            "species_theta" => a.species_theta = parse(k, v)?,
            "species_area_replicates" => a.species_area_replicates = parse(k, v)?,
            "species_area_max_n" => a.species_area_max_n = parse(k, v)?,
            "succession_window" => a.succession_window = parse(k, v)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            if key.trim().is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| ConfigError::InvalidValue { key: key.to_string(), msg };
        self.scenario.validate().map_err(|m| bad("scenario", m))?;
        self.evolution.validate().map_err(|m| bad("evolution", m))?;
        let n = &self.network;
        for (key, p) in [("p_init", n.p_init), ("alpha_s", n.alpha_s), ("alpha_f", n.alpha_f), ("p_prune", n.p_prune)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(key, "must lie in [0, 1]".into()));
            }
        }
        if !(n.k0 >= 1.0) {
            return Err(bad("k0", "must be at least 1".into()));
        }
        if n.pool_capacity == 0 {
            return Err(bad("pool_capacity", "must be positive".into()));
        }
        if n.pool_capacity < self.scenario.initial_agents_per_user {
            return Err(bad("pool_capacity", "smaller than a user's initial deployment".into()));
        }
        if self.scenario.num_users < 2 {
            return Err(bad("num_users", "need at least 2 users".into()));
        }
        if self.prune_every == 0 {
            return Err(bad("prune_every", "must be positive".into()));
        }
        if self.stats_every == 0 {
            return Err(bad("stats_every", "must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.stats_threshold) {
            return Err(bad("stats_threshold", "must lie in [0, 1]".into()));
        }
        let a = &self.analysis;
        if !(0.0..=1.0).contains(&a.species_theta) {
            return Err(bad("species_theta", "must lie in [0, 1]".into()));
        }
        if a.species_area_replicates == 0 {
            return Err(bad("species_area_replicates", "must be positive".into()));
        }
        if a.species_area_max_n == 0 {
            return Err(bad("species_area_max_n", "must be positive".into()));
        }
        if a.succession_window == 0 {
            return Err(bad("succession_window", "must be positive".into()));
        }
        Ok(())
    }

    /// Current value of `key` rendered as config text.
    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.scenario;
        let e = &self.evolution;
        let n = &self.network;
        let a = &self.analysis;
        Some(match normalize_key(key).as_str() {
            "master_seed" => self.master_seed.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "num_users" => s.num_users.to_string(),
            "num_communities" => s.num_communities.to_string(),
            "initial_agents_per_user" => s.initial_agents_per_user.to_string(),
            "requests_per_new_agent" => s.requests_per_new_agent.to_string(),
            "total_requests" => s.total_requests.to_string(),
            "initial_coverage" => s.initial_coverage.to_string(),
            "request_sets" => s.request_sets.to_string(),
            "max_set_size" => s.max_set_size.to_string(),
            "noise_prob" => s.noise_prob.to_string(),
            "gap_closing_prob" => s.gap_closing_prob.to_string(),
            "agent_desc_max" => s.agent_desc_max.to_string(),
            "a_max" => s.space.a_max.to_string(),
            "v_max" => s.space.v_max.to_string(),
            "crossover_fraction" => e.crossover_fraction.to_string(),
            "mutation_fraction" => e.mutation_fraction.to_string(),
            "beta" => e.beta.to_string(),
            "pop_base" => e.pop_base.to_string(),
            "pop_per_len" => e.pop_per_len.to_string(),
            "pop_min" => e.pop_min.to_string(),
            "pop_max" => e.pop_max.to_string(),
            "max_generations" => e.max_generations.to_string(),
            "stagnation_window" => e.stagnation_window.to_string(),
            "d_miss" => e.d_miss.to_string(),
            "stored_copy_prob" => e.stored_copy_prob.to_string(),
            "seed_len_max" => e.seed_len_max.to_string(),
            "k0" => n.k0.to_string(),
            "p_init" => n.p_init.to_string(),
            "alpha_s" => n.alpha_s.to_string(),
            "alpha_f" => n.alpha_f.to_string(),
            "window" => n.window.to_string(),
            "p_prune" => n.p_prune.to_string(),
            "shortcuts_enabled" => n.shortcuts_enabled.to_string(),
            "pool_capacity" => n.pool_capacity.to_string(),
            "prune_every" => self.prune_every.to_string(),
            "stats_every" => self.stats_every.to_string(),
            "stats_threshold" => self.stats_threshold.to_string(),
            "species_theta" => a.species_theta.to_string(),
            "species_area_replicates" => a.species_area_replicates.to_string(),
            "species_area_max_n" => a.species_area_max_n.to_string(),
            "succession_window" => a.succession_window.to_string(),
            _ => return None,
        })
    }

    /// The whole config as a config file.
    pub fn dump(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("known key"))).collect()
    }
}
