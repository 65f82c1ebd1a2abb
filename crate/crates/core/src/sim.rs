//! End-to-end request loop and snapshot persistence.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::ecology::SuccessionRecord;
use crate::error::{Error, EvolveError};
use crate::evolve::{evolve, EvolutionResult};
use crate::model::{Agent, AgentId, HabitatId, SemanticDescription, UserId};
use crate::network::HabitatNetwork;
use crate::rng::{streams, SplitMix64};
use crate::userbase::{build_scenario, maybe_deploy_agent, next_request, random_description, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSample {
    pub request_index: u64,
    pub clustering_coefficient: f64,
    pub char_path_length: Option<f64>,
    pub edge_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Streams {
    requests: SplitMix64,
    deployment: SplitMix64,
    migration: SplitMix64,
}

/// Everything needed to continue a run bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ecosystem {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub network: HabitatNetwork,
    next_agent_id: u64,
    rngs: Streams,
    pub network_series: Vec<NetworkSample>,
}

/// What one request produced.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub record: SuccessionRecord,
    pub result: EvolutionResult,
    pub deployed: Option<AgentId>,
}

impl Ecosystem {
    /// Builds the scenario, the initial random network and the initial
    /// deployment.
    pub fn new(config: RunConfig) -> Result<Self, Error> {
        config.validate()?;
        let seed = config.master_seed;
        let mut scenario_rng = SplitMix64::for_stream(seed, streams::SCENARIO);
        let mut network_rng = SplitMix64::for_stream(seed, streams::NETWORK);
        let (scenario, deployment) = build_scenario(&config.scenario, &mut scenario_rng);
        let user_ids: Vec<UserId> = scenario.users.iter().map(|u| u.user_id).collect();
        let network = HabitatNetwork::init(&user_ids, config.network.clone(), &mut network_rng)?;
        let mut eco = Self {
            scenario,
            network,
            next_agent_id: 0,
            rngs: Streams {
                requests: SplitMix64::for_stream(seed, streams::REQUESTS),
                deployment: SplitMix64::for_stream(seed, streams::DEPLOYMENT),
                migration: SplitMix64::for_stream(seed, streams::MIGRATION),
            },
            network_series: Vec::new(),
            config,
        };
        for (user, desc) in deployment {
            eco.deploy(user, desc);
        }
        eco.sample_network();
        Ok(eco)
    }

    pub fn requests_done(&self) -> u64 {
        self.network.request_counter
    }

    pub fn agents_created(&self) -> u64 {
        self.next_agent_id
    }

    fn habitat_of(&self, user: UserId) -> HabitatId {
        self.scenario.users[user.0 as usize].habitat_id
    }

    fn deploy(&mut self, user: UserId, description: SemanticDescription) -> AgentId {
        let id = AgentId(self.next_agent_id);
        self.next_agent_id += 1;
        let agent = Arc::new(Agent::new(id, description, user));
        let home = self.habitat_of(user);
        self.network.deploy(home, agent, &mut self.rngs.migration);
        id
    }

    fn sample_network(&mut self) {
        let s = self.network.stats(self.config.stats_threshold);
        self.network_series.push(NetworkSample {
            request_index: self.network.request_counter,
            clustering_coefficient: s.clustering_coefficient,
            char_path_length: s.char_path_length,
            edge_count: s.edge_count,
        });
    }

    /// Handles the next user request end to end.
    pub fn step(&mut self) -> Result<StepOutcome, Error> {
        let request_index = self.network.request_counter + 1;
        let (user, req) = next_request(&mut self.scenario, request_index, &self.config.scenario, &mut self.rngs.requests);
        let habitat = self.habitat_of(user);

        let population_rng = SplitMix64::for_stream(self.config.master_seed, streams::POPULATION_BASE + request_index);
        let result = loop {
            let h = self.network.habitat(habitat)?;
            match evolve(&h.pool, self.network.migrant_tags(habitat), &req, &self.config.evolution, population_rng.clone()) {
                Ok(r) => break r,
                Err(EvolveError::EmptyPool) => {
                    // the caller deploys a random agent and tries again
                    let desc = random_description(&self.config.scenario, &mut self.rngs.deployment);
                    self.deploy(user, desc);
                }
            }
        };

        self.network.complete_request(habitat);
        let record = SuccessionRecord {
            request_index,
            user_id: user,
            habitat_id: habitat,
            generations_run: result.generations_run,
            effectiveness: result.best_raw_fitness,
        };
        self.network.resolve_usage(habitat, &result);
        self.network.migrate(habitat, &result.best, &mut self.rngs.migration);
        self.network.expire_events();

        let u = &self.scenario.users[user.0 as usize];
        let template = &self.scenario.templates[u.community_id];
        let pool = &self.network.habitat(habitat)?.pool;
        let deployed = maybe_deploy_agent(u, template, pool, &self.config.scenario, &mut self.rngs.deployment)
            .map(|desc| self.deploy(user, desc));

        if request_index.is_multiple_of(self.config.prune_every) {
            self.network.prune_and_shortcut();
        }
        if request_index.is_multiple_of(self.config.stats_every) {
            self.sample_network();
        }
        Ok(StepOutcome { record, result, deployed })
    }

    /// Steps until `total_requests` have been handled.
    pub fn run_to_end(&mut self, mut on_step: impl FnMut(&Self, &StepOutcome)) -> Result<Vec<SuccessionRecord>, Error> {
        let mut records = Vec::new();
        while self.network.request_counter < self.config.scenario.total_requests {
            let out = self.step()?;
            on_step(self, &out);
            records.push(out.record);
        }
        Ok(records)
    }

    /// Serialises with lexicographically sorted keys.
    pub fn to_snapshot_json(&self) -> String {
        let value = serde_json::to_value(self).expect("ecosystem state is serialisable");
        let mut s = serde_json::to_string(&value).expect("json value is serialisable");
        s.push('\n');
        s
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_snapshot_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot_json(&text)
            .map_err(|e| Error::parse(path, format!("line {} column {}: {e}", e.line(), e.column())))
    }
}
