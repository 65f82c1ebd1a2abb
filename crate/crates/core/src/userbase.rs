//! Simulated user base.
//!
//! Users are split evenly into communities. Each community has a request
//! template (an ordered list of attribute sets); members' requests are noisy
//! copies of it. Initial agents cover only a fixed fraction of each
//! template, and agents deployed later preferentially fill the gaps.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Attribute, AttributeSpace, HabitatId, SemanticDescription, UserId, UserRequest};
use crate::network::AgentPool;
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub num_users: usize,
    pub num_communities: usize,
    pub initial_agents_per_user: usize,
    pub requests_per_new_agent: u64,
    pub total_requests: u64,
    pub initial_coverage: f64,
    pub request_sets: usize,
    /// Attributes per request set are drawn from `1..=max_set_size`.
    pub max_set_size: usize,
    pub noise_prob: f64,
    /// Chance a new agent targets the habitat's uncovered template attributes.
    pub gap_closing_prob: f64,
    pub agent_desc_max: usize,
    pub space: AttributeSpace,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            num_users: 100,
            num_communities: 10,
            initial_agents_per_user: 5,
            requests_per_new_agent: 3,
            total_requests: 1000,
            initial_coverage: 0.70,
            request_sets: 8,
            max_set_size: 3,
            noise_prob: 0.02,
            gap_closing_prob: 0.8,
            agent_desc_max: 3,
            space: AttributeSpace::default(),
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_communities == 0 || self.num_users < self.num_communities {
            return Err("need num_users >= num_communities >= 1".into());
        }
        if !(self.initial_coverage > 0.0 && self.initial_coverage <= 1.0) {
            return Err("initial_coverage must lie in (0, 1]".into());
        }
        if !(4..=12).contains(&self.request_sets) {
            return Err("request_sets must lie in [4, 12]".into());
        }
        if self.max_set_size == 0 || self.agent_desc_max == 0 {
            return Err("max_set_size and agent_desc_max must be positive".into());
        }
        if self.request_sets * self.max_set_size <= self.agent_desc_max {
            return Err("requests could never be longer than agent descriptions".into());
        }
        if (self.request_sets * self.max_set_size) as u32 > self.space.a_max {
            return Err("a_max too small for distinct template attributes".into());
        }
        if self.requests_per_new_agent == 0 || self.initial_agents_per_user == 0 {
            return Err("requests_per_new_agent and initial_agents_per_user must be positive".into());
        }
        for (name, p) in [("noise_prob", self.noise_prob), ("gap_closing_prob", self.gap_closing_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.space.a_max == 0 || self.space.v_max == 0 {
            return Err("a_max and v_max must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    pub habitat_id: HabitatId,
    pub community_id: usize,
    pub requests_submitted: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityTemplate {
    pub community_id: usize,
    pub template: Vec<Vec<Attribute>>,
    /// Attributes the initial agents of this community were drawn from.
    pub covered: Vec<Attribute>,
}

impl CommunityTemplate {
    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.template.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.template.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Template attributes absent from `covered`.
    pub fn uncovered(&self) -> Vec<Attribute> {
        let c: BTreeSet<_> = self.covered.iter().collect();
        self.attributes().filter(|a| !c.contains(a)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub users: Vec<User>,
    pub templates: Vec<CommunityTemplate>,
}

/// Initial deployment, in creation order.
pub type InitialDeployment = Vec<(UserId, SemanticDescription)>;

fn random_template(community_id: usize, params: &ScenarioParams, rng: &mut SplitMix64) -> CommunityTemplate {
    let sizes: Vec<usize> = loop {
        let sizes: Vec<usize> = (0..params.request_sets)
            .map(|_| rng.range_inclusive(1, params.max_set_size as u64) as usize)
            .collect();
        if sizes.iter().sum::<usize>() > params.agent_desc_max {
            break sizes;
        }
    };
    let total: usize = sizes.iter().sum();
    let ids = rng.sample_indices(params.space.a_max as usize, total);
    let mut ids = ids.into_iter().map(|i| i as u32 + 1);
    let template = sizes
        .iter()
        .map(|&n| {
            (0..n)
                .map(|_| {
                    let id = ids.next().expect("enough ids sampled");
                    Attribute::new(id, rng.range_inclusive(1, params.space.v_max as u64) as u32)
                })
                .collect()
        })
        .collect::<Vec<Vec<Attribute>>>();
    let flat: Vec<Attribute> = template.iter().flatten().copied().collect();
    let n_cov = ((params.initial_coverage * total as f64).round() as usize).clamp(1, total);
    let mut picks = rng.sample_indices(total, n_cov);
    picks.sort_unstable();
    let covered = picks.into_iter().map(|i| flat[i]).collect();
    CommunityTemplate { community_id, template, covered }
}

/// Deals a shuffled copy of `covered` round-robin over the user's initial
/// agents, so together they span as much of it as their description limit
/// allows.
fn initial_descriptions(covered: &[Attribute], params: &ScenarioParams, rng: &mut SplitMix64) -> Vec<SemanticDescription> {
    let n = params.initial_agents_per_user;
    let mut attrs = covered.to_vec();
    rng.shuffle(&mut attrs);
    attrs.truncate(n * params.agent_desc_max);
    let mut buckets: Vec<Vec<Attribute>> = vec![Vec::new(); n];
    for (i, a) in attrs.into_iter().enumerate() {
        buckets[i % n].push(a);
    }
    buckets
        .into_iter()
        .map(|mut b| {
            if b.is_empty() {
                b.push(covered[rng.index(covered.len())]);
            }
            SemanticDescription::new(b).expect("bucket is non-empty")
        })
        .collect()
}

/// Creates users, community templates and the initial agent descriptions.
/// User `i` belongs to community `i * C / N` and owns habitat `i`.
pub fn build_scenario(params: &ScenarioParams, rng: &mut SplitMix64) -> (Scenario, InitialDeployment) {
    let templates: Vec<CommunityTemplate> =
        (0..params.num_communities).map(|c| random_template(c, params, rng)).collect();
    let users: Vec<User> = (0..params.num_users)
        .map(|i| User {
            user_id: UserId(i as u32),
            habitat_id: HabitatId(i as u32),
            community_id: i * params.num_communities / params.num_users,
            requests_submitted: 0,
        })
        .collect();
    let mut deployment = Vec::with_capacity(params.num_users * params.initial_agents_per_user);
    for u in &users {
        for d in initial_descriptions(&templates[u.community_id].covered, params, rng) {
            deployment.push((u.user_id, d));
        }
    }
    (Scenario { users, templates }, deployment)
}

/// Picks a user uniformly and builds a noisy copy of their community's
/// template: each value is shifted by +-1 (clamped) with probability
/// `noise_prob`.
pub fn next_request(
    scenario: &mut Scenario,
    request_id: u64,
    params: &ScenarioParams,
    rng: &mut SplitMix64,
) -> (UserId, UserRequest) {
    let ui = rng.index(scenario.users.len());
    let user = &mut scenario.users[ui];
    let template = &scenario.templates[user.community_id];
    let v_max = params.space.v_max;
    let sets = template
        .template
        .iter()
        .map(|set| {
            set.iter()
                .map(|a| {
                    let mut value = a.value;
                    if rng.chance(params.noise_prob) {
                        value = if rng.chance(0.5) { (value + 1).min(v_max) } else { value.saturating_sub(1).max(1) };
                    }
                    Attribute::new(a.attr_id, value)
                })
                .collect()
        })
        .collect();
    user.requests_submitted += 1;
    let req = UserRequest::new(request_id, user.user_id, sets).expect("templates are non-empty");
    (user.user_id, req)
}

/// Template attributes with no exact match among the agents in `pool`.
pub fn uncovered_in_pool(template: &CommunityTemplate, pool: &AgentPool) -> Vec<Attribute> {
    let present: BTreeSet<Attribute> = pool
        .agents()
        .iter()
        .flat_map(|e| e.agent.description.attributes().iter().copied())
        .collect();
    template.attributes().filter(|a| !present.contains(a)).collect()
}

pub fn random_description(params: &ScenarioParams, rng: &mut SplitMix64) -> SemanticDescription {
    let n = rng.range_inclusive(1, params.agent_desc_max as u64) as usize;
    let attrs: Vec<Attribute> = (0..n)
        .map(|_| {
            Attribute::new(
                rng.range_inclusive(1, params.space.a_max as u64) as u32,
                rng.range_inclusive(1, params.space.v_max as u64) as u32,
            )
        })
        .collect();
    SemanticDescription::new(attrs).expect("n >= 1")
}

/// Every `requests_per_new_agent`-th request by a user yields a new agent
/// description. With probability `gap_closing_prob` it is drawn from the
/// template attributes the user's habitat still lacks; otherwise, or when
/// nothing is lacking, it is random.
pub fn maybe_deploy_agent(
    user: &User,
    template: &CommunityTemplate,
    pool: &AgentPool,
    params: &ScenarioParams,
    rng: &mut SplitMix64,
) -> Option<SemanticDescription> {
    if user.requests_submitted == 0 || !user.requests_submitted.is_multiple_of(params.requests_per_new_agent) {
        return None;
    }
    let targeted = rng.chance(params.gap_closing_prob);
    let gaps = uncovered_in_pool(template, pool);
    if targeted && !gaps.is_empty() {
        let n = params.agent_desc_max.min(gaps.len());
        let attrs = rng.sample_indices(gaps.len(), n).into_iter().map(|i| gaps[i]);
        Some(SemanticDescription::new(attrs).expect("n >= 1"))
    } else {
        Some(random_description(params, rng))
    }
}
