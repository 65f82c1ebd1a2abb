//! Habitat network.
//!
//! Each user owns one habitat holding an agent pool. Habitats are joined by
//! bidirectional connections that carry one probability per direction; that
//! probability is both the chance a migrant crosses the connection and the
//! strength reinforced (success) or decayed (failure) by Hebbian updates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::NetworkError;
use crate::evolve::EvolutionResult;
use crate::model::{Agent, AgentId, AgentSequence, HabitatId, UserId};
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventId(pub u64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Expected degree of the initial random graph.
    pub k0: f64,
    pub p_init: f64,
    pub alpha_s: f64,
    pub alpha_f: f64,
    /// Destination requests a migrant may stay unused before it fails.
    pub window: u64,
    pub p_prune: f64,
    pub shortcuts_enabled: bool,
    pub pool_capacity: usize,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            k0: 4.0,
            p_init: 0.5,
            alpha_s: 0.1,
            alpha_f: 0.1,
            window: 10,
            p_prune: 0.01,
            shortcuts_enabled: true,
            pool_capacity: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

/// Proportional reinforcement on success, multiplicative decay on failure.
/// Both keep `p` inside `[0, 1]`.
pub fn hebbian_update(p: f64, outcome: Outcome, alpha_s: f64, alpha_f: f64) -> f64 {
    let next = match outcome {
        Outcome::Success => p + alpha_s * (1.0 - p),
        Outcome::Failure => p * (1.0 - alpha_f),
    };
    next.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolAgent {
    pub agent: Arc<Agent>,
    /// Deployed by the habitat's own user; never evicted.
    pub own: bool,
    pub usage: u64,
    pub last_used: u64,
    pub stamp: u64,
    pub event: Option<EventId>,
    /// Habitats this copy travelled through, ending here.
    pub path: Vec<HabitatId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredSequence {
    pub seq: AgentSequence,
    pub usage: u64,
    pub last_used: u64,
    pub stamp: u64,
    pub event: Option<EventId>,
    pub path: Vec<HabitatId>,
}

/// Bounded store of agents and previously evolved agent-sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPool {
    capacity: usize,
    next_stamp: u64,
    agents: Vec<PoolAgent>,
    sequences: Vec<StoredSequence>,
}

enum Slot {
    Agent(usize),
    Sequence(usize),
}

impl AgentPool {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, next_stamp: 0, agents: Vec::new(), sequences: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.agents.len() + self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn agents(&self) -> &[PoolAgent] {
        &self.agents
    }

    pub fn sequences(&self) -> &[StoredSequence] {
        &self.sequences
    }

    pub fn contains_agent(&self, id: AgentId) -> bool {
        self.agents.iter().any(|e| e.agent.id == id)
    }

    fn stamp(&mut self) -> u64 {
        self.next_stamp += 1;
        self.next_stamp
    }

    /// Frees one slot if the pool is full. Returns false when nothing is
    /// evictable.
    fn make_room(&mut self) -> bool {
        if self.len() < self.capacity {
            return true;
        }
        let lru_agent = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.own)
            .map(|(i, e)| ((e.last_used, e.stamp), Slot::Agent(i)));
        let lru_seq = self
            .sequences
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.last_used, e.stamp), Slot::Sequence(i)));
        match lru_agent.chain(lru_seq).min_by_key(|(k, _)| *k) {
            Some((_, Slot::Agent(i))) => {
                self.agents.remove(i);
                true
            }
            Some((_, Slot::Sequence(i))) => {
                self.sequences.remove(i);
                true
            }
            None => false,
        }
    }

    /// Adds an agent copy unless the pool already holds that agent.
    pub fn insert_agent(
        &mut self,
        agent: Arc<Agent>,
        own: bool,
        now: u64,
        event: Option<EventId>,
        path: Vec<HabitatId>,
    ) -> bool {
        if self.contains_agent(agent.id) || !self.make_room() {
            return false;
        }
        let stamp = self.stamp();
        self.agents.push(PoolAgent { agent, own, usage: 0, last_used: now, stamp, event, path });
        true
    }

    /// Stores a sequence; an identical stored sequence just has its usage
    /// bumped.
    pub fn insert_sequence(
        &mut self,
        seq: AgentSequence,
        usage: u64,
        now: u64,
        event: Option<EventId>,
        path: Vec<HabitatId>,
    ) -> bool {
        if let Some(existing) = self.sequences.iter_mut().find(|s| same_agents(&s.seq, &seq)) {
            existing.usage += usage;
            existing.last_used = now;
            return false;
        }
        if !self.make_room() {
            return false;
        }
        let stamp = self.stamp();
        self.sequences.push(StoredSequence { seq, usage, last_used: now, stamp, event, path });
        true
    }

    /// Marks every entry whose agents appear in `best` as used at `now`.
    pub fn record_usage(&mut self, best: &AgentSequence, now: u64) {
        let ids: BTreeSet<AgentId> = best.agent_ids().collect();
        for e in &mut self.agents {
            if ids.contains(&e.agent.id) {
                e.usage += 1;
                e.last_used = now;
            }
        }
        for s in &mut self.sequences {
            if s.seq.agent_ids().any(|id| ids.contains(&id)) {
                s.usage += 1;
                s.last_used = now;
            }
        }
    }

    /// Removes entries that arrived with `event` and were never used.
    pub fn evict_unused(&mut self, event: EventId) {
        self.agents.retain(|e| !(e.event == Some(event) && e.usage == 0));
        self.sequences.retain(|s| !(s.event == Some(event) && s.usage == 0));
    }

    /// Route by which `id` reached this pool, if known.
    fn provenance(&self, id: AgentId) -> Option<&[HabitatId]> {
        let from_agent = self.agents.iter().find(|e| e.agent.id == id).map(|e| e.path.as_slice());
        let from_seq = self
            .sequences
            .iter()
            .filter(|s| s.seq.contains_agent(id))
            .map(|s| s.path.as_slice())
            .max_by_key(|p| p.len());
        match (from_agent, from_seq) {
            (Some(a), Some(s)) if s.len() > a.len() => Some(s),
            (Some(a), _) => Some(a),
            (None, s) => s,
        }
    }
}

fn same_agents(a: &AgentSequence, b: &AgentSequence) -> bool {
    a.len() == b.len() && a.agent_ids().eq(b.agent_ids())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Habitat {
    pub id: HabitatId,
    pub owner: UserId,
    pub pool: AgentPool,
    pub outgoing: BTreeMap<HabitatId, f64>,
    pub requests_completed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Pending,
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub id: EventId,
    pub migrant: AgentSequence,
    pub origin: HabitatId,
    pub dest: HabitatId,
    pub via: (HabitatId, HabitatId),
    pub hop_path: Vec<HabitatId>,
    /// Destination's completed-request count when the migrant arrived.
    pub arrival_request_index: u64,
    pub status: EventStatus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub pending: usize,
    pub success: usize,
    pub failure: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HabitatNetwork {
    pub params: NetworkParams,
    habitats: Vec<Habitat>,
    pub request_counter: u64,
    events: Vec<MigrationEvent>,
    /// Hop paths of successful multi-hop migrations awaiting a shortcut.
    shortcut_queue: Vec<Vec<HabitatId>>,
}

impl HabitatNetwork {
    /// One habitat per user, joined by a G(n, p) random graph with
    /// `p = k0 / (n - 1)`; each pair gets `p_init` in both directions.
    pub fn init(users: &[UserId], params: NetworkParams, rng: &mut SplitMix64) -> Result<Self, NetworkError> {
        let n = users.len();
        if n < 2 {
            return Err(NetworkError::TooFewUsers(n));
        }
        if !(params.k0 >= 1.0) {
            return Err(NetworkError::BadDegree);
        }
        let mut habitats: Vec<Habitat> = users
            .iter()
            .enumerate()
            .map(|(i, &owner)| Habitat {
                id: HabitatId(i as u32),
                owner,
                pool: AgentPool::new(params.pool_capacity),
                outgoing: BTreeMap::new(),
                requests_completed: 0,
            })
            .collect();
        let p_edge = (params.k0 / (n - 1) as f64).min(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.chance(p_edge) {
                    habitats[i].outgoing.insert(HabitatId(j as u32), params.p_init);
                    habitats[j].outgoing.insert(HabitatId(i as u32), params.p_init);
                }
            }
        }
        Ok(Self { params, habitats, request_counter: 0, events: Vec::new(), shortcut_queue: Vec::new() })
    }

    pub fn habitats(&self) -> &[Habitat] {
        &self.habitats
    }

    pub fn habitat(&self, id: HabitatId) -> Result<&Habitat, NetworkError> {
        self.habitats.get(id.0 as usize).ok_or(NetworkError::UnknownHabitat(id.0))
    }

    pub fn habitat_mut(&mut self, id: HabitatId) -> Result<&mut Habitat, NetworkError> {
        self.habitats.get_mut(id.0 as usize).ok_or(NetworkError::UnknownHabitat(id.0))
    }

    pub fn events(&self) -> &[MigrationEvent] {
        &self.events
    }

    pub fn event_counts(&self) -> EventCounts {
        let mut c = EventCounts::default();
        for e in &self.events {
            match e.status {
                EventStatus::Pending => c.pending += 1,
                EventStatus::Success => c.success += 1,
                EventStatus::Failure => c.failure += 1,
            }
        }
        c
    }

    /// Probability on `from -> to`, if that direction exists.
    pub fn probability(&self, from: HabitatId, to: HabitatId) -> Option<f64> {
        self.habitats.get(from.0 as usize)?.outgoing.get(&to).copied()
    }

    pub fn all_probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.habitats.iter().flat_map(|h| h.outgoing.values().copied())
    }

    /// Number of undirected pairs.
    pub fn pair_count(&self) -> usize {
        self.habitats
            .iter()
            .flat_map(|h| h.outgoing.keys().map(move |d| (h.id.min(*d), h.id.max(*d))))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Sets both directions of the pair `a <-> b`.
    pub fn connect(&mut self, a: HabitatId, b: HabitatId, p: f64) {
        self.habitats[a.0 as usize].outgoing.insert(b, p);
        self.habitats[b.0 as usize].outgoing.insert(a, p);
    }

    fn push_event(
        &mut self,
        migrant: AgentSequence,
        origin: HabitatId,
        dest: HabitatId,
        hop_path: Vec<HabitatId>,
    ) -> EventId {
        let id = EventId(self.events.len() as u64);
        let arrival = self.habitats[dest.0 as usize].requests_completed;
        self.events.push(MigrationEvent {
            id,
            migrant,
            origin,
            dest,
            via: (origin, dest),
            hop_path,
            arrival_request_index: arrival,
            status: EventStatus::Pending,
        });
        id
    }

    /// Places a freshly deployed agent in its owner's habitat and copies it to
    /// each neighbour with that connection's probability.
    pub fn deploy(&mut self, home: HabitatId, agent: Arc<Agent>, rng: &mut SplitMix64) -> Vec<EventId> {
        let now = self.request_counter;
        self.habitats[home.0 as usize]
            .pool
            .insert_agent(agent.clone(), true, now, None, vec![home]);
        let targets: Vec<(HabitatId, f64)> =
            self.habitats[home.0 as usize].outgoing.iter().map(|(&d, &p)| (d, p)).collect();
        let mut created = Vec::new();
        for (dest, p) in targets {
            if !rng.chance(p) {
                continue;
            }
            let path = vec![home, dest];
            let id = self.push_event(AgentSequence::single(agent.clone()), home, dest, path.clone());
            self.habitats[dest.0 as usize]
                .pool
                .insert_agent(agent.clone(), false, now, Some(id), path);
            created.push(id);
        }
        created
    }

    /// Stores the delivered response at `origin`, then copies it across each
    /// outgoing connection with that connection's probability.
    pub fn migrate(&mut self, origin: HabitatId, seq: &AgentSequence, rng: &mut SplitMix64) -> Vec<EventId> {
        let now = self.request_counter;
        let provenance: Vec<HabitatId> = {
            let pool = &self.habitats[origin.0 as usize].pool;
            seq.agent_ids()
                .filter_map(|id| pool.provenance(id))
                .filter(|p| p.last() == Some(&origin))
                .max_by_key(|p| p.len())
                .map(|p| p.to_vec())
                .unwrap_or_else(|| vec![origin])
        };
        self.habitats[origin.0 as usize]
            .pool
            .insert_sequence(seq.clone(), 1, now, None, vec![origin]);
        let targets: Vec<(HabitatId, f64)> =
            self.habitats[origin.0 as usize].outgoing.iter().map(|(&d, &p)| (d, p)).collect();
        let mut created = Vec::new();
        for (dest, p) in targets {
            if !rng.chance(p) {
                continue;
            }
            let mut path = provenance.clone();
            path.push(dest);
            let id = self.push_event(seq.clone(), origin, dest, path.clone());
            self.habitats[dest.0 as usize]
                .pool
                .insert_sequence(seq.clone(), 0, now, Some(id), path);
            created.push(id);
        }
        created
    }

    /// Agent id -> pending events at `dest` whose migrant carries that agent.
    pub fn migrant_tags(&self, dest: HabitatId) -> BTreeMap<AgentId, BTreeSet<EventId>> {
        let mut tags: BTreeMap<AgentId, BTreeSet<EventId>> = BTreeMap::new();
        for e in self.events.iter().filter(|e| e.dest == dest && e.status == EventStatus::Pending) {
            for id in e.migrant.agent_ids() {
                tags.entry(id).or_default().insert(e.id);
            }
        }
        tags
    }

    /// Marks the request at `dest` as completed.
    pub fn complete_request(&mut self, dest: HabitatId) {
        self.request_counter += 1;
        self.habitats[dest.0 as usize].requests_completed += 1;
    }

    fn apply_hebbian(&mut self, via: (HabitatId, HabitatId), outcome: Outcome) {
        let (alpha_s, alpha_f) = (self.params.alpha_s, self.params.alpha_f);
        if let Some(p) = self.habitats[via.0 .0 as usize].outgoing.get_mut(&via.1) {
            *p = hebbian_update(*p, outcome, alpha_s, alpha_f);
        }
    }

    /// Pending events at `dest` whose migrant contributed an agent to the
    /// delivered response succeed and strengthen their connection.
    pub fn resolve_usage(&mut self, dest: HabitatId, result: &EvolutionResult) -> Vec<EventId> {
        let now = self.request_counter;
        self.habitats[dest.0 as usize].pool.record_usage(&result.best, now);
        let used: BTreeSet<AgentId> = result.best.agent_ids().collect();
        let succeeded: Vec<usize> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.dest == dest && e.status == EventStatus::Pending && e.migrant.agent_ids().any(|id| used.contains(&id))
            })
            .map(|(i, _)| i)
            .collect();
        let mut ids = Vec::with_capacity(succeeded.len());
        for i in succeeded {
            self.events[i].status = EventStatus::Success;
            let via = self.events[i].via;
            self.apply_hebbian(via, Outcome::Success);
            let path = &self.events[i].hop_path;
            if path.len() > 2 && path[0] != dest {
                self.shortcut_queue.push(path.clone());
            }
            ids.push(self.events[i].id);
        }
        ids
    }

    /// Fails pending events whose destination has completed at least
    /// `window` requests since arrival.
    pub fn expire_events(&mut self) -> Vec<EventId> {
        let window = self.params.window;
        let mut expired = Vec::new();
        for i in 0..self.events.len() {
            let e = &self.events[i];
            if e.status != EventStatus::Pending {
                continue;
            }
            let done = self.habitats[e.dest.0 as usize].requests_completed;
            if done.saturating_sub(e.arrival_request_index) < window {
                continue;
            }
            let (id, via, dest) = (e.id, e.via, e.dest);
            self.events[i].status = EventStatus::Failure;
            self.apply_hebbian(via, Outcome::Failure);
            self.habitats[dest.0 as usize].pool.evict_unused(id);
            expired.push(id);
        }
        expired
    }

    /// Drops pairs whose probabilities have both decayed below `p_prune`, then
    /// adds direct connections for queued multi-hop successes.
    pub fn prune_and_shortcut(&mut self) {
        let p_prune = self.params.p_prune;
        let mut doomed = Vec::new();
        for h in &self.habitats {
            for (&d, &p) in &h.outgoing {
                if h.id < d && p < p_prune {
                    let back = self.habitats[d.0 as usize].outgoing.get(&h.id).copied().unwrap_or(0.0);
                    if back < p_prune {
                        doomed.push((h.id, d));
                    }
                }
            }
        }
        for (a, b) in doomed {
            self.habitats[a.0 as usize].outgoing.remove(&b);
            self.habitats[b.0 as usize].outgoing.remove(&a);
        }
        let queue = std::mem::take(&mut self.shortcut_queue);
        if !self.params.shortcuts_enabled {
            return;
        }
        let p_init = self.params.p_init;
        for path in queue {
            let (a, b) = (path[0], *path.last().expect("hop path is non-empty"));
            if a != b && !self.habitats[a.0 as usize].outgoing.contains_key(&b) {
                self.connect(a, b, p_init);
            }
        }
    }

    /// Undirected adjacency of pairs with `max(p_ab, p_ba) >= threshold`.
    pub fn thresholded_adjacency(&self, threshold: f64) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.habitats.len()];
        for h in &self.habitats {
            for (&d, &p) in &h.outgoing {
                let back = self.habitats[d.0 as usize].outgoing.get(&h.id).copied().unwrap_or(0.0);
                if p.max(back) >= threshold {
                    adj[h.id.0 as usize].insert(d.0 as usize);
                    adj[d.0 as usize].insert(h.id.0 as usize);
                }
            }
        }
        adj
    }

    pub fn stats(&self, threshold: f64) -> NetworkStats {
        graph_stats(&self.thresholded_adjacency(threshold))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub clustering_coefficient: f64,
    /// `None` when the largest component has fewer than 3 nodes.
    pub char_path_length: Option<f64>,
    pub edge_count: usize,
}

/// Mean local clustering coefficient and characteristic path length, both
/// taken over the largest connected component.
pub fn graph_stats(adj: &[BTreeSet<usize>]) -> NetworkStats {
    let edge_count = adj.iter().map(|s| s.len()).sum::<usize>() / 2;
    let component = largest_component(adj);
    let clustering_coefficient = if component.is_empty() {
        0.0
    } else {
        component.iter().map(|&v| local_clustering(adj, v)).sum::<f64>() / component.len() as f64
    };
    let char_path_length = if component.len() < 3 {
        None
    } else {
        let mut total = 0u64;
        let mut pairs = 0u64;
        for &src in &component {
            let dist = bfs(adj, src);
            for &dst in &component {
                if dst != src {
                    total += dist[dst].expect("same component") as u64;
                    pairs += 1;
                }
            }
        }
        Some(total as f64 / pairs as f64)
    };
    NetworkStats { clustering_coefficient, char_path_length, edge_count }
}

fn local_clustering(adj: &[BTreeSet<usize>], v: usize) -> f64 {
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if adj[a].contains(&b) {
                links += 1;
            }
        }
    }
    2.0 * links as f64 / (k * (k - 1)) as f64
}

fn bfs(adj: &[BTreeSet<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &w in &adj[u] {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Largest connected component, ignoring isolated vertices. Ties go to the
/// component containing the lowest vertex index.
fn largest_component(adj: &[BTreeSet<usize>]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..adj.len() {
        if seen[start] || adj[start].is_empty() {
            continue;
        }
        let members: Vec<usize> =
            bfs(adj, start).iter().enumerate().filter_map(|(i, d)| d.map(|_| i)).collect();
        for &m in &members {
            seen[m] = true;
        }
        if members.len() > best.len() {
            best = members;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attribute, SemanticDescription};

    fn agent(id: u64) -> Arc<Agent> {
        let d = SemanticDescription::new([Attribute::new(id as u32 % 100 + 1, 1)]).unwrap();
        Arc::new(Agent::new(AgentId(id), d, UserId(0)))
    }

    fn users(n: u32) -> Vec<UserId> {
        (0..n).map(UserId).collect()
    }

    fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    fn result_with(best: AgentSequence) -> EvolutionResult {
        EvolutionResult {
            best_raw_fitness: 1.0,
            best,
            generations_run: 1,
            migrant_events_used: BTreeSet::new(),
            final_mean_length: 1.0,
        }
    }

    #[test]
    fn hebbian_formulas() {
        assert!((hebbian_update(0.5, Outcome::Success, 0.1, 0.1) - 0.55).abs() < 1e-12);
        assert!((hebbian_update(0.5, Outcome::Failure, 0.1, 0.1) - 0.45).abs() < 1e-12);
        assert_eq!(hebbian_update(1.0, Outcome::Success, 0.1, 0.1), 1.0);
        assert_eq!(hebbian_update(0.0, Outcome::Failure, 0.1, 0.1), 0.0);
    }

    #[test]
    fn two_users_single_pair() {
        let params = NetworkParams { k0: 1.0, ..Default::default() };
        let net = HabitatNetwork::init(&users(2), params, &mut SplitMix64::new(5)).unwrap();
        assert_eq!(net.probability(HabitatId(0), HabitatId(1)), Some(0.5));
        assert_eq!(net.probability(HabitatId(1), HabitatId(0)), Some(0.5));
    }

    #[test]
    fn too_few_users() {
        let r = HabitatNetwork::init(&users(1), NetworkParams::default(), &mut SplitMix64::new(1));
        assert_eq!(r.unwrap_err(), NetworkError::TooFewUsers(1));
    }

    #[test]
    fn complete_graph_stats() {
        let adj = adjacency(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let s = graph_stats(&adj);
        assert_eq!(s.clustering_coefficient, 1.0);
        assert_eq!(s.char_path_length, Some(1.0));
        assert_eq!(s.edge_count, 6);
    }

    #[test]
    fn ring_of_six() {
        let adj = adjacency(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        let s = graph_stats(&adj);
        assert_eq!(s.clustering_coefficient, 0.0);
        // distances from any node: 1,1,2,2,3 -> 9/5
        assert!((s.char_path_length.unwrap() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn empty_graph() {
        let s = graph_stats(&adjacency(5, &[]));
        assert_eq!(s.clustering_coefficient, 0.0);
        assert_eq!(s.char_path_length, None);
        assert_eq!(s.edge_count, 0);
    }

    #[test]
    fn pool_respects_capacity_and_protects_own() {
        let mut pool = AgentPool::new(3);
        assert!(pool.insert_agent(agent(1), true, 0, None, vec![]));
        assert!(pool.insert_agent(agent(2), false, 1, None, vec![]));
        assert!(pool.insert_agent(agent(3), false, 2, None, vec![]));
        assert!(pool.insert_agent(agent(4), false, 3, None, vec![]));
        assert_eq!(pool.len(), 3);
        assert!(pool.contains_agent(AgentId(1)));
        assert!(!pool.contains_agent(AgentId(2)));
        let mut full = AgentPool::new(1);
        assert!(full.insert_agent(agent(1), true, 0, None, vec![]));
        assert!(!full.insert_agent(agent(2), false, 0, None, vec![]));
        assert_eq!(full.len(), 1);
    }

    #[test]
    fn migrate_all_or_nothing() {
        let mut net = HabitatNetwork::init(&users(6), NetworkParams { k0: 5.0, ..Default::default() }, &mut SplitMix64::new(1)).unwrap();
        for d in 1..6 {
            net.connect(HabitatId(0), HabitatId(d), 1.0);
        }
        let seq = AgentSequence::single(agent(7));
        let ev = net.migrate(HabitatId(0), &seq, &mut SplitMix64::new(2));
        assert_eq!(ev.len(), 5);
        assert_eq!(net.habitat(HabitatId(0)).unwrap().pool.sequences()[0].usage, 1);
        for d in 1..6 {
            net.connect(HabitatId(0), HabitatId(d), 0.0);
        }
        assert!(net.migrate(HabitatId(0), &seq, &mut SplitMix64::new(2)).is_empty());
    }

    #[test]
    fn usage_success_and_window_failure() {
        let mut net = HabitatNetwork::init(&users(3), NetworkParams { k0: 2.0, ..Default::default() }, &mut SplitMix64::new(1)).unwrap();
        net.connect(HabitatId(0), HabitatId(1), 1.0);
        net.connect(HabitatId(0), HabitatId(2), 1.0);
        net.connect(HabitatId(1), HabitatId(2), 0.0);
        let a = agent(1);
        net.migrate(HabitatId(0), &AgentSequence::single(a.clone()), &mut SplitMix64::new(3));
        // habitat 1 uses the migrant, habitat 2 never does
        net.complete_request(HabitatId(1));
        let ok = net.resolve_usage(HabitatId(1), &result_with(AgentSequence::single(a.clone())));
        assert_eq!(ok.len(), 1);
        let p01 = net.probability(HabitatId(0), HabitatId(1)).unwrap();
        assert_eq!(p01, 1.0);
        for _ in 0..10 {
            net.complete_request(HabitatId(2));
            net.resolve_usage(HabitatId(2), &result_with(AgentSequence::single(agent(99))));
            net.expire_events();
        }
        let c = net.event_counts();
        assert_eq!((c.success, c.failure, c.pending), (1, 1, 0));
        assert!((net.probability(HabitatId(0), HabitatId(2)).unwrap() - 0.9).abs() < 1e-12);
        assert!(net.habitat(HabitatId(2)).unwrap().pool.sequences().is_empty());
    }

    #[test]
    fn zero_window_fails_immediately() {
        let params = NetworkParams { k0: 1.0, window: 0, ..Default::default() };
        let mut net = HabitatNetwork::init(&users(2), params, &mut SplitMix64::new(1)).unwrap();
        net.connect(HabitatId(0), HabitatId(1), 1.0);
        net.migrate(HabitatId(0), &AgentSequence::single(agent(1)), &mut SplitMix64::new(1));
        assert_eq!(net.expire_events().len(), 1);
        assert!(net.probability(HabitatId(0), HabitatId(1)).unwrap() < 1.0);
    }

    #[test]
    fn prune_pairs_below_threshold() {
        let mut net = HabitatNetwork::init(&users(3), NetworkParams { k0: 2.0, ..Default::default() }, &mut SplitMix64::new(1)).unwrap();
        net.connect(HabitatId(0), HabitatId(1), 0.005);
        net.connect(HabitatId(1), HabitatId(2), 0.005);
        net.habitat_mut(HabitatId(2)).unwrap().outgoing.insert(HabitatId(1), 0.3);
        net.prune_and_shortcut();
        assert_eq!(net.probability(HabitatId(0), HabitatId(1)), None);
        assert_eq!(net.probability(HabitatId(1), HabitatId(2)), Some(0.005));
    }

    #[test]
    fn two_hop_success_creates_shortcut() {
        let params = NetworkParams { k0: 1.0, ..Default::default() };
        let mut net = HabitatNetwork::init(&users(3), params, &mut SplitMix64::new(1)).unwrap();
        for h in 0..3 {
            net.habitat_mut(HabitatId(h)).unwrap().outgoing.clear();
        }
        net.connect(HabitatId(0), HabitatId(1), 1.0);
        net.connect(HabitatId(1), HabitatId(2), 1.0);
        let a = agent(1);
        // A deploys, B receives a copy, B's response carries it on to C.
        net.habitat_mut(HabitatId(1)).unwrap().outgoing.insert(HabitatId(0), 0.0);
        net.habitat_mut(HabitatId(2)).unwrap().outgoing.insert(HabitatId(1), 0.0);
        net.deploy(HabitatId(0), a.clone(), &mut SplitMix64::new(2));
        net.complete_request(HabitatId(1));
        net.resolve_usage(HabitatId(1), &result_with(AgentSequence::single(a.clone())));
        net.migrate(HabitatId(1), &AgentSequence::single(a.clone()), &mut SplitMix64::new(3));
        net.complete_request(HabitatId(2));
        net.resolve_usage(HabitatId(2), &result_with(AgentSequence::single(a.clone())));
        let hop = net.events().iter().find(|e| e.dest == HabitatId(2)).unwrap();
        assert_eq!(hop.hop_path, vec![HabitatId(0), HabitatId(1), HabitatId(2)]);
        assert_eq!(net.probability(HabitatId(0), HabitatId(2)), None);
        net.prune_and_shortcut();
        assert_eq!(net.probability(HabitatId(0), HabitatId(2)), Some(0.5));
        assert_eq!(net.probability(HabitatId(2), HabitatId(0)), Some(0.5));
    }

    #[test]
    fn shortcuts_disabled_never_adds() {
        let params = NetworkParams { k0: 1.0, shortcuts_enabled: false, ..Default::default() };
        let mut net = HabitatNetwork::init(&users(3), params, &mut SplitMix64::new(1)).unwrap();
        net.shortcut_queue.push(vec![HabitatId(0), HabitatId(1), HabitatId(2)]);
        let before = net.pair_count();
        net.prune_and_shortcut();
        assert!(net.pair_count() <= before);
    }
}
