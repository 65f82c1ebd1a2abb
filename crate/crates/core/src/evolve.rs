//! Per-request evolutionary search over agent-sequences.
//!
//! A population is seeded from the habitat's pool, then each generation runs
//! evaluate, fitness-proportional selection (with replacement, no elitism),
//! one-point crossover on a fraction of survivors and a single point
//! mutation on another fraction. The best individual ever seen is tracked
//! outside the population and returned as the response.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::EvolveError;
use crate::model::{parsimony_fitness, Agent, AgentId, AgentSequence, FitnessEvaluator, UserRequest};
use crate::network::{AgentPool, EventId};
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub crossover_fraction: f64,
    pub mutation_fraction: f64,
    /// Parsimony pressure.
    pub beta: f64,
    pub pop_base: usize,
    pub pop_per_len: f64,
    pub pop_min: usize,
    pub pop_max: usize,
    pub max_generations: u64,
    pub stagnation_window: u64,
    pub d_miss: f64,
    /// Chance that a seed individual is a stored sequence rather than a
    /// fresh random one.
    pub stored_copy_prob: f64,
    /// Fresh seed individuals have length `1..=seed_len_max`.
    pub seed_len_max: usize,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            crossover_fraction: 0.10,
            mutation_fraction: 0.10,
            beta: 0.1,
            pop_base: 20,
            pop_per_len: 5.0,
            pop_min: 20,
            pop_max: 200,
            max_generations: 50,
            stagnation_window: 10,
            d_miss: 10.0,
            stored_copy_prob: 0.3,
            seed_len_max: 4,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, f) in [
            ("crossover_fraction", self.crossover_fraction),
            ("mutation_fraction", self.mutation_fraction),
            ("stored_copy_prob", self.stored_copy_prob),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.pop_min <= self.pop_base && self.pop_base <= self.pop_max) {
            return Err("need pop_min <= pop_base <= pop_max".into());
        }
        if self.pop_min == 0 {
            return Err("pop_min must be positive".into());
        }
        if self.max_generations == 0 {
            return Err("max_generations must be at least 1".into());
        }
        if !(self.beta >= 0.0) || !(self.d_miss >= 0.0) || !(self.pop_per_len >= 0.0) {
            return Err("beta, d_miss and pop_per_len must be non-negative".into());
        }
        if self.seed_len_max == 0 {
            return Err("seed_len_max must be positive".into());
        }
        Ok(())
    }
}

/// Population size for a given mean individual length.
pub fn target_size(avg_len: f64, params: &EvolutionParams) -> usize {
    if !(avg_len >= 1.0) {
        return params.pop_min;
    }
    let raw = (params.pop_base as f64 + params.pop_per_len * avg_len).round();
    (raw as usize).clamp(params.pop_min, params.pop_max)
}

#[derive(Clone, Debug)]
pub struct Population {
    pub individuals: Vec<AgentSequence>,
    pub request_id: u64,
    pub generation: u64,
    pub migrant_tags: BTreeMap<AgentId, BTreeSet<EventId>>,
    rng: SplitMix64,
}

impl Population {
    pub fn mean_length(&self) -> f64 {
        mean_length(&self.individuals)
    }

    pub fn into_rng(self) -> SplitMix64 {
        self.rng
    }
}

fn mean_length(individuals: &[AgentSequence]) -> f64 {
    if individuals.is_empty() {
        return 0.0;
    }
    individuals.iter().map(|s| s.len()).sum::<usize>() as f64 / individuals.len() as f64
}

/// Seeds a population for `req` from `pool`.
///
/// Each individual is, with probability `stored_copy_prob` (when the pool
/// holds stored sequences), a copy of a stored sequence picked by roulette
/// on its raw fitness for `req`; otherwise `1..=seed_len_max` agents drawn
/// uniformly with replacement from the pool's agents.
pub fn seed_population(
    pool: &AgentPool,
    migrant_tags: BTreeMap<AgentId, BTreeSet<EventId>>,
    req: &UserRequest,
    params: &EvolutionParams,
    mut rng: SplitMix64,
) -> Result<Population, EvolveError> {
    let agents: Vec<Arc<Agent>> = pool.agents().iter().map(|e| e.agent.clone()).collect();
    if agents.is_empty() {
        return Err(EvolveError::EmptyPool);
    }
    let stored: Vec<&AgentSequence> = pool.sequences().iter().map(|s| &s.seq).collect();
    let fresh_mean = (1 + params.seed_len_max) as f64 / 2.0;
    let expected_len = if stored.is_empty() {
        fresh_mean
    } else {
        let q = params.stored_copy_prob;
        (1.0 - q) * fresh_mean + q * stored.iter().map(|s| s.len()).sum::<usize>() as f64 / stored.len() as f64
    };
    let size = target_size(expected_len, params);
    let eval = FitnessEvaluator::new(req, params.d_miss);
    let stored_weights: Vec<f64> = stored.iter().map(|s| eval.fitness(s)).collect();
    let individuals = (0..size)
        .map(|_| {
            if !stored.is_empty() && rng.chance(params.stored_copy_prob) {
                stored[roulette(&stored_weights, 1, &mut rng)[0]].clone()
            } else {
                let len = rng.range_inclusive(1, params.seed_len_max as u64) as usize;
                let picked = (0..len).map(|_| agents[rng.index(agents.len())].clone()).collect();
                AgentSequence::from_vec_unchecked(picked)
            }
        })
        .collect();
    Ok(Population { individuals, request_id: req.request_id, generation: 0, migrant_tags, rng })
}

/// Roulette-wheel indices: `n` draws with replacement, each index chosen
/// with probability proportional to its weight.
pub fn roulette(weights: &[f64], n: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        total += w.max(0.0);
        cumulative.push(total);
    }
    assert!(total > 0.0, "roulette needs a positive total weight");
    (0..n)
        .map(|_| {
            let x = rng.next_f64() * total;
            cumulative.partition_point(|&c| c <= x).min(weights.len() - 1)
        })
        .collect()
}

/// Fitness-proportional, non-elitist selection of `n` survivors.
pub fn select(individuals: &[AgentSequence], adjusted: &[f64], n: usize, rng: &mut SplitMix64) -> Vec<AgentSequence> {
    assert_eq!(individuals.len(), adjusted.len());
    roulette(adjusted, n, rng).into_iter().map(|i| individuals[i].clone()).collect()
}

/// Exchanges the tails of two parents after cut points `cut_a` and `cut_b`.
pub fn one_point_crossover(
    a: &AgentSequence,
    b: &AgentSequence,
    cut_a: usize,
    cut_b: usize,
) -> (AgentSequence, AgentSequence) {
    let (a, b) = (a.agents(), b.agents());
    let first = a[..cut_a].iter().chain(&b[cut_b..]).cloned().collect();
    let second = b[..cut_b].iter().chain(&a[cut_a..]).cloned().collect();
    (AgentSequence::from_vec_unchecked(first), AgentSequence::from_vec_unchecked(second))
}

/// Applies one-point crossover to `floor(fraction * N)` randomly chosen
/// individuals, taken in pairs. Pairs involving a length-1 parent, and an
/// odd leftover, pass through unchanged.
pub fn crossover(individuals: &mut [AgentSequence], fraction: f64, rng: &mut SplitMix64) {
    let k = (fraction * individuals.len() as f64).floor() as usize;
    let chosen = rng.sample_indices(individuals.len(), k);
    for pair in chosen.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        let (la, lb) = (individuals[i].len(), individuals[j].len());
        if la < 2 || lb < 2 {
            continue;
        }
        let cut_a = rng.range_inclusive(1, la as u64 - 1) as usize;
        let cut_b = rng.range_inclusive(1, lb as u64 - 1) as usize;
        let (x, y) = one_point_crossover(&individuals[i], &individuals[j], cut_a, cut_b);
        individuals[i] = x;
        individuals[j] = y;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mutation {
    Insert { pos: usize, agent: Arc<Agent> },
    Replace { pos: usize, agent: Arc<Agent> },
    Delete { pos: usize },
}

pub fn apply_mutation(seq: &mut AgentSequence, m: Mutation) {
    let agents = seq.agents_mut();
    match m {
        Mutation::Insert { pos, agent } => agents.insert(pos, agent),
        Mutation::Replace { pos, agent } => agents[pos] = agent,
        Mutation::Delete { pos } => {
            if agents.len() > 1 {
                agents.remove(pos);
            }
        }
    }
}

/// Gives `floor(fraction * N)` randomly chosen individuals one point
/// mutation each: insertion, replacement or deletion with equal odds, at a
/// uniform position. Deletion on a length-1 individual becomes replacement.
pub fn mutate(individuals: &mut [AgentSequence], fraction: f64, pool: &[Arc<Agent>], rng: &mut SplitMix64) {
    if pool.is_empty() {
        return;
    }
    let k = (fraction * individuals.len() as f64).floor() as usize;
    for i in rng.sample_indices(individuals.len(), k) {
        let len = individuals[i].len();
        let mut kind = rng.below(3);
        if kind == 2 && len == 1 {
            kind = 1;
        }
        let m = match kind {
            0 => {
                let pos = rng.index(len + 1);
                Mutation::Insert { pos, agent: pool[rng.index(pool.len())].clone() }
            }
            1 => {
                let pos = rng.index(len);
                Mutation::Replace { pos, agent: pool[rng.index(pool.len())].clone() }
            }
            _ => Mutation::Delete { pos: rng.index(len) },
        };
        apply_mutation(&mut individuals[i], m);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub size: usize,
    pub best_raw: f64,
    pub mean_length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    pub best: AgentSequence,
    pub best_raw_fitness: f64,
    pub generations_run: u64,
    pub migrant_events_used: BTreeSet<EventId>,
    pub final_mean_length: f64,
}

/// Evolves a response to `req` at a habitat with the given pool.
pub fn evolve(
    pool: &AgentPool,
    migrant_tags: BTreeMap<AgentId, BTreeSet<EventId>>,
    req: &UserRequest,
    params: &EvolutionParams,
    rng: SplitMix64,
) -> Result<EvolutionResult, EvolveError> {
    evolve_traced(pool, migrant_tags, req, params, rng).map(|(r, _)| r)
}

/// [`evolve`], also returning per-generation statistics. Entry 0 describes
/// the seeded population.
pub fn evolve_traced(
    pool: &AgentPool,
    migrant_tags: BTreeMap<AgentId, BTreeSet<EventId>>,
    req: &UserRequest,
    params: &EvolutionParams,
    rng: SplitMix64,
) -> Result<(EvolutionResult, Vec<GenerationStats>), EvolveError> {
    let pool_agents: Vec<Arc<Agent>> = pool.agents().iter().map(|e| e.agent.clone()).collect();
    let mut pop = seed_population(pool, migrant_tags, req, params, rng)?;
    let evaluator = FitnessEvaluator::new(req, params.d_miss);

    let mut raw: Vec<f64> = pop.individuals.iter().map(|s| evaluator.fitness(s)).collect();
    let (mut best_idx, mut best_raw) = argmax(&raw);
    let mut best = pop.individuals[best_idx].clone();
    let mut history = vec![GenerationStats { size: raw.len(), best_raw, mean_length: pop.mean_length() }];
    let mut stale = 0u64;

    while pop.generation < params.max_generations {
        let avg_len = pop.mean_length();
        let adjusted: Vec<f64> = pop
            .individuals
            .iter()
            .zip(&raw)
            .map(|(s, &f)| parsimony_fitness(f, s.len(), avg_len, params.beta))
            .collect();
        let n = target_size(avg_len, params);
        let mut next = select(&pop.individuals, &adjusted, n, &mut pop.rng);
        crossover(&mut next, params.crossover_fraction, &mut pop.rng);
        mutate(&mut next, params.mutation_fraction, &pool_agents, &mut pop.rng);
        pop.individuals = next;
        pop.generation += 1;

        raw = pop.individuals.iter().map(|s| evaluator.fitness(s)).collect();
        let (gen_idx, gen_best) = argmax(&raw);
        history.push(GenerationStats { size: raw.len(), best_raw: gen_best, mean_length: pop.mean_length() });
        if gen_best > best_raw {
            best_raw = gen_best;
            best_idx = gen_idx;
            best = pop.individuals[best_idx].clone();
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= params.stagnation_window {
            break;
        }
    }

    let migrant_events_used = best
        .agent_ids()
        .filter_map(|id| pop.migrant_tags.get(&id))
        .flatten()
        .copied()
        .collect();
    let result = EvolutionResult {
        best_raw_fitness: best_raw,
        best,
        generations_run: pop.generation,
        migrant_events_used,
        final_mean_length: pop.mean_length(),
    };
    Ok((result, history))
}

/// First index holding the maximum.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attribute, SemanticDescription, UserId};

    fn agent(id: u64, attrs: &[(u32, u32)]) -> Arc<Agent> {
        let d = SemanticDescription::new(attrs.iter().map(|&(i, v)| Attribute::new(i, v))).unwrap();
        Arc::new(Agent::new(AgentId(id), d, UserId(0)))
    }

    fn seq(agents: &[&Arc<Agent>]) -> AgentSequence {
        AgentSequence::new(agents.iter().map(|a| (*a).clone()).collect()).unwrap()
    }

    fn ids(s: &AgentSequence) -> Vec<u64> {
        s.agent_ids().map(|a| a.0).collect()
    }

    fn pool_of(agents: &[Arc<Agent>]) -> AgentPool {
        let mut pool = AgentPool::new(200);
        for a in agents {
            pool.insert_agent(a.clone(), true, 0, None, vec![]);
        }
        pool
    }

    fn request(attrs: &[(u32, u32)]) -> UserRequest {
        UserRequest::new(1, UserId(0), vec![attrs.iter().map(|&(i, v)| Attribute::new(i, v)).collect()]).unwrap()
    }

    #[test]
    fn target_size_cases() {
        let p = EvolutionParams::default();
        assert_eq!(target_size(1.0, &p), 25);
        assert_eq!(target_size(100.0, &p), 200);
        assert_eq!(target_size(0.2, &p), 20);
    }

    #[test]
    fn crossover_definition() {
        let (a, b, c, d, e) = (agent(1, &[(1, 1)]), agent(2, &[(2, 1)]), agent(3, &[(3, 1)]), agent(4, &[(4, 1)]), agent(5, &[(5, 1)]));
        let (x, y) = one_point_crossover(&seq(&[&a, &b, &c]), &seq(&[&d, &e]), 1, 1);
        assert_eq!(ids(&x), vec![1, 5]);
        assert_eq!(ids(&y), vec![4, 2, 3]);
    }

    #[test]
    fn crossover_skips_length_one_and_zero_fraction() {
        let (a, b) = (agent(1, &[(1, 1)]), agent(2, &[(2, 1)]));
        let mut pop = vec![seq(&[&a]), seq(&[&b])];
        crossover(&mut pop, 1.0, &mut SplitMix64::new(1));
        assert_eq!(ids(&pop[0]), vec![1]);
        assert_eq!(ids(&pop[1]), vec![2]);
        let mut pop2 = vec![seq(&[&a, &b]), seq(&[&b, &a])];
        let before = pop2.clone();
        crossover(&mut pop2, 0.0, &mut SplitMix64::new(1));
        assert_eq!(pop2, before);
    }

    #[test]
    fn mutation_definitions() {
        let (a, b, c, d) = (agent(1, &[(1, 1)]), agent(2, &[(2, 1)]), agent(3, &[(3, 1)]), agent(4, &[(4, 1)]));
        let mut s = seq(&[&a, &b, &c]);
        apply_mutation(&mut s, Mutation::Delete { pos: 1 });
        assert_eq!(ids(&s), vec![1, 3]);
        let mut s = seq(&[&a]);
        apply_mutation(&mut s, Mutation::Insert { pos: 0, agent: d.clone() });
        assert_eq!(ids(&s), vec![4, 1]);
        let mut s = seq(&[&a, &b]);
        apply_mutation(&mut s, Mutation::Replace { pos: 1, agent: d });
        assert_eq!(ids(&s), vec![1, 4]);
    }

    #[test]
    fn mutate_zero_fraction_is_identity() {
        let (a, b) = (agent(1, &[(1, 1)]), agent(2, &[(2, 1)]));
        let mut pop = vec![seq(&[&a, &b]); 10];
        let before = pop.clone();
        mutate(&mut pop, 0.0, &[a, b], &mut SplitMix64::new(3));
        assert_eq!(pop, before);
    }

    #[test]
    fn mutate_never_empties() {
        let a = agent(1, &[(1, 1)]);
        let mut pop = vec![seq(&[&a]); 50];
        let mut rng = SplitMix64::new(8);
        for _ in 0..100 {
            mutate(&mut pop, 1.0, std::slice::from_ref(&a), &mut rng);
        }
        assert!(pop.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn empty_pool_is_an_error() {
        let pool = AgentPool::new(10);
        let r = evolve(&pool, BTreeMap::new(), &request(&[(1, 1)]), &EvolutionParams::default(), SplitMix64::new(1));
        assert_eq!(r.unwrap_err(), EvolveError::EmptyPool);
    }

    #[test]
    fn fresh_seed_lengths() {
        let agents: Vec<_> = (0..10).map(|i| agent(i, &[(i as u32 + 1, 1)])).collect();
        let pop = seed_population(&pool_of(&agents), BTreeMap::new(), &request(&[(1, 1)]), &EvolutionParams::default(), SplitMix64::new(4)).unwrap();
        assert!(pop.individuals.iter().all(|s| (1..=4).contains(&s.len())));
        let single = seed_population(&pool_of(&agents[..1]), BTreeMap::new(), &request(&[(1, 1)]), &EvolutionParams::default(), SplitMix64::new(4)).unwrap();
        assert!(single.individuals.iter().all(|s| (1..=4).contains(&s.len()) && s.agent_ids().all(|id| id == AgentId(0))));
    }

    #[test]
    fn stagnation_zero_stops_after_one_generation() {
        let agents: Vec<_> = (0..5).map(|i| agent(i, &[(i as u32 + 1, 1)])).collect();
        let params = EvolutionParams { stagnation_window: 0, ..Default::default() };
        let r = evolve(&pool_of(&agents), BTreeMap::new(), &request(&[(1, 1), (2, 1)]), &params, SplitMix64::new(2)).unwrap();
        assert_eq!(r.generations_run, 1);
    }

    #[test]
    fn mismatched_pool_floor() {
        let agents: Vec<_> = (0..6).map(|i| agent(i, &[(50 + i as u32, 3)])).collect();
        let req = request(&[(1, 1), (2, 2), (3, 3), (4, 4), (5, 5)]);
        let r = evolve(&pool_of(&agents), BTreeMap::new(), &req, &EvolutionParams::default(), SplitMix64::new(7)).unwrap();
        assert_eq!(r.best_raw_fitness, 1.0 / 51.0);
    }

    #[test]
    fn roulette_degenerate() {
        let mut rng = SplitMix64::new(11);
        let picks = roulette(&[1.0, 1e-12], 1000, &mut rng);
        assert!(picks.iter().filter(|&&i| i == 0).count() >= 999);
        assert!(roulette(&[0.3], 50, &mut rng).iter().all(|&i| i == 0));
    }
}
