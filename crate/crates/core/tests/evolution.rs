use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use digeco::evolve::{evolve, evolve_traced, seed_population, target_size, EvolutionParams};
use digeco::model::{fitness, Agent, AgentId, AgentSequence, Attribute, SemanticDescription, UserId, UserRequest};
use digeco::network::AgentPool;
use digeco::rng::SplitMix64;

fn agent(id: u64, attrs: &[(u32, u32)]) -> Arc<Agent> {
    let d = SemanticDescription::new(attrs.iter().map(|&(i, v)| Attribute::new(i, v))).unwrap();
    Arc::new(Agent::new(AgentId(id), d, UserId(0)))
}

fn pool_of(agents: &[Arc<Agent>]) -> AgentPool {
    let mut pool = AgentPool::new(200);
    for a in agents {
        pool.insert_agent(a.clone(), true, 0, None, vec![]);
    }
    pool
}

fn request(attrs: &[(u32, u32)]) -> UserRequest {
    UserRequest::new(1, UserId(0), attrs.iter().map(|&(i, v)| vec![Attribute::new(i, v)]).collect()).unwrap()
}

/// Three exact providers among distractors.
fn cover_fixture() -> (AgentPool, UserRequest) {
    let mut agents = vec![agent(0, &[(1, 5)]), agent(1, &[(2, 3)]), agent(2, &[(3, 7)])];
    for i in 3..10 {
        agents.push(agent(i, &[(10 + i as u32, 1), (30 + i as u32, 2)]));
    }
    (pool_of(&agents), request(&[(1, 5), (2, 3), (3, 7)]))
}

/// A richer pool where the search needs several generations.
fn rugged_fixture() -> (AgentPool, UserRequest) {
    let agents: Vec<Arc<Agent>> = (0..30u64)
        .map(|i| {
            let k = i as u32;
            agent(i, &[(k % 12 + 1, k % 10 + 1), ((k * 7) % 12 + 1, (k * 3) % 10 + 1)])
        })
        .collect();
    let req = request(&[(1, 2), (2, 9), (3, 4), (4, 4), (5, 1), (6, 6), (7, 3), (8, 8), (9, 5), (10, 10)]);
    (pool_of(&agents), req)
}

#[test]
fn three_attribute_cover_is_found() {
    let (pool, req) = cover_fixture();
    let params = EvolutionParams { max_generations: 30, stagnation_window: 30, ..Default::default() };
    let hits = (0..100u64)
        .filter(|&s| evolve(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(s)).unwrap().best_raw_fitness == 1.0)
        .count();
    assert!(hits >= 95, "perfect response in {hits}/100 seeds");
}

#[test]
fn non_elitism_is_observable() {
    let (pool, req) = rugged_fixture();
    let params = EvolutionParams::default();
    let runs_with_regression = (0..100u64)
        .filter(|&s| {
            let (_, hist) = evolve_traced(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(s)).unwrap();
            hist.windows(2).any(|w| w[1].best_raw < w[0].best_raw)
        })
        .count();
    assert!(runs_with_regression >= 1);
}

#[test]
fn population_size_follows_target() {
    let (pool, req) = rugged_fixture();
    let params = EvolutionParams::default();
    for s in 0..20u64 {
        let (result, hist) = evolve_traced(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(s)).unwrap();
        assert_eq!(hist.len() as u64, result.generations_run + 1);
        for w in hist.windows(2) {
            assert_eq!(w[1].size, target_size(w[0].mean_length, &params));
            assert!((params.pop_min..=params.pop_max).contains(&w[1].size));
        }
    }
}

#[test]
fn best_ever_is_consistent() {
    let (pool, req) = rugged_fixture();
    let params = EvolutionParams::default();
    for s in 0..20u64 {
        let (result, hist) = evolve_traced(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(s)).unwrap();
        let best_seen = hist.iter().map(|g| g.best_raw).fold(0.0, f64::max);
        assert_eq!(result.best_raw_fitness, best_seen);
        assert_eq!(result.best_raw_fitness, fitness(&result.best, &req, params.d_miss));
    }
}

#[test]
fn identical_inputs_identical_result() {
    let (pool, req) = rugged_fixture();
    let params = EvolutionParams::default();
    let a = evolve(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(42)).unwrap();
    let b = evolve(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(42)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.best_raw_fitness.to_bits(), b.best_raw_fitness.to_bits());
}

#[test]
fn stored_perfect_sequence_usually_seeded() {
    let (mut pool, req) = cover_fixture();
    let perfect = AgentSequence::new(pool.agents()[..3].iter().map(|e| e.agent.clone()).collect()).unwrap();
    pool.insert_sequence(perfect.clone(), 1, 0, None, vec![]);
    let params = EvolutionParams::default();
    let present = (0..200u64)
        .filter(|&s| {
            let pop = seed_population(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(s)).unwrap();
            pop.individuals.iter().any(|i| i == &perfect)
        })
        .count();
    // 1 - 0.7^N with N >= 20 exceeds 0.999
    assert!(present >= 198, "{present}/200");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_stay_in_range(seed in any::<u64>(), beta in 0.0f64..1.0) {
        let (pool, req) = rugged_fixture();
        let params = EvolutionParams { beta, ..Default::default() };
        let r = evolve(&pool, BTreeMap::new(), &req, &params, SplitMix64::new(seed)).unwrap();
        prop_assert!(r.best_raw_fitness > 0.0 && r.best_raw_fitness <= 1.0);
        prop_assert!(r.generations_run >= 1 && r.generations_run <= params.max_generations);
        prop_assert!(r.best.agents().iter().all(|a| pool.contains_agent(a.id)));
    }

    #[test]
    fn target_size_is_clamped(avg in 0.0f64..500.0) {
        let params = EvolutionParams::default();
        let n = target_size(avg, &params);
        prop_assert!((params.pop_min..=params.pop_max).contains(&n));
    }
}
