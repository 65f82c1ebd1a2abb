use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use digeco::model::{fitness, Agent, AgentId, AgentSequence, Attribute, UserRequest};
use digeco::rng::SplitMix64;
use digeco::userbase::{build_scenario, next_request, ScenarioParams};
use digeco::{Ecosystem, RunConfig};

fn check_request(req: &UserRequest, p: &ScenarioParams) {
    req.validate(p.space, p.request_sets..=p.request_sets, p.max_set_size, p.agent_desc_max).unwrap();
}

#[test]
fn initial_deployment_shape() {
    let p = ScenarioParams::default();
    let (scenario, deployment) = build_scenario(&p, &mut SplitMix64::new(4));
    assert_eq!(deployment.len(), 500);
    assert_eq!(scenario.users.len(), 100);
    for c in 0..p.num_communities {
        assert_eq!(scenario.users.iter().filter(|u| u.community_id == c).count(), 10);
    }
    for (user, desc) in &deployment {
        let t = &scenario.templates[scenario.users[user.0 as usize].community_id];
        assert!(desc.len() <= p.agent_desc_max);
        assert!(desc.attributes().iter().all(|a| t.covered.contains(a)));
    }
}

#[test]
fn users_are_drawn_uniformly() {
    let p = ScenarioParams::default();
    let (mut scenario, _) = build_scenario(&p, &mut SplitMix64::new(8));
    let mut rng = SplitMix64::new(9);
    for i in 1..=10_000 {
        let (_, req) = next_request(&mut scenario, i, &p, &mut rng);
        check_request(&req, &p);
    }
    for u in &scenario.users {
        assert!((70..=130).contains(&u.requests_submitted), "user {} drew {}", u.user_id, u.requests_submitted);
    }
}

#[test]
fn noise_extremes() {
    for (noise, seed) in [(0.0, 1u64), (1.0, 2)] {
        let p = ScenarioParams { noise_prob: noise, ..Default::default() };
        let (mut scenario, _) = build_scenario(&p, &mut SplitMix64::new(seed));
        let mut rng = SplitMix64::new(seed + 10);
        for i in 1..=200 {
            let (user, req) = next_request(&mut scenario, i, &p, &mut rng);
            let t = &scenario.templates[scenario.users[user.0 as usize].community_id];
            for (rs, ts) in req.sets().iter().zip(&t.template) {
                for (r, a) in rs.iter().zip(ts) {
                    assert_eq!(r.attr_id, a.attr_id);
                    let shifted = r.value.abs_diff(a.value);
                    if noise == 0.0 {
                        assert_eq!(shifted, 0);
                    } else {
                        let clamped = (a.value == 1 || a.value == p.space.v_max) && shifted == 0;
                        assert!(shifted == 1 || clamped);
                    }
                }
            }
        }
    }
}

#[test]
fn initial_agents_give_the_coverage_floor() {
    let p = ScenarioParams { noise_prob: 0.0, ..Default::default() };
    for seed in 0..20u64 {
        let (mut scenario, deployment) = build_scenario(&p, &mut SplitMix64::new(seed));
        let mut rng = SplitMix64::new(seed);
        let (user, req) = next_request(&mut scenario, 1, &p, &mut rng);
        let agents: Vec<Arc<Agent>> = deployment
            .iter()
            .enumerate()
            .filter(|(_, (u, _))| *u == user)
            .map(|(i, (u, d))| Arc::new(Agent::new(AgentId(i as u64), d.clone(), *u)))
            .collect();
        let seq = AgentSequence::new(agents).unwrap();
        let offered: BTreeSet<Attribute> = seq.flat_description().collect();
        let t = &scenario.templates[scenario.users[user.0 as usize].community_id];
        if t.covered.len() <= p.initial_agents_per_user * p.agent_desc_max {
            assert!(t.covered.iter().all(|a| offered.contains(a)));
        }
        let missing = t.attributes().filter(|a| !offered.contains(a)).count();
        let floor = 1.0 / (1.0 + 10.0 * missing as f64);
        assert_eq!(fitness(&seq, &req, 10.0), floor);
        let expected_covered = (p.initial_coverage * t.len() as f64).round() as usize;
        assert_eq!(t.covered.len(), expected_covered.clamp(1, t.len()));
    }
}

#[test]
fn deployment_count_invariant() {
    let mut cfg = RunConfig::default();
    cfg.scenario.total_requests = 600;
    let initial = (cfg.scenario.num_users * cfg.scenario.initial_agents_per_user) as u64;
    let per = cfg.scenario.requests_per_new_agent;
    let mut eco = Ecosystem::new(cfg).unwrap();
    assert_eq!(eco.agents_created(), initial);
    eco.run_to_end(|eco, out| {
        let expected: u64 = initial + eco.scenario.users.iter().map(|u| u.requests_submitted / per).sum::<u64>();
        assert_eq!(eco.agents_created(), expected);
        let u = &eco.scenario.users[out.record.user_id.0 as usize];
        assert_eq!(out.deployed.is_some(), u.requests_submitted % per == 0);
    })
    .unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_requests_are_valid(seed in any::<u64>(), sets in 4usize..=12, size in 1usize..=3, noise in 0.0f64..=1.0) {
        let p = ScenarioParams { request_sets: sets, max_set_size: size, noise_prob: noise, ..Default::default() };
        let (mut scenario, deployment) = build_scenario(&p, &mut SplitMix64::new(seed));
        prop_assert_eq!(deployment.len(), p.num_users * p.initial_agents_per_user);
        let mut rng = SplitMix64::new(seed ^ 1);
        for i in 1..=20 {
            let (_, req) = next_request(&mut scenario, i, &p, &mut rng);
            prop_assert!(req.validate(p.space, 4..=12, p.max_set_size, p.agent_desc_max).is_ok());
            prop_assert_eq!(req.sets().len(), sets);
        }
    }
}
