//! Ecology-style measurements over traces and ecosystem snapshots:
//! succession, species clustering, abundance histograms, species-area
//! curves and the log-normal / power-law fits used to read them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::EcologyError;
use crate::model::{AgentId, HabitatId, SemanticDescription, UserId};
use crate::network::HabitatNetwork;
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessionRecord {
    pub request_index: u64,
    pub user_id: UserId,
    pub habitat_id: HabitatId,
    pub generations_run: u64,
    pub effectiveness: f64,
}

/// Jaccard distance over `(attr_id, value)` pairs.
pub fn description_distance(a: &SemanticDescription, b: &SemanticDescription) -> f64 {
    let (x, y) = (a.attributes(), b.attributes());
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = x.len() + y.len() - common;
    if union == 0 {
        return 0.0;
    }
    1.0 - common as f64 / union as f64
}

/// A distinct agent and the number of pool copies of it.
#[derive(Clone, Debug, PartialEq)]
pub struct Organism {
    pub id: AgentId,
    pub description: SemanticDescription,
    pub copies: usize,
}

/// Agent instances across all habitat pools, one entry per agent id.
/// Stored sequences are not counted.
pub fn collect_organisms(net: &HabitatNetwork) -> Vec<Organism> {
    let mut by_id: BTreeMap<AgentId, Organism> = BTreeMap::new();
    for h in net.habitats() {
        for e in h.pool.agents() {
            by_id
                .entry(e.agent.id)
                .or_insert_with(|| Organism { id: e.agent.id, description: e.agent.description.clone(), copies: 0 })
                .copies += 1;
        }
    }
    by_id.into_values().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Species {
    /// `(agent, copies)` in ascending id order.
    pub members: Vec<(AgentId, usize)>,
}

impl Species {
    pub fn size(&self) -> usize {
        self.members.iter().map(|m| m.1).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesPartition {
    pub theta: f64,
    pub clusters: Vec<Species>,
}

impl SpeciesPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Species::size).collect()
    }

    pub fn total_organisms(&self) -> usize {
        self.clusters.iter().map(Species::size).sum()
    }

    pub fn relative_abundances(&self) -> Vec<f64> {
        let total = self.total_organisms() as f64;
        self.clusters.iter().map(|s| s.size() as f64 / total).collect()
    }

    /// Agent id -> species index.
    pub fn species_index(&self) -> BTreeMap<AgentId, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.members.iter().map(move |m| (m.0, k)))
            .collect()
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Single-linkage clustering at threshold `theta`: two organisms share a
/// species when a chain of organisms links them with every step at distance
/// `<= theta`. Organisms are processed in agent-id order; species are
/// ordered by their lowest member id.
pub fn cluster_species(organisms: &[Organism], theta: f64) -> Result<SpeciesPartition, EcologyError> {
    if organisms.is_empty() {
        return Err(EcologyError::TooFew { what: "organisms", needed: 1, got: 0 });
    }
    let mut sorted: Vec<&Organism> = organisms.iter().collect();
    sorted.sort_by_key(|o| o.id);

    // identical descriptions are at distance 0, so link them up front
    let mut distinct: Vec<&SemanticDescription> = Vec::new();
    let mut first_of: BTreeMap<&SemanticDescription, usize> = BTreeMap::new();
    let mut desc_of = Vec::with_capacity(sorted.len());
    for o in &sorted {
        let k = *first_of.entry(&o.description).or_insert_with(|| {
            distinct.push(&o.description);
            distinct.len() - 1
        });
        desc_of.push(k);
    }
    let mut dsu = DisjointSet((0..distinct.len()).collect());
    for i in 0..distinct.len() {
        for j in (i + 1)..distinct.len() {
            if description_distance(distinct[i], distinct[j]) <= theta {
                dsu.union(i, j);
            }
        }
    }

    let mut cluster_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut clusters: Vec<Species> = Vec::new();
    for (o, &k) in sorted.iter().zip(&desc_of) {
        let root = dsu.find(k);
        let c = *cluster_of_root.entry(root).or_insert_with(|| {
            clusters.push(Species { members: Vec::new() });
            clusters.len() - 1
        });
        clusters[c].members.push((o.id, o.copies));
    }
    Ok(SpeciesPartition { theta, clusters })
}

/// Octave class of an organism count: class `k` covers `[2^k, 2^(k+1))`.
pub fn abundance_class(size: usize) -> u32 {
    debug_assert!(size > 0);
    usize::BITS - 1 - size.leading_zeros()
}

/// Species count per abundance class.
pub fn relative_abundance(partition: &SpeciesPartition) -> BTreeMap<u32, usize> {
    let mut hist = BTreeMap::new();
    for s in partition.sizes() {
        *hist.entry(abundance_class(s)).or_insert(0) += 1;
    }
    hist
}

/// True when the lowest abundance class holds at least as many species as
/// any other class.
pub fn lowest_class_is_modal(hist: &BTreeMap<u32, usize>) -> bool {
    match hist.iter().next() {
        Some((_, &first)) => hist.values().all(|&c| c <= first),
        None => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    LogNormal,
    PowerLaw,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::LogNormal => "log_normal",
            FitModel::PowerLaw => "power_law",
        }
    }
}

/// `param1, param2` are `(mu, sigma)` for log-normal and `(slope,
/// intercept)` for power-law fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub param1: f64,
    pub param2: f64,
    pub r_squared: f64,
}

fn r_squared(observed: &[f64], predicted: &[f64]) -> f64 {
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    let ss_res: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    if ss_tot <= f64::EPSILON * observed.len() as f64 {
        return if ss_res <= 1e-12 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Method-of-moments log-normal fit to species sizes. `r_squared` compares
/// observed octave-class counts with the fitted distribution's mass per
/// class.
pub fn log_normal_fit(sizes: &[f64]) -> Result<FitResult, EcologyError> {
    if sizes.len() < 3 {
        return Err(EcologyError::TooFew { what: "species", needed: 3, got: sizes.len() });
    }
    if let Some(&bad) = sizes.iter().find(|&&s| !(s > 0.0)) {
        return Err(EcologyError::NonPositive(bad));
    }
    let logs: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();

    let class = |s: f64| s.log2().floor() as i64;
    let lo = sizes.iter().map(|&s| class(s)).min().unwrap();
    let hi = sizes.iter().map(|&s| class(s)).max().unwrap();
    let mut observed = vec![0.0; (hi - lo + 1) as usize];
    for &s in sizes {
        observed[(class(s) - lo) as usize] += 1.0;
    }
    let ln2 = std::f64::consts::LN_2;
    let predicted: Vec<f64> = (lo..=hi)
        .map(|k| {
            let (a, b) = (k as f64 * ln2, (k + 1) as f64 * ln2);
            let mass = if sigma > 0.0 {
                normal_cdf((b - mu) / sigma) - normal_cdf((a - mu) / sigma)
            } else if (a..b).contains(&mu) {
                1.0
            } else {
                0.0
            };
            n * mass
        })
        .collect();
    Ok(FitResult { model: FitModel::LogNormal, param1: mu, param2: sigma, r_squared: r_squared(&observed, &predicted) })
}

/// Least-squares line through `(log10 x, log10 y)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult, EcologyError> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 3 {
        return Err(EcologyError::TooFew { what: "points", needed: 3, got: xs.len() });
    }
    if let Some(&bad) = xs.iter().chain(ys).find(|&&v| !(v > 0.0)) {
        return Err(EcologyError::NonPositive(bad));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let predicted: Vec<f64> = lx.iter().map(|x| intercept + slope * x).collect();
    Ok(FitResult { model: FitModel::PowerLaw, param1: slope, param2: intercept, r_squared: r_squared(&ly, &predicted) })
}

/// Species present in each habitat's agent pool, indexed by habitat.
pub fn habitat_species(net: &HabitatNetwork, partition: &SpeciesPartition) -> Vec<BTreeSet<usize>> {
    let index = partition.species_index();
    net.habitats()
        .iter()
        .map(|h| h.pool.agents().iter().filter_map(|e| index.get(&e.agent.id).copied()).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesAreaPoint {
    pub n: usize,
    pub mean_species: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesArea {
    pub curve: Vec<SpeciesAreaPoint>,
    /// `None` when the curve has fewer than 3 usable points.
    pub fit: Option<FitResult>,
}

/// For each `n`, the mean number of distinct species over `replicates`
/// uniform samples of `n` distinct habitats, plus a power-law fit.
pub fn species_area(
    habitats: &[BTreeSet<usize>],
    replicates: usize,
    n_range: std::ops::RangeInclusive<usize>,
    rng: &mut SplitMix64,
) -> Result<SpeciesArea, EcologyError> {
    if *n_range.end() > habitats.len() {
        return Err(EcologyError::SampleTooLarge { n: *n_range.end(), available: habitats.len() });
    }
    if replicates == 0 {
        return Err(EcologyError::TooFew { what: "replicates", needed: 1, got: 0 });
    }
    let mut curve = Vec::new();
    for n in n_range {
        if n == 0 {
            continue;
        }
        let mut total = 0usize;
        for _ in 0..replicates {
            let mut seen = BTreeSet::new();
            for h in rng.sample_indices(habitats.len(), n) {
                seen.extend(habitats[h].iter().copied());
            }
            total += seen.len();
        }
        curve.push(SpeciesAreaPoint { n, mean_species: total as f64 / replicates as f64 });
    }
    let usable: Vec<&SpeciesAreaPoint> = curve.iter().filter(|p| p.mean_species > 0.0).collect();
    let xs: Vec<f64> = usable.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.mean_species).collect();
    let fit = power_law_fit(&xs, &ys).ok();
    Ok(SpeciesArea { curve, fit })
}

/// Centered moving average; near the ends the window is truncated.
pub fn succession_curve(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let (before, after) = ((window - 1) / 2, window / 2);
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Largest drop of a window mean below the mean of the window before it,
/// with the series cut into consecutive non-overlapping windows of
/// `window` requests. A trailing partial window is ignored. Zero when no
/// drop occurs.
pub fn max_window_drop(values: &[f64], window: usize) -> f64 {
    if window == 0 {
        return 0.0;
    }
    let means: Vec<f64> = values.chunks_exact(window).map(mean).collect();
    means.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Attribute;

    fn desc(attrs: &[(u32, u32)]) -> SemanticDescription {
        SemanticDescription::new(attrs.iter().map(|&(i, v)| Attribute::new(i, v))).unwrap()
    }

    fn org(id: u64, d: SemanticDescription, copies: usize) -> Organism {
        Organism { id: AgentId(id), description: d, copies }
    }

    #[test]
    fn jaccard_cases() {
        let a = desc(&[(1, 1), (2, 2)]);
        assert_eq!(description_distance(&a, &a), 0.0);
        assert_eq!(description_distance(&a, &desc(&[(5, 5)])), 1.0);
        let d = description_distance(&a, &desc(&[(1, 1), (3, 3)]));
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn abundance_classes() {
        assert_eq!(abundance_class(1), 0);
        assert_eq!(abundance_class(2), 1);
        assert_eq!(abundance_class(3), 1);
        assert_eq!(abundance_class(8), 3);
        let p = SpeciesPartition {
            theta: 0.1,
            clusters: [1, 1, 1, 2]
                .iter()
                .enumerate()
                .map(|(i, &c)| Species { members: vec![(AgentId(i as u64), c)] })
                .collect(),
        };
        let h = relative_abundance(&p);
        assert_eq!(h, BTreeMap::from([(0, 3), (1, 1)]));
        assert!(lowest_class_is_modal(&h));
        let one = SpeciesPartition { theta: 0.1, clusters: vec![Species { members: vec![(AgentId(0), 8)] }] };
        assert_eq!(relative_abundance(&one), BTreeMap::from([(3, 1)]));
    }

    #[test]
    fn identical_descriptions_share_species() {
        let orgs = vec![org(2, desc(&[(1, 1)]), 3), org(1, desc(&[(1, 1)]), 1), org(5, desc(&[(2, 1)]), 1)];
        let p = cluster_species(&orgs, 0.1).unwrap();
        assert_eq!(p.clusters.len(), 2);
        assert_eq!(p.clusters[0].members, vec![(AgentId(1), 1), (AgentId(2), 3)]);
        assert_eq!(p.total_organisms(), 5);
    }

    #[test]
    fn empty_organisms_rejected() {
        assert!(cluster_species(&[], 0.1).is_err());
    }

    #[test]
    fn log_normal_degenerate_and_two_point() {
        let e2 = 2f64.exp();
        let f = log_normal_fit(&[e2, e2, e2]).unwrap();
        assert!((f.param1 - 2.0).abs() < 1e-12);
        assert_eq!(f.param2, 0.0);
        assert_eq!(f.r_squared, 1.0);
        let e = 1f64.exp();
        let g = log_normal_fit(&[e, e.powi(3), e, e.powi(3)]).unwrap();
        assert!((g.param1 - 2.0).abs() < 1e-12);
        assert!((g.param2 - 1.0).abs() < 1e-12);
        assert!(log_normal_fit(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.25)).collect();
        let f = power_law_fit(&xs, &ys).unwrap();
        assert!((f.param1 - 0.25).abs() < 1e-9);
        assert!((f.param2 - 3f64.log10()).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_species_area() {
        let habitats = vec![BTreeSet::from([0]); 10];
        let sa = species_area(&habitats, 10, 1..=10, &mut SplitMix64::new(1)).unwrap();
        assert!(sa.curve.iter().all(|p| p.mean_species == 1.0));
        let fit = sa.fit.unwrap();
        assert_eq!(fit.param1, 0.0);
    }

    #[test]
    fn full_census_matches_global() {
        let habitats: Vec<BTreeSet<usize>> = (0..6).map(|i| BTreeSet::from([i % 4, 7])).collect();
        let sa = species_area(&habitats, 10, 6..=6, &mut SplitMix64::new(2)).unwrap();
        assert_eq!(sa.curve[0].mean_species, 5.0);
        assert!(species_area(&habitats, 10, 1..=7, &mut SplitMix64::new(2)).is_err());
    }

    #[test]
    fn moving_average_cases() {
        let flat = vec![0.5; 200];
        assert!(succession_curve(&flat, 50).iter().all(|&v| (v - 0.5).abs() < 1e-12));
        let raw: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        assert_eq!(succession_curve(&raw, 1), raw);
        let s = succession_curve(&[1.0, 2.0, 3.0, 4.0], 3);
        assert_eq!(s, vec![1.5, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn window_drop() {
        let mut v = vec![0.8; 100];
        assert_eq!(max_window_drop(&v, 50), 0.0);
        for x in &mut v[50..] {
            *x = 0.5;
        }
        assert!((max_window_drop(&v, 50) - 0.3).abs() < 1e-12);
        // a dip straddling a window boundary is split between both windows
        let mut w = vec![0.8; 150];
        for x in &mut w[75..125] {
            *x = 0.5;
        }
        assert!((max_window_drop(&w, 50) - 0.15).abs() < 1e-12);
        assert_eq!(max_window_drop(&w[..99], 50), 0.0);
    }
}
