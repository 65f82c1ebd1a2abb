//! Semantic data model and the request-fitness function.
//!
//! Agents and requests are both described by sets of numeric `(attr_id,
//! value)` tuples. The fitness of an agent-sequence against a request is
//!
//! ```text
//! fitness(A, R) = 1 / (1 + sum over r in R of min over a in A of |r - a|)
//! ```
//!
//! where `|r - a|` is the value difference when the attribute ids agree and a
//! fixed mismatch penalty `d_miss` otherwise.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HabitatId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for HabitatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ranges for attribute ids and values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpace {
    pub a_max: u32,
    pub v_max: u32,
}

impl Default for AttributeSpace {
    fn default() -> Self {
        Self { a_max: 100, v_max: 10 }
    }
}

/// One numeric tuple of a semantic description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attribute {
    pub attr_id: u32,
    pub value: u32,
}

impl Attribute {
    pub const fn new(attr_id: u32, value: u32) -> Self {
        Self { attr_id, value }
    }

    pub fn validate(&self, space: AttributeSpace) -> Result<(), ModelError> {
        if self.attr_id == 0 || self.attr_id > space.a_max {
            return Err(ModelError::AttrIdOutOfRange(self.attr_id, space.a_max));
        }
        if self.value == 0 || self.value > space.v_max {
            return Err(ModelError::ValueOutOfRange(self.value, space.v_max));
        }
        Ok(())
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.attr_id, self.value)
    }
}

/// A non-empty set of attributes, kept sorted and free of duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticDescription {
    attributes: Vec<Attribute>,
}

impl SemanticDescription {
    pub fn new<I: IntoIterator<Item = Attribute>>(attrs: I) -> Result<Self, ModelError> {
        let mut attributes: Vec<Attribute> = attrs.into_iter().collect();
        attributes.sort_unstable();
        attributes.dedup();
        if attributes.is_empty() {
            return Err(ModelError::EmptyDescription);
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn contains(&self, attr: &Attribute) -> bool {
        self.attributes.binary_search(attr).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub description: SemanticDescription,
    pub origin_user: UserId,
    /// Stand-in for the executable service component. Never interpreted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub payload: Vec<u8>,
}

impl Agent {
    pub fn new(id: AgentId, description: SemanticDescription, origin_user: UserId) -> Self {
        Self { id, description, origin_user, payload: Vec::new() }
    }
}

/// An ordered composition of agents. Agents are shared, so cloning a sequence
/// is cheap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentSequence {
    agents: Vec<Arc<Agent>>,
}

impl AgentSequence {
    pub fn new(agents: Vec<Arc<Agent>>) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        Ok(Self { agents })
    }

    /// Builds a sequence without the non-empty check. Callers guarantee it.
    pub(crate) fn from_vec_unchecked(agents: Vec<Arc<Agent>>) -> Self {
        debug_assert!(!agents.is_empty());
        Self { agents }
    }

    pub fn single(agent: Arc<Agent>) -> Self {
        Self { agents: vec![agent] }
    }

    pub fn agents(&self) -> &[Arc<Agent>] {
        &self.agents
    }

    pub(crate) fn agents_mut(&mut self) -> &mut Vec<Arc<Agent>> {
        &mut self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().map(|a| a.id)
    }

    pub fn contains_agent(&self, id: AgentId) -> bool {
        self.agents.iter().any(|a| a.id == id)
    }

    /// Multiset union of the member descriptions.
    pub fn flat_description(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.agents.iter().flat_map(|a| a.description.attributes().iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRequest {
    pub request_id: u64,
    pub user_id: UserId,
    sets: Vec<Vec<Attribute>>,
    flat: Vec<Attribute>,
}

impl UserRequest {
    pub fn new(request_id: u64, user_id: UserId, sets: Vec<Vec<Attribute>>) -> Result<Self, ModelError> {
        if sets.is_empty() || sets.iter().any(|s| s.is_empty()) {
            return Err(ModelError::EmptyRequest);
        }
        let flat = sets.iter().flatten().copied().collect();
        Ok(Self { request_id, user_id, sets, flat })
    }

    pub fn sets(&self) -> &[Vec<Attribute>] {
        &self.sets
    }

    pub fn flat(&self) -> &[Attribute] {
        &self.flat
    }

    /// Checks set count, set sizes, value ranges and the "longer than any
    /// agent description" property.
    pub fn validate(
        &self,
        space: AttributeSpace,
        set_count: std::ops::RangeInclusive<usize>,
        max_set_size: usize,
        agent_desc_max: usize,
    ) -> Result<(), ModelError> {
        if !set_count.contains(&self.sets.len()) {
            return Err(ModelError::RequestShape(format!(
                "{} sets, expected {:?}",
                self.sets.len(),
                set_count
            )));
        }
        if let Some(s) = self.sets.iter().find(|s| s.is_empty() || s.len() > max_set_size) {
            return Err(ModelError::RequestShape(format!(
                "set of size {}, expected 1..={max_set_size}",
                s.len()
            )));
        }
        for a in &self.flat {
            a.validate(space)?;
        }
        if self.flat.len() <= agent_desc_max {
            return Err(ModelError::RequestShape(format!(
                "{} attributes, must exceed {agent_desc_max}",
                self.flat.len()
            )));
        }
        Ok(())
    }
}

/// `|r - a|`: value difference for matching ids, `d_miss` otherwise.
#[inline]
pub fn attribute_distance(r: Attribute, a: Attribute, d_miss: f64) -> f64 {
    if r.attr_id == a.attr_id {
        f64::from(r.value.abs_diff(a.value))
    } else {
        d_miss
    }
}

/// Raw fitness of `seq` against `req`, in `(0, 1]`.
pub fn fitness(seq: &AgentSequence, req: &UserRequest, d_miss: f64) -> f64 {
    let total: f64 = req
        .flat()
        .iter()
        .map(|&r| {
            seq.flat_description()
                .map(|a| attribute_distance(r, a, d_miss))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    1.0 / (1.0 + total)
}

/// Divides longer-than-average individuals' fitness by
/// `1 + beta * (len - avg_len)`.
#[inline]
pub fn parsimony_fitness(raw: f64, seq_len: usize, avg_len: f64, beta: f64) -> f64 {
    let excess = (seq_len as f64 - avg_len).max(0.0);
    raw / (1.0 + beta * excess)
}

/// Per-request lookup that evaluates [`fitness`] without the all-pairs scan.
///
/// Required attributes are bucketed by id, so each agent attribute only
/// touches the requirements that share its id.
#[derive(Clone, Debug)]
pub struct FitnessEvaluator {
    d_miss: f64,
    required: usize,
    by_id: Vec<Vec<(usize, u32)>>,
}

impl FitnessEvaluator {
    pub fn new(req: &UserRequest, d_miss: f64) -> Self {
        let max_id = req.flat().iter().map(|a| a.attr_id).max().unwrap_or(0) as usize;
        let mut by_id = vec![Vec::new(); max_id + 1];
        for (i, r) in req.flat().iter().enumerate() {
            by_id[r.attr_id as usize].push((i, r.value));
        }
        Self { d_miss, required: req.flat().len(), by_id }
    }

    pub fn total_distance(&self, seq: &AgentSequence) -> f64 {
        let mut best = vec![self.d_miss; self.required];
        for a in seq.flat_description() {
            if let Some(bucket) = self.by_id.get(a.attr_id as usize) {
                for &(i, v) in bucket {
                    let d = f64::from(v.abs_diff(a.value));
                    if d < best[i] {
                        best[i] = d;
                    }
                }
            }
        }
        best.iter().sum()
    }

    pub fn fitness(&self, seq: &AgentSequence) -> f64 {
        1.0 / (1.0 + self.total_distance(seq))
    }
}
