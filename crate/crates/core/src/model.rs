//! The contextual model layered on a [`TabularMdp`], and global policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexi::{is_permutation, ObjectiveOrdering, RewardVectorTable};
use crate::mdp::{MdpDocument, Policy, RewardTable, TabularMdp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub name: String,
    /// Index into [`Clmdp::orderings`].
    pub ordering: usize,
    /// Index into [`Clmdp::reward_vectors`].
    pub rewards: usize,
}

/// A contextual lexicographic MDP.
///
/// `z` may be empty for models whose state-context mapping is unknown; every
/// solver path except [`crate::inference::infer_z`] requires it to be total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ClmdpDocument", try_from = "ClmdpDocument")]
pub struct Clmdp {
    pub base: TabularMdp,
    pub num_objectives: usize,
    pub contexts: Vec<ContextSpec>,
    /// Context indices, highest priority first.
    pub meta_ordering: Vec<usize>,
    pub orderings: Vec<ObjectiveOrdering>,
    pub reward_vectors: Vec<RewardVectorTable>,
    pub z: Vec<usize>,
}

impl Clmdp {
    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn ordering_of(&self, context: usize) -> &ObjectiveOrdering {
        &self.orderings[self.contexts[context].ordering]
    }

    pub fn rewards_of(&self, context: usize) -> &RewardVectorTable {
        &self.reward_vectors[self.contexts[context].rewards]
    }

    /// Context with the highest priority in the meta-ordering.
    pub fn top_context(&self) -> usize {
        self.meta_ordering[0]
    }

    /// `ranks[c]` is the position of context `c` in the meta-ordering.
    pub fn priority_ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.meta_ordering.len()];
        for (rank, &c) in self.meta_ordering.iter().enumerate() {
            ranks[c] = rank;
        }
        ranks
    }

    /// Whether `a` outranks `b` in the meta-ordering.
    pub fn outranks(&self, a: usize, b: usize) -> bool {
        let ranks = self.priority_ranks();
        ranks[a] < ranks[b]
    }

    /// Same model under a different state-context mapping.
    pub fn with_z(&self, z: Vec<usize>) -> Result<Self> {
        let mut model = self.clone();
        model.z = z;
        model.validate()?;
        Ok(model)
    }

    /// Reward vector observed at `(state, action)` under the state's own context.
    pub fn observed_rewards(&self, state: usize, action: usize) -> Vec<f64> {
        self.rewards_of(self.z[state]).vector_at(state, action)
    }

    /// Reward component `objective` as experienced in each state's own context.
    pub fn contextual_reward(&self, objective: usize) -> RewardTable {
        let mdp = &self.base;
        RewardTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
            self.rewards_of(self.z[s]).objective(objective).get(s, a)
        })
    }

    /// Checks every model invariant, including a total `z`.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let m = self.contexts.len();
        if self.z.len() != self.base.num_states() {
            return Err(Error::InvalidModel(format!(
                "z covers {} states, model has {}",
                self.z.len(),
                self.base.num_states()
            )));
        }
        if let Some((s, &c)) = self.z.iter().enumerate().find(|(_, &c)| c >= m) {
            return Err(Error::InvalidModel(format!(
                "z maps state {s} to unknown context {c}"
            )));
        }
        Ok(())
    }

    /// Checks everything except `z`.
    pub fn validate_structure(&self) -> Result<()> {
        let violations = self.base.validate();
        if !violations.is_empty() {
            let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidModel(text.join("; ")));
        }
        let m = self.contexts.len();
        if m == 0 {
            return Err(Error::InvalidModel("no contexts".into()));
        }
        if self.meta_ordering.len() != m || !is_permutation(&self.meta_ordering) {
            return Err(Error::InvalidModel(format!(
                "meta-ordering {:?} is not a permutation of {m} contexts",
                self.meta_ordering
            )));
        }
        for (i, o) in self.orderings.iter().enumerate() {
            if o.len() != self.num_objectives {
                return Err(Error::InvalidModel(format!(
                    "ordering {i} covers {} objectives, expected {}",
                    o.len(),
                    self.num_objectives
                )));
            }
            if self.orderings[..i].contains(o) {
                return Err(Error::InvalidModel(format!("ordering {i} is a duplicate")));
            }
        }
        for (i, r) in self.reward_vectors.iter().enumerate() {
            if r.num_objectives() != self.num_objectives {
                return Err(Error::InvalidModel(format!(
                    "reward vector {i} has {} objectives, expected {}",
                    r.num_objectives(),
                    self.num_objectives
                )));
            }
            for t in r.tables() {
                t.check_shape(&self.base)?;
            }
        }
        for (c, spec) in self.contexts.iter().enumerate() {
            if spec.ordering >= self.orderings.len() || spec.rewards >= self.reward_vectors.len() {
                return Err(Error::InvalidModel(format!(
                    "context {c} references a missing ordering or reward vector"
                )));
            }
        }
        Ok(())
    }
}

/// On-disk layout: the MDP document plus the contextual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClmdpDocument {
    #[serde(flatten)]
    pub mdp: MdpDocument,
    pub num_objectives: usize,
    pub contexts: Vec<ContextSpec>,
    pub meta_ordering: Vec<usize>,
    pub orderings: Vec<Vec<usize>>,
    /// `f_R[id][objective]` is a state-major `|S|·|A|` reward array.
    #[serde(rename = "f_R")]
    pub f_r: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub z: Vec<usize>,
}

impl From<Clmdp> for ClmdpDocument {
    fn from(m: Clmdp) -> Self {
        Self {
            mdp: m.base.into(),
            num_objectives: m.num_objectives,
            contexts: m.contexts,
            meta_ordering: m.meta_ordering,
            orderings: m.orderings.into_iter().map(Into::into).collect(),
            f_r: m
                .reward_vectors
                .iter()
                .map(|r| r.tables().iter().map(|t| t.as_slice().to_vec()).collect())
                .collect(),
            z: m.z,
        }
    }
}

impl TryFrom<ClmdpDocument> for Clmdp {
    type Error = Error;

    fn try_from(doc: ClmdpDocument) -> Result<Self> {
        let base = TabularMdp::try_from(doc.mdp)?;
        let (ns, na) = (base.num_states(), base.num_actions());
        let orderings = doc
            .orderings
            .into_iter()
            .map(ObjectiveOrdering::new)
            .collect::<Result<Vec<_>>>()?;
        let reward_vectors = doc
            .f_r
            .into_iter()
            .map(|tables| {
                let tables = tables
                    .into_iter()
                    .map(|v| RewardTable::from_vec(ns, na, v))
                    .collect::<Result<Vec<_>>>()?;
                RewardVectorTable::new(tables)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Clmdp {
            base,
            num_objectives: doc.num_objectives,
            contexts: doc.contexts,
            meta_ordering: doc.meta_ordering,
            orderings,
            reward_vectors,
            z: doc.z,
        };
        model.validate_structure()?;
        if !model.z.is_empty() {
            model.validate()?;
        }
        Ok(model)
    }
}

/// Stitched policy with the context that supplied each state's action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<PolicyEntry>", try_from = "Vec<PolicyEntry>")]
pub struct GlobalPolicy {
    pub actions: Vec<usize>,
    pub provenance: Vec<usize>,
}

impl GlobalPolicy {
    /// Every state takes `policy`'s action and is attributed to `context`.
    pub fn uniform(policy: &Policy, context: usize) -> Self {
        Self {
            actions: policy.0.clone(),
            provenance: vec![context; policy.0.len()],
        }
    }

    pub fn as_policy(&self) -> Policy {
        Policy(self.actions.clone())
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub state: usize,
    pub action: usize,
    pub provenance: usize,
}

impl From<GlobalPolicy> for Vec<PolicyEntry> {
    fn from(p: GlobalPolicy) -> Self {
        p.actions
            .into_iter()
            .zip(p.provenance)
            .enumerate()
            .map(|(state, (action, provenance))| PolicyEntry {
                state,
                action,
                provenance,
            })
            .collect()
    }
}

impl TryFrom<Vec<PolicyEntry>> for GlobalPolicy {
    type Error = Error;

    fn try_from(mut entries: Vec<PolicyEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.state);
        if entries.iter().enumerate().any(|(i, e)| e.state != i) {
            return Err(Error::InvalidModel(
                "policy entries must cover states 0..n exactly once".into(),
            ));
        }
        Ok(Self {
            actions: entries.iter().map(|e| e.action).collect(),
            provenance: entries.iter().map(|e| e.provenance).collect(),
        })
    }
}
