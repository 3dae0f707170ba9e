//! Brute-force reference semantics.
//!
//! Enumerates every world (one member per choose set plus every active
//! structure assumption), closes it under the justifications as Horn clauses
//! and sums world weights directly. Nothing here reads labels or the derived
//! nogood database; the only inputs are the raw records the ATMS was fed.

use thiserror::Error;

use crate::atms::{AssumptionId, AssumptionKind, NodeId};
use crate::probability::Network;

pub const WORLD_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("model has {0} worlds, above the enumeration limit of {WORLD_LIMIT}")]
    TooManyWorlds(u128),
    #[error("no consistent world has positive weight")]
    NoConsistentWorld,
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
}

/// The raw inputs of a network, detached from any label state.
#[derive(Debug, Clone, Default)]
pub struct ModelSnapshot {
    pub node_count: usize,
    /// The self-supporting node of each assumption, indexed by assumption id.
    pub assumption_nodes: Vec<NodeId>,
    pub justifications: Vec<(Vec<NodeId>, NodeId)>,
    pub contradictions: Vec<NodeId>,
    pub nogoods: Vec<Vec<AssumptionId>>,
    pub choose_sets: Vec<Vec<(AssumptionId, f64)>>,
    /// Structure assumptions with their retracted flag.
    pub structure: Vec<(AssumptionId, bool)>,
}

impl ModelSnapshot {
    pub fn capture(net: &Network) -> Self {
        let atms = net.atms();
        let mut snap = ModelSnapshot { node_count: atms.node_count(), ..Default::default() };
        for (id, a) in atms.assumptions() {
            snap.assumption_nodes.push(a.node);
            if a.kind == AssumptionKind::Structure {
                snap.structure.push((id, net.is_retracted(id)));
            }
        }
        snap.justifications = atms.justifications().iter().map(|j| (j.antecedents.clone(), j.consequent)).collect();
        snap.contradictions = atms.nodes().filter(|(_, n)| n.is_contradiction).map(|(id, _)| id).collect();
        snap.nogoods = atms.explicit_nogoods().iter().map(|e| e.ids().to_vec()).collect();
        snap.choose_sets = net.choose_sets().iter().map(|c| c.members.clone()).collect();
        snap
    }

    pub fn world_count(&self) -> u128 {
        self.choose_sets.iter().map(|c| c.len() as u128).product()
    }

    /// Least fixpoint of the justifications, starting from the assumptions
    /// marked true in `holds` (indexed by assumption id).
    pub fn horn_closure(&self, holds: &[bool]) -> Vec<bool> {
        let mut derived = vec![false; self.node_count];
        let mut missing: Vec<usize> = self.justifications.iter().map(|(ants, _)| ants.len()).collect();
        let mut watchers: Vec<Vec<usize>> = vec![Vec::new(); self.node_count];
        for (j, (ants, _)) in self.justifications.iter().enumerate() {
            for a in ants {
                watchers[a.index()].push(j);
            }
        }
        let mut stack: Vec<usize> = Vec::new();
        fn fire(n: usize, derived: &mut [bool], stack: &mut Vec<usize>) {
            if !derived[n] {
                derived[n] = true;
                stack.push(n);
            }
        }
        for (i, &t) in holds.iter().enumerate() {
            if t {
                fire(self.assumption_nodes[i].index(), &mut derived, &mut stack);
            }
        }
        for (ants, c) in &self.justifications {
            if ants.is_empty() {
                fire(c.index(), &mut derived, &mut stack);
            }
        }
        while let Some(n) = stack.pop() {
            for &j in &watchers[n] {
                // a node repeated among the antecedents is watched once per occurrence
                missing[j] -= 1;
                if missing[j] == 0 {
                    fire(self.justifications[j].1.index(), &mut derived, &mut stack);
                }
            }
        }
        derived
    }

    /// A world is consistent when no recorded nogood is contained in it and
    /// its closure reaches no contradiction node.
    pub fn is_consistent(&self, holds: &[bool], closure: &[bool]) -> bool {
        let nogood_hit = self.nogoods.iter().any(|ng| ng.iter().all(|a| holds[a.index()]));
        !nogood_hit && !self.contradictions.iter().any(|c| closure[c.index()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldRecord {
    /// One selected assumption per choose set, in choose-set order.
    pub selection: Vec<AssumptionId>,
    pub weight: f64,
    pub consistent: bool,
}

/// Visits every world in odometer order (last choose set fastest).
fn for_each_world(
    snap: &ModelSnapshot,
    mut visit: impl FnMut(&[AssumptionId], f64, &[bool], &[bool]),
) -> Result<(), OracleError> {
    let count = snap.world_count();
    if count > WORLD_LIMIT as u128 {
        return Err(OracleError::TooManyWorlds(count));
    }
    let norms: Vec<Vec<f64>> = snap
        .choose_sets
        .iter()
        .map(|c| {
            let total: f64 = c.iter().map(|(_, w)| w).sum();
            c.iter().map(|(_, w)| w / total).collect()
        })
        .collect();
    let n_assumptions = snap.assumption_nodes.len();
    let mut digits = vec![0usize; snap.choose_sets.len()];
    loop {
        let mut holds = vec![false; n_assumptions];
        for &(a, retracted) in &snap.structure {
            holds[a.index()] = !retracted;
        }
        let mut selection = Vec::with_capacity(digits.len());
        let mut weight = 1.0;
        for (i, &d) in digits.iter().enumerate() {
            let a = snap.choose_sets[i][d].0;
            holds[a.index()] = true;
            selection.push(a);
            weight *= norms[i][d];
        }
        let closure = snap.horn_closure(&holds);
        visit(&selection, weight, &holds, &closure);
        let mut i = digits.len();
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < snap.choose_sets[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

pub fn enumerate_worlds(snap: &ModelSnapshot) -> Result<Vec<WorldRecord>, OracleError> {
    let mut out = Vec::new();
    for_each_world(snap, |selection, weight, holds, closure| {
        out.push(WorldRecord { selection: selection.to_vec(), weight, consistent: snap.is_consistent(holds, closure) });
    })?;
    Ok(out)
}

/// Probability of every node, indexed by node id.
pub fn oracle_posteriors(snap: &ModelSnapshot) -> Result<Vec<f64>, OracleError> {
    let mut mass = vec![0.0; snap.node_count];
    let mut total = 0.0;
    for_each_world(snap, |_, weight, holds, closure| {
        if !snap.is_consistent(holds, closure) {
            return;
        }
        total += weight;
        for (n, &d) in closure.iter().enumerate() {
            if d {
                mass[n] += weight;
            }
        }
    })?;
    if total <= 0.0 {
        return Err(OracleError::NoConsistentWorld);
    }
    Ok(mass.into_iter().map(|m| m / total).collect())
}

pub fn oracle_probability(node: NodeId, snap: &ModelSnapshot) -> Result<f64, OracleError> {
    if node.index() >= snap.node_count {
        return Err(OracleError::UnknownNode(node));
    }
    Ok(oracle_posteriors(snap)?[node.index()])
}
