//! Assumption-based truth maintenance.
//!
//! Every node carries a label: the minimal set of consistent environments
//! (assumption sets) under which it is derivable. Justifications are Horn
//! clauses over nodes; assumptions are nodes that justify themselves.
//! Propagation is incremental and queue driven: when an antecedent gains
//! environments only the new ones are pushed through its outgoing
//! justifications. Environments derived for a contradiction node become
//! nogoods, and every new nogood is purged from every label at once.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AssumptionId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JustificationId(pub u32);

impl AssumptionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionKind {
    /// An element of a (conditional) probability distribution.
    DistributionElement,
    /// A record of a defeasible modelling decision.
    Structure,
}

#[derive(Debug, Clone)]
pub struct Assumption {
    pub kind: AssumptionKind,
    pub weight: Option<f64>,
    pub name: String,
    pub node: NodeId,
}

/// A duplicate-free set of assumptions kept in ascending id order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Environment(Vec<AssumptionId>);

impl Environment {
    pub fn empty() -> Self {
        Environment(Vec::new())
    }

    pub fn singleton(a: AssumptionId) -> Self {
        Environment(vec![a])
    }

    pub fn from_ids(ids: impl IntoIterator<Item = AssumptionId>) -> Self {
        let mut v: Vec<_> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Environment(v)
    }

    pub fn ids(&self) -> &[AssumptionId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, a: AssumptionId) -> bool {
        self.0.binary_search(&a).is_ok()
    }

    /// Sorted-merge subset test.
    pub fn is_subset_of(&self, other: &Environment) -> bool {
        if self.0.len() > other.0.len() {
            return false;
        }
        let mut rest = other.0.iter();
        'outer: for a in &self.0 {
            for b in rest.by_ref() {
                if b == a {
                    continue 'outer;
                }
                if b > a {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn union(&self, other: &Environment) -> Environment {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Environment(out)
    }

    fn canonical_cmp(&self, other: &Environment) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

/// Keeps only the subset-minimal members, in canonical order.
pub fn minimize(mut envs: Vec<Environment>) -> Vec<Environment> {
    envs.sort_by(|a, b| a.canonical_cmp(b));
    envs.dedup();
    let mut out: Vec<Environment> = Vec::with_capacity(envs.len());
    for e in envs {
        // canonical order puts every possible subset before `e`
        if !out.iter().any(|kept| kept.is_subset_of(&e)) {
            out.push(e);
        }
    }
    out
}

/// An antichain of environments in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label(Vec<Environment>);

impl Label {
    pub fn environments(&self) -> &[Environment] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn from_environments(envs: Vec<Environment>) -> Self {
        Label(minimize(envs))
    }

    /// Some member is a subset of `env`.
    pub fn covers(&self, env: &Environment) -> bool {
        self.0.iter().any(|e| e.is_subset_of(env))
    }

    /// Adds a minimized batch, returning the members that were not already
    /// covered (and are therefore new).
    fn absorb(&mut self, batch: Vec<Environment>) -> Vec<Environment> {
        let fresh: Vec<Environment> = batch.into_iter().filter(|e| !self.covers(e)).collect();
        if fresh.is_empty() {
            return fresh;
        }
        self.0.retain(|old| !fresh.iter().any(|f| f.is_subset_of(old)));
        self.0.extend(fresh.iter().cloned());
        self.0.sort_by(|a, b| a.canonical_cmp(b));
        fresh
    }

    fn purge(&mut self, nogood: &Environment) -> bool {
        let before = self.0.len();
        self.0.retain(|e| !nogood.is_subset_of(e));
        before != self.0.len()
    }
}

/// Minimal set of inconsistent environments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NogoodDb(Vec<Environment>);

impl NogoodDb {
    pub fn environments(&self) -> &[Environment] {
        &self.0
    }

    pub fn is_inconsistent(&self, env: &Environment) -> bool {
        self.0.iter().any(|n| n.is_subset_of(env))
    }

    /// Returns false if `env` was already subsumed.
    fn insert(&mut self, env: Environment) -> bool {
        if self.is_inconsistent(&env) {
            return false;
        }
        self.0.retain(|n| !env.is_subset_of(n));
        self.0.push(env);
        self.0.sort_by(|a, b| a.canonical_cmp(b));
        true
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub term: Term,
    pub label: Label,
    pub consequent_of: Vec<JustificationId>,
    pub antecedent_of: Vec<JustificationId>,
    pub is_contradiction: bool,
    pub is_premise: bool,
    pub assumption: Option<AssumptionId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Justification {
    pub antecedents: Vec<NodeId>,
    pub consequent: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Antecedent {
    Node(NodeId),
    Assumption(AssumptionId),
}

impl From<NodeId> for Antecedent {
    fn from(n: NodeId) -> Self {
        Antecedent::Node(n)
    }
}

impl From<AssumptionId> for Antecedent {
    fn from(a: AssumptionId) -> Self {
        Antecedent::Assumption(a)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtmsError {
    #[error("node {term} already exists")]
    DuplicateNode { term: Term, existing: NodeId },
    #[error("term {0} contains logical variables")]
    NonGroundTerm(Term),
    #[error("assumption name {0} already in use")]
    DuplicateAssumption(String),
    #[error("assumption weight {0} must be a nonnegative finite number")]
    BadWeight(f64),
    #[error("distribution assumptions need a weight and structure assumptions must not have one")]
    WeightKindMismatch,
    #[error("total inconsistency requested: the empty environment cannot be a nogood")]
    EmptyNogood,
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("unknown assumption {0:?}")]
    UnknownAssumption(AssumptionId),
}

/// A justification to refire, optionally restricted to the new environments
/// of one antecedent.
type Pending = (JustificationId, Option<(NodeId, Vec<Environment>)>);

#[derive(Debug, Clone, Default)]
pub struct Atms {
    nodes: Vec<Node>,
    index: HashMap<Term, NodeId>,
    assumptions: Vec<Assumption>,
    names: HashMap<String, AssumptionId>,
    justifications: Vec<Justification>,
    nogoods: NogoodDb,
    /// Nogoods handed in through [`Atms::add_nogood`], in call order.
    explicit_nogoods: Vec<Environment>,
}

impl Atms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_node(&mut self, term: Term) -> Result<NodeId, AtmsError> {
        if !term.is_ground() {
            return Err(AtmsError::NonGroundTerm(term));
        }
        if let Some(&existing) = self.index.get(&term) {
            return Err(AtmsError::DuplicateNode { term, existing });
        }
        let id = NodeId(self.nodes.len() as u32);
        self.index.insert(term.clone(), id);
        self.nodes.push(Node {
            term,
            label: Label::default(),
            consequent_of: Vec::new(),
            antecedent_of: Vec::new(),
            is_contradiction: false,
            is_premise: false,
            assumption: None,
        });
        Ok(id)
    }

    /// Creates an assumption together with its self-supporting node, whose
    /// term is the display name as a bare symbol.
    pub fn create_assumption(
        &mut self,
        kind: AssumptionKind,
        weight: Option<f64>,
        name: &str,
    ) -> Result<AssumptionId, AtmsError> {
        match (kind, weight) {
            (AssumptionKind::DistributionElement, Some(w)) if !(w.is_finite() && w >= 0.0) => {
                return Err(AtmsError::BadWeight(w));
            }
            (AssumptionKind::DistributionElement, Some(_)) | (AssumptionKind::Structure, None) => {}
            _ => return Err(AtmsError::WeightKindMismatch),
        }
        if self.names.contains_key(name) {
            return Err(AtmsError::DuplicateAssumption(name.to_string()));
        }
        let node = self.create_node(Term::sym(name))?;
        let id = AssumptionId(self.assumptions.len() as u32);
        self.assumptions.push(Assumption { kind, weight, name: name.to_string(), node });
        self.names.insert(name.to_string(), id);
        let n = &mut self.nodes[node.index()];
        n.assumption = Some(id);
        let own = Environment::singleton(id);
        n.label = Label(if self.nogoods.is_inconsistent(&own) { vec![] } else { vec![own] });
        Ok(id)
    }

    pub fn justify(&mut self, antecedents: &[Antecedent], consequent: NodeId) -> Result<(), AtmsError> {
        self.check_node(consequent)?;
        let mut nodes = Vec::with_capacity(antecedents.len());
        for a in antecedents {
            let n = match *a {
                Antecedent::Node(n) => {
                    self.check_node(n)?;
                    n
                }
                Antecedent::Assumption(a) => self.assumption(a)?.node,
            };
            nodes.push(n);
        }
        let id = JustificationId(self.justifications.len() as u32);
        for &n in &nodes {
            self.nodes[n.index()].antecedent_of.push(id);
        }
        self.nodes[consequent.index()].consequent_of.push(id);
        self.justifications.push(Justification { antecedents: nodes, consequent });
        self.propagate(VecDeque::from([(id, None)]));
        Ok(())
    }

    pub fn assert_premise(&mut self, node: NodeId) -> Result<(), AtmsError> {
        self.check_node(node)?;
        if self.nodes[node.index()].is_premise {
            return Ok(());
        }
        self.nodes[node.index()].is_premise = true;
        self.justify(&[], node)
    }

    pub fn declare_contradiction(&mut self, node: NodeId) -> Result<(), AtmsError> {
        self.check_node(node)?;
        let n = &mut self.nodes[node.index()];
        if n.is_contradiction {
            return Ok(());
        }
        n.is_contradiction = true;
        let envs = std::mem::take(&mut n.label.0);
        for env in envs {
            self.record_nogood(env);
        }
        Ok(())
    }

    pub fn add_nogood(&mut self, env: Environment) -> Result<(), AtmsError> {
        if env.is_empty() {
            return Err(AtmsError::EmptyNogood);
        }
        for &a in env.ids() {
            self.assumption(a)?;
        }
        self.explicit_nogoods.push(env.clone());
        self.record_nogood(env);
        Ok(())
    }

    pub fn label_of(&self, node: NodeId) -> Result<&Label, AtmsError> {
        self.check_node(node)?;
        Ok(&self.nodes[node.index()].label)
    }

    /// True iff some environment of the node's label is a subset of `env`.
    pub fn holds_in(&self, node: NodeId, env: &Environment) -> bool {
        self.nodes.get(node.index()).is_some_and(|n| n.label.covers(env))
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn find_node(&self, term: &Term) -> Option<NodeId> {
        self.index.get(term).copied()
    }

    pub fn assumption(&self, id: AssumptionId) -> Result<&Assumption, AtmsError> {
        self.assumptions.get(id.index()).ok_or(AtmsError::UnknownAssumption(id))
    }

    pub fn assumptions(&self) -> impl Iterator<Item = (AssumptionId, &Assumption)> {
        self.assumptions.iter().enumerate().map(|(i, a)| (AssumptionId(i as u32), a))
    }

    pub fn assumption_count(&self) -> usize {
        self.assumptions.len()
    }

    pub fn find_assumption(&self, name: &str) -> Option<AssumptionId> {
        self.names.get(name).copied()
    }

    pub fn justifications(&self) -> &[Justification] {
        &self.justifications
    }

    pub fn nogoods(&self) -> &NogoodDb {
        &self.nogoods
    }

    pub fn explicit_nogoods(&self) -> &[Environment] {
        &self.explicit_nogoods
    }

    pub fn format_env(&self, env: &Environment) -> String {
        let names: Vec<&str> = env.ids().iter().map(|a| self.assumptions[a.index()].name.as_str()).collect();
        format!("{{{}}}", names.join(", "))
    }

    pub fn format_label(&self, label: &Label) -> String {
        let envs: Vec<String> = label.0.iter().map(|e| self.format_env(e)).collect();
        format!("[{}]", envs.join(", "))
    }

    /// One line per non-assumption node: `(Urn H2) [{a_H2}]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in self.nodes.iter().filter(|n| n.assumption.is_none()) {
            out.push_str(&format!("{} {}\n", n.term, self.format_label(&n.label)));
        }
        out
    }

    fn check_node(&self, node: NodeId) -> Result<(), AtmsError> {
        if node.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(AtmsError::UnknownNode(node))
        }
    }

    /// Unions of one environment per antecedent, minimized and filtered
    /// against the nogood database.
    fn weave(&self, antecedents: &[NodeId], delta: Option<(NodeId, &[Environment])>) -> Vec<Environment> {
        let mut acc = vec![Environment::empty()];
        // only reachable once the empty environment itself is nogood
        acc.retain(|e| !self.nogoods.is_inconsistent(e));
        let mut delta_used = false;
        for &ant in antecedents {
            let envs: &[Environment] = match delta {
                // only the first occurrence takes the delta, later repeats see the full label
                Some((d, envs)) if d == ant && !delta_used => {
                    delta_used = true;
                    envs
                }
                _ => &self.nodes[ant.index()].label.0,
            };
            let mut next = Vec::with_capacity(acc.len() * envs.len());
            for a in &acc {
                for e in envs {
                    let u = a.union(e);
                    if !self.nogoods.is_inconsistent(&u) {
                        next.push(u);
                    }
                }
            }
            acc = minimize(next);
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    fn propagate(&mut self, mut queue: VecDeque<Pending>) {
        while let Some((jid, delta)) = queue.pop_front() {
            let just = &self.justifications[jid.0 as usize];
            let consequent = just.consequent;
            let delta = delta.map(|(n, envs)| {
                // drop environments that were purged or subsumed since they were queued
                let label = &self.nodes[n.index()].label.0;
                let live: Vec<Environment> = envs.into_iter().filter(|e| label.contains(e)).collect();
                (n, live)
            });
            if let Some((_, envs)) = &delta {
                if envs.is_empty() {
                    continue;
                }
            }
            let derived = self.weave(&just.antecedents, delta.as_ref().map(|(n, e)| (*n, e.as_slice())));
            if derived.is_empty() {
                continue;
            }
            if self.nodes[consequent.index()].is_contradiction {
                for env in derived {
                    self.record_nogood(env);
                }
                continue;
            }
            let fresh = self.nodes[consequent.index()].label.absorb(derived);
            if fresh.is_empty() {
                continue;
            }
            for &out in &self.nodes[consequent.index()].antecedent_of {
                queue.push_back((out, Some((consequent, fresh.clone()))));
            }
        }
    }

    fn record_nogood(&mut self, env: Environment) {
        if !self.nogoods.insert(env.clone()) {
            return;
        }
        for n in &mut self.nodes {
            n.label.purge(&env);
        }
    }

    /// Recomputes every label and the nogood database from the final
    /// justification set with a global (non-incremental) fixpoint.
    pub fn rebuilt_from_scratch(&self) -> Atms {
        let mut fresh = self.clone();
        for n in &mut fresh.nodes {
            n.label = match n.assumption {
                Some(a) => Label(vec![Environment::singleton(a)]),
                None => Label::default(),
            };
        }
        fresh.nogoods = NogoodDb(minimize(self.explicit_nogoods.clone()));
        loop {
            let mut changed = false;
            for just in &fresh.justifications {
                let mut acc = vec![Environment::empty()];
                for ant in &just.antecedents {
                    acc = acc
                        .iter()
                        .flat_map(|a| fresh.nodes[ant.index()].label.0.iter().map(move |e| a.union(e)))
                        .collect();
                }
                let derived: Vec<Environment> = acc.into_iter().filter(|e| !fresh.nogoods.is_inconsistent(e)).collect();
                let c = just.consequent.index();
                if fresh.nodes[c].is_contradiction {
                    for env in derived {
                        changed |= fresh.nogoods.insert(env);
                    }
                } else {
                    let mut all = fresh.nodes[c].label.0.clone();
                    all.extend(derived);
                    let merged = minimize(all);
                    if merged != fresh.nodes[c].label.0 {
                        fresh.nodes[c].label.0 = merged;
                        changed = true;
                    }
                }
            }
            let nogoods = fresh.nogoods.0.clone();
            for n in &mut fresh.nodes {
                n.label.0.retain(|e| !nogoods.iter().any(|ng| ng.is_subset_of(e)));
            }
            if !changed {
                return fresh;
            }
        }
    }

    /// Checks the antichain and consistency invariants of every label.
    pub fn check_invariants(&self) -> Result<(), String> {
        for n in &self.nodes {
            let envs = &n.label.0;
            for (i, a) in envs.iter().enumerate() {
                if self.nogoods.is_inconsistent(a) {
                    return Err(format!("{}: {} contains a nogood", n.term, self.format_env(a)));
                }
                for (j, b) in envs.iter().enumerate() {
                    if i != j && a.is_subset_of(b) {
                        return Err(format!("{}: label is not minimal", n.term));
                    }
                }
            }
            if n.is_contradiction && !envs.is_empty() {
                return Err(format!("{}: contradiction node has a label", n.term));
            }
            if n.is_premise
                && envs != &vec![Environment::empty()]
                && !self.nogoods.is_inconsistent(&Environment::empty())
            {
                return Err(format!("{}: premise label is not {{{{}}}}", n.term));
            }
        }
        let ng = &self.nogoods.0;
        for (i, a) in ng.iter().enumerate() {
            for (j, b) in ng.iter().enumerate() {
                if i != j && a.is_subset_of(b) {
                    return Err("nogood database is not minimal".to_string());
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.0.iter().map(|a| a.0.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    fn t(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    fn dist(atms: &mut Atms, name: &str, w: f64) -> AssumptionId {
        atms.create_assumption(AssumptionKind::DistributionElement, Some(w), name).unwrap()
    }

    #[test]
    fn fresh_node_has_empty_label() {
        let mut atms = Atms::new();
        let n = atms.create_node(t("(Urn H2)")).unwrap();
        assert!(atms.label_of(n).unwrap().is_empty());
    }

    #[test]
    fn duplicate_node_is_rejected() {
        let mut atms = Atms::new();
        let n = atms.create_node(t("(Urn H2)")).unwrap();
        let err = atms.create_node(t("(urn h2)")).unwrap_err();
        assert_eq!(err, AtmsError::DuplicateNode { term: t("(urn h2)"), existing: n });
    }

    #[test]
    fn non_ground_node_is_rejected() {
        let mut atms = Atms::new();
        assert!(matches!(atms.create_node(t("((Draw ?n) white)")), Err(AtmsError::NonGroundTerm(_))));
    }

    #[test]
    fn assumptions_support_themselves() {
        let mut atms = Atms::new();
        let a = dist(&mut atms, "a_H1", 0.33);
        let s = atms.create_assumption(AssumptionKind::Structure, None, "a_2").unwrap();
        for id in [a, s] {
            let node = atms.assumption(id).unwrap().node;
            assert_eq!(atms.label_of(node).unwrap().environments(), &[Environment::singleton(id)]);
        }
    }

    #[test]
    fn assumption_weight_rules() {
        let mut atms = Atms::new();
        assert_eq!(
            atms.create_assumption(AssumptionKind::DistributionElement, Some(-0.1), "x"),
            Err(AtmsError::BadWeight(-0.1))
        );
        assert_eq!(
            atms.create_assumption(AssumptionKind::Structure, Some(0.5), "x"),
            Err(AtmsError::WeightKindMismatch)
        );
        assert_eq!(
            atms.create_assumption(AssumptionKind::DistributionElement, None, "x"),
            Err(AtmsError::WeightKindMismatch)
        );
        dist(&mut atms, "x", 0.5);
        assert_eq!(
            atms.create_assumption(AssumptionKind::DistributionElement, Some(0.5), "x"),
            Err(AtmsError::DuplicateAssumption("x".into()))
        );
    }

    #[test]
    fn justification_from_assumption() {
        let mut atms = Atms::new();
        let a = dist(&mut atms, "a_H2", 0.33);
        let n = atms.create_node(t("(Urn H2)")).unwrap();
        atms.justify(&[a.into()], n).unwrap();
        assert_eq!(atms.format_label(atms.label_of(n).unwrap()), "[{a_H2}]");
    }

    #[test]
    fn empty_justification_subsumes_everything() {
        let mut atms = Atms::new();
        let a = dist(&mut atms, "a", 1.0);
        let n = atms.create_node(t("n")).unwrap();
        atms.justify(&[a.into()], n).unwrap();
        atms.justify(&[], n).unwrap();
        assert_eq!(atms.label_of(n).unwrap().environments(), &[Environment::empty()]);
    }

    #[test]
    fn chains_propagate() {
        let mut atms = Atms::new();
        let a = dist(&mut atms, "a", 1.0);
        let n1 = atms.create_node(t("n1")).unwrap();
        let n2 = atms.create_node(t("n2")).unwrap();
        // consequent justified before its antecedent gets support
        atms.justify(&[n1.into()], n2).unwrap();
        atms.justify(&[a.into()], n1).unwrap();
        assert_eq!(atms.label_of(n2).unwrap().environments(), &[Environment::singleton(a)]);
    }

    #[test]
    fn cycles_terminate() {
        let mut atms = Atms::new();
        let a = dist(&mut atms, "a", 1.0);
        let x = atms.create_node(t("x")).unwrap();
        let y = atms.create_node(t("y")).unwrap();
        atms.justify(&[x.into()], y).unwrap();
        atms.justify(&[y.into()], x).unwrap();
        atms.justify(&[a.into()], x).unwrap();
        assert_eq!(atms.label_of(y).unwrap().environments(), &[Environment::singleton(a)]);
    }

    #[test]
    fn premise_is_idempotent() {
        let mut atms = Atms::new();
        let n = atms.create_node(t("((draw 1) white)")).unwrap();
        atms.assert_premise(n).unwrap();
        atms.assert_premise(n).unwrap();
        assert_eq!(atms.justifications().len(), 1);
        assert_eq!(atms.label_of(n).unwrap().environments(), &[Environment::empty()]);
        assert!(atms.holds_in(n, &Environment::empty()));
    }

    #[test]
    fn contradiction_moves_environments_to_nogoods() {
        let mut atms = Atms::new();
        let h1 = dist(&mut atms, "a_H1", 0.33);
        let h3 = dist(&mut atms, "a_H3", 0.33);
        let w = atms.create_node(t("((draw 1) white)")).unwrap();
        let b = atms.create_node(t("((draw 1) black)")).unwrap();
        let urn3 = atms.create_node(t("(Urn H3)")).unwrap();
        let urn1 = atms.create_node(t("(Urn H1)")).unwrap();
        atms.justify(&[h3.into()], urn3).unwrap();
        atms.justify(&[h1.into()], urn1).unwrap();
        atms.justify(&[urn3.into()], b).unwrap();
        let bottom = atms.create_node(t("(exclusive w b)")).unwrap();
        atms.declare_contradiction(bottom).unwrap();
        atms.justify(&[w.into(), b.into()], bottom).unwrap();
        assert!(atms.nogoods().environments().is_empty());
        atms.assert_premise(w).unwrap();
        assert_eq!(atms.nogoods().environments(), &[Environment::singleton(h3)]);
        assert!(atms.label_of(b).unwrap().is_empty());
        assert!(atms.label_of(urn3).unwrap().is_empty());
        assert!(atms.label_of(bottom).unwrap().is_empty());
        assert_eq!(atms.label_of(urn1).unwrap().len(), 1);
        atms.check_invariants().unwrap();
    }

    #[test]
    fn contradiction_without_support_adds_nothing() {
        let mut atms = Atms::new();
        let bottom = atms.create_node(t("bottom")).unwrap();
        atms.declare_contradiction(bottom).unwrap();
        assert!(atms.nogoods().environments().is_empty());
    }

    #[test]
    fn nogood_subsumption() {
        let mut atms = Atms::new();
        let a = dist(&mut atms, "a", 1.0);
        let b = dist(&mut atms, "b", 1.0);
        atms.add_nogood(Environment::from_ids([a, b])).unwrap();
        atms.add_nogood(Environment::singleton(a)).unwrap();
        assert_eq!(atms.nogoods().environments(), &[Environment::singleton(a)]);
        atms.add_nogood(Environment::from_ids([a, b])).unwrap();
        assert_eq!(atms.nogoods().environments(), &[Environment::singleton(a)]);
        assert_eq!(atms.add_nogood(Environment::empty()), Err(AtmsError::EmptyNogood));
    }

    #[test]
    fn retraction_nogood_purges_labels() {
        let mut atms = Atms::new();
        let e = dist(&mut atms, "e", 0.7);
        let s = atms.create_assumption(AssumptionKind::Structure, None, "a_2").unwrap();
        let n = atms.create_node(t("((news 1) true)")).unwrap();
        atms.justify(&[e.into(), s.into()], n).unwrap();
        assert_eq!(atms.format_label(atms.label_of(n).unwrap()), "[{e, a_2}]");
        atms.add_nogood(Environment::singleton(s)).unwrap();
        assert!(atms.label_of(n).unwrap().is_empty());
        let snode = atms.assumption(s).unwrap().node;
        assert!(atms.label_of(snode).unwrap().is_empty());
    }

    #[test]
    fn holds_in_examples() {
        let mut atms = Atms::new();
        let h1 = dist(&mut atms, "a_H1", 0.33);
        let h2 = dist(&mut atms, "a_H2", 0.33);
        let w1 = dist(&mut atms, "a_w1", 0.5);
        let n = atms.create_node(t("(Urn H2)")).unwrap();
        atms.justify(&[h2.into()], n).unwrap();
        assert!(atms.holds_in(n, &Environment::from_ids([h2, w1])));
        assert!(!atms.holds_in(n, &Environment::singleton(h1)));
    }

    #[test]
    fn subset_and_union() {
        let e = |v: &[u32]| Environment::from_ids(v.iter().map(|&i| AssumptionId(i)));
        assert!(e(&[]).is_subset_of(&e(&[1])));
        assert!(e(&[1, 3]).is_subset_of(&e(&[1, 2, 3])));
        assert!(!e(&[1, 4]).is_subset_of(&e(&[1, 2, 3])));
        assert!(!e(&[0]).is_subset_of(&e(&[1, 2, 3])));
        assert_eq!(e(&[3, 1]).union(&e(&[2, 1])), e(&[1, 2, 3]));
        assert_eq!(minimize(vec![e(&[1, 2]), e(&[1]), e(&[2, 3]), e(&[1])]), vec![e(&[1]), e(&[2, 3])]);
    }

    #[test]
    fn dump_format() {
        let mut atms = Atms::new();
        let h2 = dist(&mut atms, "a_H2", 0.33);
        let n = atms.create_node(t("(Urn H2)")).unwrap();
        atms.create_node(t("((draw 1) black)")).unwrap();
        atms.justify(&[h2.into()], n).unwrap();
        assert_eq!(atms.dump(), "(Urn H2) [{a_H2}]\n((draw 1) black) []\n");
    }
}
