//! The modelling language compiled onto the network.
//!
//! Variable classes such as `(Draw ?n)` are declared once; each
//! `(Instance (draw 1))` creates one node per value, installs pairwise
//! exclusion between them and wires in every relation schema whose patterns
//! now match. A relation rule with a single certain outcome becomes a plain
//! justification; any other rule gets a fresh choose set per instance and per
//! parent value, so repeated draws are conditionally independent.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::atms::{Antecedent, AssumptionId, AtmsError, NodeId};
use crate::probability::{ChooseSetId, Network, ProbabilityError};
use crate::structure::StructureState;
use crate::term::{Bindings, Symbol, Term};

/// Slack allowed when checking that rule probabilities add up.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceId(pub usize);

#[derive(Debug, Clone)]
pub struct VariableClass {
    pub pattern: Term,
    pub values: Vec<Symbol>,
    /// Marginal declared on the pattern itself, applied to every instance.
    pub default_marginal: Option<Vec<f64>>,
}

impl VariableClass {
    pub fn value_index(&self, v: &Symbol) -> Option<usize> {
        self.values.iter().position(|x| x == v)
    }
}

/// One `->` rule as written: a parent value proposition and the child value
/// propositions it leads to.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub parent: Term,
    pub entries: Vec<(Term, f64)>,
}

#[derive(Debug, Clone)]
pub struct RelationSchema {
    pub parent: Term,
    pub child: Term,
    pub parent_class: ClassId,
    pub child_class: ClassId,
    pub rules: Vec<RuleSpec>,
    /// Per rule: parent value index and the full child distribution.
    pub distributions: Vec<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub term: Term,
    pub class: ClassId,
    pub value_nodes: Vec<NodeId>,
    pub marginal: Option<ChooseSetId>,
    /// Child instances reached through applied relations.
    pub consequents: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalWeights {
    /// `(Marginal Urn (Urn H1) .33 (Urn H2) .33 ...)`
    Pairs(Vec<(Term, f64)>),
    /// `(Marginal (radio 1) .7 .3)` or `(Marginal (radio 1) (.7 .3))`
    Positional(Vec<f64>),
}

/// Messages emitted by structural reasoning, printed as transcript lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureEvent {
    Assuming(Term),
    Monitoring(Term),
    Retracting(Term),
}

impl fmt::Display for StructureEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureEvent::Assuming(t) => write!(f, "** Assuming {t} ***"),
            StructureEvent::Monitoring(t) => write!(f, "** Monitoring {t} ***"),
            StructureEvent::Retracting(t) => write!(f, "** Retracting {t} ***"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Atms(#[from] AtmsError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error("variable {0} is already declared")]
    DuplicateVariable(Term),
    #[error("variable {0} needs at least one value")]
    NoValues(Term),
    #[error("value {value} is listed twice for {variable}")]
    DuplicateValue { variable: Term, value: Symbol },
    #[error("pattern {0} repeats a logical variable")]
    RepeatedPatternVariable(Term),
    #[error("no variable is declared with pattern {0}")]
    UnknownVariable(Term),
    #[error("{value} is not a value of {variable}")]
    UnknownValue { variable: Term, value: Term },
    #[error("relation {parent} -> {child}: {reason}")]
    MalformedRule { parent: Term, child: Term, reason: String },
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("{0} is not ground")]
    NotGround(Term),
    #[error("{0} matches no declared variable")]
    NoMatchingClass(Term),
    #[error("{0} matches more than one declared variable")]
    AmbiguousClass(Term),
    #[error("{0} is already instantiated")]
    AlreadyInstantiated(Term),
    #[error("{0} is not instantiated")]
    NotInstantiated(Term),
    #[error("marginal for {target} needs {expected} weights, got {found}")]
    MarginalArity { target: Term, expected: usize, found: usize },
    #[error("{0} already has a marginal")]
    DuplicateMarginal(Term),
    #[error("marginal weight {0} must be a nonnegative number")]
    BadWeight(f64),
    #[error("{0} is not a known proposition")]
    UnknownProposition(Term),
    #[error("no node named {0}")]
    UnknownTerm(Term),
    #[error("cannot decide how {report} relates to {rival}: {source_var} has no marginal")]
    MissingSourceMarginal { report: Term, rival: Term, source_var: Term },
    #[error("reports {0} and {1} have different value sets and cannot share evidence")]
    IncompatibleReports(Term, Term),
    #[error("a monitor on {0} is already installed")]
    DuplicateMonitor(Term),
    #[error("monitor on {0} has already fired")]
    MonitorFired(Term),
    #[error("{0} contradicts the source model: the two reports can never share a source")]
    SourcesCannotCoincide(Term),
    #[error("no assumption named {0}")]
    UnknownAssumption(Term),
}

/// The modelling engine: declarations, instances and the network they
/// compile to.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub(crate) net: Network,
    pub(crate) classes: Vec<VariableClass>,
    pub(crate) relations: Vec<RelationSchema>,
    pub(crate) instances: Vec<InstanceRecord>,
    instance_index: HashMap<Term, InstanceId>,
    applied: HashSet<(RelationId, InstanceId, InstanceId)>,
    pub(crate) structure: StructureState,
    pub(crate) events: Vec<StructureEvent>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn classes(&self) -> &[VariableClass] {
        &self.classes
    }

    pub fn relations(&self) -> &[RelationSchema] {
        &self.relations
    }

    pub fn instances(&self) -> &[InstanceRecord] {
        &self.instances
    }

    pub fn instance(&self, term: &Term) -> Option<&InstanceRecord> {
        self.instance_index.get(term).map(|i| &self.instances[i.0])
    }

    pub fn structure(&self) -> &StructureState {
        &self.structure
    }

    /// Structural messages emitted since the last call.
    pub fn drain_events(&mut self) -> Vec<StructureEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn declare_variable(&mut self, pattern: Term, values: Vec<Symbol>) -> Result<ClassId, ModelError> {
        if self.classes.iter().any(|c| c.pattern.alpha_eq(&pattern)) {
            return Err(ModelError::DuplicateVariable(pattern));
        }
        if values.is_empty() {
            return Err(ModelError::NoValues(pattern));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(ModelError::DuplicateValue { variable: pattern, value: v.clone() });
            }
        }
        if !pattern.has_distinct_variables() {
            return Err(ModelError::RepeatedPatternVariable(pattern));
        }
        let ground = pattern.is_ground();
        let id = ClassId(self.classes.len());
        self.classes.push(VariableClass { pattern: pattern.clone(), values, default_marginal: None });
        if ground {
            self.instantiate(pattern)?;
        }
        Ok(id)
    }

    fn class_for_pattern(&self, pattern: &Term) -> Result<ClassId, ModelError> {
        self.classes
            .iter()
            .position(|c| c.pattern.alpha_eq(pattern))
            .map(ClassId)
            .ok_or_else(|| ModelError::UnknownVariable(pattern.clone()))
    }

    /// Splits a value proposition `(<subject> <value>)`.
    fn split_prop(prop: &Term) -> Option<(&Term, &Symbol)> {
        match prop.as_list()? {
            [subject, Term::Sym(v)] => Some((subject, v)),
            _ => None,
        }
    }

    fn rule_value(&self, pattern: &Term, class: ClassId, prop: &Term) -> Result<usize, ModelError> {
        let c = &self.classes[class.0];
        let (subject, value) = Self::split_prop(prop)
            .filter(|(s, _)| *s == pattern)
            .ok_or_else(|| ModelError::UnknownValue { variable: pattern.clone(), value: prop.clone() })?;
        c.value_index(value)
            .ok_or_else(|| ModelError::UnknownValue { variable: subject.clone(), value: Term::Sym(value.clone()) })
    }

    pub fn declare_relation(
        &mut self,
        parent: Term,
        child: Term,
        rules: Vec<RuleSpec>,
    ) -> Result<RelationId, ModelError> {
        let parent_class = self.class_for_pattern(&parent)?;
        let child_class = self.class_for_pattern(&child)?;
        let malformed =
            |reason: String| ModelError::MalformedRule { parent: parent.clone(), child: child.clone(), reason };
        if parent_class == child_class {
            return Err(malformed("a variable cannot condition itself".into()));
        }
        let n_child = self.classes[child_class.0].values.len();
        let mut distributions: Vec<(usize, Vec<f64>)> = Vec::with_capacity(rules.len());
        for rule in &rules {
            let pv = self.rule_value(&parent, parent_class, &rule.parent)?;
            if distributions.iter().any(|(p, _)| *p == pv) {
                return Err(malformed(format!("two rules for {}", rule.parent)));
            }
            let mut dist = vec![None; n_child];
            for (prop, p) in &rule.entries {
                if !(0.0..=1.0).contains(p) {
                    return Err(ModelError::BadProbability(*p));
                }
                let cv = self.rule_value(&child, child_class, prop)?;
                if dist[cv].replace(*p).is_some() {
                    return Err(malformed(format!("{prop} listed twice")));
                }
            }
            distributions.push((pv, complete_distribution(&dist).map_err(malformed)?));
        }
        let id = RelationId(self.relations.len());
        self.relations.push(RelationSchema { parent, child, parent_class, child_class, rules, distributions });
        self.apply_relations()?;
        Ok(id)
    }

    pub fn instantiate(&mut self, term: Term) -> Result<InstanceId, ModelError> {
        if !term.is_ground() {
            return Err(ModelError::NotGround(term));
        }
        if self.instance_index.contains_key(&term) {
            return Err(ModelError::AlreadyInstantiated(term));
        }
        let matching: Vec<usize> = self
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.pattern.match_ground(&term, &mut Bindings::new()))
            .map(|(i, _)| i)
            .collect();
        let class = match matching.as_slice() {
            [] => return Err(ModelError::NoMatchingClass(term)),
            [one] => ClassId(*one),
            _ => return Err(ModelError::AmbiguousClass(term)),
        };
        let values = self.classes[class.0].values.clone();
        let atms = self.net.atms_mut();
        let mut value_nodes = Vec::with_capacity(values.len());
        for v in &values {
            value_nodes.push(atms.create_node(Term::List(vec![term.clone(), Term::Sym(v.clone())]))?);
        }
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let bottom = atms.create_node(Term::List(vec![
                    Term::sym("exclusive"),
                    atms.node(value_nodes[i]).unwrap().term.clone(),
                    atms.node(value_nodes[j]).unwrap().term.clone(),
                ]))?;
                atms.declare_contradiction(bottom)?;
                atms.justify(&[value_nodes[i].into(), value_nodes[j].into()], bottom)?;
            }
        }
        let id = InstanceId(self.instances.len());
        self.instance_index.insert(term.clone(), id);
        self.instances.push(InstanceRecord { term, class, value_nodes, marginal: None, consequents: Vec::new() });
        if let Some(weights) = self.classes[class.0].default_marginal.clone() {
            self.attach_marginal(id, weights)?;
        }
        self.apply_relations()?;
        Ok(id)
    }

    /// Wires every (relation, parent instance, child instance) triple whose
    /// patterns match and that has not been wired yet.
    fn apply_relations(&mut self) -> Result<(), ModelError> {
        for r in 0..self.relations.len() {
            let rel = &self.relations[r];
            let mut todo = Vec::new();
            for (pi, p) in self.instances.iter().enumerate().filter(|(_, i)| i.class == rel.parent_class) {
                for (ci, c) in self.instances.iter().enumerate().filter(|(_, i)| i.class == rel.child_class) {
                    let key = (RelationId(r), InstanceId(pi), InstanceId(ci));
                    if self.applied.contains(&key) {
                        continue;
                    }
                    let mut b = Bindings::new();
                    if rel.parent.match_ground(&p.term, &mut b) && rel.child.match_ground(&c.term, &mut b) {
                        todo.push(key);
                    }
                }
            }
            for key in todo {
                self.apply_relation(key)?;
                self.applied.insert(key);
            }
        }
        Ok(())
    }

    fn apply_relation(&mut self, (rel, parent, child): (RelationId, InstanceId, InstanceId)) -> Result<(), ModelError> {
        let schema = self.relations[rel.0].clone();
        let p = self.instances[parent.0].clone();
        let c = self.instances[child.0].clone();
        let pvalues = self.classes[p.class.0].values.clone();
        let cvalues = self.classes[c.class.0].values.clone();
        for (pv, dist) in &schema.distributions {
            let parent_node = p.value_nodes[*pv];
            let live: Vec<(usize, f64)> =
                dist.iter().copied().enumerate().filter(|(_, q)| *q > MASS_TOLERANCE).collect();
            if let [(cv, q)] = live.as_slice() {
                if *q >= 1.0 - MASS_TOLERANCE {
                    self.net.atms_mut().justify(&[parent_node.into()], c.value_nodes[*cv])?;
                    continue;
                }
            }
            let given = Term::List(vec![p.term.clone(), Term::Sym(pvalues[*pv].clone())]);
            let members: Vec<(String, f64)> = live
                .iter()
                .map(|&(cv, q)| {
                    let base =
                        format!("c_{}_{}|{}_{}", c.term.flat_key(), cvalues[cv], p.term.flat_key(), pvalues[*pv]);
                    (self.fresh_name(&base), q)
                })
                .collect();
            let members = self.dedupe_names(members);
            let tag = Term::List(vec![Term::sym("given"), c.term.clone(), given]);
            let (_, ids) = self.net.create_choose(tag, &members)?;
            for (&(cv, _), a) in live.iter().zip(ids) {
                self.net.atms_mut().justify(&[parent_node.into(), a.into()], c.value_nodes[cv])?;
            }
        }
        let rec = &mut self.instances[parent.0];
        if !rec.consequents.contains(&child) {
            rec.consequents.push(child);
        }
        Ok(())
    }

    /// `base` if unused, else `base.2`, `base.3`, ...
    pub(crate) fn fresh_name(&self, base: &str) -> String {
        let atms = self.net.atms();
        if atms.find_assumption(base).is_none() {
            return base.to_string();
        }
        (2..).map(|k| format!("{base}.{k}")).find(|n| atms.find_assumption(n).is_none()).unwrap()
    }

    /// Resolves collisions inside one batch of fresh names.
    fn dedupe_names(&self, members: Vec<(String, f64)>) -> Vec<(String, f64)> {
        let mut seen: HashSet<String> = HashSet::new();
        members
            .into_iter()
            .map(|(name, w)| {
                let mut n = name.clone();
                let mut k = 2;
                while !seen.insert(n.clone()) || (n != name && self.net.atms().find_assumption(&n).is_some()) {
                    n = format!("{name}.{k}");
                    k += 1;
                }
                (n, w)
            })
            .collect()
    }

    fn marginal_weights(
        &self,
        target: &Term,
        class: ClassId,
        weights: MarginalWeights,
    ) -> Result<Vec<f64>, ModelError> {
        let c = &self.classes[class.0];
        let aligned = match weights {
            MarginalWeights::Positional(ws) => ws,
            MarginalWeights::Pairs(pairs) => {
                let mut out = vec![None; c.values.len()];
                for (prop, w) in &pairs {
                    let idx = Self::split_prop(prop)
                        .filter(|(s, _)| *s == target)
                        .and_then(|(_, v)| c.value_index(v))
                        .ok_or_else(|| ModelError::UnknownValue { variable: target.clone(), value: prop.clone() })?;
                    if out[idx].replace(*w).is_some() {
                        return Err(ModelError::UnknownValue { variable: target.clone(), value: prop.clone() });
                    }
                }
                if out.iter().any(Option::is_none) {
                    return Err(ModelError::MarginalArity {
                        target: target.clone(),
                        expected: c.values.len(),
                        found: pairs.len(),
                    });
                }
                out.into_iter().map(Option::unwrap).collect()
            }
        };
        if aligned.len() != c.values.len() {
            return Err(ModelError::MarginalArity {
                target: target.clone(),
                expected: c.values.len(),
                found: aligned.len(),
            });
        }
        if let Some(&w) = aligned.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(ModelError::BadWeight(w));
        }
        if aligned.iter().sum::<f64>() <= 0.0 {
            return Err(ProbabilityError::ZeroMass.into());
        }
        Ok(aligned)
    }

    /// Declares a prior for an instance, or for every instance of a class
    /// when `target` is a class pattern.
    pub fn declare_marginal(&mut self, target: Term, weights: MarginalWeights) -> Result<(), ModelError> {
        if let Some(&inst) = self.instance_index.get(&target) {
            let class = self.instances[inst.0].class;
            let aligned = self.marginal_weights(&target, class, weights)?;
            if self.instances[inst.0].marginal.is_some() {
                return Err(ModelError::DuplicateMarginal(target));
            }
            return self.attach_marginal(inst, aligned);
        }
        if target.is_ground() {
            return Err(ModelError::NotInstantiated(target));
        }
        let class = self.class_for_pattern(&target)?;
        let aligned = self.marginal_weights(&target, class, weights)?;
        if self.classes[class.0].default_marginal.is_some() {
            return Err(ModelError::DuplicateMarginal(target));
        }
        let existing: Vec<InstanceId> =
            (0..self.instances.len()).map(InstanceId).filter(|i| self.instances[i.0].class == class).collect();
        if let Some(i) = existing.iter().find(|i| self.instances[i.0].marginal.is_some()) {
            return Err(ModelError::DuplicateMarginal(self.instances[i.0].term.clone()));
        }
        self.classes[class.0].default_marginal = Some(aligned.clone());
        for inst in existing {
            self.attach_marginal(inst, aligned.clone())?;
        }
        Ok(())
    }

    fn attach_marginal(&mut self, inst: InstanceId, weights: Vec<f64>) -> Result<(), ModelError> {
        let rec = self.instances[inst.0].clone();
        let values = &self.classes[rec.class.0].values;
        let members: Vec<(String, f64)> = values
            .iter()
            .zip(&weights)
            .map(|(v, &w)| {
                let base = match &rec.term {
                    Term::Sym(_) => format!("a_{v}"),
                    t => format!("a_{}_{v}", t.flat_key()),
                };
                (self.fresh_name(&base), w)
            })
            .collect();
        let members = self.dedupe_names(members);
        let tag = Term::List(vec![Term::sym("marginal"), rec.term.clone()]);
        let (cs, ids) = self.net.create_choose(tag, &members)?;
        self.instances[inst.0].marginal = Some(cs);
        self.attach_evidence(inst, cs, ids)
    }

    /// Plain evidence wiring: each marginal member supports its value.
    pub(crate) fn wire_evidence(
        &mut self,
        inst: InstanceId,
        members: &[AssumptionId],
        condition: Option<AssumptionId>,
    ) -> Result<(), ModelError> {
        let nodes = self.instances[inst.0].value_nodes.clone();
        for (&a, node) in members.iter().zip(nodes) {
            let mut ants: Vec<Antecedent> = vec![a.into()];
            ants.extend(condition.map(Antecedent::from));
            self.net.atms_mut().justify(&ants, node)?;
        }
        Ok(())
    }

    pub(crate) fn instance_id(&self, term: &Term) -> Option<InstanceId> {
        self.instance_index.get(term).copied()
    }

    /// Resolves a value proposition `(<instance> <value>)` to its node.
    pub fn value_node(&self, prop: &Term) -> Option<NodeId> {
        let (subject, value) = Self::split_prop(prop)?;
        let inst = self.instance(subject)?;
        let idx = self.classes[inst.class.0].value_index(value)?;
        Some(inst.value_nodes[idx])
    }

    /// Asserts an observed value, or hands structural facts such as
    /// `(Same evidence-for (radio 1) (news 1))` to structural reasoning.
    pub fn assert_fact(&mut self, fact: Term) -> Result<(), ModelError> {
        if let Some(node) = self.value_node(&fact) {
            self.net.atms_mut().assert_premise(node)?;
            return Ok(());
        }
        if self.is_structural_fact(&fact) {
            return self.assert_structural_fact(fact);
        }
        Err(ModelError::UnknownProposition(fact))
    }

    /// Any node of the network, looked up by its term.
    pub fn node_for(&self, term: &Term) -> Result<NodeId, ModelError> {
        self.net.atms().find_node(term).ok_or_else(|| ModelError::UnknownTerm(term.clone()))
    }

    pub fn query_probability(&self, term: &Term) -> Result<f64, ModelError> {
        let node = self.node_for(term)?;
        Ok(self.net.probability_of(node)?)
    }
}

/// Fills in omitted child values: a single omitted value takes the residual
/// mass, several omitted values are only allowed when nothing is left over.
fn complete_distribution(listed: &[Option<f64>]) -> Result<Vec<f64>, String> {
    let sum: f64 = listed.iter().flatten().sum();
    if sum > 1.0 + MASS_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, more than 1"));
    }
    let residual = if 1.0 - sum <= MASS_TOLERANCE { 0.0 } else { 1.0 - sum };
    let omitted = listed.iter().filter(|p| p.is_none()).count();
    match omitted {
        0 if residual > 0.0 => Err(format!("probabilities sum to {sum}, less than 1")),
        1 => Ok(listed.iter().map(|p| p.unwrap_or(residual)).collect()),
        n if n >= 2 && residual > 0.0 => {
            Err(format!("{residual} unassigned mass cannot be split over {n} omitted values"))
        }
        _ => Ok(listed.iter().map(|p| p.unwrap_or(0.0)).collect()),
    }
}
