//! Decisions about how pieces of evidence relate to each other.
//!
//! A report is an instance `r` for which some declared class matches
//! `(source r)`. When a report's evidence arrives and another report already
//! feeds one of the same consequents, a small decision model over the two
//! source distributions decides whether the evidence is shared or
//! independent. Independence is recorded as a retractable structure
//! assumption that conditions the new evidence, and a one-shot monitor waits
//! for `(Same evidence-for r1 r2)` to undo it.

use crate::atms::{AssumptionId, AssumptionKind};
use crate::model::{InstanceId, Model, ModelError, StructureEvent};
use crate::probability::ChooseSetId;
use crate::term::{Bindings, Symbol, Term};

/// Reports whose chance of sharing a source reaches this are wired as
/// sharing it.
pub const SHARE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub report: InstanceId,
    pub evidence: ChooseSetId,
    /// The report's own evidence members.
    pub members: Vec<AssumptionId>,
    /// Members whose justifications actually support the report; differ
    /// from `members` once the report shares another report's evidence.
    pub root: Vec<AssumptionId>,
    /// Index into [`StructureState::assumptions`] conditioning the wiring.
    pub condition: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureAssumption {
    pub assumption: AssumptionId,
    pub statement: Term,
    pub report: InstanceId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub trigger: Term,
    pub rival: InstanceId,
    pub report: InstanceId,
    pub structure: usize,
    pub fired: bool,
}

#[derive(Debug, Clone, Default)]
pub struct StructureState {
    pub attachments: Vec<Attachment>,
    pub assumptions: Vec<StructureAssumption>,
    pub monitors: Vec<Monitor>,
    /// Asserted `Same evidence-for` pairs, in canonical order.
    pub same_facts: Vec<(Term, Term)>,
    reports_attached: usize,
}

impl StructureState {
    pub fn attachment(&self, report: InstanceId) -> Option<&Attachment> {
        self.attachments.iter().find(|a| a.report == report)
    }

    fn knows_same(&self, pair: &(Term, Term)) -> bool {
        self.same_facts.contains(pair)
    }
}

fn same_pair(a: &Term, b: &Term) -> (Term, Term) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn statement(head: &str, a: &Term, b: &Term) -> Term {
    Term::List(vec![Term::sym(head), Term::sym("evidence-for"), a.clone(), b.clone()])
}

fn source_of(report: &Term) -> Term {
    Term::List(vec![Term::sym("source"), report.clone()])
}

impl Model {
    /// True when some declared class describes the source of `term`.
    pub fn is_report(&self, term: &Term) -> bool {
        let source = source_of(term);
        self.classes.iter().any(|c| c.pattern.match_ground(&source, &mut Bindings::new()))
    }

    /// Wires a newly declared marginal into the network, resolving any
    /// conflict with reports that already feed the same consequents.
    pub(crate) fn attach_evidence(
        &mut self,
        inst: InstanceId,
        evidence: ChooseSetId,
        members: Vec<AssumptionId>,
    ) -> Result<(), ModelError> {
        let term = self.instances[inst.0].term.clone();
        if !self.is_report(&term) {
            return self.wire_evidence(inst, &members, None);
        }
        self.structure.reports_attached += 1;
        let ordinal = self.structure.reports_attached;
        let rivals = self.rivals_of(inst);
        let mut attachment = Attachment { report: inst, evidence, root: members.clone(), members, condition: None };
        if rivals.is_empty() {
            self.wire_evidence(inst, &attachment.root, None)?;
            self.structure.attachments.push(attachment);
            return Ok(());
        }
        for &r in &rivals {
            if self.value_names(r) != self.value_names(inst) {
                return Err(ModelError::IncompatibleReports(self.instances[r.0].term.clone(), term));
            }
        }
        let forced =
            rivals.iter().copied().find(|&r| self.structure.knows_same(&same_pair(&self.instances[r.0].term, &term)));
        let (shared_with, odds) = match forced {
            Some(r) => (Some(r), Vec::new()),
            None => {
                let odds = rivals
                    .iter()
                    .map(|&r| self.shared_source_probability(r, inst).map(|p| (r, p)))
                    .collect::<Result<Vec<_>, _>>()?;
                (odds.iter().find(|(_, p)| *p >= SHARE_THRESHOLD).map(|(r, _)| *r), odds)
            }
        };
        if let Some(r) = shared_with {
            attachment.root = self.structure.attachment(r).unwrap().root.clone();
            self.wire_evidence(inst, &attachment.root, None)?;
            self.structure.attachments.push(attachment);
            return Ok(());
        }

        let stmt = statement("Independent", &self.instances[rivals[0].0].term, &term);
        let name = self.fresh_name(&format!("a_{ordinal}"));
        let atms = self.net.atms_mut();
        let a = atms.create_assumption(AssumptionKind::Structure, None, &name)?;
        let stmt_node = atms.create_node(stmt.clone())?;
        atms.justify(&[a.into()], stmt_node)?;
        let idx = self.structure.assumptions.len();
        self.structure.assumptions.push(StructureAssumption { assumption: a, statement: stmt.clone(), report: inst });
        self.wire_evidence(inst, &attachment.root, Some(a))?;
        attachment.condition = Some(idx);
        self.structure.attachments.push(attachment);
        self.events.push(StructureEvent::Assuming(stmt));
        for (r, p) in odds {
            if p > 0.0 {
                let trigger = statement("Same", &self.instances[r.0].term, &term);
                self.install_monitor(trigger, r, inst, idx)?;
            }
        }
        Ok(())
    }

    /// Earlier reports feeding a consequent of `inst`, one per distinct
    /// evidence root, in attachment order.
    fn rivals_of(&self, inst: InstanceId) -> Vec<InstanceId> {
        let mine = &self.instances[inst.0].consequents;
        let mut roots: Vec<&[AssumptionId]> = Vec::new();
        let mut out = Vec::new();
        for att in &self.structure.attachments {
            let theirs = &self.instances[att.report.0].consequents;
            if att.report != inst && theirs.iter().any(|c| mine.contains(c)) && !roots.contains(&att.root.as_slice()) {
                roots.push(&att.root);
                out.push(att.report);
            }
        }
        out
    }

    fn value_names(&self, inst: InstanceId) -> &[Symbol] {
        &self.classes[self.instances[inst.0].class.0].values
    }

    /// Probability that two reports trace back to the same named source:
    /// both sources take the same value, other than `ind`.
    pub fn shared_source_probability(&self, rival: InstanceId, report: InstanceId) -> Result<f64, ModelError> {
        let r1 = &self.instances[rival.0].term;
        let r2 = &self.instances[report.0].term;
        let lookup = |r: &Term| {
            let source = source_of(r);
            self.instance(&source)
                .filter(|s| s.marginal.is_some())
                .map(|s| (s.class, s.value_nodes.clone()))
                .ok_or_else(|| ModelError::MissingSourceMarginal {
                    report: r2.clone(),
                    rival: r1.clone(),
                    source_var: source.clone(),
                })
        };
        let (c1, nodes1) = lookup(r1)?;
        let (c2, nodes2) = lookup(r2)?;
        let independent = Symbol::new("ind");
        let mut pairs = Vec::new();
        for (i, g) in self.classes[c1.0].values.iter().enumerate() {
            if *g == independent {
                continue;
            }
            if let Some(j) = self.classes[c2.0].value_index(g) {
                pairs.push((nodes1[i], nodes2[j]));
            }
        }
        let flat: Vec<_> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let post = self.net.posteriors(&flat)?;
        Ok(post.chunks(2).map(|p| p[0] * p[1]).sum())
    }

    fn install_monitor(
        &mut self,
        trigger: Term,
        rival: InstanceId,
        report: InstanceId,
        structure: usize,
    ) -> Result<(), ModelError> {
        let key = same_pair(&self.instances[rival.0].term, &self.instances[report.0].term);
        if self.monitor_for(&key).is_some() {
            return Err(ModelError::DuplicateMonitor(trigger));
        }
        self.structure.monitors.push(Monitor { trigger: trigger.clone(), rival, report, structure, fired: false });
        self.events.push(StructureEvent::Monitoring(trigger));
        Ok(())
    }

    fn monitor_for(&self, key: &(Term, Term)) -> Option<usize> {
        self.structure
            .monitors
            .iter()
            .position(|m| same_pair(&self.instances[m.rival.0].term, &self.instances[m.report.0].term) == *key)
    }

    pub(crate) fn is_structural_fact(&self, fact: &Term) -> bool {
        matches!(fact.as_list(), Some([Term::Sym(h), Term::Sym(e), _, _])
            if *h == Symbol::new("Same") && *e == Symbol::new("evidence-for"))
    }

    pub(crate) fn assert_structural_fact(&mut self, fact: Term) -> Result<(), ModelError> {
        let [_, _, a, b] = fact.as_list().unwrap() else { unreachable!() };
        for r in [a, b] {
            if self.instance(r).is_none() || !self.is_report(r) {
                return Err(ModelError::UnknownProposition(fact.clone()));
            }
        }
        if a == b {
            return Ok(());
        }
        let key = same_pair(a, b);
        if self.structure.knows_same(&key) {
            return Ok(());
        }
        if let Some(m) = self.monitor_for(&key) {
            self.structure.same_facts.push(key);
            if !self.structure.monitors[m].fired {
                self.fire_monitor(m)?;
            }
            return Ok(());
        }
        let (ia, ib) = (self.instance_id(a).unwrap(), self.instance_id(b).unwrap());
        // both wired independently without a monitor: the source model gave
        // them no chance of a common source
        if let (Some(x), Some(y)) = (self.structure.attachment(ia), self.structure.attachment(ib)) {
            let rivals = self.instances[ia.0].consequents.iter().any(|c| self.instances[ib.0].consequents.contains(c));
            if rivals && x.root != y.root {
                return Err(ModelError::SourcesCannotCoincide(fact));
            }
        }
        self.structure.same_facts.push(key);
        Ok(())
    }

    /// Runs a monitor's restructuring: retracts its structure assumption if
    /// still live and lets the rival's evidence support the report.
    pub fn fire_monitor(&mut self, index: usize) -> Result<(), ModelError> {
        let m = self.structure.monitors[index].clone();
        if m.fired {
            return Err(ModelError::MonitorFired(m.trigger));
        }
        let sa = self.structure.assumptions[m.structure].clone();
        if !self.net.is_retracted(sa.assumption) {
            self.events.push(StructureEvent::Retracting(sa.statement.clone()));
            self.net.retract_assumption(sa.assumption)?;
        }
        let root = self.structure.attachment(m.rival).unwrap().root.clone();
        self.wire_evidence(m.report, &root, None)?;
        let att = self.structure.attachments.iter_mut().find(|a| a.report == m.report).unwrap();
        att.root = root;
        for other in &mut self.structure.monitors {
            if other.structure == m.structure {
                other.fired = true;
            }
        }
        Ok(())
    }

    /// `(Retract a_2)` or `(Retract (Independent evidence-for r1 r2))`.
    pub fn retract(&mut self, target: &Term) -> Result<(), ModelError> {
        let by_statement = self.structure.assumptions.iter().find(|s| s.statement == *target);
        let id = match (by_statement, target) {
            (Some(s), _) => s.assumption,
            (None, Term::Sym(name)) => self
                .net
                .atms()
                .find_assumption(name.as_str())
                .ok_or_else(|| ModelError::UnknownAssumption(target.clone()))?,
            _ => return Err(ModelError::UnknownAssumption(target.clone())),
        };
        if self.net.is_retracted(id) {
            return Ok(());
        }
        self.net.retract_assumption(id)?;
        if let Some(s) = self.structure.assumptions.iter().find(|s| s.assumption == id) {
            self.events.push(StructureEvent::Retracting(s.statement.clone()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarginalWeights, RuleSpec};

    fn t(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    fn syms(vs: &[&str]) -> Vec<Symbol> {
        vs.iter().map(|v| Symbol::new(v)).collect()
    }

    fn chernobyl_base() -> Model {
        let mut m = Model::new();
        m.declare_variable(t("1000s-dead"), syms(&["true", "false"])).unwrap();
        for class in ["Radio", "News"] {
            let pattern = t(&format!("({class} ?n)"));
            m.declare_variable(pattern.clone(), syms(&["true", "false"])).unwrap();
            let rule =
                RuleSpec { parent: t(&format!("(({class} ?n) true)")), entries: vec![(t("(1000s-dead true)"), 1.0)] };
            m.declare_relation(pattern, t("1000s-dead"), vec![rule]).unwrap();
            m.declare_variable(t(&format!("(source ({class} ?n))")), syms(&["upi", "ap", "ind"])).unwrap();
        }
        m
    }

    fn report(m: &mut Model, r: &str, credibility: [f64; 2], source: [f64; 3]) {
        m.instantiate(t(r)).unwrap();
        m.instantiate(t(&format!("(source {r})"))).unwrap();
        m.declare_marginal(t(&format!("(source {r})")), MarginalWeights::Positional(source.to_vec())).unwrap();
        m.declare_marginal(t(r), MarginalWeights::Positional(credibility.to_vec())).unwrap();
    }

    fn dead(m: &Model) -> f64 {
        m.query_probability(&t("(1000s-dead true)")).unwrap()
    }

    #[test]
    fn independent_then_shared() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        assert!(m.drain_events().is_empty());
        assert!((dead(&m) - 0.7).abs() < 1e-12);
        report(&mut m, "(news 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        let lines: Vec<String> = m.drain_events().iter().map(|e| e.to_string()).collect();
        assert_eq!(
            lines,
            vec![
                "** Assuming (Independent evidence-for (radio 1) (news 1)) ***",
                "** Monitoring (Same evidence-for (radio 1) (news 1)) ***",
            ]
        );
        assert!((dead(&m) - 0.91).abs() < 1e-12);
        let a2 = m.network().atms().find_assumption("a_2").unwrap();
        assert_eq!(m.network().atms().assumption(a2).unwrap().kind, AssumptionKind::Structure);

        m.assert_fact(t("(Same evidence-for (radio 1) (news 1))")).unwrap();
        let lines: Vec<String> = m.drain_events().iter().map(|e| e.to_string()).collect();
        assert_eq!(lines, vec!["** Retracting (Independent evidence-for (radio 1) (news 1)) ***"]);
        assert!((dead(&m) - 0.7).abs() < 1e-12);
        assert!(m.network().is_retracted(a2));

        // asserting the fact again, in either order, changes nothing
        m.assert_fact(t("(Same evidence-for (news 1) (radio 1))")).unwrap();
        assert!(m.drain_events().is_empty());
        assert!(matches!(m.fire_monitor(0), Err(ModelError::MonitorFired(_))));
    }

    #[test]
    fn shared_source_probability_matches_enumeration() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        m.instantiate(t("(news 1)")).unwrap();
        m.instantiate(t("(source (news 1))")).unwrap();
        m.declare_marginal(t("(source (news 1))"), MarginalWeights::Positional(vec![0.33, 0.33, 0.34])).unwrap();
        let r = m.instance_id(&t("(radio 1)")).unwrap();
        let n = m.instance_id(&t("(news 1)")).unwrap();
        let p = m.shared_source_probability(r, n).unwrap();
        let w = [0.33, 0.33, 0.34];
        let mut expected = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j && i != 2 {
                    expected += w[i] * w[j];
                }
            }
        }
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.2178).abs() < 1e-12);
    }

    #[test]
    fn certain_common_source_is_shared_at_once() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [1.0, 0.0, 0.0]);
        report(&mut m, "(news 1)", [0.7, 0.3], [1.0, 0.0, 0.0]);
        assert!(m.drain_events().is_empty());
        assert!((dead(&m) - 0.7).abs() < 1e-12);
        assert!(m.structure().assumptions.is_empty());
    }

    #[test]
    fn distinct_sources_install_no_monitor() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.0, 0.0, 1.0]);
        report(&mut m, "(news 1)", [0.7, 0.3], [0.5, 0.5, 0.0]);
        let events = m.drain_events();
        assert_eq!(events.len(), 1);
        assert!(matches!(events[0], StructureEvent::Assuming(_)));
        assert!(matches!(
            m.assert_fact(t("(Same evidence-for (radio 1) (news 1))")),
            Err(ModelError::SourcesCannotCoincide(_))
        ));
    }

    #[test]
    fn missing_source_marginal_is_refused() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        m.instantiate(t("(news 1)")).unwrap();
        let err = m.declare_marginal(t("(news 1)"), MarginalWeights::Positional(vec![0.7, 0.3])).unwrap_err();
        assert!(matches!(err, ModelError::MissingSourceMarginal { .. }));
    }

    #[test]
    fn same_fact_before_second_report_forces_sharing() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        m.instantiate(t("(news 1)")).unwrap();
        m.assert_fact(t("(Same evidence-for (news 1) (radio 1))")).unwrap();
        m.declare_marginal(t("(news 1)"), MarginalWeights::Positional(vec![0.7, 0.3])).unwrap();
        assert!(m.drain_events().is_empty());
        assert!((dead(&m) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn three_independent_reports() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        report(&mut m, "(news 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        report(&mut m, "(radio 2)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        assert!((dead(&m) - (1.0 - 0.3f64.powi(3))).abs() < 1e-12);
        let lines: Vec<String> = m.drain_events().iter().map(|e| e.to_string()).collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "** Assuming (Independent evidence-for (radio 1) (radio 2)) ***");
        assert!(m.network().atms().find_assumption("a_3").is_some());
    }

    #[test]
    fn manual_retraction_drops_conditioned_evidence() {
        let mut m = chernobyl_base();
        report(&mut m, "(radio 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        report(&mut m, "(news 1)", [0.7, 0.3], [0.33, 0.33, 0.34]);
        m.drain_events();
        m.retract(&t("(Independent evidence-for (radio 1) (news 1))")).unwrap();
        assert_eq!(m.drain_events().len(), 1);
        assert!((dead(&m) - 0.7).abs() < 1e-12);
        m.retract(&t("a_2")).unwrap();
        assert!(m.drain_events().is_empty());
        assert!(m.retract(&t("a_radio-1_true")).is_err());
        assert!(matches!(m.retract(&t("a_99")), Err(ModelError::UnknownAssumption(_))));
    }
}
