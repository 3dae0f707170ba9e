//! One engine, one command at a time, with a transcript of everything said.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atms::{AssumptionKind, Environment, NodeId};
use crate::command::{parse_command, parse_form, Command, Fact};
use crate::model::{Model, ModelError, StructureEvent};
use crate::oracle::{oracle_probability, ModelSnapshot, OracleError};
use crate::term::{read_forms, ParseError, Term};

/// Decimal places shown for probabilities unless `HUM_PRECISION` says
/// otherwise.
pub const DEFAULT_PRECISION: usize = 2;

/// Largest engine/oracle disagreement tolerated by `--verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub precision: usize,
    /// Cross-check every query against the brute-force oracle.
    pub verify: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { precision: DEFAULT_PRECISION, verify: false }
    }
}

impl SessionConfig {
    /// Defaults, with the precision taken from `HUM_PRECISION` when set.
    pub fn from_env() -> Self {
        let precision =
            std::env::var("HUM_PRECISION").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_PRECISION);
        SessionConfig { precision, ..Default::default() }
    }
}

/// Rounds to `precision` places and drops trailing zeros: 0.5, 0.33, 1.
pub fn format_probability(value: f64, precision: usize) -> String {
    let s = format!("{:.*}", precision, value);
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    LabelChanged { node: String, label: Vec<Vec<String>> },
    NogoodAdded { nogood: Vec<String> },
    Assuming { term: String },
    Monitoring { term: String },
    Retracting { term: String },
}

impl From<&StructureEvent> for Event {
    fn from(e: &StructureEvent) -> Self {
        match e {
            StructureEvent::Assuming(t) => Event::Assuming { term: t.to_string() },
            StructureEvent::Monitoring(t) => Event::Monitoring { term: t.to_string() },
            StructureEvent::Retracting(t) => Event::Retracting { term: t.to_string() },
        }
    }
}

/// What one command produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub value: Option<f64>,
    pub display: Option<String>,
    pub lines: Vec<String>,
    pub events: Vec<Event>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("verification failed for {term}: engine {engine}, oracle {oracle}")]
    VerifyMismatch { term: Term, engine: f64, oracle: f64 },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl SessionError {
    /// Line and column for parse errors.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            SessionError::Parse(e) => Some((e.line, e.column)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub input: String,
    pub prompt: bool,
    pub lines: Vec<String>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    /// Inputs echoed in order, queries prefixed with `>`, each followed by
    /// its output lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}{}", if e.prompt { ">" } else { "" }, e.input);
            for line in &e.lines {
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }

    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.input.as_str())
    }
}

type LabelView = Vec<Vec<String>>;

#[derive(Debug, Clone, Default)]
pub struct Session {
    model: Model,
    config: SessionConfig,
    transcript: Transcript,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Session { model: Model::new(), config, transcript: Transcript::default() }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Parses and runs one command. On error the engine is left exactly as
    /// it was and nothing is added to the transcript.
    pub fn execute(&mut self, text: &str) -> Result<Outcome, SessionError> {
        let cmd = parse_command(text)?;
        self.execute_parsed(text.trim(), &cmd)
    }

    pub fn execute_parsed(&mut self, input: &str, cmd: &Command) -> Result<Outcome, SessionError> {
        let before_labels = self.label_views();
        let before_nogoods = self.nogood_views();
        let saved = self.model.clone();
        let result = self.apply(cmd);
        let structure: Vec<StructureEvent> = self.model.drain_events();
        let mut outcome = match result {
            Ok(o) => o,
            Err(e) => {
                self.model = saved;
                return Err(e);
            }
        };
        let mut events: Vec<Event> = structure.iter().map(Event::from).collect();
        let mut lines: Vec<String> = structure.iter().map(|e| e.to_string()).collect();
        lines.append(&mut outcome.lines);
        let after_nogoods = self.nogood_views();
        for ng in after_nogoods {
            if !before_nogoods.contains(&ng) {
                events.push(Event::NogoodAdded { nogood: ng });
            }
        }
        for (node, label) in self.label_views() {
            if before_labels.get(&node) != Some(&label) {
                events.push(Event::LabelChanged { node: self.node_text(node), label });
            }
        }
        outcome.lines = lines;
        outcome.events = events;
        self.transcript.entries.push(TranscriptEntry {
            input: input.to_string(),
            prompt: outcome.value.is_some(),
            lines: outcome.lines.clone(),
            events: outcome.events.clone(),
        });
        Ok(outcome)
    }

    fn apply(&mut self, cmd: &Command) -> Result<Outcome, SessionError> {
        let m = &mut self.model;
        match cmd {
            Command::Variable { pattern, values } => {
                m.declare_variable(pattern.clone(), values.clone())?;
            }
            Command::Relation { parent, child, rules } => {
                m.declare_relation(parent.clone(), child.clone(), rules.clone())?;
            }
            Command::Marginal { target, weights } | Command::Defactq(Fact::Marginal { target, weights }) => {
                m.declare_marginal(target.clone(), weights.clone())?;
            }
            Command::Instance(t) => {
                m.instantiate(t.clone())?;
            }
            Command::Defactq(Fact::Proposition(t)) => m.assert_fact(t.clone())?,
            Command::Retract(t) => m.retract(t)?,
            Command::ProbabilityOf(t) => {
                let value = m.query_probability(t)?;
                if self.config.verify {
                    let node = m.node_for(t)?;
                    let oracle = oracle_probability(node, &ModelSnapshot::capture(m.network()))?;
                    if (oracle - value).abs() > VERIFY_TOLERANCE {
                        return Err(SessionError::VerifyMismatch { term: t.clone(), engine: value, oracle });
                    }
                }
                let display = format_probability(value, self.config.precision);
                return Ok(Outcome {
                    value: Some(value),
                    display: Some(display.clone()),
                    lines: vec![display],
                    events: Vec::new(),
                });
            }
            Command::ShowLabel(t) => {
                let node = m.node_for(t)?;
                let atms = m.network().atms();
                let label = atms.label_of(node).map_err(ModelError::from)?;
                return Ok(Outcome { lines: vec![atms.format_label(label)], ..Default::default() });
            }
            Command::ShowNogoods => {
                let atms = m.network().atms();
                let lines = atms.nogoods().environments().iter().map(|e| atms.format_env(e)).collect();
                return Ok(Outcome { lines, ..Default::default() });
            }
            Command::Reset => *m = Model::new(),
        }
        Ok(Outcome::default())
    }

    fn env_names(&self, env: &Environment) -> Vec<String> {
        let atms = self.model.network().atms();
        env.ids().iter().map(|&a| atms.assumption(a).map(|x| x.name.clone()).unwrap_or_default()).collect()
    }

    fn label_views(&self) -> BTreeMap<NodeId, LabelView> {
        let atms = self.model.network().atms();
        atms.nodes()
            .filter(|(_, n)| n.assumption.is_none())
            .map(|(id, n)| (id, n.label.environments().iter().map(|e| self.env_names(e)).collect()))
            .collect()
    }

    fn nogood_views(&self) -> Vec<Vec<String>> {
        let atms = self.model.network().atms();
        atms.nogoods().environments().iter().map(|e| self.env_names(e)).collect()
    }

    fn node_text(&self, node: NodeId) -> String {
        self.model.network().atms().node(node).map(|n| n.term.to_string()).unwrap_or_default()
    }

    /// Whether any structure assumption has been made.
    pub fn has_structure(&self) -> bool {
        self.model.network().atms().assumptions().any(|(_, a)| a.kind == AssumptionKind::Structure)
    }
}

/// Result of running a whole script.
#[derive(Debug)]
pub struct ScriptRun {
    pub transcript: Transcript,
    /// Failed commands: source line and error.
    pub errors: Vec<(usize, SessionError)>,
}

impl ScriptRun {
    pub fn succeeded(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Runs the commands of `src` in a fresh session. Without `keep_going` the
/// run stops at the first failing command.
pub fn run_source(src: &str, config: SessionConfig, keep_going: bool) -> Result<ScriptRun, SessionError> {
    let forms = read_forms(src)?;
    let mut session = Session::new(config);
    let mut errors = Vec::new();
    for form in &forms {
        let result =
            parse_form(form).map_err(SessionError::from).and_then(|cmd| session.execute_parsed(&form.text, &cmd));
        if let Err(e) = result {
            errors.push((form.line, e));
            if !keep_going {
                break;
            }
        }
    }
    Ok(ScriptRun { transcript: session.transcript, errors })
}

pub fn run_script(path: impl AsRef<Path>, config: SessionConfig, keep_going: bool) -> Result<ScriptRun, SessionError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)
        .map_err(|source| SessionError::Io { path: path.display().to_string(), source })?;
    run_source(&src, config, keep_going)
}

#[cfg(test)]
mod tests {
    use super::*;

    const URNS: &str = "
(Variable Urn H1 H2 H3)
(Variable (Draw ?n) white black)
(Relation Urn (Draw ?n)
  (-> (Urn H1) (((Draw ?n) white) .5) (((Draw ?n) black) .5))
  (-> (Urn H2) (((Draw ?n) white) 1.0))
  (-> (Urn H3) (((Draw ?n) white) 0.0)))
(Marginal Urn (Urn H1) .33 (Urn H2) .33 (Urn H3) .33)
>(Probability-of (Urn H2))
(Instance (draw 1))
>(Probability-of ((draw 1) white))
(Defactq ((draw 1) white))
>(Probability-of (Urn H2))
(Instance (draw 2))
(Defactq ((draw 2) white))
>(Probability-of (Urn H2))
";

    #[test]
    fn display_rounding() {
        assert_eq!(format_probability(1.0 / 3.0, 2), "0.33");
        assert_eq!(format_probability(0.5, 2), "0.5");
        assert_eq!(format_probability(2.0 / 3.0, 2), "0.67");
        assert_eq!(format_probability(1.0, 2), "1");
        assert_eq!(format_probability(0.0, 2), "0");
        assert_eq!(format_probability(0.91, 4), "0.91");
        assert_eq!(format_probability(0.4, 0), "0");
    }

    #[test]
    fn urn_script_values() {
        let run = run_source(URNS, SessionConfig { verify: true, ..Default::default() }, false).unwrap();
        assert!(run.succeeded(), "{:?}", run.errors);
        let values: Vec<&str> =
            run.transcript.entries.iter().filter(|e| e.prompt).map(|e| e.lines[0].as_str()).collect();
        assert_eq!(values, vec!["0.33", "0.5", "0.67", "0.8"]);
    }

    #[test]
    fn failed_command_changes_nothing() {
        let mut s = Session::default();
        s.execute("(Variable Urn H1 H2 H3)").unwrap();
        s.execute("(Marginal Urn .2 .3 .5)").unwrap();
        let before = s.model().network().atms().dump();
        assert!(s.execute("(Marginal Urn .2 .3 .5)").is_err());
        assert!(s.execute("(Instance (draw 1))").is_err());
        assert!(s.execute("(Frob)").is_err());
        assert_eq!(s.model().network().atms().dump(), before);
        assert_eq!(s.transcript().entries.len(), 2);
    }

    #[test]
    fn events_report_changes() {
        let mut s = Session::default();
        s.execute("(Variable Urn H1 H2)").unwrap();
        let out = s.execute("(Marginal Urn .5 .5)").unwrap();
        assert!(out
            .events
            .contains(&Event::LabelChanged { node: "(Urn H1)".into(), label: vec![vec!["a_H1".into()]] }));
        assert!(out.events.contains(&Event::NogoodAdded { nogood: vec!["a_H1".into(), "a_H2".into()] }));
        let out = s.execute("(Probability-of (Urn H1))").unwrap();
        assert!(out.events.is_empty());
        assert_eq!(out.value, Some(0.5));
    }

    #[test]
    fn replay_reproduces_transcript() {
        let run = run_source(URNS, SessionConfig::default(), false).unwrap();
        let mut again = Session::default();
        for input in run.transcript.inputs() {
            again.execute(input).unwrap();
        }
        assert_eq!(again.transcript().render(), run.transcript.render());
        assert!(run.transcript.render().contains(">(Probability-of (Urn H2))\n0.8\n"));
    }

    #[test]
    fn keep_going_collects_errors() {
        let src = "(Variable x a b)\n(Instance y)\n(Marginal x .5 .5)\n>(Probability-of (x a))";
        let stop = run_source(src, SessionConfig::default(), false).unwrap();
        assert_eq!(stop.errors.len(), 1);
        assert_eq!(stop.errors[0].0, 2);
        assert_eq!(stop.transcript.entries.len(), 1);
        let go = run_source(src, SessionConfig::default(), true).unwrap();
        assert_eq!(go.errors.len(), 1);
        assert_eq!(go.transcript.entries.len(), 3);
    }

    #[test]
    fn show_commands() {
        let mut s = Session::default();
        s.execute("(Variable Urn H1 H2)").unwrap();
        s.execute("(Marginal Urn .5 .5)").unwrap();
        assert_eq!(s.execute("(Show-label (Urn H2))").unwrap().lines, vec!["[{a_H2}]"]);
        assert_eq!(s.execute("(Show-nogoods)").unwrap().lines, vec!["{a_H1, a_H2}"]);
        s.execute("(Reset)").unwrap();
        assert!(s.execute("(Probability-of (Urn H2))").is_err());
    }
}
