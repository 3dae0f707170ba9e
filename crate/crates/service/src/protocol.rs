//! JSON payloads exchanged with clients.

use hum_core::atms::AssumptionKind;
use hum_core::{Event, Outcome, Session};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandResponse {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub display: Option<String>,
    pub output_lines: Vec<String>,
    pub events: Vec<Event>,
}

impl From<Outcome> for CommandResponse {
    fn from(o: Outcome) -> Self {
        CommandResponse { ok: true, value: o.value, display: o.display, output_lines: o.lines, events: o.events }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub ok: bool,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub position: Option<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub term: String,
    pub label: Vec<Vec<String>>,
    pub is_premise: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionView {
    pub name: String,
    pub kind: AssumptionKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weight: Option<f64>,
    pub retracted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChooseMember {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChooseSetView {
    pub tag: String,
    pub members: Vec<ChooseMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationView {
    pub antecedents: Vec<String>,
    pub consequent: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub nodes: Vec<NodeView>,
    pub assumptions: Vec<AssumptionView>,
    pub choose_sets: Vec<ChooseSetView>,
    pub nogoods: Vec<Vec<String>>,
    pub justifications: Vec<JustificationView>,
}

impl NetworkSnapshot {
    /// Everything a client needs to draw the network. Assumption nodes are
    /// listed under `assumptions`, not `nodes`. Probabilities are omitted
    /// when the evidence is contradictory.
    pub fn capture(session: &Session) -> Self {
        let net = session.model().network();
        let atms = net.atms();
        let names = |env: &hum_core::Environment| -> Vec<String> {
            env.ids().iter().map(|&a| atms.assumption(a).map(|x| x.name.clone()).unwrap_or_default()).collect()
        };
        let shown: Vec<_> = atms.nodes().filter(|(_, n)| n.assumption.is_none()).collect();
        let ids: Vec<_> = shown.iter().map(|(id, _)| *id).collect();
        let probabilities = net.posteriors(&ids).ok();
        let nodes = shown
            .iter()
            .enumerate()
            .map(|(i, (_, n))| NodeView {
                term: n.term.to_string(),
                label: n.label.environments().iter().map(names).collect(),
                is_premise: n.is_premise,
                probability: probabilities.as_ref().map(|p| p[i]),
            })
            .collect();
        let assumptions = atms
            .assumptions()
            .map(|(id, a)| AssumptionView {
                name: a.name.clone(),
                kind: a.kind,
                weight: a.weight,
                retracted: net.is_retracted(id),
            })
            .collect();
        let choose_sets = net
            .choose_sets()
            .iter()
            .map(|c| ChooseSetView {
                tag: c.tag.to_string(),
                members: c
                    .members
                    .iter()
                    .map(|&(a, w)| ChooseMember {
                        name: atms.assumption(a).map(|x| x.name.clone()).unwrap_or_default(),
                        weight: w,
                    })
                    .collect(),
            })
            .collect();
        let term_of = |n: hum_core::NodeId| atms.node(n).map(|x| x.term.to_string()).unwrap_or_default();
        let justifications = atms
            .justifications()
            .iter()
            .map(|j| JustificationView {
                antecedents: j.antecedents.iter().map(|&a| term_of(a)).collect(),
                consequent: term_of(j.consequent),
            })
            .collect();
        NetworkSnapshot {
            nodes,
            assumptions,
            choose_sets,
            nogoods: atms.nogoods().environments().iter().map(names).collect(),
            justifications,
        }
    }
}
