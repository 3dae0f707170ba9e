//! Random model scripts shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hum_core::oracle::{oracle_posteriors, ModelSnapshot, OracleError};
use hum_core::{ProbabilityError, Session};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One command of a generated script and the steps it depends on.
#[derive(Debug, Clone)]
pub struct Step {
    pub text: String,
    pub after: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Script {
    pub steps: Vec<Step>,
}

impl Script {
    pub fn texts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.text.as_str()).collect()
    }

    /// A random order of the steps that keeps every dependency first.
    pub fn reordered(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.steps.len();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let ready: Vec<usize> =
                (0..n).filter(|&i| !done[i] && self.steps[i].after.iter().all(|&d| done[d])).collect();
            let pick = *ready.choose(rng).unwrap();
            done[pick] = true;
            order.push(pick);
        }
        order
    }

    pub fn listing(&self) -> String {
        self.texts().join("\n")
    }
}

struct Class {
    pattern: String,
    /// `None` for a ground class, else the instance arguments.
    instances: Option<Vec<u32>>,
    values: usize,
    decl: usize,
    /// Step that created each instance, aligned with `instance_terms`.
    instance_steps: Vec<usize>,
}

impl Class {
    fn instance_terms(&self, index: usize) -> Vec<String> {
        match &self.instances {
            None => vec![format!("V{index}")],
            Some(ns) => ns.iter().map(|n| format!("(C{index} {n})")).collect(),
        }
    }
}

fn value(v: usize) -> String {
    format!("x{v}")
}

fn weights(rng: &mut ChaCha8Rng, n: usize, allow_zero: bool) -> Vec<f64> {
    loop {
        let ws: Vec<f64> = (0..n)
            .map(|_| if allow_zero && rng.gen_bool(0.2) { 0.0 } else { (rng.gen_range(1..=20) as f64) / 20.0 })
            .collect();
        if ws.iter().sum::<f64>() > 0.0 {
            return ws;
        }
    }
}

fn push(steps: &mut Vec<Step>, text: String, after: Vec<usize>) -> usize {
    steps.push(Step { text, after });
    steps.len() - 1
}

/// A random model: at most 4 classes of at most 3 values, at most 3
/// instances per parameterized class, random relations between them,
/// marginals on every root, and a random set of observations.
pub fn random_script(rng: &mut ChaCha8Rng) -> Script {
    let mut steps: Vec<Step> = Vec::new();
    let n_classes = rng.gen_range(1..=4);
    let mut classes = Vec::new();
    for i in 0..n_classes {
        let values = rng.gen_range(2..=3);
        let ground = rng.gen_bool(0.4);
        let pattern = if ground { format!("V{i}") } else { format!("(C{i} ?n)") };
        let names: Vec<String> = (0..values).map(value).collect();
        let decl = push(&mut steps, format!("(Variable {pattern} {})", names.join(" ")), vec![]);
        let instances = if ground {
            None
        } else {
            let count = rng.gen_range(1..=3);
            Some((1..=count).collect())
        };
        classes.push(Class { pattern, instances, values, decl, instance_steps: Vec::new() });
    }
    for (idx, c) in classes.iter_mut().enumerate() {
        match &c.instances {
            None => c.instance_steps = vec![c.decl],
            Some(ns) => {
                for n in ns.clone() {
                    let s = push(&mut steps, format!("(Instance (C{idx} {n}))"), vec![c.decl]);
                    c.instance_steps.push(s);
                }
            }
        }
    }
    let mut has_parent = vec![false; n_classes];
    for j in 1..n_classes {
        let mut parents: Vec<usize> = (0..j).filter(|_| rng.gen_bool(0.5)).collect();
        parents.truncate(2);
        for i in parents {
            has_parent[j] = true;
            let (p, c) = (&classes[i], &classes[j]);
            let child_pattern = match (&p.instances, &c.instances) {
                (Some(_), Some(_)) if rng.gen_bool(0.5) => format!("(C{j} ?m)"),
                _ => c.pattern.clone(),
            };
            let mut rules = Vec::new();
            for pv in 0..p.values {
                if rng.gen_bool(0.15) {
                    continue;
                }
                let dist: Vec<f64> = if rng.gen_bool(0.3) {
                    let mut d = vec![0.0; c.values];
                    d[rng.gen_range(0..c.values)] = 1.0;
                    d
                } else {
                    let w = weights(rng, c.values, true);
                    let total: f64 = w.iter().sum();
                    w.iter().map(|x| x / total).collect()
                };
                let omit = if rng.gen_bool(0.3) { Some(rng.gen_range(0..c.values)) } else { None };
                let entries: Vec<String> = dist
                    .iter()
                    .enumerate()
                    .filter(|(cv, _)| Some(*cv) != omit)
                    .map(|(cv, q)| format!("(({child_pattern} {}) {q})", value(cv)))
                    .collect();
                rules.push(format!("(-> ({} {}) {})", p.pattern, value(pv), entries.join(" ")));
            }
            push(
                &mut steps,
                format!("(Relation {} {child_pattern} {})", p.pattern, rules.join(" ")),
                vec![p.decl, c.decl],
            );
        }
    }
    for (i, c) in classes.iter().enumerate() {
        if has_parent[i] && !rng.gen_bool(0.3) {
            continue;
        }
        let class_wide = c.instances.is_some() && rng.gen_bool(0.3);
        if class_wide {
            let w = weights(rng, c.values, true);
            let ws: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            push(&mut steps, format!("(Marginal (C{i} ?k) {})", ws.join(" ")), vec![c.decl]);
            continue;
        }
        for (term, &step) in c.instance_terms(i).iter().zip(&c.instance_steps) {
            let w = weights(rng, c.values, true);
            let ws: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            let text = if rng.gen_bool(0.5) {
                format!("(Marginal {term} ({}))", ws.join(" "))
            } else {
                let pairs: Vec<String> =
                    w.iter().enumerate().map(|(v, x)| format!("({term} {}) {x}", value(v))).collect();
                format!("(Defactq (Marginal {term} {}))", pairs.join(" "))
            };
            push(&mut steps, text, vec![step]);
        }
    }
    for (i, c) in classes.iter().enumerate() {
        for (term, &step) in c.instance_terms(i).iter().zip(&c.instance_steps) {
            if rng.gen_bool(0.25) {
                let v = rng.gen_range(0..c.values);
                push(&mut steps, format!("(Defactq ({term} {}))", value(v)), vec![step]);
            }
        }
    }
    Script { steps }
}

/// Runs `order` (indices into the script) in a fresh session, checking the
/// label invariants after every command.
pub fn run(script: &Script, order: &[usize]) -> Session {
    let mut s = Session::default();
    for &i in order {
        let text = &script.steps[i].text;
        if let Err(e) = s.execute(text) {
            panic!("{text}: {e}\n--- script ---\n{}", script.listing());
        }
        if let Err(e) = s.model().network().atms().check_invariants() {
            panic!("after {text}: {e}\n--- script ---\n{}", script.listing());
        }
    }
    s
}

pub fn in_order(script: &Script) -> Vec<usize> {
    (0..script.steps.len()).collect()
}

/// Posterior of every node, keyed by its printed term.
pub fn engine_posteriors(s: &Session) -> Result<BTreeMap<String, f64>, ProbabilityError> {
    let atms = s.model().network().atms();
    let ids: Vec<_> = atms.nodes().map(|(id, _)| id).collect();
    let post = s.model().network().posteriors(&ids)?;
    Ok(ids.iter().zip(post).map(|(&id, p)| (atms.node(id).unwrap().term.to_string(), p)).collect())
}

pub fn oracle_by_term(s: &Session) -> Result<BTreeMap<String, f64>, OracleError> {
    let atms = s.model().network().atms();
    let post = oracle_posteriors(&ModelSnapshot::capture(s.model().network()))?;
    Ok(atms.nodes().map(|(id, n)| (n.term.to_string(), post[id.index()])).collect())
}

/// Every label as sorted lists of assumption names, keyed by node term.
pub fn label_names(atms: &hum_core::Atms) -> BTreeMap<String, Vec<Vec<String>>> {
    atms.nodes()
        .map(|(_, n)| {
            let mut envs: Vec<Vec<String>> = n
                .label
                .environments()
                .iter()
                .map(|e| {
                    let mut names: Vec<String> =
                        e.ids().iter().map(|&a| atms.assumption(a).unwrap().name.clone()).collect();
                    names.sort();
                    names
                })
                .collect();
            envs.sort();
            (n.term.to_string(), envs)
        })
        .collect()
}

pub fn max_gap(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "node sets differ");
    a.iter()
        .map(|(k, x)| {
            let y = b.get(k).unwrap_or_else(|| panic!("{k} missing"));
            (x - y).abs()
        })
        .fold(0.0, f64::max)
}

pub fn world_count(s: &Session) -> u128 {
    ModelSnapshot::capture(s.model().network()).world_count()
}

/// Display names can depend on declaration order when two of them collide;
/// this key names an assumption by its choose set tag and position instead.
pub fn assumption_key(net: &hum_core::Network, a: hum_core::AssumptionId) -> String {
    match net.owner_of(a) {
        Some(cs) => {
            let set = &net.choose_sets()[cs.0 as usize];
            let pos = set.members.iter().position(|(m, _)| *m == a).unwrap();
            format!("{}#{pos}", set.tag)
        }
        None => net.atms().assumption(a).unwrap().name.clone(),
    }
}

/// Every label in canonical keys, keyed by node term. Assumption nodes are
/// keyed by their canonical assumption key too.
pub fn label_keys(net: &hum_core::Network, atms: &hum_core::Atms) -> BTreeMap<String, Vec<Vec<String>>> {
    atms.nodes()
        .map(|(_, n)| {
            let mut envs: Vec<Vec<String>> = n
                .label
                .environments()
                .iter()
                .map(|e| {
                    let mut keys: Vec<String> = e.ids().iter().map(|&a| assumption_key(net, a)).collect();
                    keys.sort();
                    keys
                })
                .collect();
            envs.sort();
            let node = match n.assumption {
                Some(a) => assumption_key(net, a),
                None => n.term.to_string(),
            };
            (node, envs)
        })
        .collect()
}

/// Posteriors keyed like [`label_keys`].
pub fn keyed_posteriors(s: &Session) -> Result<BTreeMap<String, f64>, ProbabilityError> {
    let net = s.model().network();
    let atms = net.atms();
    let ids: Vec<_> = atms.nodes().map(|(id, _)| id).collect();
    let post = net.posteriors(&ids)?;
    Ok(ids
        .iter()
        .zip(post)
        .map(|(&id, p)| {
            let n = atms.node(id).unwrap();
            let key = match n.assumption {
                Some(a) => assumption_key(net, a),
                None => n.term.to_string(),
            };
            (key, p)
        })
        .collect())
}
