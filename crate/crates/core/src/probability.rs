//! Probabilistic reading of an ATMS.
//!
//! A choose set marks a group of distribution assumptions as the elements of
//! one probability distribution: exactly one member holds in any world.
//! Structure assumptions are weightless and hold in every world until they
//! are retracted. The probability of a node is the weight of the worlds in
//! which its label holds, renormalised over the worlds that no nogood rules
//! out.
//!
//! Labels are evaluated exactly by Shannon expansion over choose sets rather
//! than by enumerating worlds. A label and the nogood database are both DNFs
//! over choose-set members; the evaluator computes `W(label ∧ ¬nogoods)` by
//!
//! * dropping cubes that pick two members of one choose set (they hold in no
//!   world) and label cubes that contain a nogood,
//! * splitting the problem into independent groups of choose sets, so that
//!   nogoods unrelated to a query only contribute a common factor,
//! * branching on the choose set that occurs most often, with all members the
//!   cubes do not mention folded into a single branch,
//! * memoising on the canonical (label, nogood) pair.
//!
//! Worst-case cost is exponential in the number of interacting choose sets;
//! desk-scale models (tens of choose sets) evaluate in microseconds.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atms::{AssumptionId, AssumptionKind, Atms, AtmsError, Environment, Label, NodeId};
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChooseSetId(pub u32);

#[derive(Debug, Clone)]
pub struct ChooseSet {
    pub id: ChooseSetId,
    pub members: Vec<(AssumptionId, f64)>,
    /// What the set distributes over, e.g. `(given (draw 1) (Urn H1))`.
    pub tag: Term,
}

impl ChooseSet {
    pub fn total(&self) -> f64 {
        self.members.iter().map(|(_, w)| w).sum()
    }

    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        self.members.iter().map(|(_, w)| w / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbabilityError {
    #[error(transparent)]
    Atms(#[from] AtmsError),
    #[error("a choose set needs at least one member")]
    EmptyChooseSet,
    #[error("choose set weights sum to zero")]
    ZeroMass,
    #[error("assumption {0} is not a distribution element")]
    NotDistribution(String),
    #[error("assumption {0} already belongs to a choose set")]
    AlreadyOwned(String),
    #[error("assumption {0} is listed twice")]
    RepeatedMember(String),
    #[error("only structure assumptions can be retracted; {0} is a distribution element")]
    NotRetractable(String),
    #[error("contradictory evidence: no consistent world remains (nogood {nogood})")]
    ContradictoryEvidence { nogood: String },
}

/// An ATMS together with the distributions its assumptions stand for.
#[derive(Debug, Clone, Default)]
pub struct Network {
    atms: Atms,
    chooses: Vec<ChooseSet>,
    owner: HashMap<AssumptionId, (ChooseSetId, usize)>,
    retracted: BTreeSet<AssumptionId>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atms(&self) -> &Atms {
        &self.atms
    }

    pub fn atms_mut(&mut self) -> &mut Atms {
        &mut self.atms
    }

    pub fn choose_sets(&self) -> &[ChooseSet] {
        &self.chooses
    }

    pub fn owner_of(&self, a: AssumptionId) -> Option<ChooseSetId> {
        self.owner.get(&a).map(|(c, _)| *c)
    }

    pub fn is_retracted(&self, a: AssumptionId) -> bool {
        self.retracted.contains(&a)
    }

    pub fn retracted(&self) -> impl Iterator<Item = AssumptionId> + '_ {
        self.retracted.iter().copied()
    }

    /// Registers existing distribution assumptions as one distribution and
    /// records their pairwise exclusion as nogoods.
    pub fn register_choose(&mut self, members: &[AssumptionId], tag: Term) -> Result<ChooseSetId, ProbabilityError> {
        if members.is_empty() {
            return Err(ProbabilityError::EmptyChooseSet);
        }
        let mut weighted = Vec::with_capacity(members.len());
        for (i, &a) in members.iter().enumerate() {
            let info = self.atms.assumption(a)?;
            let weight = match (info.kind, info.weight) {
                (AssumptionKind::DistributionElement, Some(w)) => w,
                _ => return Err(ProbabilityError::NotDistribution(info.name.clone())),
            };
            if self.owner.contains_key(&a) {
                return Err(ProbabilityError::AlreadyOwned(info.name.clone()));
            }
            if members[..i].contains(&a) {
                return Err(ProbabilityError::RepeatedMember(info.name.clone()));
            }
            weighted.push((a, weight));
        }
        if weighted.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(ProbabilityError::ZeroMass);
        }
        let id = ChooseSetId(self.chooses.len() as u32);
        for (i, &(a, _)) in weighted.iter().enumerate() {
            self.owner.insert(a, (id, i));
        }
        for (i, &(a, _)) in weighted.iter().enumerate() {
            for &(b, _) in &weighted[i + 1..] {
                self.atms.add_nogood(Environment::from_ids([a, b]))?;
            }
        }
        self.chooses.push(ChooseSet { id, members: weighted, tag });
        Ok(id)
    }

    /// Creates fresh distribution assumptions and registers them as one set.
    pub fn create_choose(
        &mut self,
        tag: Term,
        members: &[(String, f64)],
    ) -> Result<(ChooseSetId, Vec<AssumptionId>), ProbabilityError> {
        if members.is_empty() {
            return Err(ProbabilityError::EmptyChooseSet);
        }
        if members.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(ProbabilityError::ZeroMass);
        }
        let mut ids = Vec::with_capacity(members.len());
        for (name, w) in members {
            ids.push(self.atms.create_assumption(AssumptionKind::DistributionElement, Some(*w), name)?);
        }
        let id = self.register_choose(&ids, tag)?;
        Ok((id, ids))
    }

    /// Marks a structure assumption retracted: it leaves every world and the
    /// singleton nogood purges it from every label.
    pub fn retract_assumption(&mut self, a: AssumptionId) -> Result<(), ProbabilityError> {
        let info = self.atms.assumption(a)?;
        if info.kind != AssumptionKind::Structure {
            return Err(ProbabilityError::NotRetractable(info.name.clone()));
        }
        if self.retracted.insert(a) {
            self.atms.add_nogood(Environment::singleton(a))?;
        }
        Ok(())
    }

    /// Unnormalised weight of the worlds in which some environment of
    /// `label` holds and no nogood does.
    pub fn evaluate_label_weight(&self, label: &Label) -> f64 {
        let mut ev = Evaluator::new(self);
        let neg = ev.nogoods();
        let pos = ev.dnf(label.environments());
        ev.weigh(pos, neg)
    }

    pub fn probability_of(&self, node: NodeId) -> Result<f64, ProbabilityError> {
        Ok(self.posteriors(&[node])?[0])
    }

    /// Probabilities of several nodes, sharing one evaluation cache.
    pub fn posteriors(&self, nodes: &[NodeId]) -> Result<Vec<f64>, ProbabilityError> {
        let mut ev = Evaluator::new(self);
        let neg = ev.nogoods();
        let total = ev.weigh(vec![Vec::new()], neg.clone());
        if total <= 0.0 {
            let nogood = self
                .atms
                .nogoods()
                .environments()
                .first()
                .map(|e| self.atms.format_env(e))
                .unwrap_or_else(|| "{}".to_string());
            return Err(ProbabilityError::ContradictoryEvidence { nogood });
        }
        let mut out = Vec::with_capacity(nodes.len());
        for &n in nodes {
            let label = self.atms.label_of(n)?;
            let pos = ev.dnf(label.environments());
            let p = ev.weigh(pos, neg.clone()) / total;
            out.push(p.clamp(0.0, 1.0));
        }
        Ok(out)
    }
}

/// A choice of member `.1` from choose set `.0`.
type Choice = (u32, u32);
/// A conjunction of choices, sorted, at most one per choose set.
type Cube = Vec<Choice>;

#[derive(Clone, Copy)]
enum Role {
    Always,
    Never,
    Choice(Choice),
}

struct Evaluator<'a> {
    net: &'a Network,
    weights: Vec<Vec<f64>>,
    memo: HashMap<(Vec<Cube>, Vec<Cube>), f64>,
}

impl<'a> Evaluator<'a> {
    fn new(net: &'a Network) -> Self {
        let weights = net.chooses.iter().map(ChooseSet::normalized).collect();
        Evaluator { net, weights, memo: HashMap::new() }
    }

    fn role(&self, a: AssumptionId) -> Role {
        if let Some(&(cs, i)) = self.net.owner.get(&a) {
            return Role::Choice((cs.0, i as u32));
        }
        match self.net.atms.assumption(a).map(|info| info.kind) {
            Ok(AssumptionKind::Structure) if !self.net.retracted.contains(&a) => Role::Always,
            // unregistered distribution assumptions are never selected
            _ => Role::Never,
        }
    }

    fn cube(&self, env: &Environment) -> Option<Cube> {
        let mut cube = Vec::with_capacity(env.len());
        for &a in env.ids() {
            match self.role(a) {
                Role::Always => {}
                Role::Never => return None,
                Role::Choice(c) => cube.push(c),
            }
        }
        cube.sort_unstable();
        // two members of one distribution never hold together
        if cube.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(cube)
    }

    fn dnf(&self, envs: &[Environment]) -> Vec<Cube> {
        envs.iter().filter_map(|e| self.cube(e)).collect()
    }

    fn nogoods(&self) -> Vec<Cube> {
        self.dnf(self.net.atms.nogoods().environments())
    }

    fn weigh(&mut self, pos: Vec<Cube>, neg: Vec<Cube>) -> f64 {
        let neg = minimal_cubes(neg);
        if neg.iter().any(Vec::is_empty) {
            return 0.0;
        }
        let pos = minimal_cubes(pos.into_iter().filter(|p| !neg.iter().any(|n| is_sub(n, p))).collect());
        if pos.is_empty() {
            return 0.0;
        }
        let pos_true = pos[0].is_empty();
        if pos_true && neg.is_empty() {
            return 1.0;
        }
        let key = (pos, neg);
        if let Some(&w) = self.memo.get(&key) {
            return w;
        }
        let (pos, neg) = key.clone();
        let w = match split(if pos_true { &[] } else { &pos }, &neg) {
            Some(groups) => self.weigh_groups(pos_true, groups),
            None => self.branch(&pos, &neg),
        };
        self.memo.insert(key, w);
        w
    }

    fn weigh_groups(&mut self, pos_true: bool, groups: Vec<(Vec<Cube>, Vec<Cube>)>) -> f64 {
        let truth = || vec![Vec::new()];
        if pos_true {
            return groups.into_iter().map(|(_, n)| self.weigh(truth(), n)).product();
        }
        let mut factor = 1.0;
        let mut all_neg = 1.0;
        let mut none_pos = 1.0;
        let mut pos_groups = 0;
        let mut only = 0.0;
        for (p, n) in groups {
            let t = self.weigh(truth(), n.clone());
            if p.is_empty() {
                factor *= t;
                continue;
            }
            let s = self.weigh(p, n);
            pos_groups += 1;
            only = s;
            all_neg *= t;
            none_pos *= t - s;
        }
        let core = if pos_groups == 1 { only } else { all_neg - none_pos };
        core * factor
    }

    fn branch(&mut self, pos: &[Cube], neg: &[Cube]) -> f64 {
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for cube in pos.iter().chain(neg) {
            for &(cs, _) in cube {
                *counts.entry(cs).or_default() += 1;
            }
        }
        let cs = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(&cs, _)| cs)
            .expect("non-terminal problem mentions a choose set");
        let mentioned: BTreeSet<u32> =
            pos.iter().chain(neg).flat_map(|c| c.iter()).filter(|c| c.0 == cs).map(|c| c.1).collect();
        let weights = self.weights[cs as usize].clone();
        let mut total = 0.0;
        for &m in &mentioned {
            let w = weights[m as usize];
            if w > 0.0 {
                total += w * self.weigh(cofactor(pos, cs, Some(m)), cofactor(neg, cs, Some(m)));
            }
        }
        let rest: f64 =
            weights.iter().enumerate().filter(|(i, _)| !mentioned.contains(&(*i as u32))).map(|(_, w)| w).sum();
        if rest > 0.0 {
            total += rest * self.weigh(cofactor(pos, cs, None), cofactor(neg, cs, None));
        }
        total
    }
}

fn is_sub(small: &Cube, big: &Cube) -> bool {
    small.len() <= big.len() && small.iter().all(|c| big.binary_search(c).is_ok())
}

fn minimal_cubes(mut cubes: Vec<Cube>) -> Vec<Cube> {
    cubes.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    cubes.dedup();
    let mut out: Vec<Cube> = Vec::with_capacity(cubes.len());
    for c in cubes {
        if !out.iter().any(|k| is_sub(k, &c)) {
            out.push(c);
        }
    }
    out
}

/// Conditions a DNF on choose set `cs` selecting `member` (`None`: a member
/// no cube mentions).
fn cofactor(cubes: &[Cube], cs: u32, member: Option<u32>) -> Vec<Cube> {
    cubes
        .iter()
        .filter_map(|cube| match cube.iter().position(|c| c.0 == cs) {
            None => Some(cube.clone()),
            Some(i) if Some(cube[i].1) == member => {
                let mut c = cube.clone();
                c.remove(i);
                Some(c)
            }
            Some(_) => None,
        })
        .collect()
}

/// Partitions cubes into groups over disjoint choose sets. Returns `None`
/// when everything is connected.
fn split(pos: &[Cube], neg: &[Cube]) -> Option<Vec<(Vec<Cube>, Vec<Cube>)>> {
    let mut parent: HashMap<u32, u32> = HashMap::new();
    fn find(parent: &mut HashMap<u32, u32>, x: u32) -> u32 {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let root = find(parent, p);
        parent.insert(x, root);
        root
    }
    for cube in pos.iter().chain(neg) {
        if let Some(&(first, _)) = cube.first() {
            let r = find(&mut parent, first);
            for &(cs, _) in &cube[1..] {
                let r2 = find(&mut parent, cs);
                if r2 != r {
                    parent.insert(r2, r);
                }
            }
        }
    }
    let keys: Vec<u32> = parent.keys().copied().collect();
    let mut roots: Vec<u32> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
    roots.sort_unstable();
    roots.dedup();
    if roots.len() <= 1 {
        return None;
    }
    let mut groups: Vec<(Vec<Cube>, Vec<Cube>)> = vec![(Vec::new(), Vec::new()); roots.len()];
    let slot = |parent: &mut HashMap<u32, u32>, cube: &Cube| {
        let r = find(parent, cube[0].0);
        roots.binary_search(&r).unwrap()
    };
    for cube in pos {
        let i = slot(&mut parent, cube);
        groups[i].0.push(cube.clone());
    }
    for cube in neg {
        let i = slot(&mut parent, cube);
        groups[i].1.push(cube.clone());
    }
    Some(groups)
}
