//! Causal-game semantics: policies, expected utility, per-context best
//! response, and deterministic equilibrium selection.
//!
//! Rationality notion: every decision rule picks a best response in every
//! decision context, with ties broken by the canonical rule order. At
//! zero-probability contexts all actions count as optimal, so tie-breaking
//! selects the first outcome.

use std::collections::{BTreeMap, BTreeSet};

use num::Zero;
use thiserror::Error;

use crate::prob::{
    enumerate_deterministic_cpts, enumerate_indices, Cpt, Dist, Rational, Var, DEFAULT_CPT_GUARD,
};
use crate::scm::{self, Intervention, ObjectGraph, ScmError};

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Core(#[from] crate::prob::CoreError),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("variable `{0}` has no kind")]
    MissingKind(Var),
    #[error("decision `{0}` must not declare a CPT")]
    DecisionWithCpt(Var),
    #[error("non-decision `{0}` needs a CPT")]
    MissingCpt(Var),
    #[error("utility `{0}` needs a non-empty list of distinct owning agents")]
    BadUtilityOwners(Var),
    #[error("utility `{var}` needs one value per outcome ({expected}), got {got}")]
    BadUtilityValues { var: Var, expected: usize, got: usize },
    #[error("profile has no rule for decision `{0}`")]
    IncompleteProfile(Var),
    #[error("rule for `{decision}` must be a deterministic CPT over its info parents")]
    BadRule { decision: Var },
    #[error("`{0}` is not a decision")]
    NotADecision(Var),
    #[error("profile space has {count} profiles, exceeding the guard of {guard}")]
    ProfileGuardExceeded { count: num::BigUint, guard: u64 },
    #[error("no equilibrium: no deterministic profile is a per-context best response everywhere")]
    NoEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kind {
    Chance,
    Decision { agent: String },
    /// Utilities may be shared between agents (e.g. assistance games).
    Utility { agents: Vec<String> },
}

impl Kind {
    pub fn utility(agent: &str) -> Kind {
        Kind::Utility {
            agents: vec![agent.to_string()],
        }
    }
}

/// A finite structural causal game with exact CPTs and utility readings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGame {
    graph: ObjectGraph,
    kinds: BTreeMap<Var, Kind>,
    cpts: BTreeMap<Var, Cpt>,
    utility_values: BTreeMap<Var, Vec<Rational>>,
}

/// Decision rules are deterministic CPTs over the decision's info parents;
/// a profile maps each (free) decision to its rule.
pub type PolicyProfile = BTreeMap<Var, Cpt>;

impl CausalGame {
    pub fn new(
        graph: ObjectGraph,
        kinds: BTreeMap<Var, Kind>,
        cpts: BTreeMap<Var, Cpt>,
        utility_values: BTreeMap<Var, Vec<Rational>>,
    ) -> Result<Self, GameError> {
        for v in graph.vars() {
            let kind = kinds.get(v).ok_or_else(|| GameError::MissingKind(v.clone()))?;
            match kind {
                Kind::Decision { .. } => {
                    if cpts.contains_key(v) {
                        return Err(GameError::DecisionWithCpt(v.clone()));
                    }
                }
                _ => {
                    if !cpts.contains_key(v) {
                        return Err(GameError::MissingCpt(v.clone()));
                    }
                }
            }
            if let Kind::Utility { agents } = kind {
                let distinct: BTreeSet<&String> = agents.iter().collect();
                if agents.is_empty() || distinct.len() != agents.len() {
                    return Err(GameError::BadUtilityOwners(v.clone()));
                }
                let expected = graph.domain(v).size();
                let got = utility_values.get(v).map(Vec::len).unwrap_or(0);
                if got != expected {
                    return Err(GameError::BadUtilityValues {
                        var: v.clone(),
                        expected,
                        got,
                    });
                }
            }
        }
        Ok(CausalGame {
            graph,
            kinds,
            cpts,
            utility_values,
        })
    }

    pub fn graph(&self) -> &ObjectGraph {
        &self.graph
    }

    pub fn kind(&self, v: &Var) -> &Kind {
        &self.kinds[v]
    }

    pub fn cpts(&self) -> &BTreeMap<Var, Cpt> {
        &self.cpts
    }

    pub fn utility_values(&self) -> &BTreeMap<Var, Vec<Rational>> {
        &self.utility_values
    }

    /// Agent ids in sorted order.
    pub fn agents(&self) -> Vec<String> {
        let mut out: BTreeSet<String> = BTreeSet::new();
        for k in self.kinds.values() {
            match k {
                Kind::Decision { agent } => {
                    out.insert(agent.clone());
                }
                Kind::Utility { agents } => {
                    out.extend(agents.iter().cloned());
                }
                Kind::Chance => {}
            }
        }
        out.into_iter().collect()
    }

    /// Decisions in graph variable order.
    pub fn decisions(&self) -> Vec<Var> {
        self.graph
            .vars()
            .iter()
            .filter(|v| matches!(self.kinds[v], Kind::Decision { .. }))
            .cloned()
            .collect()
    }

    pub fn utilities_of(&self, agent: &str) -> Vec<Var> {
        self.graph
            .vars()
            .iter()
            .filter(|v| matches!(&self.kinds[v], Kind::Utility { agents } if agents.iter().any(|a| a == agent)))
            .cloned()
            .collect()
    }

    pub fn owner(&self, decision: &Var) -> Option<&str> {
        match self.kinds.get(decision) {
            Some(Kind::Decision { agent }) => Some(agent),
            _ => None,
        }
    }

    /// A decision's observations are exactly its graph parents.
    pub fn info_parents(&self, decision: &Var) -> &[Var] {
        self.graph.parents(decision)
    }

    /// Rescale one agent's utility readings by a positive factor.
    pub fn scale_utilities(&self, agent: &str, factor: &Rational) -> CausalGame {
        let mut g = self.clone();
        for (v, vals) in g.utility_values.iter_mut() {
            if matches!(&g.kinds[v], Kind::Utility { agents } if agents.iter().any(|a| a == agent)) {
                for x in vals.iter_mut() {
                    *x *= factor;
                }
            }
        }
        g
    }

    /// The typed graph view used by the graph-analysis operations.
    pub fn game_graph(&self) -> GameGraph {
        let mut edges = BTreeSet::new();
        for v in self.graph.vars() {
            for p in self.graph.parents(v) {
                edges.insert((p.clone(), v.clone()));
            }
        }
        let mut decisions = BTreeSet::new();
        let mut utilities = BTreeSet::new();
        let mut colour = BTreeMap::new();
        for (v, k) in &self.kinds {
            match k {
                Kind::Decision { agent } => {
                    decisions.insert(v.clone());
                    colour.insert(v.clone(), BTreeSet::from([agent.clone()]));
                }
                Kind::Utility { agents } => {
                    utilities.insert(v.clone());
                    colour.insert(v.clone(), agents.iter().cloned().collect());
                }
                Kind::Chance => {}
            }
        }
        GameGraph {
            nodes: self.graph.vars().to_vec(),
            edges,
            decisions,
            utilities,
            colour,
        }
    }
}

/// Combine the game's CPTs with a policy profile into a plain SCM.
pub fn induced_scm(
    game: &CausalGame,
    profile: &PolicyProfile,
) -> Result<(ObjectGraph, BTreeMap<Var, Cpt>), GameError> {
    let mut cpts = game.cpts.clone();
    for d in game.decisions() {
        let rule = profile
            .get(&d)
            .ok_or_else(|| GameError::IncompleteProfile(d.clone()))?;
        if !rule.is_deterministic() || rule.child != d {
            return Err(GameError::BadRule { decision: d.clone() });
        }
        cpts.insert(d, rule.clone());
    }
    Ok((game.graph.clone(), cpts))
}

/// CPTs for the induced model, allowing interventions to stand in for
/// missing decision rules (used by the oracle, where intervened decisions
/// may carry arbitrary — even stochastic — rule CPTs).
fn effective_cpts(
    game: &CausalGame,
    profile: &PolicyProfile,
    interventions: &[Intervention],
) -> Result<BTreeMap<Var, Cpt>, GameError> {
    let intervened: BTreeSet<&Var> = interventions.iter().map(|iv| &iv.target).collect();
    let mut cpts = game.cpts.clone();
    for d in game.decisions() {
        match profile.get(&d) {
            Some(rule) => {
                cpts.insert(d, rule.clone());
            }
            None if intervened.contains(&d) => {
                // placeholder; the intervention supplies the real CPT
                let size = game.graph.domain(&d).size();
                cpts.insert(d.clone(), Cpt::constant(d.clone(), vec![], vec![], Dist::point(size, 0)));
            }
            None => return Err(GameError::IncompleteProfile(d.clone())),
        }
    }
    Ok(cpts)
}

/// EU^a = Σ over the agent's utility variables of Σ_u P(u)·value(u), on the
/// induced, intervened SCM.
pub fn expected_utility(
    game: &CausalGame,
    profile: &PolicyProfile,
    agent: &str,
    interventions: &[Intervention],
) -> Result<Rational, GameError> {
    if !game.agents().iter().any(|a| a == agent) {
        return Err(GameError::UnknownAgent(agent.to_string()));
    }
    let cpts = effective_cpts(game, profile, interventions)?;
    let joint = scm::joint_distribution(&game.graph, &cpts, interventions)?;
    let mut eu = Rational::zero();
    for u in game.utilities_of(agent) {
        let dist = scm::marginal_dist(&joint, &u)?;
        for (i, value) in game.utility_values[&u].iter().enumerate() {
            eu += dist.prob(i) * value;
        }
    }
    Ok(eu)
}

/// Answers best-response queries for one decision against a fixed profile.
///
/// A single joint distribution — built with a uniform rule at the decision —
/// serves every (context, action) pair: conditioning on a decision with an
/// everywhere-positive rule together with all of its parents coincides with
/// intervening on it. This keeps a full rule solve at one joint build rather
/// than one per context and action.
struct Responder<'g> {
    game: &'g CausalGame,
    decision: Var,
    info: Vec<Var>,
    n_actions: usize,
    down_utils: Vec<Var>,
    /// None when the decision has no downstream utilities for its owner, in
    /// which case every context returns the full action set.
    joint: Option<scm::JointDist>,
}

impl<'g> Responder<'g> {
    fn new(
        game: &'g CausalGame,
        profile: &PolicyProfile,
        decision: &Var,
        interventions: &[Intervention],
    ) -> Result<Self, GameError> {
        let agent = game
            .owner(decision)
            .ok_or_else(|| GameError::NotADecision(decision.clone()))?
            .to_string();
        let info = game.info_parents(decision).to_vec();
        let n_actions = game.graph.domain(decision).size();

        let descendants = game.graph.descendants(decision);
        let down_utils: Vec<Var> = game
            .utilities_of(&agent)
            .into_iter()
            .filter(|u| descendants.contains(u))
            .collect();

        let joint = if down_utils.is_empty() {
            None
        } else {
            debug_assert!(
                interventions.iter().all(|iv| iv.target != *decision),
                "cannot solve an intervened decision"
            );
            // The decision's own rule is irrelevant to its best responses;
            // the uniform stand-in also guarantees positivity.
            let mut profile = profile.clone();
            profile.insert(
                decision.clone(),
                Cpt::constant(
                    decision.clone(),
                    info.clone(),
                    game.graph.parent_sizes(decision),
                    Dist::uniform(n_actions),
                ),
            );
            let cpts = effective_cpts(game, &profile, interventions)?;
            Some(scm::joint_distribution(&game.graph, &cpts, interventions)?)
        };

        Ok(Responder { game, decision: decision.clone(), info, n_actions, down_utils, joint })
    }

    /// The argmax action set in `context`. Contexts of probability zero
    /// return the full action set.
    fn best(&self, context: &[usize]) -> Result<BTreeSet<usize>, GameError> {
        assert_eq!(context.len(), self.info.len(), "context must cover the info parents");
        let full: BTreeSet<usize> = (0..self.n_actions).collect();
        let Some(joint) = &self.joint else { return Ok(full) };

        let mut given: BTreeMap<Var, usize> =
            self.info.iter().cloned().zip(context.iter().cloned()).collect();

        let mut best: Option<(Rational, BTreeSet<usize>)> = None;
        for action in 0..self.n_actions {
            given.insert(self.decision.clone(), action);
            let mut eu = Rational::zero();
            for u in &self.down_utils {
                match scm::conditional(joint, u, &given)? {
                    Some(dist) => {
                        for (i, value) in self.game.utility_values[u].iter().enumerate() {
                            eu += dist.prob(i) * value;
                        }
                    }
                    None => {
                        // The rule at the decision is positive, so the
                        // evidence has zero mass exactly when the context
                        // itself has probability zero.
                        return Ok(full);
                    }
                }
            }
            best = Some(match best {
                None => (eu, BTreeSet::from([action])),
                Some((b, mut set)) => {
                    if eu > b {
                        (eu, BTreeSet::from([action]))
                    } else if eu == b {
                        set.insert(action);
                        (b, set)
                    } else {
                        (b, set)
                    }
                }
            });
        }
        Ok(best.expect("domains are non-empty").1)
    }
}

/// The argmax action set for `decision` in `context`, holding all other
/// rules fixed. Contexts of probability zero return the full action set.
pub fn best_response_in_context(
    game: &CausalGame,
    profile: &PolicyProfile,
    decision: &Var,
    context: &[usize],
    interventions: &[Intervention],
) -> Result<BTreeSet<usize>, GameError> {
    Responder::new(game, profile, decision, interventions)?.best(context)
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Cap on the joint deterministic-profile space.
    pub profile_guard: u64,
    /// Cap on each decision's rule space.
    pub rule_guard: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            profile_guard: 10_000_000,
            rule_guard: DEFAULT_CPT_GUARD,
        }
    }
}

/// The preferred rule given everyone else's rules: in every context, the
/// lexicographically first member of the best-response set. This does not
/// depend on the decision's own current rule.
fn required_rule(
    game: &CausalGame,
    profile: &PolicyProfile,
    decision: &Var,
    interventions: &[Intervention],
) -> Result<Cpt, GameError> {
    let info = game.info_parents(decision).to_vec();
    let sizes = game.graph.parent_sizes(decision);
    let n_actions = game.graph.domain(decision).size();
    let responder = Responder::new(game, profile, decision, interventions)?;
    let mut rows = Vec::new();
    for ctx in enumerate_indices(&sizes) {
        let best = responder.best(&ctx)?;
        let action = *best.first().expect("argmax set is non-empty");
        rows.push(Dist::point(n_actions, action));
    }
    Ok(Cpt::new(decision.clone(), info, sizes, rows)?)
}

/// Deterministic equilibrium selection: the lexicographically first profile
/// (per the canonical rule order) in which every decision's rule picks, in
/// every context, the first member of its best-response set.
///
/// Decisions targeted by an intervention are not solved; their intervened
/// CPT stands in as a fixed (possibly stochastic) rule and the returned
/// profile covers only the free decisions.
pub fn solve(
    game: &CausalGame,
    interventions: &[Intervention],
    options: &SolveOptions,
) -> Result<PolicyProfile, GameError> {
    let intervened: BTreeSet<&Var> = interventions.iter().map(|iv| &iv.target).collect();
    let free: Vec<Var> = game
        .decisions()
        .into_iter()
        .filter(|d| !intervened.contains(d))
        .collect();

    if free.is_empty() {
        return Ok(PolicyProfile::new());
    }

    if free.len() == 1 {
        // The required rule does not depend on the decision's own rule, so
        // the fixed point is unique and can be constructed directly.
        let d = &free[0];
        let profile = PolicyProfile::new();
        let rule = required_rule(game, &profile, d, interventions)?;
        return Ok(PolicyProfile::from([(d.clone(), rule)]));
    }

    let mut spaces: Vec<Vec<Cpt>> = Vec::new();
    let mut count = num::BigUint::from(1u32);
    for d in &free {
        let space = enumerate_deterministic_cpts(
            d,
            game.graph.domain(d).size(),
            game.info_parents(d),
            &game.graph.parent_sizes(d),
            options.rule_guard,
        )?;
        count *= num::BigUint::from(space.len());
        spaces.push(space);
    }
    if count > num::BigUint::from(options.profile_guard) {
        return Err(GameError::ProfileGuardExceeded {
            count,
            guard: options.profile_guard,
        });
    }

    let sizes: Vec<usize> = spaces.iter().map(Vec::len).collect();
    for choice in enumerate_indices(&sizes) {
        let profile: PolicyProfile = free
            .iter()
            .enumerate()
            .map(|(k, d)| (d.clone(), spaces[k][choice[k]].clone()))
            .collect();
        let mut ok = true;
        for d in &free {
            let need = required_rule(game, &profile, d, interventions)?;
            if &need != &profile[d] {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(profile);
        }
    }
    Err(GameError::NoEquilibrium)
}

/// Typed game graph: decision/chance/utility nodes, agent colouring, and
/// edges. Information edges are exactly the edges into decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameGraph {
    pub nodes: Vec<Var>,
    pub edges: BTreeSet<(Var, Var)>,
    pub decisions: BTreeSet<Var>,
    pub utilities: BTreeSet<Var>,
    /// Owning agents per decision/utility node. Decisions have exactly one
    /// owner; utilities may be shared.
    pub colour: BTreeMap<Var, BTreeSet<String>>,
}

impl GameGraph {
    pub fn info_edges(&self) -> BTreeSet<(Var, Var)> {
        self.edges
            .iter()
            .filter(|(_, v)| self.decisions.contains(v))
            .cloned()
            .collect()
    }

    pub fn parents(&self, v: &Var) -> Vec<Var> {
        self.nodes
            .iter()
            .filter(|p| self.edges.contains(&((*p).clone(), v.clone())))
            .cloned()
            .collect()
    }

    pub fn children(&self, v: &Var) -> Vec<Var> {
        self.nodes
            .iter()
            .filter(|c| self.edges.contains(&(v.clone(), (*c).clone())))
            .cloned()
            .collect()
    }

    pub fn descendants(&self, v: &Var) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut stack = self.children(v);
        while let Some(c) = stack.pop() {
            if out.insert(c.clone()) {
                stack.extend(self.children(&c));
            }
        }
        out
    }

    pub fn agents(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.colour.values().flatten().cloned().collect();
        set.into_iter().collect()
    }

    fn owned_by(&self, v: &Var, agent: &str) -> bool {
        self.colour.get(v).is_some_and(|s| s.contains(agent))
    }

    pub fn decisions_of(&self, agent: &str) -> Vec<Var> {
        self.nodes
            .iter()
            .filter(|v| self.decisions.contains(v) && self.owned_by(v, agent))
            .cloned()
            .collect()
    }

    pub fn utilities_of(&self, agent: &str) -> Vec<Var> {
        self.nodes
            .iter()
            .filter(|v| self.utilities.contains(v) && self.owned_by(v, agent))
            .cloned()
            .collect()
    }

    /// Per-agent node groups, independent of agent naming. Used for graph
    /// equality: identification invents fresh ids. With shared utilities the
    /// groups may overlap.
    pub fn colour_partition(&self) -> BTreeSet<BTreeSet<Var>> {
        let mut groups: BTreeMap<&String, BTreeSet<Var>> = BTreeMap::new();
        for (v, owners) in &self.colour {
            for c in owners {
                groups.entry(c).or_default().insert(v.clone());
            }
        }
        groups.into_values().collect()
    }

    /// Node-for-node, edge-for-edge, colour-for-colour (up to agent
    /// renaming) equality.
    pub fn same_graph(&self, other: &GameGraph) -> bool {
        let a: BTreeSet<&Var> = self.nodes.iter().collect();
        let b: BTreeSet<&Var> = other.nodes.iter().collect();
        a == b
            && self.edges == other.edges
            && self.decisions == other.decisions
            && self.utilities == other.utilities
            && self.colour_partition() == other.colour_partition()
    }
}
