//! Pure graph analysis: d-separation, s-reachability, mechanism
//! identification (game graph → edge-labelled mechanised graph), assumption
//! checking, and the two roundtrip verifiers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::game::GameGraph;
use crate::prob::Var;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(Var),
    #[error("conditioning set must be disjoint from the endpoint sets")]
    OverlappingSets,
    #[error("`{0}` is not a decision")]
    NotADecision(Var),
    #[error("s-reachability query requires v ≠ d (got `{0}` for both)")]
    SelfQuery(Var),
    #[error("duplicate node `{0}`")]
    DuplicateNode(Var),
    #[error("edge endpoint `{0}` is not a node")]
    BadEdgeEndpoint(Var),
    #[error("terminal edge ({0}, {1}) is not a mechanism edge")]
    TerminalNotMechanism(Var, Var),
    #[error("object-level edges contain a cycle through `{0}`")]
    ObjectCycle(Var),
}

/// Edge-labelled mechanised graph. One mechanism node `M_V` exists per
/// object node `V`, with the functional edge `M_V → V` implicit; mechanism
/// and terminal edges are stored by base variable: `(W, V)` means
/// `M_W → M_V`. The mechanism subgraph may be cyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanisedGraph {
    object_nodes: Vec<Var>,
    e_obj: BTreeSet<(Var, Var)>,
    e_mech: BTreeSet<(Var, Var)>,
    e_term: BTreeSet<(Var, Var)>,
}

/// Spelled-out name used in diagnostics and serialised output.
pub fn mechanism_name(v: &Var) -> String {
    format!("M_{}", v)
}

impl MechanisedGraph {
    pub fn new(
        object_nodes: Vec<Var>,
        e_obj: BTreeSet<(Var, Var)>,
        e_mech: BTreeSet<(Var, Var)>,
        e_term: BTreeSet<(Var, Var)>,
    ) -> Result<Self, GraphError> {
        let known: BTreeSet<&Var> = object_nodes.iter().collect();
        if known.len() != object_nodes.len() {
            let dup = object_nodes
                .iter()
                .find(|v| object_nodes.iter().filter(|w| w == v).count() > 1)
                .unwrap();
            return Err(GraphError::DuplicateNode(dup.clone()));
        }
        for (a, b) in e_obj.iter().chain(&e_mech).chain(&e_term) {
            for end in [a, b] {
                if !known.contains(end) {
                    return Err(GraphError::BadEdgeEndpoint(end.clone()));
                }
            }
        }
        for e in &e_term {
            if !e_mech.contains(e) {
                return Err(GraphError::TerminalNotMechanism(e.0.clone(), e.1.clone()));
            }
        }
        // Object subgraph must be acyclic (Kahn's algorithm).
        let mut indeg: BTreeMap<&Var, usize> = object_nodes.iter().map(|v| (v, 0)).collect();
        for (_, b) in &e_obj {
            *indeg.get_mut(b).unwrap() += 1;
        }
        let mut queue: VecDeque<&Var> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(v, _)| *v)
            .collect();
        let mut seen = 0usize;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for (a, b) in &e_obj {
                if a == v {
                    let d = indeg.get_mut(b).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(b);
                    }
                }
            }
        }
        if seen != object_nodes.len() {
            let witness = indeg.iter().find(|(_, &d)| d > 0).map(|(v, _)| (*v).clone());
            return Err(GraphError::ObjectCycle(witness.unwrap()));
        }
        Ok(MechanisedGraph {
            object_nodes,
            e_obj,
            e_mech,
            e_term,
        })
    }

    pub fn object_nodes(&self) -> &[Var] {
        &self.object_nodes
    }

    /// Mechanism node display names, in object-node order.
    pub fn mechanism_nodes(&self) -> Vec<String> {
        self.object_nodes.iter().map(mechanism_name).collect()
    }

    pub fn e_obj(&self) -> &BTreeSet<(Var, Var)> {
        &self.e_obj
    }

    pub fn e_mech(&self) -> &BTreeSet<(Var, Var)> {
        &self.e_mech
    }

    pub fn e_term(&self) -> &BTreeSet<(Var, Var)> {
        &self.e_term
    }

    /// Functional edges `M_V → V`, one per object node.
    pub fn e_func(&self) -> Vec<(String, Var)> {
        self.object_nodes
            .iter()
            .map(|v| (mechanism_name(v), v.clone()))
            .collect()
    }
}

/// Standard d-separation on a DAG via active-trail reachability (no
/// moralisation). Returns true iff every trail between `xs` and `ys` is
/// blocked by `zs`.
pub fn d_separated(
    nodes: &[Var],
    edges: &BTreeSet<(Var, Var)>,
    xs: &BTreeSet<Var>,
    ys: &BTreeSet<Var>,
    zs: &BTreeSet<Var>,
) -> Result<bool, GraphError> {
    let known: BTreeSet<&Var> = nodes.iter().collect();
    for v in xs.iter().chain(ys).chain(zs) {
        if !known.contains(v) {
            return Err(GraphError::UnknownNode(v.clone()));
        }
    }
    for (a, b) in edges {
        for end in [a, b] {
            if !known.contains(end) {
                return Err(GraphError::BadEdgeEndpoint(end.clone()));
            }
        }
    }
    if zs.iter().any(|z| xs.contains(z) || ys.contains(z)) {
        return Err(GraphError::OverlappingSets);
    }

    let mut parents: BTreeMap<&Var, Vec<&Var>> = BTreeMap::new();
    let mut children: BTreeMap<&Var, Vec<&Var>> = BTreeMap::new();
    for (a, b) in edges {
        children.entry(a).or_default().push(b);
        parents.entry(b).or_default().push(a);
    }

    // Ancestors of zs (inclusive), for collider activation.
    let mut anc_z: BTreeSet<&Var> = zs.iter().collect();
    let mut stack: Vec<&Var> = zs.iter().collect();
    while let Some(v) = stack.pop() {
        for p in parents.get(v).into_iter().flatten() {
            if anc_z.insert(p) {
                stack.push(p);
            }
        }
    }

    // Trail states: (node, arrived-from-child?). Arriving "up" at v means the
    // last edge pointed out of v; arriving "down" means it pointed into v.
    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
    enum Dir {
        Up,
        Down,
    }
    let mut visited: BTreeSet<(&Var, Dir)> = BTreeSet::new();
    let mut queue: VecDeque<(&Var, Dir)> = xs.iter().map(|x| (x, Dir::Up)).collect();
    while let Some((v, dir)) = queue.pop_front() {
        if !visited.insert((v, dir)) {
            continue;
        }
        if ys.contains(v) {
            return Ok(false);
        }
        match dir {
            Dir::Up => {
                if !zs.contains(v) {
                    for p in parents.get(v).into_iter().flatten() {
                        queue.push_back((p, Dir::Up));
                    }
                    for c in children.get(v).into_iter().flatten() {
                        queue.push_back((c, Dir::Down));
                    }
                }
            }
            Dir::Down => {
                if !zs.contains(v) {
                    for c in children.get(v).into_iter().flatten() {
                        queue.push_back((c, Dir::Down));
                    }
                }
                if anc_z.contains(v) {
                    // v is (an ancestor of) an observed collider.
                    for p in parents.get(v).into_iter().flatten() {
                        queue.push_back((p, Dir::Up));
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Strategic relevance of `v`'s mechanism to decision `d`: add a fresh
/// parent v̂ to v, then test v̂ ⊥̸ U^D | Fa^D, where U^D is the owning
/// agent's utilities among d's descendants and Fa^D = Pa^D ∪ {d}.
pub fn s_reachable(g: &GameGraph, d: &Var, v: &Var) -> Result<bool, GraphError> {
    if !g.nodes.contains(d) {
        return Err(GraphError::UnknownNode(d.clone()));
    }
    if !g.nodes.contains(v) {
        return Err(GraphError::UnknownNode(v.clone()));
    }
    if !g.decisions.contains(d) {
        return Err(GraphError::NotADecision(d.clone()));
    }
    if v == d {
        return Err(GraphError::SelfQuery(v.clone()));
    }
    let agent = g.colour[d].first().expect("decisions have an owner").clone();
    let desc = g.descendants(d);
    let down_utils: BTreeSet<Var> = g
        .utilities_of(&agent)
        .into_iter()
        .filter(|u| desc.contains(u))
        .collect();
    if down_utils.is_empty() {
        return Ok(false);
    }

    let hat = Var::new(&fresh_name(&g.nodes, v));
    let mut nodes = g.nodes.clone();
    nodes.push(hat.clone());
    let mut edges = g.edges.clone();
    edges.insert((hat.clone(), v.clone()));

    let mut fa: BTreeSet<Var> = g.parents(d).into_iter().collect();
    fa.insert(d.clone());
    let sep = d_separated(&nodes, &edges, &BTreeSet::from([hat]), &down_utils, &fa)?;
    Ok(!sep)
}

fn fresh_name(nodes: &[Var], v: &Var) -> String {
    let mut name = format!("{}_hat", v);
    while nodes.iter().any(|n| n.as_str() == name) {
        name.push('_');
    }
    name
}

/// Nonempty directed path src ⇝ dst whose intermediate nodes avoid `avoid`
/// (the endpoints themselves are never removed).
pub fn directed_path_avoiding(
    g: &GameGraph,
    src: &Var,
    dst: &Var,
    avoid: &BTreeSet<Var>,
) -> Result<bool, GraphError> {
    for v in [src, dst] {
        if !g.nodes.contains(v) {
            return Err(GraphError::UnknownNode(v.clone()));
        }
    }
    let mut queue: VecDeque<Var> = g.children(src).into();
    let mut visited: BTreeSet<Var> = BTreeSet::new();
    while let Some(n) = queue.pop_front() {
        if &n == dst {
            return Ok(true);
        }
        if !visited.insert(n.clone()) || avoid.contains(&n) {
            continue;
        }
        queue.extend(g.children(&n));
    }
    Ok(false)
}

/// One agent's decisions and utilities, with an edge (D,U) iff a directed
/// path D ⇝ U avoids the agent's other utilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSubgraph {
    pub agent: String,
    pub nodes: BTreeSet<Var>,
    pub edges: BTreeSet<(Var, Var)>,
}

pub fn agent_subgraphs(g: &GameGraph) -> Vec<AgentSubgraph> {
    g.agents()
        .into_iter()
        .map(|agent| {
            let decisions = g.decisions_of(&agent);
            let utilities = g.utilities_of(&agent);
            let mut nodes: BTreeSet<Var> = decisions.iter().cloned().collect();
            nodes.extend(utilities.iter().cloned());
            let mut edges = BTreeSet::new();
            for d in &decisions {
                for u in &utilities {
                    let avoid: BTreeSet<Var> =
                        utilities.iter().filter(|w| w != &u).cloned().collect();
                    if directed_path_avoiding(g, d, u, &avoid).expect("nodes exist") {
                        edges.insert((d.clone(), u.clone()));
                    }
                }
            }
            AgentSubgraph {
                agent,
                nodes,
                edges,
            }
        })
        .collect()
}

/// All decisions and utilities, with the union of the agent-subgraph edges.
pub fn decision_utility_subgraph(g: &GameGraph) -> (BTreeSet<Var>, BTreeSet<(Var, Var)>) {
    let mut nodes: BTreeSet<Var> = g.decisions.iter().cloned().collect();
    nodes.extend(g.utilities.iter().cloned());
    let mut edges = BTreeSet::new();
    for sub in agent_subgraphs(g) {
        edges.extend(sub.edges);
    }
    (nodes, edges)
}

/// Result of the connectivity assumption check: each weakly connected
/// component of the decision-utility subgraph must equal one agent's
/// subgraph and contain at least one decision and one utility.
#[derive(Debug, Clone)]
pub struct Assumption1Report {
    pub holds: bool,
    pub diagnostics: Vec<String>,
}

pub fn check_assumption1(g: &GameGraph) -> Assumption1Report {
    let (nodes, edges) = decision_utility_subgraph(g);
    let mut undirected: BTreeMap<&Var, Vec<&Var>> = nodes.iter().map(|v| (v, vec![])).collect();
    for (a, b) in &edges {
        undirected.get_mut(a).unwrap().push(b);
        undirected.get_mut(b).unwrap().push(a);
    }
    let mut seen: BTreeSet<&Var> = BTreeSet::new();
    let mut components: Vec<BTreeSet<Var>> = Vec::new();
    for v in &nodes {
        if seen.contains(v) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n) {
                continue;
            }
            comp.insert(n.clone());
            queue.extend(&undirected[n]);
        }
        components.push(comp);
    }

    let subgraphs = agent_subgraphs(g);
    let mut diagnostics = Vec::new();
    for comp in &components {
        let names: Vec<String> = comp.iter().map(|v| v.to_string()).collect();
        let label = format!("{{{}}}", names.join(", "));
        if !comp.iter().any(|v| g.decisions.contains(v)) {
            diagnostics.push(format!("component {label} contains no decision"));
            continue;
        }
        if !comp.iter().any(|v| g.utilities.contains(v)) {
            diagnostics.push(format!("component {label} contains no utility"));
            continue;
        }
        if !subgraphs.iter().any(|s| &s.nodes == comp) {
            diagnostics.push(format!(
                "component {label} is not a single agent's subgraph"
            ));
        }
    }
    // Conversely, every agent subgraph must be one component.
    for s in &subgraphs {
        if !components.iter().any(|c| c == &s.nodes) {
            let msg = format!(
                "agent `{}` subgraph is split across or merged with other components",
                s.agent
            );
            if !diagnostics.contains(&msg) {
                diagnostics.push(msg);
            }
        }
    }
    Assumption1Report {
        holds: diagnostics.is_empty(),
        diagnostics,
    }
}

/// Mechanism identification: game graph → edge-labelled mechanised graph.
/// For each decision D and node V ≠ D, `(M_V, M_D)` is a mechanism edge iff
/// V is s-reachable from D, and additionally terminal iff V is one of the
/// agent's utilities with a directed path D ⇝ V avoiding the agent's other
/// utilities.
pub fn mechanise(g: &GameGraph) -> Result<MechanisedGraph, GraphError> {
    let mut e_mech = BTreeSet::new();
    let mut e_term = BTreeSet::new();
    for agent in g.agents() {
        let utilities = g.utilities_of(&agent);
        for d in g.decisions_of(&agent) {
            for v in &g.nodes {
                if v == &d {
                    continue;
                }
                if s_reachable(g, &d, v)? {
                    e_mech.insert((v.clone(), d.clone()));
                }
                if utilities.contains(v) {
                    let avoid: BTreeSet<Var> =
                        utilities.iter().filter(|w| w != &v).cloned().collect();
                    if directed_path_avoiding(g, &d, v, &avoid)? {
                        e_term.insert((v.clone(), d.clone()));
                    }
                }
            }
        }
    }
    MechanisedGraph::new(g.nodes.clone(), g.edges.clone(), e_mech, e_term)
}

/// Outcome of a roundtrip verification; failures are reported, not raised.
#[derive(Debug, Clone)]
pub struct RoundtripReport {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl RoundtripReport {
    fn pass() -> Self {
        RoundtripReport {
            passed: true,
            failures: vec![],
        }
    }

    fn fail(failures: Vec<String>) -> Self {
        RoundtripReport {
            passed: false,
            failures,
        }
    }
}

/// Verify that agency identification undoes mechanism identification on a
/// game graph satisfying the connectivity assumption.
pub fn verify_left_inverse_game(g: &GameGraph) -> Result<RoundtripReport, GraphError> {
    let report = check_assumption1(g);
    if !report.holds {
        let mut failures = vec!["connectivity assumption fails".to_string()];
        failures.extend(report.diagnostics);
        return Ok(RoundtripReport::fail(failures));
    }
    let back = crate::discovery::identify_agents(&mechanise(g)?);
    if back.same_graph(g) {
        Ok(RoundtripReport::pass())
    } else {
        let mut failures = vec![];
        if back.decisions != g.decisions {
            failures.push(format!(
                "decisions differ: got {:?}, expected {:?}",
                back.decisions, g.decisions
            ));
        }
        if back.utilities != g.utilities {
            failures.push(format!(
                "utilities differ: got {:?}, expected {:?}",
                back.utilities, g.utilities
            ));
        }
        if back.edges != g.edges {
            failures.push("edge sets differ".to_string());
        }
        if back.colour_partition() != g.colour_partition() {
            failures.push("agent groupings differ".to_string());
        }
        if failures.is_empty() {
            failures.push("node sets differ".to_string());
        }
        Ok(RoundtripReport::fail(failures))
    }
}

/// Verify that mechanism identification undoes agency identification on a
/// mechanised graph in which every mechanism node with an incoming mechanism
/// edge also has an incoming terminal edge.
pub fn verify_left_inverse_mech(c: &MechanisedGraph) -> Result<RoundtripReport, GraphError> {
    let mut failures = Vec::new();
    for v in c.object_nodes() {
        let has_mech = c.e_mech().iter().any(|(_, t)| t == v);
        let has_term = c.e_term().iter().any(|(_, t)| t == v);
        if has_mech && !has_term {
            failures.push(format!(
                "precondition fails at {}: incoming mechanism edge but no incoming terminal edge",
                mechanism_name(v)
            ));
        }
    }
    if !failures.is_empty() {
        return Ok(RoundtripReport::fail(failures));
    }
    let back = mechanise(&crate::discovery::identify_agents(c))?;
    if &back == c {
        Ok(RoundtripReport::pass())
    } else {
        let mut failures = vec![];
        if back.e_mech() != c.e_mech() {
            failures.push(format!(
                "mechanism edges differ: got {:?}, expected {:?}",
                back.e_mech(),
                c.e_mech()
            ));
        }
        if back.e_term() != c.e_term() {
            failures.push(format!(
                "terminal edges differ: got {:?}, expected {:?}",
                back.e_term(),
                c.e_term()
            ));
        }
        if failures.is_empty() {
            failures.push("object level differs".to_string());
        }
        Ok(RoundtripReport::fail(failures))
    }
}
