//! Discovery from interventions alone: leave-one-out causal discovery over
//! object and mechanism variables, terminal-edge labelling via structural
//! cuts, and agency identification.
//!
//! Everything here talks to the system under study only through the
//! [`InterventionOracle`] trait — the ground-truth model is never inspected
//! directly.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::game::GameGraph;
use crate::graphops::{GraphError, MechanisedGraph};
use crate::oracle::{InterventionOracle, OracleError, OracleQuery};
use crate::prob::{enumerate_indices, Cpt, Dist, Var};
use crate::scm::Intervention;

/// Default cap on logical interventional queries per discovery run. Sized
/// so every shipped fixture completes with room to spare.
pub const DEFAULT_QUERY_BUDGET: u64 = 40_000_000;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("intervention budget exhausted after {limit} queries — result is a subgraph lower bound")]
    BudgetExhausted { limit: u64 },
    #[error("discovered graph is not a mechanised SCM: {0}")]
    ShapeViolation(String),
}

/// Cap on the number of logical interventional queries. Every P(· | do(·))
/// evaluation counts, whether or not a cached response answers it.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub limit: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            limit: DEFAULT_QUERY_BUDGET,
        }
    }
}

/// A node of the combined discovery graph: an object variable or its
/// mechanism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Obj(Var),
    Mech(Var),
}

impl Node {
    pub fn var(&self) -> &Var {
        match self {
            Node::Obj(v) | Node::Mech(v) => v,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Obj(v) => write!(f, "{v}"),
            Node::Mech(v) => write!(f, "M_{v}"),
        }
    }
}

/// Which intervention vocabulary an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Family {
    /// Hard settings of an object variable.
    Hard,
    /// Mechanism candidates.
    Candidate,
    /// Structural (constant-CPT) mechanism interventions.
    Structural,
}

/// One intervention choice: node, vocabulary, index into the vocabulary.
type Choice = (Node, Family, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Response {
    Marginal(Dist),
    Mechanism(Cpt),
}

// Packed cache-key entry: node code in the high bits, family, then the
// vocabulary index. The target node is tagged with the top bit and appended
// as the final element, so a key is the whole logical query.
const IDX_BITS: u32 = 20;
const IDX_MASK: u64 = (1 << IDX_BITS) - 1;
const TARGET_TAG: u64 = 1 << 63;

/// Query engine: counts logical queries against the budget and memoises
/// oracle responses by intervention assignment.
struct Probe<'a> {
    oracle: &'a dyn InterventionOracle,
    vocabs: BTreeMap<(Node, Family), Vec<Cpt>>,
    ids: BTreeMap<Node, u64>,
    cache: HashMap<Vec<u64>, Response>,
    limit: u64,
    used: u64,
}

impl<'a> Probe<'a> {
    fn new(oracle: &'a dyn InterventionOracle, budget: &Budget) -> Self {
        Probe {
            oracle,
            vocabs: BTreeMap::new(),
            ids: BTreeMap::new(),
            cache: HashMap::new(),
            limit: budget.limit,
            used: 0,
        }
    }

    fn code(&mut self, node: &Node) -> u64 {
        let next = self.ids.len() as u64;
        *self.ids.entry(node.clone()).or_insert(next)
    }

    fn encode(&mut self, (node, family, idx): &Choice) -> u64 {
        debug_assert!((*idx as u64) <= IDX_MASK);
        (self.code(node) << (IDX_BITS + 4)) | ((*family as u64) << IDX_BITS) | *idx as u64
    }

    fn vocab(&mut self, node: &Node, family: Family) -> &[Cpt] {
        let key = (node.clone(), family);
        self.vocabs.entry(key).or_insert_with(|| match family {
            Family::Hard => self.oracle.object_vocabulary(node.var()),
            Family::Candidate => self.oracle.mechanism_vocabulary(node.var()),
            Family::Structural => self.oracle.structural_vocabulary(node.var()),
        })
    }

    fn vocab_len(&mut self, node: &Node, family: Family) -> usize {
        self.vocab(node, family).len()
    }

    fn charge(&mut self) -> Result<(), DiscoveryError> {
        self.used += 1;
        if self.used > self.limit {
            return Err(DiscoveryError::BudgetExhausted { limit: self.limit });
        }
        Ok(())
    }

    /// P(target | do(assignment)): a marginal for object targets, the
    /// mechanism value (a point mass over CPTs) for mechanism targets.
    /// `encoded` is the packed cache key for (assignment, target).
    fn response(
        &mut self,
        assignment: &[Choice],
        encoded: &[u64],
        target: &Node,
    ) -> Result<Response, DiscoveryError> {
        self.charge()?;
        if let Some(hit) = self.cache.get(encoded) {
            return Ok(hit.clone());
        }
        let response = self.ask_oracle(assignment, target)?;
        self.cache.insert(encoded.to_vec(), response.clone());
        Ok(response)
    }

    /// The raw oracle call, without budget accounting or caching.
    fn ask_oracle(
        &mut self,
        assignment: &[Choice],
        target: &Node,
    ) -> Result<Response, DiscoveryError> {
        let mut query = OracleQuery::default();
        for (node, family, idx) in assignment {
            let cpt = self.vocab(node, *family)[*idx].clone();
            match node {
                Node::Obj(v) => query.object_interventions.push(Intervention {
                    target: v.clone(),
                    replacement: cpt,
                }),
                Node::Mech(v) => {
                    query.mech_interventions.insert(v.clone(), cpt);
                }
            }
        }
        Ok(match target {
            Node::Obj(v) => Response::Marginal(self.oracle.object_marginal(&query, v)?),
            Node::Mech(v) => Response::Mechanism(self.oracle.mechanism_value(&query, v)?),
        })
    }

    /// Evaluate the target's response on the whole grid of intervention
    /// assignments over `others` (lexicographic, first coordinate most
    /// significant). Entries are ids into a deduplicated response set, so
    /// equal ids mean equal responses. Each grid cell is one query; nothing
    /// repeats, so the cache is bypassed.
    fn response_table(
        &mut self,
        target: &Node,
        others: &[(Node, Family)],
        sizes: &[usize],
    ) -> Result<Vec<u32>, DiscoveryError> {
        let total: usize = sizes.iter().product();
        let mut assignment: Vec<Choice> =
            others.iter().map(|(n, f)| (n.clone(), *f, 0)).collect();
        let mut ids: HashMap<Response, u32> = HashMap::new();
        let mut table = Vec::with_capacity(total);
        let mut ctx = vec![0usize; sizes.len()];
        loop {
            self.charge()?;
            let response = self.ask_oracle(&assignment, target)?;
            let next = ids.len() as u32;
            table.push(*ids.entry(response).or_insert(next));
            let mut k = sizes.len();
            loop {
                if k == 0 {
                    return Ok(table);
                }
                k -= 1;
                ctx[k] += 1;
                if ctx[k] < sizes[k] {
                    assignment[k].2 = ctx[k];
                    break;
                }
                ctx[k] = 0;
                assignment[k].2 = 0;
            }
        }
    }

    /// Does the response of `target` vary with `w`'s intervention, for some
    /// context over `others` (each drawn from its listed family)?
    fn responds(
        &mut self,
        target: &Node,
        w: &Node,
        w_family: Family,
        others: &[(Node, Family)],
        ) -> Result<bool, DiscoveryError> {
        let w_len = self.vocab_len(w, w_family);
        if w_len < 2 {
            return Ok(false);
        }
        let sizes: Vec<usize> = others
            .iter()
            .map(|(n, f)| self.vocab_len(n, *f))
            .collect();
        // Fixed node-sorted layout shared by every context, so equal logical
        // queries from different pairs produce equal cache keys.
        let mut assignment: Vec<Choice> = others
            .iter()
            .map(|(n, f)| (n.clone(), *f, 0))
            .collect();
        assignment.push((w.clone(), w_family, 0));
        assignment.sort();
        let slot = assignment.iter().position(|(n, _, _)| n == w).unwrap();
        let coord_slot: Vec<usize> = others
            .iter()
            .map(|(n, _)| assignment.iter().position(|(m, _, _)| m == n).unwrap())
            .collect();
        let mut encoded: Vec<u64> = assignment.iter().map(|c| self.encode(c)).collect();
        encoded.push(TARGET_TAG | self.code(target));
        for ctx in enumerate_indices(&sizes) {
            for (k, &i) in ctx.iter().enumerate() {
                assignment[coord_slot[k]].2 = i;
                encoded[coord_slot[k]] = (encoded[coord_slot[k]] & !IDX_MASK) | i as u64;
            }
            assignment[slot].2 = 0;
            encoded[slot] &= !IDX_MASK;
            let baseline = self.response(&assignment, &encoded, target)?;
            for i in 1..w_len {
                assignment[slot].2 = i;
                encoded[slot] = (encoded[slot] & !IDX_MASK) | i as u64;
                if self.response(&assignment, &encoded, target)? != baseline {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

fn default_family(node: &Node) -> Family {
    match node {
        Node::Obj(_) => Family::Hard,
        Node::Mech(_) => Family::Candidate,
    }
}

/// Does the table vary along axis `k` of the grid laid out with the given
/// sizes (lexicographic, first coordinate most significant)?
fn axis_varies(table: &[u32], sizes: &[usize], k: usize) -> bool {
    let stride: usize = sizes[k + 1..].iter().product();
    let span = stride * sizes[k];
    let mut base = 0;
    while base < table.len() {
        for off in base..base + stride {
            let first = table[off];
            for j in 1..sizes[k] {
                if table[off + j * stride] != first {
                    return true;
                }
            }
        }
        base += span;
    }
    false
}

fn leave_one_out_probe(
    probe: &mut Probe<'_>,
    nodes: &[Node],
) -> Result<BTreeSet<(Node, Node)>, DiscoveryError> {
    let mut edges = BTreeSet::new();
    for v in nodes {
        let others: Vec<(Node, Family)> = nodes
            .iter()
            .filter(|n| *n != v)
            .map(|n| (n.clone(), default_family(n)))
            .collect();
        let sizes: Vec<usize> = others
            .iter()
            .map(|(n, f)| probe.vocab_len(n, *f))
            .collect();
        // One pass over the target's whole intervention grid answers every
        // pair at once: (W, V) is an edge iff the response varies along W's
        // axis for some fixed setting of the remaining interventions.
        let table = probe.response_table(v, &others, &sizes)?;
        for (k, (w, _)) in others.iter().enumerate() {
            if axis_varies(&table, &sizes, k) {
                edges.insert((w.clone(), v.clone()));
            }
        }
    }
    Ok(edges)
}

/// Leave-one-out causal discovery: edge (W, V) iff, for some intervention
/// context fixing every other variable, varying the intervention on W
/// changes the interventional distribution of V.
pub fn leave_one_out(
    oracle: &dyn InterventionOracle,
    nodes: &[Node],
    budget: &Budget,
) -> Result<BTreeSet<(Node, Node)>, DiscoveryError> {
    let mut probe = Probe::new(oracle, budget);
    leave_one_out_probe(&mut probe, nodes)
}

/// The combined node list: object variables, then their mechanisms, in the
/// oracle's canonical order.
pub fn combined_nodes(oracle: &dyn InterventionOracle) -> Vec<Node> {
    let vars = oracle.object_variables();
    vars.iter()
        .map(|v| Node::Obj(v.clone()))
        .chain(vars.iter().map(|v| Node::Mech(v.clone())))
        .collect()
}

fn partition_edges(
    vars: &[Var],
    edges: &BTreeSet<(Node, Node)>,
) -> Result<(BTreeSet<(Var, Var)>, BTreeSet<(Var, Var)>), DiscoveryError> {
    let mut e_obj = BTreeSet::new();
    let mut e_mech = BTreeSet::new();
    let mut func_parents: BTreeMap<&Var, Vec<&Var>> = vars.iter().map(|v| (v, vec![])).collect();
    for (w, v) in edges {
        match (w, v) {
            (Node::Obj(a), Node::Obj(b)) => {
                e_obj.insert((a.clone(), b.clone()));
            }
            (Node::Mech(a), Node::Mech(b)) => {
                e_mech.insert((a.clone(), b.clone()));
            }
            (Node::Mech(a), Node::Obj(b)) => {
                func_parents.get_mut(b).unwrap().push(a);
            }
            (Node::Obj(a), Node::Mech(b)) => {
                return Err(DiscoveryError::ShapeViolation(format!(
                    "edge from object variable {a} into mechanism M_{b}"
                )));
            }
        }
    }
    for (v, parents) in &func_parents {
        match parents.as_slice() {
            [p] if *p == *v => {}
            [p] => {
                return Err(DiscoveryError::ShapeViolation(format!(
                    "object variable {v} has functional edge from M_{p} instead of M_{v}"
                )));
            }
            [] => {
                return Err(DiscoveryError::ShapeViolation(format!(
                    "object variable {v} has no incoming functional edge"
                )));
            }
            _ => {
                return Err(DiscoveryError::ShapeViolation(format!(
                    "object variable {v} has {} incoming functional edges",
                    parents.len()
                )));
            }
        }
    }
    Ok((e_obj, e_mech))
}

fn children_of(e_obj: &BTreeSet<(Var, Var)>, v: &Var) -> BTreeSet<Var> {
    e_obj
        .iter()
        .filter(|(a, _)| a == v)
        .map(|(_, b)| b.clone())
        .collect()
}

/// One terminal-labelling probe: does M_V respond to M_W when every other
/// mechanism is intervened, with the mechanisms of `cut` (the relevant
/// object-level children) restricted to structural interventions?
fn responds_under_cut(
    probe: &mut Probe<'_>,
    vars: &[Var],
    w: &Var,
    v: &Var,
    cut: &BTreeSet<Var>,
    w_family: Family,
) -> Result<bool, DiscoveryError> {
    let others: Vec<(Node, Family)> = vars
        .iter()
        .filter(|u| *u != w && *u != v)
        .map(|u| {
            let family = if cut.contains(u) {
                Family::Structural
            } else {
                Family::Candidate
            };
            (Node::Mech(u.clone()), family)
        })
        .collect();
    probe.responds(&Node::Mech(v.clone()), &Node::Mech(w.clone()), w_family, &others)
}

/// Edge-labelled mechanised graph discovery: leave-one-out over object and
/// mechanism variables, a mechanised-SCM shape check, then terminal-edge
/// labelling. A mechanism edge (M_W, M_V) is terminal if M_V responds to
/// M_W under some structural cut of W's children, unless M_V also responds
/// to M_W under some structural cut of V's own children.
pub fn discover(
    oracle: &dyn InterventionOracle,
    budget: &Budget,
) -> Result<MechanisedGraph, DiscoveryError> {
    let vars = oracle.object_variables();
    let nodes = combined_nodes(oracle);
    let mut probe = Probe::new(oracle, budget);
    let edges = leave_one_out_probe(&mut probe, &nodes)?;
    let (e_obj, e_mech) = partition_edges(&vars, &edges)?;

    let mut e_term = BTreeSet::new();
    for (w, v) in &e_mech {
        let mut add_cut = children_of(&e_obj, w);
        add_cut.remove(v);
        if responds_under_cut(&mut probe, &vars, w, v, &add_cut, Family::Candidate)? {
            e_term.insert((w.clone(), v.clone()));
        }

        let mut remove_cut = children_of(&e_obj, v);
        let w_family = if remove_cut.remove(w) {
            // W itself is a child of V: cutting V off from all its children
            // means W's mechanism may only vary structurally.
            Family::Structural
        } else {
            Family::Candidate
        };
        if responds_under_cut(&mut probe, &vars, w, v, &remove_cut, w_family)? {
            e_term.remove(&(w.clone(), v.clone()));
        }
    }

    Ok(MechanisedGraph::new(vars, e_obj, e_mech, e_term)?)
}

/// Agency identification: V is a decision iff M_V has an incoming terminal
/// edge, W a utility iff M_W has an outgoing one; agents are the weakly
/// connected components of the terminal-edge graph, coloured breadth-first
/// in node order.
pub fn identify_agents(c: &MechanisedGraph) -> GameGraph {
    let mut decisions = BTreeSet::new();
    let mut utilities = BTreeSet::new();
    for (w, v) in c.e_term() {
        utilities.insert(w.clone());
        decisions.insert(v.clone());
    }

    let mut adjacency: BTreeMap<&Var, Vec<&Var>> = BTreeMap::new();
    for (w, v) in c.e_term() {
        adjacency.entry(w).or_default().push(v);
        adjacency.entry(v).or_default().push(w);
    }
    let mut colour: BTreeMap<Var, BTreeSet<String>> = BTreeMap::new();
    let mut next = 0usize;
    for v in c.object_nodes() {
        if !(decisions.contains(v) || utilities.contains(v)) || colour.contains_key(v) {
            continue;
        }
        let agent = format!("agent{next}");
        next += 1;
        let mut queue = VecDeque::from([v]);
        while let Some(n) = queue.pop_front() {
            if colour.contains_key(n) {
                continue;
            }
            colour.insert(n.clone(), BTreeSet::from([agent.clone()]));
            queue.extend(adjacency.get(n).into_iter().flatten());
        }
    }

    GameGraph {
        nodes: c.object_nodes().to_vec(),
        edges: c.e_obj().clone(),
        decisions,
        utilities,
        colour,
    }
}

/// Full pipeline: discover the edge-labelled mechanised graph, then identify
/// decisions, utilities, and agents.
pub fn discover_game(
    oracle: &dyn InterventionOracle,
    budget: &Budget,
) -> Result<GameGraph, DiscoveryError> {
    Ok(identify_agents(&discover(oracle, budget)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::tests::mouse_model;
    use crate::prob::Domain;

    fn v(s: &str) -> Var {
        Var::new(s)
    }

    fn node_edges(items: &[(&str, &str)]) -> BTreeSet<(Var, Var)> {
        items.iter().map(|(a, b)| (v(a), v(b))).collect()
    }

    #[test]
    fn leave_one_out_mouse_combined() {
        let model = mouse_model("3/4", "9/10");
        let nodes = combined_nodes(&model);
        let edges = leave_one_out(&model, &nodes, &Budget::default()).unwrap();
        let expected: BTreeSet<(Node, Node)> = [
            (Node::Obj(v("D")), Node::Obj(v("X"))),
            (Node::Obj(v("X")), Node::Obj(v("U"))),
            (Node::Mech(v("D")), Node::Obj(v("D"))),
            (Node::Mech(v("X")), Node::Obj(v("X"))),
            (Node::Mech(v("U")), Node::Obj(v("U"))),
            (Node::Mech(v("X")), Node::Mech(v("D"))),
            (Node::Mech(v("U")), Node::Mech(v("D"))),
        ]
        .into_iter()
        .collect();
        assert_eq!(edges, expected);
    }

    #[test]
    fn discover_mouse_graph() {
        let model = mouse_model("3/4", "9/10");
        let g = discover(&model, &Budget::default()).unwrap();
        assert_eq!(g.e_obj(), &node_edges(&[("D", "X"), ("X", "U")]));
        assert_eq!(g.e_mech(), &node_edges(&[("X", "D"), ("U", "D")]));
        assert_eq!(g.e_term(), &node_edges(&[("U", "D")]));
    }

    #[test]
    fn discover_is_deterministic() {
        let model = mouse_model("3/4", "9/10");
        let a = discover(&model, &Budget::default()).unwrap();
        let b = discover(&model, &Budget::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identify_mouse_agents() {
        let model = mouse_model("3/4", "9/10");
        let got = discover_game(&model, &Budget::default()).unwrap();
        assert!(got.same_graph(&model.game().game_graph()));
        assert_eq!(got.agents().len(), 1);
        assert_eq!(
            got.info_edges(),
            BTreeSet::new(),
            "mouse decision observes nothing"
        );
    }

    #[test]
    fn single_isolated_variable_has_no_edges() {
        use crate::game::{CausalGame, Kind};
        use crate::prob::{Dist, DEFAULT_CPT_GUARD};
        use crate::scm::ObjectGraph;
        let x = v("X");
        let graph = ObjectGraph::new(
            vec![x.clone()],
            BTreeMap::from([(x.clone(), Domain::binary())]),
            BTreeMap::from([(x.clone(), vec![])]),
        )
        .unwrap();
        let cpts = BTreeMap::from([(
            x.clone(),
            Cpt::constant(x.clone(), vec![], vec![], Dist::uniform(2)),
        )]);
        let game = CausalGame::new(
            graph,
            BTreeMap::from([(x.clone(), Kind::Chance)]),
            cpts,
            BTreeMap::new(),
        )
        .unwrap();
        let model = crate::oracle::MechanisedCausalGame::new(
            game,
            BTreeMap::new(),
            BTreeMap::new(),
            DEFAULT_CPT_GUARD,
        )
        .unwrap();
        let edges = leave_one_out(&model, &[Node::Obj(x.clone())], &Budget::default()).unwrap();
        assert!(edges.is_empty());
        // With the mechanism included, only the functional edge appears.
        let g = discover(&model, &Budget::default()).unwrap();
        assert!(g.e_mech().is_empty());
        assert!(g.e_term().is_empty());
        let id = identify_agents(&g);
        assert!(id.decisions.is_empty() && id.utilities.is_empty());
    }

    #[test]
    fn budget_exhaustion_fails_loudly() {
        let model = mouse_model("3/4", "9/10");
        let err = discover(&model, &Budget { limit: 10 }).unwrap_err();
        match err {
            DiscoveryError::BudgetExhausted { limit } => assert_eq!(limit, 10),
            other => panic!("expected budget exhaustion, got {other}"),
        }
        assert!(err.to_string().contains("subgraph lower bound"));
    }

    /// A hand-rolled oracle (independent of the ground-truth model type):
    /// two binary variables where B copies A under the identity mechanism
    /// and ignores it under the constant ones. Discovery must work from the
    /// trait surface alone.
    struct MockOracle;

    impl MockOracle {
        fn vars() -> (Var, Var) {
            (Var::new("A"), Var::new("B"))
        }
    }

    impl InterventionOracle for MockOracle {
        fn object_variables(&self) -> Vec<Var> {
            let (a, b) = Self::vars();
            vec![a, b]
        }

        fn domain_size(&self, _v: &Var) -> usize {
            2
        }

        fn object_vocabulary(&self, var: &Var) -> Vec<Cpt> {
            let (a, _) = Self::vars();
            let parents = if var == &a { vec![] } else { vec![a] };
            let sizes = if parents.is_empty() { vec![] } else { vec![2] };
            (0..2)
                .map(|o| Cpt::constant(var.clone(), parents.clone(), sizes.clone(), Dist::point(2, o)))
                .collect()
        }

        fn mechanism_vocabulary(&self, var: &Var) -> Vec<Cpt> {
            let (a, b) = Self::vars();
            if var == &a {
                self.object_vocabulary(var)
            } else {
                let copy = Cpt::new(
                    b.clone(),
                    vec![a.clone()],
                    vec![2],
                    vec![Dist::point(2, 0), Dist::point(2, 1)],
                )
                .unwrap();
                let mut out = self.object_vocabulary(var);
                out.push(copy);
                out
            }
        }

        fn structural_vocabulary(&self, var: &Var) -> Vec<Cpt> {
            self.object_vocabulary(var)
        }

        fn restricted_variables(&self) -> Vec<Var> {
            vec![]
        }

        fn object_marginal(&self, q: &OracleQuery, var: &Var) -> Result<Dist, OracleError> {
            let (a, b) = Self::vars();
            let value_of_a = match q.object_interventions.iter().find(|iv| iv.target == a) {
                Some(iv) => iv.replacement.rows()[0].point_outcome().unwrap(),
                None => {
                    let mech = q
                        .mech_interventions
                        .get(&a)
                        .cloned()
                        .unwrap_or_else(|| self.mechanism_vocabulary(&a)[0].clone());
                    mech.rows()[0].point_outcome().unwrap()
                }
            };
            if var == &a {
                return Ok(Dist::point(2, value_of_a));
            }
            if let Some(iv) = q.object_interventions.iter().find(|iv| iv.target == b) {
                return Ok(iv.replacement.rows()[0].clone());
            }
            let mech = q
                .mech_interventions
                .get(&b)
                .cloned()
                .unwrap_or_else(|| self.mechanism_vocabulary(&b)[2].clone());
            Ok(mech.row(&[value_of_a]).clone())
        }

        fn mechanism_value(&self, q: &OracleQuery, var: &Var) -> Result<Cpt, OracleError> {
            if let Some(cpt) = q.mech_interventions.get(var) {
                return Ok(cpt.clone());
            }
            Ok(self.mechanism_vocabulary(var)[if var.as_str() == "A" { 0 } else { 2 }].clone())
        }
    }

    #[test]
    fn discovery_runs_on_any_trait_implementation() {
        let oracle = MockOracle;
        let g = discover(&oracle, &Budget::default()).unwrap();
        assert_eq!(g.e_obj(), &node_edges(&[("A", "B")]));
        assert!(g.e_mech().is_empty());
        assert!(g.e_term().is_empty());
    }

    #[test]
    fn identify_agents_colouring_is_component_count() {
        // Two disjoint terminal components must get two distinct agents;
        // a shared terminal source merges them into one.
        let nodes: Vec<Var> = ["D1", "D2", "U1", "U2"].iter().map(|s| v(s)).collect();
        let two = MechanisedGraph::new(
            nodes.clone(),
            BTreeSet::new(),
            node_edges(&[("U1", "D1"), ("U2", "D2")]),
            node_edges(&[("U1", "D1"), ("U2", "D2")]),
        )
        .unwrap();
        let g2 = identify_agents(&two);
        assert_eq!(g2.agents().len(), 2);
        assert_eq!(g2.colour[&v("D1")], g2.colour[&v("U1")]);
        assert_ne!(g2.colour[&v("D1")], g2.colour[&v("D2")]);

        let one = MechanisedGraph::new(
            nodes,
            BTreeSet::new(),
            node_edges(&[("U1", "D1"), ("U1", "D2")]),
            node_edges(&[("U1", "D1"), ("U1", "D2")]),
        )
        .unwrap();
        let g1 = identify_agents(&one);
        assert_eq!(g1.agents().len(), 1);
    }
}
