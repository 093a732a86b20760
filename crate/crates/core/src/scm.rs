//! Object-level structural-model semantics: DAG validation, intervention
//! substitution, and exact joint-distribution computation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::prob::{Cpt, Dist, Domain, Rational, Var};
use num::{One, Zero};

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("unknown variable `{0}`")]
    UnknownVar(Var),
    #[error("variable `{0}` declared twice")]
    DuplicateVar(Var),
    #[error("self-loop on `{0}`")]
    SelfLoop(Var),
    #[error("object-level graph has a cycle through `{0}`")]
    Cycle(Var),
    #[error("missing CPT for `{0}`")]
    MissingCpt(Var),
    #[error("CPT for `{var}` is declared for child `{child}`")]
    WrongChild { var: Var, child: Var },
    #[error("CPT for `{var}` reads `{parent}`, which is not among its declared parents")]
    IllegalCptParent { var: Var, parent: Var },
    #[error("CPT for `{var}` has {got} outcomes but the domain has {expected}")]
    DomainSizeMismatch { var: Var, expected: usize, got: usize },
}

/// Directed acyclic graph over object-level variables, with domains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectGraph {
    vars: Vec<Var>,
    domains: BTreeMap<Var, Domain>,
    parents: BTreeMap<Var, Vec<Var>>,
    topo: Vec<usize>, // indices into vars, topologically sorted
}

impl ObjectGraph {
    pub fn new(
        vars: Vec<Var>,
        domains: BTreeMap<Var, Domain>,
        parents: BTreeMap<Var, Vec<Var>>,
    ) -> Result<Self, ScmError> {
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !seen.insert(v.clone()) {
                return Err(ScmError::DuplicateVar(v.clone()));
            }
            if !domains.contains_key(v) {
                return Err(ScmError::UnknownVar(v.clone()));
            }
        }
        for (v, ps) in &parents {
            if !seen.contains(v) {
                return Err(ScmError::UnknownVar(v.clone()));
            }
            for p in ps {
                if p == v {
                    return Err(ScmError::SelfLoop(v.clone()));
                }
                if !seen.contains(p) {
                    return Err(ScmError::UnknownVar(p.clone()));
                }
            }
        }
        let topo = toposort(&vars, &parents)?;
        Ok(ObjectGraph {
            vars,
            domains,
            parents,
            topo,
        })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn domain(&self, v: &Var) -> &Domain {
        &self.domains[v]
    }

    pub fn domains(&self) -> &BTreeMap<Var, Domain> {
        &self.domains
    }

    pub fn parents(&self, v: &Var) -> &[Var] {
        self.parents.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parent_sizes(&self, v: &Var) -> Vec<usize> {
        self.parents(v).iter().map(|p| self.domain(p).size()).collect()
    }

    pub fn children(&self, v: &Var) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|c| self.parents(c).contains(v))
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

    pub fn topological_order(&self) -> Vec<Var> {
        self.topo.iter().map(|&i| self.vars[i].clone()).collect()
    }

    pub fn index_of(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|x| x == v)
    }
}

fn toposort(vars: &[Var], parents: &BTreeMap<Var, Vec<Var>>) -> Result<Vec<usize>, ScmError> {
    let idx: BTreeMap<&Var, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut state = vec![0u8; vars.len()]; // 0 unvisited, 1 in progress, 2 done
    let mut order = Vec::with_capacity(vars.len());

    fn visit(
        i: usize,
        vars: &[Var],
        parents: &BTreeMap<Var, Vec<Var>>,
        idx: &BTreeMap<&Var, usize>,
        state: &mut [u8],
        order: &mut Vec<usize>,
    ) -> Result<(), ScmError> {
        match state[i] {
            2 => return Ok(()),
            1 => return Err(ScmError::Cycle(vars[i].clone())),
            _ => {}
        }
        state[i] = 1;
        if let Some(ps) = parents.get(&vars[i]) {
            for p in ps {
                visit(idx[p], vars, parents, idx, state, order)?;
            }
        }
        state[i] = 2;
        order.push(i);
        Ok(())
    }

    for i in 0..vars.len() {
        visit(i, vars, parents, &idx, &mut state, &mut order)?;
    }
    Ok(order)
}

/// An intervention replaces the target's CPT. A constant replacement encodes
/// a hard `do(V=v)`; anything else is a soft intervention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intervention {
    pub target: Var,
    pub replacement: Cpt,
}

impl Intervention {
    pub fn hard(graph: &ObjectGraph, target: &Var, outcome: usize) -> Self {
        let dist = Dist::point(graph.domain(target).size(), outcome);
        Intervention {
            target: target.clone(),
            replacement: Cpt::constant(
                target.clone(),
                graph.parents(target).to_vec(),
                graph.parent_sizes(target),
                dist,
            ),
        }
    }
}

/// Exact joint distribution over all object variables, in the graph's
/// variable order. Only non-zero outcomes are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDist {
    pub vars: Vec<Var>,
    pub sizes: Vec<usize>,
    mass: BTreeMap<Vec<usize>, Rational>,
}

impl JointDist {
    pub fn mass(&self) -> &BTreeMap<Vec<usize>, Rational> {
        &self.mass
    }

    pub fn prob(&self, outcome: &[usize]) -> Rational {
        self.mass.get(outcome).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.mass.values().sum()
    }

    fn positions_of(&self, keep: &[Var]) -> Result<Vec<usize>, ScmError> {
        keep.iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .ok_or_else(|| ScmError::UnknownVar(v.clone()))
            })
            .collect()
    }
}

/// Check that a CPT is usable for `v` in `graph`: right child, domain size,
/// and parents a sub-list of the declared parents.
fn check_cpt(graph: &ObjectGraph, v: &Var, cpt: &Cpt) -> Result<(), ScmError> {
    if &cpt.child != v {
        return Err(ScmError::WrongChild {
            var: v.clone(),
            child: cpt.child.clone(),
        });
    }
    if cpt.child_size() != graph.domain(v).size() {
        return Err(ScmError::DomainSizeMismatch {
            var: v.clone(),
            expected: graph.domain(v).size(),
            got: cpt.child_size(),
        });
    }
    let declared = graph.parents(v);
    for p in &cpt.parents {
        if !declared.contains(p) {
            return Err(ScmError::IllegalCptParent {
                var: v.clone(),
                parent: p.clone(),
            });
        }
    }
    Ok(())
}

/// Exact product-form joint over all object variables, with intervened CPTs
/// substituted first. Zero-probability branches are pruned during the
/// topological sweep, so fully intervened models cost O(#vars).
pub fn joint_distribution(
    graph: &ObjectGraph,
    cpts: &BTreeMap<Var, Cpt>,
    interventions: &[Intervention],
) -> Result<JointDist, ScmError> {
    let mut effective: BTreeMap<&Var, &Cpt> = BTreeMap::new();
    for v in graph.vars() {
        let cpt = cpts.get(v).ok_or_else(|| ScmError::MissingCpt(v.clone()))?;
        effective.insert(v, cpt);
    }
    for iv in interventions {
        if graph.index_of(&iv.target).is_none() {
            return Err(ScmError::UnknownVar(iv.target.clone()));
        }
        effective.insert(&iv.target, &iv.replacement);
    }
    for (v, cpt) in &effective {
        check_cpt(graph, v, cpt)?;
    }

    let order = graph.topological_order();
    let var_pos: BTreeMap<&Var, usize> =
        graph.vars().iter().enumerate().map(|(i, v)| (v, i)).collect();
    // Pre-resolve each variable's CPT-parent positions in the outcome vector.
    let plan: Vec<(usize, &Cpt, Vec<usize>)> = order
        .iter()
        .map(|v| {
            let cpt = effective[v];
            let ppos = cpt.parents.iter().map(|p| var_pos[p]).collect();
            (var_pos[v], cpt, ppos)
        })
        .collect();

    let n = graph.vars().len();
    let mut mass: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    // Depth-first over the topological order, extending partial assignments.
    let mut stack: Vec<(usize, Vec<usize>, Rational)> =
        vec![(0, vec![usize::MAX; n], Rational::one())];
    let mut pvals = Vec::new();
    while let Some((depth, outcome, p)) = stack.pop() {
        if depth == n {
            *mass.entry(outcome).or_insert_with(Rational::zero) += p;
            continue;
        }
        let (pos, cpt, ppos) = &plan[depth];
        pvals.clear();
        pvals.extend(ppos.iter().map(|&i| outcome[i]));
        let row = cpt.row(&pvals);
        for o in row.support() {
            let mut next = outcome.clone();
            next[*pos] = o;
            stack.push((depth + 1, next, &p * row.prob(o)));
        }
    }

    Ok(JointDist {
        vars: graph.vars().to_vec(),
        sizes: graph.vars().iter().map(|v| graph.domain(v).size()).collect(),
        mass,
    })
}

/// Exact marginal onto `keep` (result variable order follows the joint's).
pub fn marginal(joint: &JointDist, keep: &[Var]) -> Result<JointDist, ScmError> {
    let mut pos = joint.positions_of(keep)?;
    pos.sort_unstable();
    pos.dedup();
    let vars: Vec<Var> = pos.iter().map(|&i| joint.vars[i].clone()).collect();
    let sizes: Vec<usize> = pos.iter().map(|&i| joint.sizes[i]).collect();
    let mut mass: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    for (outcome, p) in joint.mass() {
        let key: Vec<usize> = pos.iter().map(|&i| outcome[i]).collect();
        *mass.entry(key).or_insert_with(Rational::zero) += p;
    }
    mass.retain(|_, p| !p.is_zero());
    Ok(JointDist { vars, sizes, mass })
}

/// Marginal distribution of a single variable, as a dense `Dist`.
pub fn marginal_dist(joint: &JointDist, v: &Var) -> Result<Dist, ScmError> {
    let pos = joint.positions_of(std::slice::from_ref(v))?[0];
    let mut probs = vec![Rational::zero(); joint.sizes[pos]];
    for (outcome, p) in joint.mass() {
        probs[outcome[pos]] += p;
    }
    Ok(Dist::new(probs).expect("joint mass sums to 1"))
}

/// Exact conditional of `target` given the evidence; `None` is the
/// undefined-marker for zero-probability evidence.
pub fn conditional(
    joint: &JointDist,
    target: &Var,
    given: &BTreeMap<Var, usize>,
) -> Result<Option<Dist>, ScmError> {
    assert!(!given.contains_key(target), "evidence must exclude the target");
    let tpos = joint.positions_of(std::slice::from_ref(target))?[0];
    let gpos: Vec<(usize, usize)> = given
        .iter()
        .map(|(v, &o)| Ok((joint.positions_of(std::slice::from_ref(v))?[0], o)))
        .collect::<Result<_, ScmError>>()?;
    let mut probs = vec![Rational::zero(); joint.sizes[tpos]];
    let mut total = Rational::zero();
    for (outcome, p) in joint.mass() {
        if gpos.iter().all(|&(i, o)| outcome[i] == o) {
            probs[outcome[tpos]] += p;
            total += p;
        }
    }
    if total.is_zero() {
        return Ok(None);
    }
    for q in &mut probs {
        *q /= &total;
    }
    Ok(Some(Dist::new(probs).expect("normalised")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::parse_rational;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn row(ps: &[&str]) -> Dist {
        Dist::new(ps.iter().map(|s| r(s)).collect()).unwrap()
    }

    /// D -> X -> U with P(X=D)=p and P(U=X)=q; D's CPT supplied per test.
    fn mouse_graph() -> ObjectGraph {
        let (d, x, u) = (Var::new("D"), Var::new("X"), Var::new("U"));
        let mut domains = BTreeMap::new();
        for v in [&d, &x, &u] {
            domains.insert(v.clone(), Domain::binary());
        }
        let mut parents = BTreeMap::new();
        parents.insert(d.clone(), vec![]);
        parents.insert(x.clone(), vec![d.clone()]);
        parents.insert(u.clone(), vec![x.clone()]);
        ObjectGraph::new(vec![d, x, u], domains, parents).unwrap()
    }

    fn mouse_cpts(d_right: &str) -> BTreeMap<Var, Cpt> {
        let (d, x, u) = (Var::new("D"), Var::new("X"), Var::new("U"));
        let mut cpts = BTreeMap::new();
        let d_prob = r(d_right);
        let d_dist = Dist::new(vec![Rational::one() - &d_prob, d_prob]).unwrap();
        cpts.insert(d.clone(), Cpt::new(d.clone(), vec![], vec![], vec![d_dist]).unwrap());
        cpts.insert(
            x.clone(),
            Cpt::new(
                x.clone(),
                vec![d],
                vec![2],
                vec![row(&["3/4", "1/4"]), row(&["1/4", "3/4"])],
            )
            .unwrap(),
        );
        cpts.insert(
            u.clone(),
            Cpt::new(
                u.clone(),
                vec![x],
                vec![2],
                vec![row(&["9/10", "1/10"]), row(&["1/10", "9/10"])],
            )
            .unwrap(),
        );
        cpts
    }

    /// Independent brute force: iterate the full outcome grid in declaration
    /// order and multiply CPT rows directly, no pruning, no topological sweep.
    fn brute_force_joint(
        graph: &ObjectGraph,
        cpts: &BTreeMap<Var, Cpt>,
        interventions: &[Intervention],
    ) -> BTreeMap<Vec<usize>, Rational> {
        let mut effective: BTreeMap<Var, Cpt> = cpts.clone();
        for iv in interventions {
            effective.insert(iv.target.clone(), iv.replacement.clone());
        }
        let sizes: Vec<usize> = graph.vars().iter().map(|v| graph.domain(v).size()).collect();
        let mut out = BTreeMap::new();
        for outcome in crate::prob::enumerate_indices(&sizes) {
            let mut p = Rational::one();
            for (i, v) in graph.vars().iter().enumerate() {
                let cpt = &effective[v];
                let pvals: Vec<usize> = cpt
                    .parents
                    .iter()
                    .map(|q| outcome[graph.index_of(q).unwrap()])
                    .collect();
                p *= cpt.row(&pvals).prob(outcome[i]);
            }
            if !p.is_zero() {
                out.insert(outcome, p);
            }
        }
        out
    }

    #[test]
    fn mouse_joint_with_d_set_to_1() {
        // Frozen oracle value: with D := 1, P(U=1) = 3/4*9/10 + 1/4*1/10 = 7/10.
        let g = mouse_graph();
        let cpts = mouse_cpts("1");
        let joint = joint_distribution(&g, &cpts, &[]).unwrap();
        assert_eq!(joint.total(), Rational::one());
        let u = marginal_dist(&joint, &Var::new("U")).unwrap();
        assert_eq!(u.prob(1), &r("7/10"));
        assert_eq!(u.prob(0), &r("3/10"));
        // marginal on U via the set API agrees
        let m = marginal(&joint, &[Var::new("U")]).unwrap();
        assert_eq!(m.prob(&[1]), r("7/10"));
    }

    #[test]
    fn joint_matches_brute_force() {
        let g = mouse_graph();
        for dp in ["0", "1", "1/3"] {
            let cpts = mouse_cpts(dp);
            for ivs in [
                vec![],
                vec![Intervention::hard(&g, &Var::new("X"), 1)],
                vec![
                    Intervention::hard(&g, &Var::new("D"), 0),
                    Intervention::hard(&g, &Var::new("U"), 1),
                ],
            ] {
                let joint = joint_distribution(&g, &cpts, &ivs).unwrap();
                assert_eq!(joint.mass(), &brute_force_joint(&g, &cpts, &ivs));
            }
        }
    }

    #[test]
    fn all_constant_cpts_give_point_mass() {
        let g = mouse_graph();
        let ivs: Vec<Intervention> = vec![
            Intervention::hard(&g, &Var::new("D"), 1),
            Intervention::hard(&g, &Var::new("X"), 0),
            Intervention::hard(&g, &Var::new("U"), 1),
        ];
        let joint = joint_distribution(&g, &mouse_cpts("1/2"), &ivs).unwrap();
        assert_eq!(joint.mass().len(), 1);
        assert_eq!(joint.prob(&[1, 0, 1]), Rational::one());
    }

    #[test]
    fn do_x_screens_off_d_cpt() {
        let g = mouse_graph();
        let ivs = vec![Intervention::hard(&g, &Var::new("X"), 1)];
        let j0 = joint_distribution(&g, &mouse_cpts("0"), &ivs).unwrap();
        let j1 = joint_distribution(&g, &mouse_cpts("1"), &ivs).unwrap();
        let u = Var::new("U");
        assert_eq!(marginal_dist(&j0, &u).unwrap(), marginal_dist(&j1, &u).unwrap());
    }

    #[test]
    fn collider_conditioning_differs_from_marginal() {
        // A -> B <- C, all binary; B = A xor C. Conditioning on B flips A's
        // posterior away from its prior for biased A, C.
        let (a, b, c) = (Var::new("A"), Var::new("B"), Var::new("C"));
        let mut domains = BTreeMap::new();
        for v in [&a, &b, &c] {
            domains.insert(v.clone(), Domain::binary());
        }
        let mut parents = BTreeMap::new();
        parents.insert(a.clone(), vec![]);
        parents.insert(c.clone(), vec![]);
        parents.insert(b.clone(), vec![a.clone(), c.clone()]);
        let g = ObjectGraph::new(vec![a.clone(), b.clone(), c.clone()], domains, parents).unwrap();
        let mut cpts = BTreeMap::new();
        cpts.insert(a.clone(), Cpt::new(a.clone(), vec![], vec![], vec![row(&["2/3", "1/3"])]).unwrap());
        cpts.insert(c.clone(), Cpt::new(c.clone(), vec![], vec![], vec![row(&["1/4", "3/4"])]).unwrap());
        cpts.insert(
            b.clone(),
            Cpt::new(
                b.clone(),
                vec![a.clone(), c.clone()],
                vec![2, 2],
                vec![
                    Dist::point(2, 0),
                    Dist::point(2, 1),
                    Dist::point(2, 1),
                    Dist::point(2, 0),
                ],
            )
            .unwrap(),
        );
        let joint = joint_distribution(&g, &cpts, &[]).unwrap();
        let prior = marginal_dist(&joint, &a).unwrap();
        let mut given = BTreeMap::new();
        given.insert(b.clone(), 1usize);
        let post = conditional(&joint, &a, &given).unwrap().unwrap();
        assert_ne!(prior, post);
        // Hand-derived: P(A=1 | B=1) = (1/3*1/4) / (2/3*3/4 + 1/3*1/4) = 1/7.
        assert_eq!(post.prob(1), &r("1/7"));
    }

    #[test]
    fn conditional_on_probability_one_event_is_marginal() {
        let g = mouse_graph();
        let cpts = mouse_cpts("1"); // D = 1 surely
        let joint = joint_distribution(&g, &cpts, &[]).unwrap();
        let mut given = BTreeMap::new();
        given.insert(Var::new("D"), 1usize);
        let cond = conditional(&joint, &Var::new("U"), &given).unwrap().unwrap();
        assert_eq!(cond, marginal_dist(&joint, &Var::new("U")).unwrap());
    }

    #[test]
    fn zero_probability_evidence_is_undefined() {
        let g = mouse_graph();
        let joint = joint_distribution(&g, &mouse_cpts("1"), &[]).unwrap();
        let mut given = BTreeMap::new();
        given.insert(Var::new("D"), 0usize); // P(D=0) = 0
        assert_eq!(conditional(&joint, &Var::new("U"), &given).unwrap(), None);
    }

    #[test]
    fn cycle_rejected() {
        let (a, b) = (Var::new("A"), Var::new("B"));
        let mut domains = BTreeMap::new();
        domains.insert(a.clone(), Domain::binary());
        domains.insert(b.clone(), Domain::binary());
        let mut parents = BTreeMap::new();
        parents.insert(a.clone(), vec![b.clone()]);
        parents.insert(b.clone(), vec![a.clone()]);
        assert!(matches!(
            ObjectGraph::new(vec![a, b], domains, parents),
            Err(ScmError::Cycle(_))
        ));
    }

    #[test]
    fn self_loop_rejected() {
        let a = Var::new("A");
        let mut domains = BTreeMap::new();
        domains.insert(a.clone(), Domain::binary());
        let mut parents = BTreeMap::new();
        parents.insert(a.clone(), vec![a.clone()]);
        assert!(matches!(
            ObjectGraph::new(vec![a], domains, parents),
            Err(ScmError::SelfLoop(_))
        ));
    }

    #[test]
    fn marginal_over_all_vars_is_identity() {
        let g = mouse_graph();
        let joint = joint_distribution(&g, &mouse_cpts("1/3"), &[]).unwrap();
        let m = marginal(&joint, g.vars()).unwrap();
        assert_eq!(m, joint);
    }

    #[test]
    fn chain_rule_in_topological_order() {
        // joint mass of each outcome = product of conditional rows.
        let g = mouse_graph();
        let cpts = mouse_cpts("1/3");
        let joint = joint_distribution(&g, &cpts, &[]).unwrap();
        for (outcome, p) in joint.mass() {
            let mut acc = Rational::one();
            for (i, v) in g.vars().iter().enumerate() {
                let cpt = &cpts[v];
                let pvals: Vec<usize> = cpt
                    .parents
                    .iter()
                    .map(|q| outcome[g.index_of(q).unwrap()])
                    .collect();
                acc *= cpt.row(&pvals).prob(outcome[i]);
            }
            assert_eq!(&acc, p);
        }
    }
}
