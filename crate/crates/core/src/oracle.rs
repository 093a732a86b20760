//! The ground-truth side of discovery: a causal game plus mechanism
//! candidate sets and dependency rules, wrapped behind the abstract
//! interventional-query interface that the discovery algorithms are
//! restricted to.
//!
//! Mechanism variables take CPT values directly; given a set of mechanism
//! interventions their outcome is deterministic (intervened mechanisms
//! verbatim, dependent mechanisms by fixed-point iteration, decision
//! mechanisms by equilibrium solving), so "P(M_V | do(...))" comparisons
//! reduce to exact CPT equality.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::game::{self, CausalGame, GameError, Kind, SolveOptions};
use crate::prob::{
    constant_cpts, enumerate_deterministic_cpts, Cpt, Dist, Var,
};
use crate::scm::{self, Intervention, JointDist, ScmError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Core(#[from] crate::prob::CoreError),
    #[error("unknown variable `{0}`")]
    UnknownVar(Var),
    #[error("candidate list for `{0}` is empty")]
    EmptyCandidates(Var),
    #[error("candidate list for `{0}` must contain its declared CPT")]
    DeclaredCptMissing(Var),
    #[error("decision `{0}` cannot host a mechanism dependency rule")]
    DependencyOnDecision(Var),
    #[error("dependency rule for `{host}` reads `{read}`, which is not a non-decision variable distinct from the host")]
    BadDependencyRead { host: Var, read: Var },
    #[error("dependency table for `{host}` must have {expected} entries, got {got}")]
    BadDependencyTable { host: Var, expected: usize, got: usize },
    #[error("dependency table entry for `{host}` indexes candidate {got}, but only {len} candidates exist")]
    DependencyIndexOutOfRange { host: Var, got: usize, len: usize },
    #[error("mechanism value of `{read}` is outside its candidate list; dependency rule for `{host}` cannot index it")]
    UnindexableMechanismValue { host: Var, read: Var },
    #[error("dependency rules did not reach a fixed point within {0} iterations")]
    NoFixedPoint(usize),
}

/// Dependency of one non-decision mechanism on others: `table` maps each
/// assignment of the `reads` mechanisms (by candidate index, first read most
/// significant) to a candidate index of the host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechDependency {
    pub reads: Vec<Var>,
    pub table: Vec<usize>,
}

/// Ground truth for discovery: a causal game plus the mechanism layer.
#[derive(Debug, Clone)]
pub struct MechanisedCausalGame {
    game: CausalGame,
    candidates: BTreeMap<Var, Vec<Cpt>>,
    restricted: BTreeSet<Var>,
    dependencies: BTreeMap<Var, MechDependency>,
    solve_options: SolveOptions,
}

impl MechanisedCausalGame {
    /// Build a mechanised game. Variables absent from `declared_candidates`
    /// default to the full deterministic-CPT set over their declared parents
    /// (plus the declared CPT for non-decisions), subject to `cpt_guard`.
    pub fn new(
        game: CausalGame,
        declared_candidates: BTreeMap<Var, Vec<Cpt>>,
        dependencies: BTreeMap<Var, MechDependency>,
        cpt_guard: usize,
    ) -> Result<Self, OracleError> {
        let graph = game.graph().clone();
        let mut candidates = BTreeMap::new();
        let mut restricted = BTreeSet::new();
        for (v, list) in &declared_candidates {
            if graph.index_of(v).is_none() {
                return Err(OracleError::UnknownVar(v.clone()));
            }
            if list.is_empty() {
                return Err(OracleError::EmptyCandidates(v.clone()));
            }
            let is_decision = matches!(game.kind(v), Kind::Decision { .. });
            if !is_decision && !list.contains(&game.cpts()[v]) {
                return Err(OracleError::DeclaredCptMissing(v.clone()));
            }
            restricted.insert(v.clone());
        }
        for v in graph.vars() {
            let list = match declared_candidates.get(v) {
                Some(list) => list.clone(),
                None => {
                    let mut list = enumerate_deterministic_cpts(
                        v,
                        graph.domain(v).size(),
                        graph.parents(v),
                        &graph.parent_sizes(v),
                        cpt_guard,
                    )?;
                    if let Some(declared) = game.cpts().get(v) {
                        if !list.contains(declared) {
                            list.push(declared.clone());
                        }
                    }
                    list
                }
            };
            candidates.insert(v.clone(), list);
        }

        for (host, dep) in &dependencies {
            if graph.index_of(host).is_none() {
                return Err(OracleError::UnknownVar(host.clone()));
            }
            if matches!(game.kind(host), Kind::Decision { .. }) {
                return Err(OracleError::DependencyOnDecision(host.clone()));
            }
            let mut expected = 1usize;
            for read in &dep.reads {
                let bad = read == host
                    || graph.index_of(read).is_none()
                    || matches!(game.kind(read), Kind::Decision { .. });
                if bad {
                    return Err(OracleError::BadDependencyRead {
                        host: host.clone(),
                        read: read.clone(),
                    });
                }
                expected *= candidates[read].len();
            }
            if dep.table.len() != expected {
                return Err(OracleError::BadDependencyTable {
                    host: host.clone(),
                    expected,
                    got: dep.table.len(),
                });
            }
            let len = candidates[host].len();
            if let Some(&bad) = dep.table.iter().find(|&&i| i >= len) {
                return Err(OracleError::DependencyIndexOutOfRange {
                    host: host.clone(),
                    got: bad,
                    len,
                });
            }
        }

        Ok(MechanisedCausalGame {
            game,
            candidates,
            restricted,
            dependencies,
            solve_options: SolveOptions::default(),
        })
    }

    pub fn game(&self) -> &CausalGame {
        &self.game
    }

    pub fn candidates(&self) -> &BTreeMap<Var, Vec<Cpt>> {
        &self.candidates
    }

    pub fn dependencies(&self) -> &BTreeMap<Var, MechDependency> {
        &self.dependencies
    }

    pub fn restricted(&self) -> &BTreeSet<Var> {
        &self.restricted
    }

    fn check_mech_cpt(&self, v: &Var, cpt: &Cpt) -> Result<(), OracleError> {
        let graph = self.game.graph();
        if graph.index_of(v).is_none() {
            return Err(OracleError::UnknownVar(v.clone()));
        }
        if &cpt.child != v {
            return Err(ScmError::WrongChild {
                var: v.clone(),
                child: cpt.child.clone(),
            }
            .into());
        }
        if cpt.child_size() != graph.domain(v).size() {
            return Err(ScmError::DomainSizeMismatch {
                var: v.clone(),
                expected: graph.domain(v).size(),
                got: cpt.child_size(),
            }
            .into());
        }
        for p in &cpt.parents {
            if !graph.parents(v).contains(p) {
                return Err(ScmError::IllegalCptParent {
                    var: v.clone(),
                    parent: p.clone(),
                }
                .into());
            }
        }
        Ok(())
    }

    /// Resolve every mechanism variable under the given mechanism
    /// interventions: intervened mechanisms verbatim; dependent non-decision
    /// mechanisms by synchronous fixed-point iteration from the declared
    /// defaults; free decision mechanisms by equilibrium solving.
    pub fn respond(
        &self,
        mech_interventions: &BTreeMap<Var, Cpt>,
    ) -> Result<BTreeMap<Var, Cpt>, OracleError> {
        for (v, cpt) in mech_interventions {
            self.check_mech_cpt(v, cpt)?;
        }
        let graph = self.game.graph();

        // Steps 1-2: non-decision mechanisms.
        let mut values: BTreeMap<Var, Cpt> = BTreeMap::new();
        for v in graph.vars() {
            if let Some(iv) = mech_interventions.get(v) {
                values.insert(v.clone(), iv.clone());
            } else if let Some(declared) = self.game.cpts().get(v) {
                values.insert(v.clone(), declared.clone());
            }
        }
        let free_dependents: Vec<&Var> = self
            .dependencies
            .keys()
            .filter(|v| !mech_interventions.contains_key(v))
            .collect();
        if !free_dependents.is_empty() {
            let bound: usize = free_dependents
                .iter()
                .map(|v| self.candidates[*v].len())
                .product::<usize>()
                .saturating_add(1);
            let mut stable = false;
            for _ in 0..bound {
                let snapshot = values.clone();
                for host in &free_dependents {
                    let dep = &self.dependencies[*host];
                    let mut idx = 0usize;
                    for read in &dep.reads {
                        let list = &self.candidates[read];
                        let pos = list
                            .iter()
                            .position(|c| c == &snapshot[read])
                            .ok_or_else(|| OracleError::UnindexableMechanismValue {
                                host: (*host).clone(),
                                read: read.clone(),
                            })?;
                        idx = idx * list.len() + pos;
                    }
                    let choice = self.candidates[host][dep.table[idx]].clone();
                    values.insert((*host).clone(), choice);
                }
                if values == snapshot {
                    stable = true;
                    break;
                }
            }
            if !stable {
                return Err(OracleError::NoFixedPoint(bound));
            }
        }

        // Step 3: free decision mechanisms respond rationally to the rest.
        let needs_solving = self
            .game
            .decisions()
            .iter()
            .any(|d| !mech_interventions.contains_key(d));
        if needs_solving {
            let solver_interventions: Vec<Intervention> = values
                .iter()
                .map(|(v, cpt)| Intervention {
                    target: v.clone(),
                    replacement: cpt.clone(),
                })
                .collect();
            let profile = game::solve(&self.game, &solver_interventions, &self.solve_options)?;
            for (d, rule) in profile {
                values.insert(d, rule);
            }
        }
        Ok(values)
    }

    /// Interventional query: the mechanism part is the point mass at
    /// `respond`, the object part the exact joint of the resulting SCM with
    /// the object interventions applied on top (object interventions never
    /// feed back into mechanisms).
    pub fn query(&self, q: &OracleQuery) -> Result<OracleResponse, OracleError> {
        let mechanisms = self.respond(&q.mech_interventions)?;
        let object_joint =
            scm::joint_distribution(self.game.graph(), &mechanisms, &q.object_interventions)?;
        Ok(OracleResponse {
            mechanisms,
            object_joint,
        })
    }

    /// Convenience projection of the query's mechanism point mass.
    pub fn mechanism_value_distribution(
        &self,
        q: &OracleQuery,
    ) -> Result<BTreeMap<Var, Cpt>, OracleError> {
        self.respond(&q.mech_interventions)
    }

    /// Structural mechanism interventions for `v`: its constant CPTs, each
    /// making `v` conditionally independent of its object-level parents.
    pub fn structural_interventions_for(&self, v: &Var) -> Result<Vec<Cpt>, OracleError> {
        let graph = self.game.graph();
        if graph.index_of(v).is_none() {
            return Err(OracleError::UnknownVar(v.clone()));
        }
        Ok(constant_cpts(
            v,
            graph.domain(v).size(),
            graph.parents(v),
            &graph.parent_sizes(v),
        ))
    }
}

/// A set of mechanism and object-level interventions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleQuery {
    pub mech_interventions: BTreeMap<Var, Cpt>,
    pub object_interventions: Vec<Intervention>,
}

/// Joint query output: a point mass over mechanisms × an exact object joint.
#[derive(Debug, Clone)]
pub struct OracleResponse {
    pub mechanisms: BTreeMap<Var, Cpt>,
    pub object_joint: JointDist,
}

/// The only channel the discovery algorithms may use: intervention
/// vocabularies plus interventional distributions.
pub trait InterventionOracle {
    /// Object variables in canonical order.
    fn object_variables(&self) -> Vec<Var>;
    fn domain_size(&self, v: &Var) -> usize;
    /// Hard settings for an object variable.
    fn object_vocabulary(&self, v: &Var) -> Vec<Cpt>;
    /// Mechanism candidate set for a variable's mechanism.
    fn mechanism_vocabulary(&self, v: &Var) -> Vec<Cpt>;
    /// Structural mechanism interventions (constant CPTs).
    fn structural_vocabulary(&self, v: &Var) -> Vec<Cpt>;
    /// Variables whose candidate sets are declared (Assumption 5 may fail).
    fn restricted_variables(&self) -> Vec<Var>;
    /// Marginal of object variable `v` under the query.
    fn object_marginal(&self, q: &OracleQuery, v: &Var) -> Result<Dist, OracleError>;
    /// Value of mechanism variable `M_v` under the query.
    fn mechanism_value(&self, q: &OracleQuery, v: &Var) -> Result<Cpt, OracleError>;
}

/// The ground-truth model is itself the oracle implementation.
pub type GroundTruthOracle = MechanisedCausalGame;

impl InterventionOracle for MechanisedCausalGame {
    fn object_variables(&self) -> Vec<Var> {
        self.game.graph().vars().to_vec()
    }

    fn domain_size(&self, v: &Var) -> usize {
        self.game.graph().domain(v).size()
    }

    fn object_vocabulary(&self, v: &Var) -> Vec<Cpt> {
        let graph = self.game.graph();
        constant_cpts(
            v,
            graph.domain(v).size(),
            graph.parents(v),
            &graph.parent_sizes(v),
        )
    }

    fn mechanism_vocabulary(&self, v: &Var) -> Vec<Cpt> {
        self.candidates[v].clone()
    }

    fn structural_vocabulary(&self, v: &Var) -> Vec<Cpt> {
        self.structural_interventions_for(v).expect("known variable")
    }

    fn restricted_variables(&self) -> Vec<Var> {
        self.restricted.iter().cloned().collect()
    }

    fn object_marginal(&self, q: &OracleQuery, v: &Var) -> Result<Dist, OracleError> {
        let resp = self.query(q)?;
        Ok(scm::marginal_dist(&resp.object_joint, v)?)
    }

    fn mechanism_value(&self, q: &OracleQuery, v: &Var) -> Result<Cpt, OracleError> {
        let mech = self.respond(&q.mech_interventions)?;
        mech.get(v)
            .cloned()
            .ok_or_else(|| OracleError::UnknownVar(v.clone()))
    }
}

/// Hard object-level setting `do(v = outcome)` for use in oracle queries.
pub fn hard_setting(model: &MechanisedCausalGame, v: &Var, outcome: usize) -> Intervention {
    Intervention::hard(model.game().graph(), v, outcome)
}
