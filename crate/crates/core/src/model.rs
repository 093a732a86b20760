//! The model file format: a TOML document declaring variables, CPTs, utility
//! values, and (optionally) mechanism candidate sets and dependency tables.
//!
//! Probabilities and utility values are written as strings — fractions like
//! "3/4" or decimals like "0.75" — and convert exactly to rationals. Raw
//! TOML floats are rejected by construction (the fields are string-typed).
//!
//! CPT rows are indexed by parent assignment with the first parent most
//! significant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CausalGame, GameError, Kind};
use crate::oracle::{MechDependency, MechanisedCausalGame, OracleError};
use crate::prob::{
    format_rational, parse_rational, Cpt, Dist, Domain, Rational, Var, DEFAULT_CPT_GUARD,
};
use crate::scm::{ObjectGraph, ScmError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("document error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("serialisation error: {0}")]
    TomlOut(#[from] toml::ser::Error),
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    FormatVersion(u32),
    #[error("variable `{var}`: {message}")]
    Variable { var: String, message: String },
    #[error("variable `{var}`, cpt row {row}: {message}")]
    CptRow {
        var: String,
        row: usize,
        message: String,
    },
    #[error("mechanism section `{var}`: {message}")]
    Mechanism { var: String, message: String },
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, rename = "variables")]
    variables: Vec<VarDecl>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    mechanisms: BTreeMap<String, MechDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VarDecl {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    agent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agents: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    parents: Vec<String>,
    domain: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cpt: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MechDecl {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    candidates: Vec<CandidateDecl>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depends_on: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CandidateDecl {
    #[serde(skip_serializing_if = "Option::is_none")]
    parents: Option<Vec<String>>,
    rows: Vec<Vec<String>>,
}

fn var_err(var: &str, message: impl Into<String>) -> ModelError {
    ModelError::Variable {
        var: var.to_string(),
        message: message.into(),
    }
}

fn parse_prob(var: &str, row: usize, raw: &str) -> Result<Rational, ModelError> {
    parse_rational(raw).map_err(|e| ModelError::CptRow {
        var: var.to_string(),
        row,
        message: e.to_string(),
    })
}

fn parse_rows(
    var: &str,
    child_size: usize,
    parent_sizes: &[usize],
    rows: &[Vec<String>],
) -> Result<Vec<Dist>, ModelError> {
    let expected: usize = parent_sizes.iter().product();
    if rows.len() != expected {
        return Err(var_err(
            var,
            format!("expected {expected} cpt rows, got {}", rows.len()),
        ));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != child_size {
            return Err(ModelError::CptRow {
                var: var.to_string(),
                row: i,
                message: format!("expected {child_size} probabilities, got {}", row.len()),
            });
        }
        let probs = row
            .iter()
            .map(|s| parse_prob(var, i, s))
            .collect::<Result<Vec<_>, _>>()?;
        let dist = Dist::new(probs).map_err(|e| ModelError::CptRow {
            var: var.to_string(),
            row: i,
            message: e.to_string(),
        })?;
        out.push(dist);
    }
    Ok(out)
}

/// Parse a model document into a mechanised causal game, using the default
/// candidate-set size guard.
pub fn parse_model(text: &str) -> Result<MechanisedCausalGame, ModelError> {
    parse_model_with_guard(text, DEFAULT_CPT_GUARD)
}

pub fn parse_model_with_guard(
    text: &str,
    cpt_guard: usize,
) -> Result<MechanisedCausalGame, ModelError> {
    let doc: ModelDoc = toml::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(ModelError::FormatVersion(doc.format_version));
    }

    let mut vars = Vec::new();
    let mut domains = BTreeMap::new();
    let mut parents = BTreeMap::new();
    for decl in &doc.variables {
        let v = Var::new(&decl.name);
        let domain = Domain::new(decl.domain.clone())
            .map_err(|e| var_err(&decl.name, e.to_string()))?;
        vars.push(v.clone());
        domains.insert(v.clone(), domain);
        parents.insert(v, decl.parents.iter().map(|p| Var::new(p)).collect());
    }
    let graph = ObjectGraph::new(vars, domains, parents)?;

    let mut kinds = BTreeMap::new();
    let mut cpts = BTreeMap::new();
    let mut values = BTreeMap::new();
    for decl in &doc.variables {
        let v = Var::new(&decl.name);
        let owners = || -> Result<Vec<String>, ModelError> {
            match (&decl.agent, &decl.agents) {
                (Some(a), None) => Ok(vec![a.clone()]),
                (None, Some(list)) if !list.is_empty() => Ok(list.clone()),
                (Some(_), Some(_)) => {
                    Err(var_err(&decl.name, "give either `agent` or `agents`, not both"))
                }
                _ => Err(var_err(&decl.name, "missing owning agent")),
            }
        };
        let kind = match decl.kind.as_str() {
            "chance" => {
                if decl.agent.is_some() || decl.agents.is_some() {
                    return Err(var_err(&decl.name, "chance variables have no agent"));
                }
                Kind::Chance
            }
            "decision" => {
                let owners = owners()?;
                if owners.len() != 1 {
                    return Err(var_err(&decl.name, "decisions have exactly one agent"));
                }
                Kind::Decision {
                    agent: owners[0].clone(),
                }
            }
            "utility" => Kind::Utility { agents: owners()? },
            other => {
                return Err(var_err(
                    &decl.name,
                    format!("unknown kind `{other}` (expected chance, decision, or utility)"),
                ))
            }
        };

        let is_decision = matches!(kind, Kind::Decision { .. });
        match (&decl.cpt, is_decision) {
            (Some(_), true) => {
                return Err(var_err(&decl.name, "decisions must not declare a cpt"))
            }
            (None, false) => return Err(var_err(&decl.name, "missing cpt")),
            (Some(rows), false) => {
                let dists = parse_rows(
                    &decl.name,
                    graph.domain(&v).size(),
                    &graph.parent_sizes(&v),
                    rows,
                )?;
                let cpt = Cpt::new(v.clone(), graph.parents(&v).to_vec(), graph.parent_sizes(&v), dists)
                    .map_err(|e| var_err(&decl.name, e.to_string()))?;
                cpts.insert(v.clone(), cpt);
            }
            (None, true) => {}
        }

        match (&decl.values, &kind) {
            (Some(vals), Kind::Utility { .. }) => {
                if vals.len() != graph.domain(&v).size() {
                    return Err(var_err(
                        &decl.name,
                        format!(
                            "expected {} utility values, got {}",
                            graph.domain(&v).size(),
                            vals.len()
                        ),
                    ));
                }
                let parsed = vals
                    .iter()
                    .map(|s| parse_rational(s).map_err(|e| var_err(&decl.name, e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                values.insert(v.clone(), parsed);
            }
            (None, Kind::Utility { .. }) => {
                return Err(var_err(&decl.name, "utility variables need `values`"))
            }
            (Some(_), _) => {
                return Err(var_err(&decl.name, "only utility variables take `values`"))
            }
            (None, _) => {}
        }
        kinds.insert(v, kind);
    }

    let mut candidates = BTreeMap::new();
    let mut dependencies = BTreeMap::new();
    for (name, mech) in &doc.mechanisms {
        let v = Var::new(name);
        if graph.index_of(&v).is_none() {
            return Err(ModelError::Mechanism {
                var: name.clone(),
                message: "unknown variable".to_string(),
            });
        }
        if !mech.candidates.is_empty() {
            let mut list = Vec::new();
            for (ci, cand) in mech.candidates.iter().enumerate() {
                let cand_parents: Vec<Var> = match &cand.parents {
                    Some(ps) => ps.iter().map(|p| Var::new(p)).collect(),
                    None => graph.parents(&v).to_vec(),
                };
                for p in &cand_parents {
                    if !graph.parents(&v).contains(p) {
                        return Err(ModelError::Mechanism {
                            var: name.clone(),
                            message: format!(
                                "candidate {ci} reads `{p}`, which is not a declared parent"
                            ),
                        });
                    }
                }
                let sizes: Vec<usize> =
                    cand_parents.iter().map(|p| graph.domain(p).size()).collect();
                let dists = parse_rows(name, graph.domain(&v).size(), &sizes, &cand.rows)?;
                let cpt = Cpt::new(v.clone(), cand_parents, sizes, dists).map_err(|e| {
                    ModelError::Mechanism {
                        var: name.clone(),
                        message: format!("candidate {ci}: {e}"),
                    }
                })?;
                list.push(cpt);
            }
            candidates.insert(v.clone(), list);
        }
        match (&mech.depends_on, &mech.table) {
            (Some(reads), Some(table)) => {
                dependencies.insert(
                    v.clone(),
                    MechDependency {
                        reads: reads.iter().map(|r| Var::new(r)).collect(),
                        table: table.clone(),
                    },
                );
            }
            (None, None) => {}
            _ => {
                return Err(ModelError::Mechanism {
                    var: name.clone(),
                    message: "`depends_on` and `table` must be given together".to_string(),
                })
            }
        }
    }

    let game = CausalGame::new(graph, kinds, cpts, values)?;
    Ok(MechanisedCausalGame::new(
        game,
        candidates,
        dependencies,
        cpt_guard,
    )?)
}

/// Serialise a model back to the document format (canonical field order,
/// probabilities as reduced fractions). parse ∘ serialise is the identity.
pub fn serialise_model(model: &MechanisedCausalGame) -> Result<String, ModelError> {
    let game = model.game();
    let graph = game.graph();
    let mut variables = Vec::new();
    for v in graph.vars() {
        let (kind, agent, agents) = match game.kind(v) {
            Kind::Chance => ("chance", None, None),
            Kind::Decision { agent } => ("decision", Some(agent.clone()), None),
            Kind::Utility { agents } => {
                if agents.len() == 1 {
                    ("utility", Some(agents[0].clone()), None)
                } else {
                    ("utility", None, Some(agents.clone()))
                }
            }
        };
        let cpt = game.cpts().get(v).map(|cpt| {
            cpt.rows()
                .iter()
                .map(|row| row.probs().iter().map(format_rational).collect())
                .collect()
        });
        let values = game
            .utility_values()
            .get(v)
            .map(|vals| vals.iter().map(format_rational).collect());
        variables.push(VarDecl {
            name: v.to_string(),
            kind: kind.to_string(),
            agent,
            agents,
            parents: graph.parents(v).iter().map(|p| p.to_string()).collect(),
            domain: graph.domain(v).labels().to_vec(),
            cpt,
            values,
        });
    }

    let mut mechanisms: BTreeMap<String, MechDecl> = BTreeMap::new();
    for v in model.restricted() {
        let list = &model.candidates()[v];
        mechanisms.insert(
            v.to_string(),
            MechDecl {
                candidates: list
                    .iter()
                    .map(|cpt| CandidateDecl {
                        parents: Some(cpt.parents.iter().map(|p| p.to_string()).collect()),
                        rows: cpt
                            .rows()
                            .iter()
                            .map(|row| row.probs().iter().map(format_rational).collect())
                            .collect(),
                    })
                    .collect(),
                depends_on: None,
                table: None,
            },
        );
    }
    for (v, dep) in model.dependencies() {
        let entry = mechanisms.entry(v.to_string()).or_insert_with(|| MechDecl {
            candidates: vec![],
            depends_on: None,
            table: None,
        });
        entry.depends_on = Some(dep.reads.iter().map(|r| r.to_string()).collect());
        entry.table = Some(dep.table.clone());
    }

    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        name: None,
        variables,
        mechanisms,
    };
    Ok(toml::to_string(&doc)?)
}
