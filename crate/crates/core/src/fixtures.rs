//! Bundled example models, each shipped with the game graph that the
//! discovery pipeline is expected to produce from it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::game::GameGraph;
use crate::model::{parse_model, ModelError};
use crate::oracle::MechanisedCausalGame;
use crate::prob::Var;

pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
    /// The game graph `discover` + `identify_agents` should produce.
    pub expected: &'static str,
}

macro_rules! fixture {
    ($name:literal) => {
        Fixture {
            name: $name,
            source: include_str!(concat!("../fixtures/", $name, ".toml")),
            expected: include_str!(concat!("../fixtures/expected/", $name, ".json")),
        }
    };
}

pub const FIXTURES: &[Fixture] = &[
    fixture!("mouse"),
    fixture!("recommender"),
    fixture!("actor_critic"),
    fixture!("mamdp"),
    fixture!("zero"),
    fixture!("cirl"),
    fixture!("ndu"),
    fixture!("thermometer_btc"),
    fixture!("thermometer_tc"),
    fixture!("thermometer_bt"),
];

pub fn find(name: &str) -> Option<&'static Fixture> {
    let name = name.strip_prefix("fixtures/").unwrap_or(name);
    FIXTURES.iter().find(|f| f.name == name)
}

impl Fixture {
    pub fn model(&self) -> Result<MechanisedCausalGame, ModelError> {
        parse_model(self.source)
    }

    pub fn expected_graph(&self) -> GameGraph {
        serde_json::from_str::<GameGraphDoc>(self.expected)
            .expect("bundled expectation parses")
            .into_graph()
    }
}

/// JSON document form of a game graph. Field names are part of the stable
/// output schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameGraphDoc {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub decisions: Vec<String>,
    pub utilities: Vec<String>,
    pub colour: BTreeMap<String, Vec<String>>,
}

impl GameGraphDoc {
    pub fn from_graph(g: &GameGraph) -> Self {
        GameGraphDoc {
            nodes: g.nodes.iter().map(Var::to_string).collect(),
            edges: g
                .edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            decisions: g.decisions.iter().map(Var::to_string).collect(),
            utilities: g.utilities.iter().map(Var::to_string).collect(),
            colour: g
                .colour
                .iter()
                .map(|(v, owners)| (v.to_string(), owners.iter().cloned().collect()))
                .collect(),
        }
    }

    pub fn into_graph(self) -> GameGraph {
        GameGraph {
            nodes: self.nodes.iter().map(Var::new).collect(),
            edges: self
                .edges
                .iter()
                .map(|(a, b)| (Var::new(a), Var::new(b)))
                .collect(),
            decisions: self.decisions.iter().map(Var::new).collect(),
            utilities: self.utilities.iter().map(Var::new).collect(),
            colour: self
                .colour
                .iter()
                .map(|(v, owners)| {
                    (
                        Var::new(v),
                        owners.iter().cloned().collect::<BTreeSet<String>>(),
                    )
                })
                .collect(),
        }
    }
}
