//! Cross-checks between independent computations of the same quantities.

use cgd_core::discovery::{discover, Budget};
use cgd_core::fixtures::find;
use cgd_core::game::{induced_scm, PolicyProfile};
use cgd_core::graphops::mechanise;
use cgd_core::oracle::MechanisedCausalGame;
use cgd_core::prob::{Cpt, Dist};
use cgd_core::scm::{joint_distribution, marginal_dist};
use cgd_core::Var;

fn v(name: &str) -> Var {
    Var::new(name)
}

fn model(name: &str) -> MechanisedCausalGame {
    find(name).expect("bundled fixture").model().expect("fixture parses")
}

/// Discovery agrees with the purely graphical mechanisation of the declared
/// game graph on every fixture without declared mechanism dependencies.
#[test]
fn discovery_matches_graphical_mechanisation() {
    for name in ["mouse", "zero", "ndu", "cirl", "thermometer_btc"] {
        let m = model(name);
        let c = discover(&m, &Budget::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let graphical = mechanise(&m.game().game_graph()).unwrap();
        assert_eq!(c.e_mech(), graphical.e_mech(), "{name} e_mech");
        assert_eq!(c.e_term(), graphical.e_term(), "{name} e_term");
        assert_eq!(c.e_obj(), graphical.e_obj(), "{name} e_obj");
    }
}

/// Sanity check that induced-SCM joints and marginals agree on coordinate
/// order with the rest of the suite.
#[test]
fn joint_marginals_are_consistent_on_mouse() {
    let m = model("mouse");
    let game = m.game();
    let profile: PolicyProfile = [(
        v("D"),
        Cpt::new(v("D"), vec![], vec![], vec![Dist::point(2, 1)]).unwrap(),
    )]
    .into_iter()
    .collect();
    let (graph, cpts) = induced_scm(game, &profile).unwrap();
    let joint = joint_distribution(&graph, &cpts, &[]).unwrap();
    let d = marginal_dist(&joint, &v("D")).unwrap();
    assert_eq!(d.point_outcome(), Some(1));
}
