//! Dev utility: run discovery on a fixture and print what it found.

use std::time::Instant;

use cgd_core::discovery::{discover, identify_agents, Budget};
use cgd_core::fixtures;

fn main() {
    let name = std::env::args().nth(1).expect("fixture name");
    let f = fixtures::find(&name).expect("known fixture");
    let model = f.model().expect("parses");
    let budget = match std::env::args().nth(2) {
        Some(n) => Budget { limit: n.parse().expect("numeric budget") },
        None => Budget::default(),
    };
    let start = Instant::now();
    match discover(&model, &budget) {
        Ok(g) => {
            println!("elapsed: {:.1?}", start.elapsed());
            println!("e_obj:  {:?}", g.e_obj());
            println!("e_mech: {:?}", g.e_mech());
            println!("e_term: {:?}", g.e_term());
            let id = identify_agents(&g);
            println!("decisions: {:?}", id.decisions);
            println!("utilities: {:?}", id.utilities);
            println!("colour: {:?}", id.colour);
            println!("matches expected: {}", id.same_graph(&f.expected_graph()));
        }
        Err(e) => println!("error after {:.1?}: {e}", start.elapsed()),
    }
}
