//! `cgd`: solve, discover, and export causal games from the command line.
//!
//! Exit codes: 0 on success, 1 on model errors (unreadable or invalid model
//! files), 2 on algorithm errors (budget exhaustion, shape violations, no
//! equilibrium). All diagnostics go to standard error; results go to
//! standard output.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cgd_core::discovery::{discover, discover_game, Budget, DEFAULT_QUERY_BUDGET};
use cgd_core::dot::{game_dot, mechanised_dot};
use cgd_core::fixtures::{self, GameGraphDoc};
use cgd_core::game::{expected_utility, solve, CausalGame, GameGraph, SolveOptions};
use cgd_core::graphops::{
    check_assumption1, mechanise, mechanism_name, verify_left_inverse_game,
    verify_left_inverse_mech, MechanisedGraph,
};
use cgd_core::model::parse_model;
use cgd_core::oracle::MechanisedCausalGame;
use cgd_core::prob::{enumerate_indices, Cpt, Var};

/// Environment variable overriding the default query budget.
const BUDGET_ENV: &str = "CGD_BUDGET";

#[derive(Parser)]
#[command(name = "cgd", version, about = "Causal game solving and agent discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the game for its equilibrium profile and expected utilities.
    Solve(ModelArgs),
    /// Infer the edge-labelled mechanised graph from interventional queries.
    Discover(ModelArgs),
    /// Infer the game graph: decisions, utilities, and agent colouring.
    Identify(ModelArgs),
    /// Mechanise the declared game graph (graphical, no queries).
    Mechanise(ModelArgs),
    /// Report the identification/mechanisation roundtrip identities.
    Roundtrip(ModelArgs),
    /// Export a graph as Graphviz DOT.
    ExportDot {
        #[command(flatten)]
        model: ModelArgs,
        /// Which graph to export.
        #[arg(long, value_enum, default_value_t = GraphChoice::Game)]
        graph: GraphChoice,
    },
    /// Operations over the bundled fixtures.
    Fixtures {
        #[command(subcommand)]
        op: FixturesOp,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model file path or bundled fixture name (e.g. fixtures/mouse).
    model: String,
    /// Query budget for discovery (overrides CGD_BUDGET and the default).
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Suppress the restricted-candidate completeness warning.
    #[arg(long)]
    restricted_ok: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphChoice {
    Game,
    Mech,
}

#[derive(Subcommand)]
enum FixturesOp {
    /// List the bundled fixture names.
    List,
    /// Run identification on fixtures and compare with the expected graphs.
    Run {
        /// Run a single fixture instead of all of them.
        name: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
    },
}

enum CliError {
    /// Unreadable or invalid model input: exit 1.
    Model(String),
    /// Algorithm failure (budget exhaustion, no equilibrium, bad graph,
    /// unusable flag combination): exit 2.
    Algo(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Model(_) => 1,
            CliError::Algo(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Model(m) | CliError::Algo(m) => m,
        }
    }
}

fn model_err(e: impl std::fmt::Display) -> CliError {
    CliError::Model(e.to_string())
}

fn algo_err(e: impl std::fmt::Display) -> CliError {
    CliError::Algo(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_model(name: &str) -> Result<MechanisedCausalGame, CliError> {
    if Path::new(name).is_file() {
        let text = std::fs::read_to_string(name)
            .map_err(|e| CliError::Model(format!("cannot read {name}: {e}")))?;
        return parse_model(&text).map_err(model_err);
    }
    match fixtures::find(name) {
        Some(f) => f.model().map_err(model_err),
        None => Err(CliError::Model(format!(
            "`{name}` is neither a readable model file nor a bundled fixture"
        ))),
    }
}

fn resolve_budget(flag: Option<u64>) -> Result<Budget, CliError> {
    if let Some(limit) = flag {
        return Ok(Budget { limit });
    }
    match std::env::var(BUDGET_ENV) {
        Ok(s) => match s.parse() {
            Ok(limit) => Ok(Budget { limit }),
            Err(_) => Err(CliError::Algo(format!(
                "{BUDGET_ENV} must be an integer, got `{s}`"
            ))),
        },
        Err(_) => Ok(Budget { limit: DEFAULT_QUERY_BUDGET }),
    }
}

/// Completeness caveat for models that restrict candidate mechanisms: the
/// discovery guarantee only covers edges witnessed within the declared
/// candidate sets.
fn warn_restricted(model: &MechanisedCausalGame, suppressed: bool) {
    if suppressed || model.restricted().is_empty() {
        return;
    }
    let vars: Vec<String> = model.restricted().iter().map(Var::to_string).collect();
    eprintln!(
        "warning: candidate mechanisms are restricted for {}; discovered edges are only \
         complete over the declared candidates (--restricted-ok silences this)",
        vars.join(", ")
    );
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(args) => {
            let model = load_model(&args.model)?;
            cmd_solve(model.game(), args.format)
        }
        Command::Discover(args) => {
            let model = load_model(&args.model)?;
            warn_restricted(&model, args.restricted_ok);
            let budget = resolve_budget(args.budget)?;
            let c = discover(&model, &budget).map_err(algo_err)?;
            print_mechanised(&c, args.format)
        }
        Command::Identify(args) => {
            let model = load_model(&args.model)?;
            warn_restricted(&model, args.restricted_ok);
            let budget = resolve_budget(args.budget)?;
            let g = discover_game(&model, &budget).map_err(algo_err)?;
            print_game(&g, args.format)
        }
        Command::Mechanise(args) => {
            let model = load_model(&args.model)?;
            let c = mechanise(&model.game().game_graph()).map_err(algo_err)?;
            print_mechanised(&c, args.format)
        }
        Command::Roundtrip(args) => {
            let model = load_model(&args.model)?;
            cmd_roundtrip(&model.game().game_graph(), args.format)
        }
        Command::ExportDot { model, graph } => {
            let model = load_model(&model.model)?;
            let g = model.game().game_graph();
            match graph {
                GraphChoice::Game => print!("{}", game_dot(&g)),
                GraphChoice::Mech => {
                    print!("{}", mechanised_dot(&mechanise(&g).map_err(algo_err)?))
                }
            }
            Ok(())
        }
        Command::Fixtures { op: FixturesOp::List } => {
            for f in fixtures::FIXTURES {
                println!("{}", f.name);
            }
            Ok(())
        }
        Command::Fixtures { op: FixturesOp::Run { name, budget } } => cmd_fixtures_run(name, budget),
    }
}

// --- solve ---

#[derive(Serialize)]
struct SolveDoc {
    profile: BTreeMap<String, Vec<RuleEntry>>,
    eu: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct RuleEntry {
    context: BTreeMap<String, String>,
    action: String,
}

fn rule_entries(game: &CausalGame, rule: &Cpt) -> Vec<RuleEntry> {
    let d = &rule.child;
    let mut entries = Vec::new();
    for ctx in enumerate_indices(&rule.parent_sizes) {
        let context = rule
            .parents
            .iter()
            .zip(&ctx)
            .map(|(p, &i)| (p.to_string(), game.graph().domain(p).label(i).to_string()))
            .collect();
        let action = rule
            .row(&ctx)
            .point_outcome()
            .expect("solved rules are deterministic");
        entries.push(RuleEntry {
            context,
            action: game.graph().domain(d).label(action).to_string(),
        });
    }
    entries
}

fn rule_text(game: &CausalGame, rule: &Cpt) -> String {
    let d = &rule.child;
    let entries = rule_entries(game, rule);
    if rule.parents.is_empty() {
        return format!("{d} := {}", entries[0].action);
    }
    let parts: Vec<String> = entries
        .iter()
        .map(|e| {
            let lhs: Vec<String> = rule
                .parents
                .iter()
                .map(|p| format!("{p}={}", e.context[&p.to_string()]))
                .collect();
            format!("{} -> {}", lhs.join(","), e.action)
        })
        .collect();
    format!("{d} := [{}]", parts.join("; "))
}

fn cmd_solve(game: &CausalGame, format: Format) -> Result<(), CliError> {
    let profile = solve(game, &[], &SolveOptions::default()).map_err(algo_err)?;
    let mut eus = BTreeMap::new();
    for agent in game.agents() {
        let eu = expected_utility(game, &profile, &agent, &[]).map_err(algo_err)?;
        eus.insert(agent, eu);
    }
    match format {
        Format::Text => {
            let mut parts: Vec<String> = game
                .decisions()
                .iter()
                .map(|d| rule_text(game, &profile[d]))
                .collect();
            parts.extend(eus.iter().map(|(a, eu)| format!("EU({a}) = {eu}")));
            println!("{}", parts.join(", "));
        }
        Format::Json => {
            let doc = SolveDoc {
                profile: profile
                    .iter()
                    .map(|(d, rule)| (d.to_string(), rule_entries(game, rule)))
                    .collect(),
                eu: eus.iter().map(|(a, eu)| (a.clone(), eu.to_string())).collect(),
            };
            print_json(&doc);
        }
        Format::Dot => {
            return Err(CliError::Algo(
                "dot output is not defined for solve; use text or json".into(),
            ))
        }
    }
    Ok(())
}

// --- graph printing ---

/// JSON document form of a mechanised graph. Field names are part of the
/// stable output schema. Functional edges are included even though they are
/// derivable (one per object variable) so consumers need no convention.
#[derive(Serialize)]
struct MechanisedDoc {
    objects: Vec<String>,
    e_obj: Vec<(String, String)>,
    e_func: Vec<(String, String)>,
    e_mech: Vec<(String, String)>,
    e_term: Vec<(String, String)>,
}

impl MechanisedDoc {
    fn new(c: &MechanisedGraph) -> Self {
        let mech_pair =
            |(w, v): &(Var, Var)| (mechanism_name(w), mechanism_name(v));
        MechanisedDoc {
            objects: c.object_nodes().iter().map(Var::to_string).collect(),
            e_obj: c
                .e_obj()
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            e_func: c
                .e_func()
                .iter()
                .map(|(m, v)| (m.clone(), v.to_string()))
                .collect(),
            e_mech: c.e_mech().iter().map(mech_pair).collect(),
            e_term: c.e_term().iter().map(mech_pair).collect(),
        }
    }
}

fn edge_list(edges: &[(String, String)]) -> String {
    let parts: Vec<String> = edges.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
    parts.join(", ")
}

fn print_mechanised(c: &MechanisedGraph, format: Format) -> Result<(), CliError> {
    match format {
        Format::Text => {
            let doc = MechanisedDoc::new(c);
            println!("objects: {}", doc.objects.join(", "));
            println!("e_obj:   {}", edge_list(&doc.e_obj));
            println!("e_func:  {}", edge_list(&doc.e_func));
            println!("e_mech:  {}", edge_list(&doc.e_mech));
            println!("e_term:  {}", edge_list(&doc.e_term));
        }
        Format::Json => print_json(&MechanisedDoc::new(c)),
        Format::Dot => print!("{}", mechanised_dot(c)),
    }
    Ok(())
}

fn print_game(g: &GameGraph, format: Format) -> Result<(), CliError> {
    match format {
        Format::Text => {
            for v in &g.nodes {
                let kind = if g.decisions.contains(v) {
                    "decision"
                } else if g.utilities.contains(v) {
                    "utility"
                } else {
                    "chance"
                };
                let owners = match g.colour.get(v) {
                    Some(agents) => {
                        let names: Vec<&str> = agents.iter().map(String::as_str).collect();
                        format!(" ({})", names.join(", "))
                    }
                    None => String::new(),
                };
                println!("{v}: {kind}{owners}");
            }
            let edges: Vec<(String, String)> = g
                .edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            println!("edges: {}", edge_list(&edges));
        }
        Format::Json => print_json(&GameGraphDoc::from_graph(g)),
        Format::Dot => print!("{}", game_dot(g)),
    }
    Ok(())
}

fn print_json<T: Serialize>(doc: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(doc).expect("documents serialise")
    );
}

// --- roundtrip ---

#[derive(Serialize)]
struct CheckDoc {
    passed: bool,
    failures: Vec<String>,
}

#[derive(Serialize)]
struct RoundtripDoc {
    assumption1: CheckDoc,
    game_roundtrip: CheckDoc,
    mech_roundtrip: CheckDoc,
}

fn cmd_roundtrip(g: &GameGraph, format: Format) -> Result<(), CliError> {
    let a1 = check_assumption1(g);
    let game_rt = verify_left_inverse_game(g).map_err(algo_err)?;
    let mech_rt = verify_left_inverse_mech(&mechanise(g).map_err(algo_err)?).map_err(algo_err)?;
    let doc = RoundtripDoc {
        assumption1: CheckDoc { passed: a1.holds, failures: a1.diagnostics },
        game_roundtrip: CheckDoc { passed: game_rt.passed, failures: game_rt.failures },
        mech_roundtrip: CheckDoc { passed: mech_rt.passed, failures: mech_rt.failures },
    };
    match format {
        Format::Text => {
            let verdict = |ok: bool| if ok { "pass" } else { "fail" };
            let report = [
                ("connectivity assumption", &doc.assumption1),
                ("identify after mechanise", &doc.game_roundtrip),
                ("mechanise after identify", &doc.mech_roundtrip),
            ];
            for (label, check) in report {
                println!("{label}: {}", verdict(check.passed));
                for failure in &check.failures {
                    println!("  - {failure}");
                }
            }
        }
        Format::Json => print_json(&doc),
        Format::Dot => {
            return Err(CliError::Algo(
                "dot output is not defined for roundtrip; use text or json".into(),
            ))
        }
    }
    // Failed identities are a report, not an error.
    Ok(())
}

// --- fixtures run ---

fn cmd_fixtures_run(name: Option<String>, budget: Option<u64>) -> Result<(), CliError> {
    let budget = resolve_budget(budget)?;
    let selected: Vec<&fixtures::Fixture> = match &name {
        Some(n) => vec![fixtures::find(n)
            .ok_or_else(|| CliError::Model(format!("unknown fixture `{n}`")))?],
        None => fixtures::FIXTURES.iter().collect(),
    };
    let mut failures = 0;
    for f in selected {
        let model = f.model().map_err(model_err)?;
        let start = std::time::Instant::now();
        match discover_game(&model, &budget) {
            Ok(g) if g.same_graph(&f.expected_graph()) => {
                println!("{}: ok ({:.1?})", f.name, start.elapsed());
            }
            Ok(_) => {
                failures += 1;
                println!("{}: MISMATCH with expected graph", f.name);
            }
            Err(e) => {
                failures += 1;
                println!("{}: ERROR {e}", f.name);
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Algo(format!("{failures} fixture(s) failed")));
    }
    Ok(())
}
