mod manifest;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::RunManifest;
use output::{fmt_num, line, pretty};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use squashscope::bounds::{
    build_message_matrix, min_depth_bound, min_weight_bound, mixing_bound, MatrixKind,
    MixingConstants,
};
use squashscope::graph::{generate, load, save, to_edge_list, FileFormat, GraphKind};
use squashscope::mpnn::{verify_bound_with, MessageFamily, ModelConfig, Readout};
use squashscope::spectral::{commute_time_spectral, normalized_spectrum};
use squashscope::{Graph, NodePair};
use squashscope_experiments::ablation::{run_ablation, AblationConfig, AblationKind};
use squashscope_experiments::corpus::molecule_corpus;
use squashscope_experiments::soundness::{
    draw_trial, mixed_corpus, run_trial, trial_box, TrialSpace,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "squashscope",
    version,
    about = "Over-squashing measures and MPNN mixing bounds"
)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "SQUASHSCOPE_THREADS", default_value_t = 1)]
    threads: usize,
    /// Write a replay manifest to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph.
    Gen(GenArgs),
    /// Commute times, resistances and distances.
    Analyze(AnalyzeArgs),
    /// Mixing bound and ÕSQ for one pair.
    Bound(BoundArgs),
    /// Minimal weight or depth for a target mixing.
    Capacity(CapacityArgs),
    /// Check the mixing bound against finite differences on random models.
    Verify(VerifyArgs),
    /// Run an ablation and write CSV tables.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Path,
    Cycle,
    Complete,
    Tree,
    Grid,
    #[value(alias = "er")]
    ErdosRenyi,
    Molecule,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    kind: KindArg,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    arity: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    extra_cycles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `.json` selects JSON, anything else an edge list. Stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    graph: PathBuf,
    /// `all` or `v,u`.
    #[arg(long, default_value = "all")]
    pairs: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindName {
    Sym,
    Rw,
    Raw,
}

impl From<KindName> for MatrixKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::Sym => MatrixKind::Sym,
            KindName::Rw => MatrixKind::Rw,
            KindName::Raw => MatrixKind::Raw,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Analytic {
    Tree,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    graph: PathBuf,
    #[arg(long, value_parser = parse_pair)]
    pair: NodePair,
    #[arg(long)]
    depth: usize,
    /// JSON with any of omega, w, c1, c2, c2nd, c_sigma.
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KindName::Sym)]
    kind: KindName,
    /// Print a closed form next to the numeric bound.
    #[arg(long, value_enum)]
    analytic: Option<Analytic>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    MinWeight,
    MinDepth,
}

#[derive(Args, Serialize)]
struct CapacityArgs {
    graph: PathBuf,
    #[arg(long, value_parser = parse_pair)]
    pair: NodePair,
    /// Target mixing.
    #[arg(long)]
    mixing: f64,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KindName::Sym)]
    kind: KindName,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FamilyArg {
    Linear,
    Gated,
    Both,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ReadoutArg {
    Sum,
    Mean,
    Both,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// `default` for the built-in small corpus, or a graph file.
    #[arg(long, default_value = "default")]
    graphs: String,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Both)]
    model_family: FamilyArg,
    #[arg(long, value_enum, default_value_t = ReadoutArg::Both)]
    readout: ReadoutArg,
    /// Feature samples per trial.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Fixed model config (JSON) used by every trial.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Constants used instead of the certified ones.
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AblationArg {
    Commute,
    Depth,
    Mixing,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    ablation: AblationArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Ablation config (JSON); defaults to the reference configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = squashscope_experiments::corpus::CORPUS_SIZE)]
    corpus_size: usize,
}

enum Failure {
    Usage(String),
    Domain(String),
    Violation(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn parse_pair(s: &str) -> Result<NodePair, String> {
    let (v, u) = s
        .split_once(',')
        .ok_or_else(|| format!("expected v,u but got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok(NodePair::new(parse(v)?, parse(u)?))
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    load(path, FileFormat::from_path(path))
        .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn load_constants(path: &Option<PathBuf>) -> Result<MixingConstants, Failure> {
    let c: MixingConstants = match path {
        Some(p) => load_json(p)?,
        None => MixingConstants::default(),
    };
    c.validate()?;
    Ok(c)
}

fn need(value: Option<usize>, flag: &str, kind: &str) -> Result<usize, Failure> {
    value.ok_or_else(|| Failure::Usage(format!("--kind {kind} needs --{flag}")))
}

fn graph_kind(a: &GenArgs) -> Result<GraphKind, Failure> {
    Ok(match a.kind {
        KindArg::Path => GraphKind::Path {
            n: need(a.n, "n", "path")?,
        },
        KindArg::Cycle => GraphKind::Cycle {
            n: need(a.n, "n", "cycle")?,
        },
        KindArg::Complete => GraphKind::Complete {
            n: need(a.n, "n", "complete")?,
        },
        KindArg::Tree => GraphKind::Tree {
            arity: need(a.arity, "arity", "tree")?,
            depth: need(a.depth, "depth", "tree")?,
        },
        KindArg::Grid => GraphKind::Grid {
            width: need(a.width, "width", "grid")?,
            height: need(a.height, "height", "grid")?,
        },
        KindArg::ErdosRenyi => GraphKind::ErdosRenyi {
            n: need(a.n, "n", "erdos-renyi")?,
            p: a.p
                .ok_or_else(|| Failure::Usage("--kind erdos-renyi needs --p".into()))?,
        },
        KindArg::Molecule => GraphKind::MoleculeLike {
            n: need(a.n, "n", "molecule")?,
            extra_cycles: a.extra_cycles.unwrap_or(1),
        },
    })
}

fn graph_summary(g: &Graph) -> Value {
    json!({
        "n": g.n(),
        "edges": g.edge_count(),
        "connected": g.is_connected(),
        "diameter": g.diameter().ok(),
        "bipartite": g.is_bipartite(),
    })
}

fn cmd_gen(a: &GenArgs) -> Result<Value, Failure> {
    let kind = graph_kind(a)?;
    let g = generate(&kind, a.seed)?;
    let summary = graph_summary(&g);
    match &a.out {
        Some(path) => {
            save(&g, path, FileFormat::from_path(path))?;
            println!("{}", pretty(&summary)?);
        }
        None => {
            print!("{}", to_edge_list(&g));
            eprintln!("{}", pretty(&summary)?);
        }
    }
    Ok(json!({ "graph_kind": kind }))
}

#[derive(Serialize)]
struct PairRow {
    v: usize,
    u: usize,
    distance: usize,
    tau: f64,
    resistance: f64,
}

fn cmd_analyze(a: &AnalyzeArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    g.require_connected()?;
    let pairs: Vec<NodePair> = if a.pairs == "all" {
        (0..g.n())
            .flat_map(|v| (v + 1..g.n()).map(move |u| NodePair::new(v, u)))
            .collect()
    } else {
        let p = parse_pair(&a.pairs).map_err(Failure::Usage)?;
        p.check(g.n(), true)?;
        vec![p]
    };
    let table = commute_time_spectral(&g)?;
    let spectrum = normalized_spectrum(&g)?;
    let lambda_1 = spectrum.eigenvalues.get(1).copied().unwrap_or(f64::NAN);
    let lambda_max = spectrum.eigenvalues.last().copied().unwrap_or(f64::NAN);
    let gamma = squashscope::spectral::gamma(&g);
    let dist = g.distance_matrix()?;
    let rows: Vec<PairRow> = pairs
        .iter()
        .map(|p| PairRow {
            v: p.v,
            u: p.u,
            distance: dist[p.v][p.u],
            tau: table.tau[(p.v, p.u)],
            resistance: table.resistance[(p.v, p.u)],
        })
        .collect();
    match a.format {
        Format::Csv => {
            println!(
                "# lambda_1={} lambda_max={} gamma={}",
                fmt_num(lambda_1),
                fmt_num(lambda_max),
                fmt_num(gamma)
            );
            println!("v,u,distance,tau,resistance");
            for r in &rows {
                println!(
                    "{},{},{},{},{}",
                    r.v,
                    r.u,
                    r.distance,
                    fmt_num(r.tau),
                    fmt_num(r.resistance)
                );
            }
        }
        Format::Json => {
            let report = json!({
                "n": g.n(),
                "edges": g.edge_count(),
                "bipartite": g.is_bipartite(),
                "lambda_1": lambda_1,
                "lambda_max": lambda_max,
                "gamma": gamma,
                "pairs": rows,
            });
            println!("{}", pretty(&report)?);
        }
    }
    Ok(())
}

fn tree_closed_form(
    g: &Graph,
    pair: NodePair,
    c: &MixingConstants,
    depth: usize,
) -> Result<Value, Failure> {
    if g.edge_count() + 1 != g.n() || !g.is_connected() {
        return Err(Failure::Domain("--analytic tree needs a tree".into()));
    }
    let r = g.shortest_distance(pair)?;
    let arity = g.degree(pair.v).max(g.degree(pair.u));
    let value = c.w.powi(-(r as i32)) * ((arity + 1) as f64).powi(r as i32 - 1);
    let mut notes = Vec::new();
    if 2 * depth != r {
        notes.push(format!(
            "closed form assumes depth = r/2 = {}",
            r as f64 / 2.0
        ));
    }
    if c.c2 != 1.0 || c.omega != 0.0 || c.c1 != 0.0 || c.c2nd != 0.0 {
        notes.push("closed form assumes omega = c1 = c2nd = 0 and c2 = 1".into());
    }
    Ok(json!({
        "arity": arity,
        "distance": r,
        "formula": "w^-r (d+1)^(r-1)",
        "osq_lower_bound": value,
        "notes": notes,
    }))
}

fn cmd_bound(a: &BoundArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    let c = load_constants(&a.constants)?;
    if a.depth == 0 {
        return Err(Failure::Usage("--depth must be at least 1".into()));
    }
    let m = build_message_matrix(&g, a.kind.into())?;
    let report = mixing_bound(&g, &m, &c, a.depth, a.pair)?;
    let mut out = serde_json::to_value(&report)?;
    out["constants"] = serde_json::to_value(c)?;
    if let Some(Analytic::Tree) = a.analytic {
        out["analytic"] = tree_closed_form(&g, a.pair, &c, a.depth)?;
    }
    println!("{}", pretty(&out)?);
    Ok(())
}

fn cmd_capacity(a: &CapacityArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    let c = load_constants(&a.constants)?;
    let out = match a.mode {
        Mode::MinWeight => {
            serde_json::to_value(min_weight_bound(&g, a.pair, c.c2, a.mixing, a.kind.into())?)?
        }
        Mode::MinDepth => {
            if !matches!(a.kind, KindName::Sym) {
                return Err(Failure::Usage("min-depth is stated for --kind sym".into()));
            }
            serde_json::to_value(min_depth_bound(&g, a.pair, &c, a.mixing)?)?
        }
    };
    println!("{}", pretty(&out)?);
    Ok(())
}

fn verify_space(a: &VerifyArgs) -> TrialSpace {
    let families = match a.model_family {
        FamilyArg::Linear => vec![MessageFamily::Linear],
        FamilyArg::Gated => vec![MessageFamily::Gated],
        FamilyArg::Both => vec![MessageFamily::Linear, MessageFamily::Gated],
    };
    let readouts = match a.readout {
        ReadoutArg::Sum => vec![Readout::Sum],
        ReadoutArg::Mean => vec![Readout::Mean],
        ReadoutArg::Both => vec![Readout::Sum, Readout::Mean],
    };
    TrialSpace {
        families,
        readouts,
        ..TrialSpace::default()
    }
}

fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    let graphs = if a.graphs == "default" {
        mixed_corpus(a.seed)?
    } else {
        vec![load_graph(Path::new(&a.graphs))?]
    };
    for g in &graphs {
        g.require_connected()?;
        if g.n() < 2 {
            return Err(Failure::Domain(
                "verify needs graphs with at least two nodes".into(),
            ));
        }
    }
    let fixed_model: Option<ModelConfig> = a.model.as_ref().map(|p| load_json(p)).transpose()?;
    let constants = a
        .constants
        .as_ref()
        .map(|p| load_json::<MixingConstants>(p))
        .transpose()?;
    let space = verify_space(a);
    let samples = a.samples as usize;
    let results: Vec<Result<Value, Failure>> = (0..a.trials as usize)
        .into_par_iter()
        .map(|i| {
            let mut trial = draw_trial(&graphs, &space, a.seed, i);
            if let Some(m) = &fixed_model {
                trial.model = m.clone();
            }
            let outcome = match &constants {
                None => run_trial(&graphs, &trial, samples)?,
                Some(c) => {
                    let model = trial.model.build()?;
                    verify_bound_with(
                        &model,
                        &graphs[trial.graph],
                        trial.pair,
                        &trial_box(),
                        samples,
                        trial.sample_seed,
                        c,
                    )?
                }
            };
            Ok(json!({
                "trial": i,
                "graph": trial.graph,
                "pair": trial.pair,
                "width": trial.model.width,
                "depth": trial.model.depth,
                "family": trial.model.family,
                "readout": trial.model.readout,
                "kind": trial.model.matrix_kind,
                "empirical": outcome.empirical,
                "theoretical": outcome.theoretical,
                "slack": outcome.slack,
                "satisfied": outcome.satisfied,
            }))
        })
        .collect();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for r in results {
        let v = r?;
        if v["satisfied"] == json!(false) {
            violations += 1;
        }
        worst = worst.min(v["slack"].as_f64().unwrap_or(f64::NAN));
        println!("{}", line(&v)?);
    }
    let summary = json!({ "summary": { "trials": a.trials, "violations": violations, "worst_slack": worst, "pass": violations == 0 } });
    println!("{}", line(&summary)?);
    if violations > 0 {
        return Err(Failure::Violation(format!(
            "{violations} of {} trials violate the bound",
            a.trials
        )));
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs, threads: usize) -> Result<(Value, Vec<u64>), Failure> {
    let kind = match a.ablation {
        AblationArg::Commute => AblationKind::CommuteTime,
        AblationArg::Depth => AblationKind::Depth,
        AblationArg::Mixing => AblationKind::Mixing,
    };
    let cfg: AblationConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => AblationConfig::reference(a.seed),
    };
    if a.corpus_size == 0 {
        return Err(Failure::Usage("--corpus-size must be positive".into()));
    }
    let graphs = molecule_corpus(
        a.corpus_size,
        squashscope_experiments::corpus::MIN_NODES,
        squashscope_experiments::corpus::MAX_NODES,
        a.seed,
    )?;
    let table = run_ablation(kind, &graphs, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let stem = match a.ablation {
        AblationArg::Commute => "commute",
        AblationArg::Depth => "depth",
        AblationArg::Mixing => "mixing",
    };
    std::fs::write(a.out.join(format!("{stem}.csv")), table.to_csv())?;
    if let Some(t1) = table.table1_csv() {
        std::fs::write(a.out.join(format!("{stem}_table1.csv")), t1)?;
    }
    let trends = table.trends();
    std::fs::write(
        a.out.join(format!("{stem}.json")),
        pretty(&json!({ "table": table, "trends": trends }))?,
    )?;
    for t in &trends {
        println!(
            "{} {} {}",
            t.model.name(),
            t.trend,
            if t.holds { "holds" } else { "fails" }
        );
    }
    let config = json!({ "args": a, "ablation_config": cfg });
    let manifest = RunManifest::new(
        "experiment",
        config.clone(),
        vec![a.seed, cfg.seed, cfg.train.seed],
        threads,
    );
    std::fs::write(
        a.out.join(format!("{stem}_manifest.json")),
        pretty(&manifest)?,
    )?;
    Ok((config, vec![a.seed, cfg.seed, cfg.train.seed]))
}

fn run(cli: &Cli) -> CmdResult {
    let (name, config, seeds) = match &cli.command {
        Command::Gen(a) => {
            let extra = cmd_gen(a)?;
            ("gen", json!({ "args": a, "resolved": extra }), vec![a.seed])
        }
        Command::Analyze(a) => {
            cmd_analyze(a)?;
            ("analyze", json!({ "args": a }), vec![])
        }
        Command::Bound(a) => {
            cmd_bound(a)?;
            (
                "bound",
                json!({ "args": a, "constants": load_constants(&a.constants)? }),
                vec![],
            )
        }
        Command::Capacity(a) => {
            cmd_capacity(a)?;
            (
                "capacity",
                json!({ "args": a, "constants": load_constants(&a.constants)? }),
                vec![],
            )
        }
        Command::Verify(a) => {
            let seeds = vec![a.seed];
            let config = json!({ "args": a });
            let result = cmd_verify(a);
            if let Some(path) = &cli.manifest {
                std::fs::write(
                    path,
                    pretty(&RunManifest::new("verify", config, seeds, cli.threads))?,
                )?;
            }
            return result;
        }
        Command::Experiment(a) => {
            let (config, seeds) = cmd_experiment(a, cli.threads)?;
            ("experiment", config, seeds)
        }
    };
    if let Some(path) = &cli.manifest {
        std::fs::write(
            path,
            pretty(&RunManifest::new(name, config, seeds, cli.threads))?,
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}
