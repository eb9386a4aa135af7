//! `provgraph`: generate synthetic corpora, index and filter them, build
//! adjacency matrices and provenance graphs, and score the results.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::info;

use provgraph_core::datagen::{self, CaseSpec, OrderRange, SuiteSpec, Transform};
use provgraph_core::filtering::{build_index, IndexConfig, QueryOptions};
use provgraph_core::graphbuild::{cluster_expand_build, cluster_visual_build, kruskal_build, ExpandConfig, DEFAULT_THETA};
use provgraph_core::heuristics::build_vote_matrix;
use provgraph_core::metadata::{harvest_posts, load_posts, merge_bundles};
use provgraph_core::pipeline::{self, Method, Protocol, RunConfig};
use provgraph_core::scoring::{aggregate, score_case_with};
use provgraph_core::visual::{build_visual_matrix, ingest_matrix};
use provgraph_core::{CaseScore, DetectorConfig, HeuristicSet, ProvenanceGraph, QuantizedIndex, VoteMatrix};

#[derive(Parser)]
#[command(name = "provgraph", version, about = "Image provenance graph construction and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic suite of provenance cases.
    Gen(GenArgs),
    /// Build a retrieval index over a corpus.
    Index(IndexArgs),
    /// Rank the corpus against one query image.
    Filter(FilterArgs),
    /// Compute vote and visual matrices for a directory of images.
    Matrices(MatricesArgs),
    /// Build a provenance graph from matrix files.
    Build(BuildArgs),
    /// Score candidate graphs against ground truth.
    Score(ScoreArgs),
    /// Run a whole suite: select nodes, build matrices and graphs, score.
    Run(RunArgs),
}

fn parse_order(s: &str) -> Result<OrderRange, String> {
    s.parse()
}

fn parse_menu(s: &str) -> Result<Vec<Transform>, String> {
    s.split(',').map(str::parse).collect()
}

fn parse_sides(s: &str) -> Result<(u32, u32), String> {
    let r: OrderRange = s.parse()?;
    Ok((r.min as u32, r.max as u32))
}

/// `all`, `none`, or a comma list of heuristic names.
fn parse_heuristics(s: &str) -> Result<HeuristicSet, String> {
    match s.trim() {
        "all" => return Ok(HeuristicSet::all()),
        "none" => return Ok(HeuristicSet::none()),
        _ => {}
    }
    let mut set = HeuristicSet::none();
    for name in s.split(',') {
        let one = HeuristicSet::only(name.trim()).map_err(|e| e.to_string())?;
        set.date |= one.date;
        set.location |= one.location;
        set.camera |= one.camera;
        set.editing |= one.editing;
        set.thumbnail |= one.thumbnail;
    }
    Ok(set)
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    cases: usize,
    /// Node count per case, `min..max`.
    #[arg(long, default_value = "5..15", value_parser = parse_order)]
    order: OrderRange,
    #[arg(long, default_value_t = 0.0)]
    corruption: f64,
    /// Distractor images per case.
    #[arg(long, default_value_t = 0)]
    distractors: usize,
    /// Comma list from crop, resize, brightness, blur, rotate, splice.
    #[arg(long, value_parser = parse_menu)]
    menu: Option<Vec<Transform>>,
    /// Root image side range in pixels, `min..max`.
    #[arg(long, default_value = "192..256", value_parser = parse_sides)]
    root_side: (u32, u32),
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct IndexArgs {
    /// Corpus directory as written by `gen`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "index.pvix")]
    out: PathBuf,
    #[arg(long)]
    coarse_cells: Option<usize>,
    #[arg(long)]
    subquantizers: Option<usize>,
    #[arg(long)]
    kmeans_iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    index: PathBuf,
    /// Id of an indexed image.
    #[arg(long, conflicts_with = "query_image")]
    query: Option<String>,
    /// An image file to use as the query instead.
    #[arg(long)]
    query_image: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    stages: usize,
    #[arg(long, default_value_t = 4)]
    probe: usize,
    #[arg(long, default_value_t = 5)]
    expansion: usize,
    /// Ranked list JSON; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatricesArgs {
    /// Directory of images (one case).
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "all", value_parser = parse_heuristics)]
    heuristics: HeuristicSet,
    /// Post records whose timestamps fill in missing embedded dates.
    #[arg(long)]
    posts: Option<PathBuf>,
    #[arg(long)]
    skip_visual: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuildMethod {
    Kruskal,
    Cluster,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    method: BuildMethod,
    #[arg(long)]
    visual: Option<PathBuf>,
    #[arg(long)]
    votes: Option<PathBuf>,
    /// Query image id (cluster method).
    #[arg(long)]
    query: Option<String>,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: u32,
    /// BAM JSON output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// DOT output path, or `-` for standard output.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    truth_dir: PathBuf,
    #[arg(long)]
    candidate_dir: PathBuf,
    #[arg(long)]
    undirected: bool,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Oracle,
    EndToEnd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    KruskalMetadata,
    ClusterVisual,
    ClusterFused,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_parser = parse_heuristics)]
    heuristics: Option<HeuristicSet>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    theta: Option<u32>,
    #[arg(long)]
    undirected: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one DOT file per case.
    #[arg(long)]
    dot: bool,
}

fn gen(a: GenArgs) -> Result<()> {
    let mut case = CaseSpec {
        graph_order: a.order,
        metadata_corruption: a.corruption,
        distractor_count: a.distractors,
        seed: a.seed,
        ..CaseSpec::default()
    };
    if let Some(menu) = a.menu {
        case.transform_menu = menu.into_iter().collect();
    }
    let spec = SuiteSpec {
        cases: a.cases,
        case,
        root_side: a.root_side,
    };
    let start = Instant::now();
    let suite = datagen::generate_suite(&spec)?;
    datagen::write_suite(&suite, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    info!(stage = "gen", cases = suite.cases.len(), distractors = suite.distractors.len(), ms = start.elapsed().as_millis() as u64, "done");
    Ok(())
}

fn index(a: IndexArgs) -> Result<()> {
    let defaults = IndexConfig::default();
    let cfg = IndexConfig {
        coarse_cells: a.coarse_cells.unwrap_or(defaults.coarse_cells),
        subquantizers: a.subquantizers.unwrap_or(defaults.subquantizers),
        kmeans_iterations: a.kmeans_iterations.unwrap_or(defaults.kmeans_iterations),
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let start = Instant::now();
    let corpus = pipeline::load_corpus(&a.corpus)?;
    let assets: Vec<_> = corpus.assets().cloned().collect();
    let index: QuantizedIndex = build_index(&assets, &cfg)?;
    index.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    info!(stage = "index", images = index.image_count(), ms = start.elapsed().as_millis() as u64, "done");
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn filter(a: FilterArgs) -> Result<()> {
    let index = QuantizedIndex::load(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    let opts = QueryOptions {
        k: a.k,
        stages: a.stages,
        probe: a.probe,
        expansion: a.expansion,
    };
    let list = match (a.query, a.query_image) {
        (Some(id), _) => index.query_indexed(&id, &opts)?,
        (None, Some(path)) => {
            let asset = pipeline::load_image(&path)?;
            index.query(&asset, &IndexConfig::default().detector, &opts)?
        }
        (None, None) => bail!("give --query or --query-image"),
    };
    write_or_print(a.out.as_deref(), &(serde_json::to_string_pretty(&list)? + "\n"))
}

fn matrices(a: MatricesArgs) -> Result<()> {
    let mut assets = pipeline::load_images(&a.images)?;
    if assets.len() < 2 {
        bail!("{} holds {} image(s); need at least 2", a.images.display(), assets.len());
    }
    if let Some(p) = &a.posts {
        let harvested = harvest_posts(&load_posts(&fs::read_to_string(p)?)?)?;
        for asset in &mut assets {
            if let Some(h) = harvested.get(&asset.id) {
                asset.tags = merge_bundles(&asset.tags, h);
            }
        }
    }
    let ids: Vec<String> = assets.iter().map(|a| a.id.clone()).collect();
    fs::create_dir_all(&a.out)?;
    let start = Instant::now();
    let bundles: Vec<_> = assets.iter().map(|a| a.tags.clone()).collect();
    let votes = build_vote_matrix(&bundles, a.heuristics)?;
    fs::write(a.out.join("votes.json"), votes.to_json(&ids))?;
    info!(stage = "votes", images = ids.len(), ms = start.elapsed().as_millis() as u64, "done");
    if !a.skip_visual {
        let start = Instant::now();
        let visual = build_visual_matrix(&assets, &DetectorConfig::default())?;
        fs::write(a.out.join("visual.json"), visual.to_json(&ids))?;
        info!(stage = "visual", images = ids.len(), ms = start.elapsed().as_millis() as u64, "done");
    }
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let votes = a
        .votes
        .as_ref()
        .map(|p| -> Result<_> { Ok(VoteMatrix::from_json(&fs::read_to_string(p)?)?) })
        .transpose()?;
    let visual = a
        .visual
        .as_ref()
        .map(|p| -> Result<_> { Ok(ingest_matrix(&fs::read_to_string(p)?)?) })
        .transpose()?;
    if let (Some((_, vote_ids)), Some((_, visual_ids))) = (&votes, &visual) {
        if vote_ids != visual_ids {
            bail!("vote and visual matrices list different ids");
        }
    }
    let graph = match a.method {
        BuildMethod::Kruskal => {
            let (m, ids) = votes.as_ref().context("kruskal needs --votes")?;
            kruskal_build(m, ids)?
        }
        BuildMethod::Cluster => {
            let (d, ids) = visual.as_ref().context("cluster needs --visual")?;
            let query = a.query.as_deref().context("cluster needs --query")?;
            let q = ids.iter().position(|id| id == query).with_context(|| format!("query {query} not in the matrix"))?;
            let cfg = ExpandConfig { theta: a.theta };
            match &votes {
                Some((m, _)) => cluster_expand_build(d, m, q, ids, cfg)?,
                None => cluster_visual_build(d, q, ids, cfg)?,
            }
        }
    };
    write_or_print(a.out.as_deref(), &graph.to_bam_json())?;
    if let Some(dot) = &a.dot {
        write_or_print(Some(dot), &graph.to_dot())?;
    }
    Ok(())
}

/// Graphs in `dir`, keyed by name: `<name>.bam.json` files and
/// `<name>/truth.bam.json` case directories.
fn graphs_in(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if path.is_dir() && path.join("truth.bam.json").is_file() {
            found.push((name, path.join("truth.bam.json")));
        } else if let Some(stem) = name.strip_suffix(".bam.json") {
            found.push((stem.to_string(), path));
        }
    }
    found.sort();
    Ok(found)
}

fn score(a: ScoreArgs) -> Result<()> {
    let candidates = graphs_in(&a.candidate_dir)?;
    let mut names = Vec::new();
    let mut scores: Vec<CaseScore> = Vec::new();
    for (name, truth_path) in graphs_in(&a.truth_dir)? {
        let Some((_, cand_path)) = candidates.iter().find(|(n, _)| *n == name) else {
            bail!("no candidate graph for {name}");
        };
        let truth = ProvenanceGraph::from_bam_json(&fs::read_to_string(&truth_path)?)?;
        let cand = ProvenanceGraph::from_bam_json(&fs::read_to_string(cand_path)?)?;
        scores.push(score_case_with(&cand, &truth, !a.undirected).with_context(|| format!("scoring {name}"))?);
        names.push(name);
    }
    let report = aggregate(&scores)?;
    if let Some(out) = &a.out {
        let cases: Vec<_> = names
            .iter()
            .zip(&scores)
            .map(|(n, s)| serde_json::json!({"case": n, "vo": s.vo, "eo": s.eo, "veo": s.veo}))
            .collect();
        let json = serde_json::json!({
            "directed": !a.undirected,
            "cases": cases,
            "vo": report.vo,
            "eo": report.eo,
            "veo": report.veo,
        });
        fs::write(out, serde_json::to_string_pretty(&json)? + "\n")?;
    }
    print!("{}", report.table("candidate"));
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<RunConfig>(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.corpus {
        cfg.corpus = v;
    }
    if let Some(v) = a.protocol {
        cfg.protocol = match v {
            ProtocolArg::Oracle => Protocol::Oracle,
            ProtocolArg::EndToEnd => Protocol::EndToEnd,
        };
    }
    if let Some(v) = a.method {
        cfg.method = match v {
            MethodArg::KruskalMetadata => Method::KruskalMetadata,
            MethodArg::ClusterVisual => Method::ClusterVisual,
            MethodArg::ClusterFused => Method::ClusterFused,
        };
    }
    if let Some(v) = a.heuristics {
        cfg.heuristics = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.stages {
        cfg.stages = v;
    }
    if let Some(v) = a.index {
        cfg.index = Some(v);
    }
    if let Some(v) = a.theta {
        cfg.theta = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.out {
        cfg.out = Some(v);
    }
    cfg.undirected |= a.undirected;
    cfg.dot |= a.dot;
    let report = pipeline::run_suite(&cfg)?;
    info!(stage = "run", cases = report.cases.len(), vo = report.vo.mean, eo = report.eo.mean, veo = report.veo.mean, "done");
    if cfg.out.is_none() {
        print!("{}", report.table());
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    pipeline::init_global_pool()?;
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Index(a) => index(a),
        Command::Filter(a) => filter(a),
        Command::Matrices(a) => matrices(a),
        Command::Build(a) => build(a),
        Command::Score(a) => score(a),
        Command::Run(a) => run(a),
    }
}
