//! Suite runs: load a generated corpus, pick each case's node set (oracle or
//! retrieved), build matrices and a graph, score against the truth.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::datagen::Suite;
use crate::filtering::{recall, FilterError, QueryOptions};
use crate::graphbuild::{cluster_expand_build, cluster_visual_build, kruskal_build, ExpandConfig, GraphError, DEFAULT_THETA};
use crate::heuristics::{build_vote_matrix, HeuristicsError};
use crate::metadata::{parse_exif, TagSource};
use crate::raster::RasterError;
use crate::scoring::{aggregate, score_case_with, MeanStd, ScoringError};
use crate::visual::{build_visual_matrix, detect, VisualError};
use crate::{CaseScore, DetectorConfig, HeuristicSet, ImageAsset, ProvenanceGraph, QuantizedIndex, Raster, TagBundle};

/// Caps the worker pool when set.
pub const THREADS_ENV: &str = "PROVGRAPH_THREADS";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: RasterError },
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("case {case}: {source}")]
    Case { case: String, source: Box<PipelineError> },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Heuristics(#[from] HeuristicsError),
    #[error(transparent)]
    Visual(#[from] VisualError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    fn in_case(self, case: &str) -> Self {
        PipelineError::Case {
            case: case.to_string(),
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Oracle,
    EndToEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KruskalMetadata,
    ClusterVisual,
    ClusterFused,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::KruskalMetadata => "kruskal_metadata",
            Method::ClusterVisual => "cluster_visual",
            Method::ClusterFused => "cluster_fused",
        }
    }

    fn uses_votes(self) -> bool {
        self != Method::ClusterVisual
    }

    fn uses_visual(self) -> bool {
        self != Method::KruskalMetadata
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub protocol: Protocol,
    pub method: Method,
    pub heuristics: HeuristicSet,
    pub k: usize,
    pub stages: usize,
    /// Index file; required by the end-to-end protocol.
    pub index: Option<PathBuf>,
    pub theta: u32,
    pub undirected: bool,
    pub detector: DetectorConfig,
    pub seed: u64,
    /// Report directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub dot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus"),
            protocol: Protocol::Oracle,
            method: Method::KruskalMetadata,
            heuristics: HeuristicSet::all(),
            k: 100,
            stages: 2,
            index: None,
            theta: DEFAULT_THETA,
            undirected: false,
            detector: DetectorConfig::default(),
            seed: 0,
            out: None,
            dot: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.method.uses_votes() && !self.heuristics.any() {
            return Err(PipelineError::Config(format!("{} needs at least one heuristic", self.method.name())));
        }
        if self.protocol == Protocol::EndToEnd && self.index.is_none() {
            return Err(PipelineError::Config("end_to_end requires an index".into()));
        }
        if self.k == 0 || self.stages == 0 {
            return Err(PipelineError::Config("k and stages must be at least 1".into()));
        }
        self.detector.validate()?;
        Ok(())
    }

    fn query_options(&self) -> QueryOptions {
        QueryOptions {
            k: self.k,
            stages: self.stages,
            ..QueryOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseInput {
    pub id: String,
    pub truth: ProvenanceGraph,
    pub query_id: String,
    /// Sorted by id.
    pub assets: Vec<ImageAsset>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    /// Sorted by case id.
    pub cases: Vec<CaseInput>,
    pub distractors: Vec<ImageAsset>,
}

impl Corpus {
    pub fn from_suite(suite: &Suite) -> Self {
        let mut cases: Vec<CaseInput> = suite
            .cases
            .iter()
            .map(|c| {
                let mut assets = c.assets.clone();
                assets.sort_by(|a, b| a.id.cmp(&b.id));
                CaseInput {
                    id: c.id.clone(),
                    truth: c.truth.clone(),
                    query_id: c.query_id.clone(),
                    assets,
                }
            })
            .collect();
        cases.sort_by(|a, b| a.id.cmp(&b.id));
        let mut distractors = suite.distractors.clone();
        distractors.sort_by(|a, b| a.id.cmp(&b.id));
        Self { cases, distractors }
    }

    pub fn image_count(&self) -> usize {
        self.cases.iter().map(|c| c.assets.len()).sum::<usize>() + self.distractors.len()
    }

    /// Case images then distractors.
    pub fn assets(&self) -> impl Iterator<Item = &ImageAsset> {
        self.cases.iter().flat_map(|c| &c.assets).chain(&self.distractors)
    }

    fn assets_mut(&mut self) -> impl Iterator<Item = &mut ImageAsset> {
        self.cases.iter_mut().flat_map(|c| &mut c.assets).chain(&mut self.distractors)
    }

    /// Runs the detector on every image that has a raster and no keypoints.
    pub fn detect_keypoints(&mut self, cfg: &DetectorConfig) -> Result<(), PipelineError> {
        let mut pending: Vec<&mut ImageAsset> = self
            .assets_mut()
            .filter(|a| a.keypoints.is_empty() && a.raster.is_some())
            .collect();
        pending.par_iter_mut().try_for_each(|a| {
            a.keypoints = detect(a.raster.as_ref().unwrap(), cfg)?;
            Ok::<_, VisualError>(())
        })?;
        Ok(())
    }
}

/// Reads one image file: raster plus embedded tags. Files without usable
/// metadata load with an all-absent bundle.
pub fn load_image(path: &Path) -> Result<ImageAsset, PipelineError> {
    let bytes = fs::read(path)?;
    let raster = Raster::decode(&bytes).map_err(|source| PipelineError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let tags = parse_exif(&bytes).unwrap_or_else(|e| {
        warn!(path = %path.display(), error = %e, "no usable metadata");
        TagBundle::empty(TagSource::Embedded)
    });
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| PipelineError::Corpus(format!("bad file name {}", path.display())))?;
    Ok(ImageAsset::new(id, tags).with_raster(raster))
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("tif" | "tiff" | "jpg" | "jpeg" | "png" | "pgm" | "ppm")
    )
}

/// Images in `dir`, sorted by id.
pub fn load_images(dir: &Path) -> Result<Vec<ImageAsset>, PipelineError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file() && is_image(p));
    paths.sort();
    let mut assets: Vec<ImageAsset> = paths.par_iter().map(|p| load_image(p)).collect::<Result<_, _>>()?;
    assets.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(assets)
}

pub fn load_case(dir: &Path) -> Result<CaseInput, PipelineError> {
    let id = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| PipelineError::Corpus(format!("bad case dir {}", dir.display())))?
        .to_string();
    let wrap = |e: PipelineError| e.in_case(&id);
    let truth = ProvenanceGraph::from_bam_json(&fs::read_to_string(dir.join("truth.bam.json")).map_err(|e| wrap(e.into()))?)
        .map_err(|e| wrap(e.into()))?;
    let query_id = fs::read_to_string(dir.join("query.txt")).map_err(|e| wrap(e.into()))?.trim().to_string();
    let assets = load_images(dir).map_err(wrap)?;
    if let Some(missing) = truth.node_ids().iter().find(|t| assets.binary_search_by(|a| a.id.cmp(t)).is_err()) {
        return Err(wrap(PipelineError::Corpus(format!("truth node {missing} has no image"))));
    }
    if truth.index_of(&query_id).is_none() {
        return Err(wrap(PipelineError::Corpus(format!("query {query_id} is not a truth node"))));
    }
    Ok(CaseInput {
        id,
        truth,
        query_id,
        assets,
    })
}

/// Loads `dir/cases/*` and, when present, `dir/distractors`.
pub fn load_corpus(dir: &Path) -> Result<Corpus, PipelineError> {
    let cases_dir = dir.join("cases");
    let mut case_dirs: Vec<PathBuf> = fs::read_dir(&cases_dir)
        .map_err(|e| PipelineError::Corpus(format!("{}: {e}", cases_dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    case_dirs.retain(|p| p.is_dir());
    case_dirs.sort();
    let cases = case_dirs.iter().map(|d| load_case(d)).collect::<Result<Vec<_>, _>>()?;
    let distractor_dir = dir.join("distractors");
    let distractors = if distractor_dir.is_dir() {
        load_images(&distractor_dir)?
    } else {
        Vec::new()
    };
    let corpus = Corpus { cases, distractors };
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = corpus.assets().find(|a| !seen.insert(a.id.as_str())) {
        return Err(PipelineError::Corpus(format!("image id {} appears twice", dup.id)));
    }
    Ok(corpus)
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub case: String,
    pub candidate: ProvenanceGraph,
    pub score: CaseScore,
    /// Truth-node recall of the retrieved set (end-to-end only).
    pub recall: Option<f64>,
}

fn timed<T>(case: &str, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    info!(case, stage, ms = start.elapsed().as_millis() as u64, "done");
    out
}

/// Builds the configured graph over `assets` (sorted by id).
pub fn build_graph(assets: &[ImageAsset], query_id: &str, cfg: &RunConfig) -> Result<ProvenanceGraph, PipelineError> {
    let ids: Vec<String> = assets.iter().map(|a| a.id.clone()).collect();
    if assets.len() < 2 {
        return Ok(ProvenanceGraph::new(ids, [])?);
    }
    let q = ids
        .iter()
        .position(|id| id == query_id)
        .ok_or_else(|| PipelineError::Corpus(format!("query {query_id} not among the candidates")))?;
    let votes = if cfg.method.uses_votes() {
        let bundles: Vec<TagBundle> = assets.iter().map(|a| a.tags.clone()).collect();
        Some(build_vote_matrix(&bundles, cfg.heuristics)?)
    } else {
        None
    };
    let visual = if cfg.method.uses_visual() {
        Some(build_visual_matrix(assets, &cfg.detector)?)
    } else {
        None
    };
    let expand = ExpandConfig { theta: cfg.theta };
    Ok(match cfg.method {
        Method::KruskalMetadata => kruskal_build(votes.as_ref().unwrap(), &ids)?,
        Method::ClusterVisual => cluster_visual_build(visual.as_ref().unwrap(), q, &ids, expand)?,
        Method::ClusterFused => cluster_expand_build(visual.as_ref().unwrap(), votes.as_ref().unwrap(), q, &ids, expand)?,
    })
}

fn run_case(
    case: &CaseInput,
    cfg: &RunConfig,
    lookup: &HashMap<&str, &ImageAsset>,
    index: Option<&QuantizedIndex>,
) -> Result<CaseOutcome, PipelineError> {
    let (assets, recall) = match cfg.protocol {
        Protocol::Oracle => {
            let assets: Vec<ImageAsset> = case
                .assets
                .iter()
                .filter(|a| case.truth.index_of(&a.id).is_some())
                .cloned()
                .collect();
            (assets, None)
        }
        Protocol::EndToEnd => {
            let index = index.expect("validated");
            let ranked = timed(&case.id, "filter", || index.query_indexed(&case.query_id, &cfg.query_options()))?;
            let truth_ids = case.truth.node_ids().to_vec();
            let r = recall(&ranked, &truth_ids);
            let mut assets = vec![(*lookup[case.query_id.as_str()]).clone()];
            for id in ranked.ids() {
                let a = lookup
                    .get(id)
                    .ok_or_else(|| PipelineError::Corpus(format!("index image {id} is not in the corpus")))?;
                assets.push((*a).clone());
            }
            assets.sort_by(|a, b| a.id.cmp(&b.id));
            (assets, Some(r))
        }
    };
    let candidate = timed(&case.id, "build", || build_graph(&assets, &case.query_id, cfg))?;
    let score = score_case_with(&candidate, &case.truth, !cfg.undirected)?;
    Ok(CaseOutcome {
        case: case.id.clone(),
        candidate,
        score,
        recall,
    })
}

fn pool_builder() -> Result<rayon::ThreadPoolBuilder, PipelineError> {
    let builder = rayon::ThreadPoolBuilder::new();
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| PipelineError::Config(format!("{THREADS_ENV}={v:?} is not a count")))?;
            Ok(builder.num_threads(n))
        }
        Err(_) => Ok(builder),
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, PipelineError> {
    pool_builder()?
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))
}

/// Sizes the global rayon pool from the environment; call once at startup.
pub fn init_global_pool() -> Result<(), PipelineError> {
    pool_builder()?
        .build_global()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))
}

/// Runs every case of an in-memory corpus; outcomes come back in case order.
pub fn run_cases(corpus: &Corpus, cfg: &RunConfig, index: Option<&QuantizedIndex>) -> Result<Vec<CaseOutcome>, PipelineError> {
    cfg.validate()?;
    if cfg.protocol == Protocol::EndToEnd && index.is_none() {
        return Err(PipelineError::Config("end_to_end requires an index".into()));
    }
    let lookup: HashMap<&str, &ImageAsset> = corpus.assets().map(|a| (a.id.as_str(), a)).collect();
    worker_pool()?.install(|| {
        corpus
            .cases
            .par_iter()
            .map(|c| run_case(c, cfg, &lookup, index).map_err(|e| e.in_case(&c.id)))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case: String,
    pub nodes: usize,
    pub edges: usize,
    pub vo: f64,
    pub eo: f64,
    pub veo: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub method: Method,
    pub heuristics: HeuristicSet,
    pub k: usize,
    pub stages: usize,
    pub theta: u32,
    pub directed: bool,
    pub cases: Vec<CaseRecord>,
    pub vo: MeanStd<f64>,
    pub eo: MeanStd<f64>,
    pub veo: MeanStd<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_recall: Option<f64>,
}

impl RunReport {
    pub fn new(cfg: &RunConfig, outcomes: &[CaseOutcome]) -> Result<Self, PipelineError> {
        let scores: Vec<CaseScore> = outcomes.iter().map(|o| o.score).collect();
        let summary = aggregate(&scores)?;
        let recalls: Vec<f64> = outcomes.iter().filter_map(|o| o.recall).collect();
        Ok(Self {
            protocol: cfg.protocol,
            method: cfg.method,
            heuristics: cfg.heuristics,
            k: cfg.k,
            stages: cfg.stages,
            theta: cfg.theta,
            directed: !cfg.undirected,
            cases: outcomes
                .iter()
                .map(|o| CaseRecord {
                    case: o.case.clone(),
                    nodes: o.candidate.node_count(),
                    edges: o.candidate.edge_count(),
                    vo: o.score.vo,
                    eo: o.score.eo,
                    veo: o.score.veo,
                    recall: o.recall,
                })
                .collect(),
            vo: summary.vo,
            eo: summary.eo,
            veo: summary.veo,
            mean_recall: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-case rows, then the suite line as `mean±std`.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10}  {:>5}  {:>5}  {:>6}  {:>6}  {:>6}", "case", "nodes", "edges", "VO", "EO", "VEO");
        for c in &self.cases {
            let _ = writeln!(
                s,
                "{:<10}  {:>5}  {:>5}  {:>6.3}  {:>6.3}  {:>6.3}",
                c.case, c.nodes, c.edges, c.vo, c.eo, c.veo
            );
        }
        let cell = |m: &MeanStd<f64>| format!("{:.3}±{:.3}", m.mean, m.std);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<18}  {:<13}  {:<13}  {:<13}", "method", "VO", "EO", "VEO");
        let _ = writeln!(
            s,
            "{:<18}  {:<13}  {:<13}  {:<13}",
            self.method.name(),
            cell(&self.vo),
            cell(&self.eo),
            cell(&self.veo)
        );
        if let Some(r) = self.mean_recall {
            let _ = writeln!(s, "mean recall@{}: {r:.3}", self.k);
        }
        s
    }
}

/// `report.json`, `report.txt`, `candidates/<case>.bam.json`, and with
/// `dot` also `dot/<case>.dot`.
pub fn write_outputs(dir: &Path, report: &RunReport, outcomes: &[CaseOutcome], dot: bool) -> Result<(), PipelineError> {
    fs::create_dir_all(dir.join("candidates"))?;
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("report.txt"), report.table())?;
    for o in outcomes {
        fs::write(dir.join("candidates").join(format!("{}.bam.json", o.case)), o.candidate.to_bam_json())?;
    }
    if dot {
        fs::create_dir_all(dir.join("dot"))?;
        for o in outcomes {
            fs::write(dir.join("dot").join(format!("{}.dot", o.case)), o.candidate.to_dot())?;
        }
    }
    Ok(())
}

/// Full run from disk: load, (optionally) load the index, run, report.
pub fn run_suite(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let mut corpus = timed("-", "load", || load_corpus(&cfg.corpus))?;
    if corpus.cases.is_empty() {
        return Err(PipelineError::Corpus(format!("no cases under {}", cfg.corpus.display())));
    }
    if cfg.method.uses_visual() {
        timed("-", "detect", || corpus.detect_keypoints(&cfg.detector))?;
    }
    let index = match (&cfg.protocol, &cfg.index) {
        (Protocol::EndToEnd, Some(p)) => Some(timed("-", "index-load", || QuantizedIndex::load(p))?),
        _ => None,
    };
    let outcomes = run_cases(&corpus, cfg, index.as_ref())?;
    let report = RunReport::new(cfg, &outcomes)?;
    if let Some(out) = &cfg.out {
        write_outputs(out, &report, &outcomes, cfg.dot)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
