use super::*;
use crate::datagen::{generate_suite, write_suite, CaseSpec, OrderRange, SuiteSpec};
use crate::filtering::{build_index, IndexConfig};

fn small_suite(corruption: f64) -> Suite {
    generate_suite(&SuiteSpec {
        cases: 3,
        case: CaseSpec {
            graph_order: OrderRange { min: 4, max: 6 },
            metadata_corruption: corruption,
            distractor_count: 3,
            seed: 5,
            ..CaseSpec::default()
        },
        root_side: (160, 192),
    })
    .unwrap()
}

fn cfg(method: Method) -> RunConfig {
    RunConfig {
        method,
        ..RunConfig::default()
    }
}

#[test]
fn fused_without_heuristics_is_a_config_error() {
    let c = RunConfig {
        heuristics: HeuristicSet::none(),
        ..cfg(Method::ClusterFused)
    };
    assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
    let visual_only = RunConfig {
        heuristics: HeuristicSet::none(),
        ..cfg(Method::ClusterVisual)
    };
    assert!(visual_only.validate().is_ok());
    let e2e = RunConfig {
        protocol: Protocol::EndToEnd,
        ..cfg(Method::KruskalMetadata)
    };
    assert!(matches!(e2e.validate(), Err(PipelineError::Config(_))));
}

#[test]
fn oracle_kruskal_keeps_every_truth_node() {
    let corpus = Corpus::from_suite(&small_suite(0.0));
    let out = run_cases(&corpus, &cfg(Method::KruskalMetadata), None).unwrap();
    assert_eq!(out.len(), 3);
    for o in &out {
        assert_eq!(o.score.vo, 1.0);
        assert!(o.recall.is_none());
    }
    assert!(out.windows(2).all(|w| w[0].case < w[1].case));
}

#[test]
fn single_heuristic_run_matches_direct_build() {
    let corpus = Corpus::from_suite(&small_suite(0.3));
    let c = RunConfig {
        heuristics: HeuristicSet::only("camera").unwrap(),
        ..cfg(Method::KruskalMetadata)
    };
    let out = run_cases(&corpus, &c, None).unwrap();
    for (o, case) in out.iter().zip(&corpus.cases) {
        let bundles: Vec<TagBundle> = case.assets.iter().map(|a| a.tags.clone()).collect();
        let ids: Vec<String> = case.assets.iter().map(|a| a.id.clone()).collect();
        let m = build_vote_matrix(&bundles, HeuristicSet::only("camera").unwrap()).unwrap();
        assert_eq!(o.candidate, kruskal_build(&m, &ids).unwrap());
    }
}

#[test]
fn end_to_end_with_k1_misses_nodes() {
    let mut corpus = Corpus::from_suite(&small_suite(0.0));
    let icfg = IndexConfig {
        coarse_cells: 8,
        ..IndexConfig::default()
    };
    let all: Vec<ImageAsset> = corpus.assets().cloned().collect();
    let index: QuantizedIndex = build_index(&all, &icfg).unwrap();
    corpus.detect_keypoints(&DetectorConfig::default()).unwrap();
    let c = RunConfig {
        protocol: Protocol::EndToEnd,
        index: Some("unused".into()),
        k: 1,
        ..cfg(Method::ClusterFused)
    };
    let out = run_cases(&corpus, &c, Some(&index)).unwrap();
    for (o, case) in out.iter().zip(&corpus.cases) {
        assert!(o.candidate.node_count() <= 2);
        if case.truth.node_count() > 2 {
            assert!(o.score.vo < 1.0);
        }
        assert!(o.recall.is_some());
    }
}

#[test]
fn disk_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_suite(&small_suite(0.3), dir.path()).unwrap();
    let corpus = load_corpus(dir.path()).unwrap();
    assert_eq!(corpus.cases.len(), 3);
    assert_eq!(corpus.distractors.len(), 9);
    let run = |out: &str| {
        let c = RunConfig {
            corpus: dir.path().to_path_buf(),
            out: Some(dir.path().join(out)),
            dot: true,
            ..cfg(Method::ClusterFused)
        };
        run_suite(&c).unwrap();
        fs::read(dir.path().join(out).join("report.json")).unwrap()
    };
    let a = run("r1");
    assert_eq!(a, run("r2"));
    assert!(dir.path().join("r1/dot/case-000.dot").exists());
    let report: RunReport = serde_json::from_slice(&a).unwrap();
    assert_eq!(report.cases.len(), 3);
    assert!(fs::read_to_string(dir.path().join("r1/report.txt")).unwrap().contains("cluster_fused"));
}

#[test]
fn missing_truth_image_names_the_case() {
    let dir = tempfile::tempdir().unwrap();
    let suite = small_suite(0.0);
    write_suite(&suite, dir.path()).unwrap();
    let victim = &suite.cases[1].assets[0].id;
    fs::remove_file(dir.path().join("cases/case-001").join(format!("{victim}.tif"))).unwrap();
    let err = load_corpus(dir.path()).unwrap_err();
    assert!(err.to_string().starts_with("case case-001"), "{err}");
}
