use super::*;
use crate::heuristics::{vote_date, HeuristicSet};
use crate::metadata::parse_exif;

fn roots(n: usize, seed: u64) -> Vec<Raster> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| texture(&mut rng, 200, 180)).collect()
}

fn spec(order: usize, menu: &[Transform], corruption: f64, seed: u64) -> CaseSpec {
    CaseSpec {
        graph_order: OrderRange { min: order, max: order },
        transform_menu: menu.iter().copied().collect(),
        metadata_corruption: corruption,
        distractor_count: 0,
        seed,
    }
}

#[test]
fn order_two_brightness_is_one_edge() {
    let case = generate_case("c", &spec(2, &[Transform::Brightness], 0.0, 7), &roots(1, 1)).unwrap();
    assert_eq!(case.assets.len(), 2);
    assert_eq!(case.truth.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
    assert_eq!(case.query_id, case.assets[1].id);
    let (a, b) = (case.assets[0].raster.as_ref().unwrap(), case.assets[1].raster.as_ref().unwrap());
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    assert_ne!(a, b);
    assert_eq!(case.history[1].transform, Some(Transform::Brightness));
}

#[test]
fn splice_gives_a_two_parent_node() {
    let case = generate_case("c", &spec(5, &[Transform::Crop, Transform::Splice], 0.0, 3), &roots(2, 2)).unwrap();
    let g = &case.truth;
    assert_eq!(g.node_ids().len(), 5);
    assert!((0..5).any(|v| g.in_degree(v) == 2));
    // both roots reach the rest of the graph: one weakly connected component
    assert!(g.edges().len() >= 4);
    for (v, rec) in case.history.iter().enumerate() {
        assert_eq!(rec.parents.len(), g.in_degree(v));
        if rec.transform == Some(Transform::Splice) {
            assert_eq!(rec.parents.len(), 2);
            let tags = &case.assets[v].tags;
            assert!(tags.has_editing_trace());
            assert!(!tags.has_location());
            assert!(tags.thumbnail.is_none());
        }
    }
}

#[test]
fn full_corruption_strips_derived_images() {
    let case = generate_case("c", &spec(6, &[Transform::Crop, Transform::Blur], 1.0, 9), &roots(1, 4)).unwrap();
    for (a, rec) in case.assets.iter().zip(&case.history) {
        if rec.parents.is_empty() {
            assert!(a.tags.has_camera());
        } else {
            assert!(a.tags.is_all_absent(), "{:?}", a.tags);
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let s = spec(8, &[Transform::Crop, Transform::Rotate, Transform::Splice], 0.3, 11);
    let a = generate_case("c", &s, &roots(2, 5)).unwrap();
    let b = generate_case("c", &s, &roots(2, 5)).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.history, b.history);
    for (x, y) in a.assets.iter().zip(&b.assets) {
        assert_eq!(x.tags, y.tags);
        assert_eq!(x.raster, y.raster);
    }
    let c = generate_case("c", &CaseSpec { seed: 12, ..s }, &roots(2, 5)).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn clean_metadata_is_causally_sound() {
    for seed in 0..10 {
        let case = generate_case("c", &spec(10, &Transform::ALL, 0.0, seed), &roots(2, seed)).unwrap();
        let heuristics = HeuristicSet::all();
        for &(p, c) in case.truth.edges() {
            let (tp, tc) = (&case.assets[p].tags, &case.assets[c].tags);
            let (pc, cp) = vote_date(tp, tc);
            assert!(pc > cp, "date votes {pc} vs {cp} on a true edge");
            let (pc, cp) = heuristics.vote(tp, tc);
            assert!(pc >= cp);
        }
    }
}

#[test]
fn bad_specs_are_rejected() {
    let r = roots(2, 0);
    assert!(matches!(
        generate_case("c", &spec(5, &[Transform::Splice, Transform::Crop], 0.0, 0), &r[..1]),
        Err(DatagenError::IncompatibleMenu(_))
    ));
    assert!(matches!(
        generate_case("c", &spec(2, &[Transform::Splice, Transform::Crop], 0.0, 0), &r),
        Err(DatagenError::IncompatibleMenu(_))
    ));
    assert!(matches!(
        generate_case("c", &spec(5, &[Transform::Splice], 0.0, 0), &r),
        Err(DatagenError::IncompatibleMenu(_))
    ));
    let tiny = vec![Raster::filled(64, 200, 3)];
    assert!(matches!(
        generate_case("c", &spec(3, &[Transform::Blur], 0.0, 0), &tiny),
        Err(DatagenError::RootTooSmall { width: 64, height: 200 })
    ));
    assert!(matches!(
        generate_case("c", &spec(3, &[Transform::Blur], 1.5, 0), &r),
        Err(DatagenError::InvalidSpec(_))
    ));
    assert_eq!("5..15".parse::<OrderRange>().unwrap(), OrderRange { min: 5, max: 15 });
    assert_eq!("4".parse::<OrderRange>().unwrap(), OrderRange { min: 4, max: 4 });
}

#[test]
fn suite_round_trips_through_disk() {
    let suite = generate_suite(&SuiteSpec {
        cases: 2,
        case: CaseSpec {
            graph_order: OrderRange { min: 3, max: 4 },
            distractor_count: 2,
            seed: 21,
            ..CaseSpec::default()
        },
        root_side: (128, 140),
    })
    .unwrap();
    assert_eq!(suite.distractors.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    write_suite(&suite, dir.path()).unwrap();
    let case = &suite.cases[1];
    let d = dir.path().join("cases").join("case-001");
    let truth = ProvenanceGraph::from_bam_json(&fs::read_to_string(d.join("truth.bam.json")).unwrap()).unwrap();
    assert_eq!(truth, case.truth);
    assert_eq!(fs::read_to_string(d.join("query.txt")).unwrap().trim(), case.query_id);
    for a in &case.assets {
        let bytes = fs::read(d.join(format!("{}.tif", a.id))).unwrap();
        assert_eq!(parse_exif(&bytes).unwrap(), a.tags);
        assert_eq!(Raster::decode(&bytes).unwrap(), *a.raster.as_ref().unwrap());
    }
    assert_eq!(fs::read_dir(dir.path().join("distractors")).unwrap().count(), 4);
}
