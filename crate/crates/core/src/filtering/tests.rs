use rand::Rng;

use super::*;
use crate::visual::Keypoint;
use crate::TagBundle;

fn asset(id: &str, descriptors: &[Descriptor]) -> ImageAsset {
    let mut a = ImageAsset::new(id, TagBundle::default());
    a.keypoints = descriptors
        .iter()
        .map(|&descriptor| Keypoint {
            x: 0,
            y: 0,
            response: 1,
            orientation: 0,
            descriptor,
        })
        .collect();
    a
}

fn small(cells: usize, m: usize) -> IndexConfig {
    IndexConfig {
        coarse_cells: cells,
        subquantizers: m,
        ..IndexConfig::default()
    }
}

/// Random bits confined to one half of the descriptor.
fn half(rng: &mut ChaCha8Rng, upper: bool) -> Descriptor {
    let r: Descriptor = rng.gen();
    if upper {
        [0, 0, r[2], r[3]]
    } else {
        [r[0], r[1], 0, 0]
    }
}

#[test]
fn degenerate_single_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d: Vec<Descriptor> = (0..40).map(|_| rng.gen()).collect();
    let idx: QuantizedIndex<f32> = build_index(&[asset("only", &d)], &small(1, 1)).unwrap();
    assert_eq!(idx.coarse_cells(), 1);
    assert_eq!(idx.cell_images(0).len(), 40);
}

#[test]
fn separated_clusters_fill_their_own_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bases: [Descriptor; 4] = [[0; 4], [u64::MAX; 4], [u64::MAX, u64::MAX, 0, 0], [0, 0, u64::MAX, u64::MAX]];
    let mut corpus = Vec::new();
    let mut label_of = Vec::new();
    for img in 0..8 {
        let ds: Vec<Descriptor> = (0..10)
            .map(|_| {
                let mut d = bases[img % 4];
                for _ in 0..3 {
                    let bit = rng.gen_range(0..256);
                    d[bit / 64] ^= 1 << (bit % 64);
                }
                d
            })
            .collect();
        // exhaustive nearest-base assignment
        for d in &ds {
            let nearest = (0..4)
                .min_by_key(|&b| crate::visual::hamming(d, &bases[b]))
                .unwrap();
            label_of.push((img as u32, nearest));
        }
        corpus.push(asset(&format!("img{img}"), &ds));
    }
    let idx: QuantizedIndex<f64> = build_index(&corpus, &small(4, 8)).unwrap();
    let mut cell_label = [None; 4];
    for cell in 0..4 {
        let imgs = idx.cell_images(cell);
        assert_eq!(imgs.len(), 20);
        for &img in imgs {
            let label = img as usize % 4;
            assert_eq!(*cell_label[cell].get_or_insert(label), label);
        }
    }
    assert!(label_of.iter().all(|&(img, l)| img as usize % 4 == l));
}

#[test]
fn empty_corpus_is_rejected() {
    assert!(matches!(
        build_index::<f32>(&[], &IndexConfig::default()),
        Err(FilterError::InsufficientTrainingData { have: 0, need: 2560 })
    ));
}

fn random_corpus(n: usize, per: usize, seed: u64) -> Vec<ImageAsset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let ds: Vec<Descriptor> = (0..per).map(|_| rng.gen()).collect();
            asset(&format!("r{i:02}"), &ds)
        })
        .collect()
}

#[test]
fn identical_query_ranks_its_twin_first() {
    let corpus = random_corpus(12, 30, 3);
    let idx: QuantizedIndex<f32> = build_index(&corpus, &small(16, 8)).unwrap();
    let twin = idx.descriptors_of("r07").unwrap().to_vec();
    let opts = QueryOptions {
        k: 1,
        stages: 1,
        ..QueryOptions::default()
    };
    let list = idx.query_descriptors("probe", &twin, &opts).unwrap();
    assert_eq!(list.ids().collect::<Vec<_>>(), ["r07"]);
}

#[test]
fn k_beyond_corpus_ranks_everything() {
    let corpus = random_corpus(6, 30, 4);
    let idx: QuantizedIndex<f32> = build_index(&corpus, &small(16, 8)).unwrap();
    let opts = QueryOptions {
        k: 1000,
        stages: 1,
        ..QueryOptions::default()
    };
    let d = idx.descriptors_of("r00").unwrap().to_vec();
    assert_eq!(idx.query_descriptors("outside", &d, &opts).unwrap().entries.len(), 6);
    // an indexed query never lists itself
    let own = idx.query_indexed("r00", &opts).unwrap();
    assert_eq!(own.entries.len(), 5);
    assert!(own.ids().all(|id| id != "r00"));
}

#[test]
fn second_stage_reaches_transitive_relative() {
    // B shares content with both A and C; A and C share nothing.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a: Vec<Descriptor> = (0..40).map(|_| half(&mut rng, false)).collect();
    let c: Vec<Descriptor> = (0..40).map(|_| half(&mut rng, true)).collect();
    let b: Vec<Descriptor> = a[..20].iter().chain(&c[..20]).copied().collect();
    let d: Vec<Descriptor> = (0..40).map(|_| half(&mut rng, false)).collect();
    let corpus = [asset("A", &a), asset("B", &b), asset("C", &c), asset("D", &d)];
    let idx: QuantizedIndex<f32> = build_index(&corpus, &small(16, 8)).unwrap();

    let stage = |stages| {
        let opts = QueryOptions {
            k: 2,
            stages,
            ..QueryOptions::default()
        };
        idx.query_indexed("A", &opts).unwrap()
    };
    let one = stage(1);
    assert!(one.ids().all(|id| id != "C"), "{one:?}");
    assert_eq!(one.entries[0].0, "B");
    let two = stage(2);
    assert!(two.ids().any(|id| id == "C"), "{two:?}");
    assert_eq!(recall(&one, &["B".into(), "C".into()]), 0.5);
    assert_eq!(recall(&two, &["B".into(), "C".into()]), 1.0);
}

#[test]
fn builds_are_deterministic_and_persist() {
    let corpus = random_corpus(10, 30, 6);
    let a: QuantizedIndex<f32> = build_index(&corpus, &small(16, 4)).unwrap();
    let b: QuantizedIndex<f32> = build_index(&corpus, &small(16, 4)).unwrap();
    assert_eq!(a, b);

    let mut bytes = Vec::new();
    a.write_to(&mut bytes).unwrap();
    assert_eq!(&bytes[..6], b"PVIX\x01\x04");
    let back = QuantizedIndex::<f32>::read_from(&mut bytes.as_slice()).unwrap();
    assert_eq!(back, a);
    let opts = QueryOptions::default();
    assert_eq!(back.query_indexed("r03", &opts).unwrap(), a.query_indexed("r03", &opts).unwrap());

    assert!(matches!(
        QuantizedIndex::<f64>::read_from(&mut bytes.as_slice()),
        Err(FilterError::Format(_))
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(QuantizedIndex::<f32>::read_from(&mut bad.as_slice()), Err(FilterError::Format(_))));
    bytes.truncate(bytes.len() - 3);
    assert!(QuantizedIndex::<f32>::read_from(&mut bytes.as_slice()).is_err());
}

#[test]
fn file_round_trip() {
    let corpus = random_corpus(4, 40, 7);
    let idx: QuantizedIndex<f64> = build_index(&corpus, &small(8, 8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.pvix");
    idx.save(&path).unwrap();
    assert_eq!(QuantizedIndex::<f64>::load(&path).unwrap(), idx);
}

#[test]
fn later_stages_only_add_candidates() {
    let corpus = random_corpus(15, 20, 8);
    let idx: QuantizedIndex<f32> = build_index(&corpus, &small(16, 8)).unwrap();
    let all = |stages| {
        let opts = QueryOptions {
            k: usize::MAX,
            stages,
            ..QueryOptions::default()
        };
        idx.query_indexed("r04", &opts).unwrap()
    };
    let (one, two) = (all(1), all(2));
    for (id, s) in &one.entries {
        let later = two.entries.iter().find(|(x, _)| x == id).unwrap().1;
        assert!(later >= *s);
    }
}

#[test]
fn bad_options() {
    let corpus = random_corpus(3, 60, 1);
    let idx: QuantizedIndex<f32> = build_index(&corpus, &small(4, 8)).unwrap();
    let opts = QueryOptions {
        k: 0,
        ..QueryOptions::default()
    };
    assert!(matches!(idx.query_indexed("r00", &opts), Err(FilterError::Config(_))));
    assert!(matches!(
        idx.query_indexed("nope", &QueryOptions::default()),
        Err(FilterError::UnknownImage(_))
    ));
    let dup = [corpus[0].clone(), corpus[0].clone()];
    assert!(matches!(build_index::<f32>(&dup, &small(4, 8)), Err(FilterError::DuplicateImage(_))));
}

#[test]
fn standardize_is_monotone_and_centred() {
    let raw: Vec<f64> = vec![1.0, 3.0, 2.0, 10.0, 2.5];
    let z = standardize(raw.clone(), None);
    assert_eq!(z[4], 0.0);
    for i in 0..raw.len() {
        for j in 0..raw.len() {
            assert_eq!(raw[i] < raw[j], z[i] < z[j]);
        }
    }
    // the skipped entry does not shift the background
    let z = standardize(vec![5.0, 5.0, 5.0, 100.0], Some(3));
    assert_eq!(&z[..3], &[0.0, 0.0, 0.0]);
}
