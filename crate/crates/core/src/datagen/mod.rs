//! Synthetic provenance cases.
//!
//! A case grows a random DAG from one or more procedural root images. Each
//! new node applies one transform to a parent (or pastes a donor region into
//! a host, for splices), and its metadata follows the edit causally: tags are
//! inherited, `ModifyDate` moves forward, `Software` names the editor, and
//! composites gain editing traces while losing GPS and thumbnail. A final
//! corruption pass strips or perturbs tags on derived images only.

mod exif_writer;
mod texture;
mod transform;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exif_writer::{write_exif, write_jpeg_exif};
pub use texture::texture;
pub use transform::{box_blur, brightness, paste, resize, rotate, thumbnail, Transform};

use crate::graphbuild::{GraphError, ProvenanceGraph};
use crate::metadata::{Rational, TagBundle, TagSource, Timestamp};
use crate::{ImageAsset, Raster};

/// Smallest root side accepted by [`generate_case`].
pub const MIN_ROOT_SIDE: u32 = 128;
/// Crops and resizes never shrink an image side below this.
pub const MIN_DERIVED_SIDE: u32 = 96;
/// Long edge of embedded thumbnails.
pub const THUMBNAIL_SIDE: u32 = 32;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("root raster is {width}x{height}; both sides must be at least {MIN_ROOT_SIDE}")]
    RootTooSmall { width: u32, height: u32 },
    #[error("incompatible transform menu: {0}")]
    IncompatibleMenu(String),
    #[error("invalid case spec: {0}")]
    InvalidSpec(String),
    #[error("input is not a JPEG stream")]
    NotJpeg,
    #[error("EXIF block of {0} bytes does not fit in one APP1 segment")]
    ExifTooLarge(usize),
    #[error("generated id {0} twice")]
    IdCollision(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Inclusive node-count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRange {
    pub min: usize,
    pub max: usize,
}

impl fmt::Display for OrderRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

impl FromStr for OrderRange {
    type Err = String;

    /// `"5..15"` or a single count.
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad order {t:?}: {e}"));
        match s.split_once("..") {
            Some((a, b)) => Ok(Self {
                min: num(a)?,
                max: num(b.trim_start_matches('=')) ?,
            }),
            None => {
                let n = num(s)?;
                Ok(Self { min: n, max: n })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseSpec {
    pub graph_order: OrderRange,
    pub transform_menu: BTreeSet<Transform>,
    /// Per-tag probability of stripping (and, for surviving dates, of a
    /// perturbation) on derived images.
    pub metadata_corruption: f64,
    pub distractor_count: usize,
    pub seed: u64,
}

impl Default for CaseSpec {
    fn default() -> Self {
        Self {
            graph_order: OrderRange { min: 5, max: 15 },
            // no resize: the detector is not scale invariant
            transform_menu: [
                Transform::Crop,
                Transform::Brightness,
                Transform::Blur,
                Transform::Rotate,
                Transform::Splice,
            ]
            .into(),
            metadata_corruption: 0.0,
            distractor_count: 0,
            seed: 0,
        }
    }
}

impl CaseSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let OrderRange { min, max } = self.graph_order;
        if min < 2 || min > max {
            return Err(DatagenError::InvalidSpec(format!("graph order {} needs 2 <= min <= max", self.graph_order)));
        }
        if !(0.0..=1.0).contains(&self.metadata_corruption) {
            return Err(DatagenError::InvalidSpec("corruption must lie in [0, 1]".into()));
        }
        if self.transform_menu.is_empty() {
            return Err(DatagenError::IncompatibleMenu("empty menu".into()));
        }
        if self.transform_menu == BTreeSet::from([Transform::Splice]) {
            return Err(DatagenError::IncompatibleMenu("splice needs another transform to grow lineages".into()));
        }
        Ok(())
    }

    pub fn splices(&self) -> bool {
        self.transform_menu.contains(&Transform::Splice)
    }

    /// Roots a case uses: two with splicing (the minimum a composite needs), else one.
    pub fn root_count(&self) -> usize {
        if self.splices() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub parents: Vec<String>,
    pub transform: Option<Transform>,
}

#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub id: String,
    /// Creation order; rasters and the (corrupted) published tags.
    pub assets: Vec<ImageAsset>,
    pub truth: ProvenanceGraph,
    pub query_id: String,
    pub history: Vec<NodeRecord>,
    pub spec: CaseSpec,
}

const CAMERAS: [(&str, &str, &str); 6] = [
    ("Canon", "Canon EOS 5D Mark II", "Firmware Version 2.1.2"),
    ("NIKON CORPORATION", "NIKON D7000", "Ver.1.03"),
    ("Apple", "iPhone 6", "9.3.2"),
    ("SONY", "ILCE-6000", "ILCE-6000 v1.21"),
    ("FUJIFILM", "X-T2", "Digital Camera X-T2 Ver2.10"),
    ("samsung", "SM-G930F", "G930FXXU1APF2"),
];
const EDITORS: [&str; 6] = [
    "Adobe Photoshop CC 2017 (Windows)",
    "GIMP 2.8.18",
    "Adobe Photoshop Lightroom 6.0 (Macintosh)",
    "Paint.NET v4.0.13",
    "Pixelmator 3.6",
    "Snapseed 2.0",
];
const PROCESSORS: [&str; 3] = ["Adobe Photoshop CC 2017", "GIMP 2.8.18", "Affinity Photo 1.5"];
const ARTISTS: [&str; 4] = ["j.doe", "photo-desk", "anon_editor", "m.rossi"];

fn random_id(rng: &mut impl Rng) -> String {
    format!("{:016x}", rng.gen::<u64>())
}

fn random_gps(rng: &mut impl Rng, max_deg: u32, refs: [&str; 2]) -> ([Rational; 3], String) {
    (
        [
            Rational::new(rng.gen_range(0..max_deg), 1),
            Rational::new(rng.gen_range(0..60), 1),
            Rational::new(rng.gen_range(0..6000), 100),
        ],
        refs.choose(rng).unwrap().to_string(),
    )
}

/// Camera-fresh metadata for a root or distractor.
pub fn camera_bundle(rng: &mut impl Rng, raster: &Raster) -> TagBundle {
    let start = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let captured: Timestamp = start + Duration::seconds(rng.gen_range(0..9 * 365 * 86_400));
    let (make, model, firmware) = *CAMERAS.choose(rng).unwrap();
    let (lat, lat_ref) = random_gps(rng, 90, ["N", "S"]);
    let (lon, lon_ref) = random_gps(rng, 180, ["E", "W"]);
    TagBundle {
        date_time_original: Some(captured),
        modify_date: Some(captured),
        create_date: Some(captured),
        gps_latitude: Some(lat),
        gps_latitude_ref: Some(lat_ref),
        gps_longitude: Some(lon),
        gps_longitude_ref: Some(lon_ref),
        make: Some(make.into()),
        model: Some(model.into()),
        software: Some(firmware.into()),
        thumbnail: Some(thumbnail(raster, THUMBNAIL_SIDE)),
        ..TagBundle::empty(TagSource::Embedded)
    }
}

/// Metadata of an edit: inherit the host, move `ModifyDate` past every
/// parent, name the editor, and record composite traces.
fn derive_tags(rng: &mut impl Rng, host: &TagBundle, parents: &[&TagBundle], t: Transform, raster: &Raster) -> TagBundle {
    let mut b = host.clone();
    let latest = |f: fn(&TagBundle) -> Option<Timestamp>| parents.iter().filter_map(|p| f(p)).max();
    b.modify_date = latest(|p| p.modify_date).map(|m| m + Duration::seconds(rng.gen_range(60..=30 * 86_400)));
    // A composite is no older than its newest source.
    b.date_time_original = latest(|p| p.date_time_original);
    b.create_date = latest(|p| p.create_date);
    let editor = *EDITORS.choose(rng).unwrap();
    b.software = Some(editor.into());
    if editor.contains("Photoshop") {
        b.image_resources = Some(b"8BIM\x04\x04\0\0\0\0\0\0".to_vec());
    }
    if t == Transform::Splice {
        b.processing_software = Some(PROCESSORS.choose(rng).unwrap().to_string());
        b.artist = Some(ARTISTS.choose(rng).unwrap().to_string());
        b.gps_latitude = None;
        b.gps_latitude_ref = None;
        b.gps_longitude = None;
        b.gps_longitude_ref = None;
        b.thumbnail = None;
    } else {
        b.thumbnail = Some(thumbnail(raster, THUMBNAIL_SIDE));
    }
    b
}

/// Strips each present tag with probability `c` (GPS value and ref as one
/// unit) and shifts each surviving date by up to a year with probability `c`.
pub fn corrupt(rng: &mut impl Rng, b: &TagBundle, c: f64) -> TagBundle {
    let mut out = b.clone();
    let strip = |rng: &mut _| c > 0.0 && Rng::gen_bool(rng, c);
    for d in [&mut out.date_time_original, &mut out.modify_date, &mut out.create_date] {
        if d.is_some() {
            if strip(rng) {
                *d = None;
            } else if strip(rng) {
                let shift = rng.gen_range(1..=365 * 86_400) * if rng.gen_bool(0.5) { 1 } else { -1 };
                *d = d.map(|t| t + Duration::seconds(shift));
            }
        }
    }
    if out.gps_latitude.is_some() && strip(rng) {
        out.gps_latitude = None;
        out.gps_latitude_ref = None;
    }
    if out.gps_longitude.is_some() && strip(rng) {
        out.gps_longitude = None;
        out.gps_longitude_ref = None;
    }
    for s in [
        &mut out.make,
        &mut out.model,
        &mut out.software,
        &mut out.processing_software,
        &mut out.artist,
        &mut out.host_computer,
    ] {
        if s.is_some() && strip(rng) {
            *s = None;
        }
    }
    for v in [&mut out.image_resources, &mut out.thumbnail] {
        if v.is_some() && strip(rng) {
            *v = None;
        }
    }
    out
}

struct Node {
    raster: Raster,
    tags: TagBundle,
    parents: Vec<usize>,
    transform: Option<Transform>,
}

fn side_in(rng: &mut impl Rng, side: u32, lo_frac: f64) -> u32 {
    let lo = ((side as f64 * lo_frac).ceil() as u32).max(MIN_DERIVED_SIDE.min(side));
    rng.gen_range(lo..=side)
}

fn apply(rng: &mut impl Rng, t: Transform, src: &Raster, donor: Option<&Raster>) -> Raster {
    let (w, h) = (src.width(), src.height());
    match t {
        Transform::Crop => {
            // each side keeps >= 75%, so the area keeps >= 56%
            let (cw, ch) = (side_in(rng, w, 0.75), side_in(rng, h, 0.75));
            src.crop(rng.gen_range(0..=w - cw), rng.gen_range(0..=h - ch), cw, ch)
        }
        Transform::Resize => resize(src, side_in(rng, w, 0.7), side_in(rng, h, 0.7)),
        Transform::Brightness => {
            let magnitude = rng.gen_range(15..=40);
            brightness(src, if rng.gen_bool(0.5) { magnitude } else { -magnitude })
        }
        Transform::Blur => box_blur(src),
        Transform::Rotate => rotate(src, rng.gen_range(1..=3)),
        Transform::Splice => {
            let d = donor.expect("splice has a donor");
            let pw = ((d.width() as f64 * rng.gen_range(0.3..0.5)) as u32).clamp(1, w);
            let ph = ((d.height() as f64 * rng.gen_range(0.3..0.5)) as u32).clamp(1, h);
            let patch = d.crop(rng.gen_range(0..=d.width() - pw), rng.gen_range(0..=d.height() - ph), pw, ph);
            paste(src, &patch, rng.gen_range(0..=w - pw), rng.gen_range(0..=h - ph))
        }
    }
}

/// Grows one case from `roots`. The last node created is the query.
pub fn generate_case(case_id: &str, spec: &CaseSpec, roots: &[Raster]) -> Result<GeneratedCase, DatagenError> {
    spec.validate()?;
    let needed = spec.root_count();
    if roots.len() < needed {
        return Err(DatagenError::IncompatibleMenu(format!(
            "{} root(s) given, menu needs {needed}",
            roots.len()
        )));
    }
    let roots = &roots[..needed];
    if let Some(r) = roots.iter().find(|r| r.width() < MIN_ROOT_SIDE || r.height() < MIN_ROOT_SIDE) {
        return Err(DatagenError::RootTooSmall {
            width: r.width(),
            height: r.height(),
        });
    }
    // every extra root is attached by one splice
    let min_order = 2 * needed - 1;
    if spec.graph_order.min < min_order.max(2) {
        return Err(DatagenError::IncompatibleMenu(format!(
            "order {} is below {min_order}, the smallest graph joining {needed} roots",
            spec.graph_order
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let order = rng.gen_range(spec.graph_order.min..=spec.graph_order.max);
    let menu: Vec<Transform> = spec.transform_menu.iter().copied().collect();

    let mut nodes: Vec<Node> = roots
        .iter()
        .map(|r| Node {
            tags: camera_bundle(&mut rng, r),
            raster: r.clone(),
            parents: Vec::new(),
            transform: None,
        })
        .collect();
    let mut joined: Vec<usize> = vec![0];
    let mut pending_roots: Vec<usize> = (1..needed).collect();

    while nodes.len() < order {
        let (t, parents) = if let Some(donor) = (!pending_roots.is_empty()).then(|| pending_roots.remove(0)) {
            (Transform::Splice, vec![*joined.choose(&mut rng).unwrap(), donor])
        } else {
            let t = *menu.choose(&mut rng).unwrap();
            let host = rng.gen_range(0..nodes.len());
            if t == Transform::Splice {
                let donor = (host + rng.gen_range(1..nodes.len())) % nodes.len();
                (t, vec![host, donor])
            } else {
                (t, vec![host])
            }
        };
        let raster = apply(&mut rng, t, &nodes[parents[0]].raster, parents.get(1).map(|&d| &nodes[d].raster));
        let parent_tags: Vec<&TagBundle> = parents.iter().map(|&p| &nodes[p].tags).collect();
        let tags = derive_tags(&mut rng, parent_tags[0], &parent_tags, t, &raster);
        if parents.iter().any(|p| joined.contains(p)) {
            joined.push(nodes.len());
        }
        nodes.push(Node {
            raster,
            tags,
            parents,
            transform: Some(t),
        });
    }

    let mut seen = HashSet::new();
    let ids: Vec<String> = (0..nodes.len())
        .map(|_| loop {
            let id = random_id(&mut rng);
            if seen.insert(id.clone()) {
                break id;
            }
        })
        .collect();
    let c = spec.metadata_corruption;
    let assets: Vec<ImageAsset> = nodes
        .iter()
        .zip(&ids)
        .map(|(n, id)| {
            let tags = if n.parents.is_empty() { n.tags.clone() } else { corrupt(&mut rng, &n.tags, c) };
            ImageAsset::new(id.clone(), tags).with_raster(n.raster.clone())
        })
        .collect();
    let history = nodes
        .iter()
        .zip(&ids)
        .map(|(n, id)| NodeRecord {
            id: id.clone(),
            parents: n.parents.iter().map(|&p| ids[p].clone()).collect(),
            transform: n.transform,
        })
        .collect();
    let edges = nodes
        .iter()
        .enumerate()
        .flat_map(|(child, n)| n.parents.iter().map(move |&p| (p, child)));
    let truth = ProvenanceGraph::new(ids.clone(), edges)?;
    Ok(GeneratedCase {
        id: case_id.to_string(),
        query_id: ids.last().unwrap().clone(),
        assets,
        truth,
        history,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSpec {
    pub cases: usize,
    /// Template for every case; each case gets its own derived seed.
    pub case: CaseSpec,
    /// Root sides are drawn uniformly from this range.
    pub root_side: (u32, u32),
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            cases: 50,
            case: CaseSpec::default(),
            root_side: (192, 256),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub spec: SuiteSpec,
    pub cases: Vec<GeneratedCase>,
    pub distractors: Vec<ImageAsset>,
}

pub fn case_name(i: usize) -> String {
    format!("case-{i:03}")
}

fn random_texture(rng: &mut impl Rng, sides: (u32, u32)) -> Raster {
    let w = rng.gen_range(sides.0..=sides.1);
    let h = rng.gen_range(sides.0..=sides.1);
    texture(rng, w, h)
}

/// Standalone image with camera-fresh metadata, unrelated to any case.
pub fn distractor(seed: u64, sides: (u32, u32)) -> ImageAsset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raster = random_texture(&mut rng, sides);
    let tags = camera_bundle(&mut rng, &raster);
    ImageAsset::new(random_id(&mut rng), tags).with_raster(raster)
}

pub fn generate_suite(spec: &SuiteSpec) -> Result<Suite, DatagenError> {
    spec.case.validate()?;
    if spec.root_side.0 < MIN_ROOT_SIDE || spec.root_side.0 > spec.root_side.1 {
        return Err(DatagenError::InvalidSpec(format!("root sides {:?}", spec.root_side)));
    }
    let mut master = ChaCha8Rng::seed_from_u64(spec.case.seed);
    let case_seeds: Vec<u64> = (0..spec.cases).map(|_| master.gen()).collect();
    let distractor_seeds: Vec<u64> = (0..spec.cases * spec.case.distractor_count).map(|_| master.gen()).collect();

    let cases: Vec<GeneratedCase> = case_seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut root_rng = ChaCha8Rng::seed_from_u64(seed);
            root_rng.set_stream(1);
            let roots: Vec<Raster> = (0..spec.case.root_count())
                .map(|_| random_texture(&mut root_rng, spec.root_side))
                .collect();
            let case_spec = CaseSpec {
                seed,
                ..spec.case.clone()
            };
            generate_case(&case_name(i), &case_spec, &roots)
        })
        .collect::<Result<_, _>>()?;
    let distractors: Vec<ImageAsset> = distractor_seeds
        .par_iter()
        .map(|&s| distractor(s, spec.root_side))
        .collect();

    let mut seen = HashSet::new();
    for id in cases.iter().flat_map(|c| c.assets.iter()).chain(&distractors).map(|a| &a.id) {
        if !seen.insert(id) {
            return Err(DatagenError::IdCollision(id.clone()));
        }
    }
    Ok(Suite {
        spec: spec.clone(),
        cases,
        distractors,
    })
}

#[derive(Serialize)]
struct CaseFile<'a> {
    spec: &'a CaseSpec,
    history: &'a [NodeRecord],
}

/// Writes `dir/cases/<case>/{<id>.tif, truth.bam.json, query.txt, spec.json}`,
/// `dir/distractors/<id>.tif`, and `dir/suite.json`.
pub fn write_suite(suite: &Suite, dir: &Path) -> Result<(), DatagenError> {
    let cases_dir = dir.join("cases");
    let distractor_dir = dir.join("distractors");
    fs::create_dir_all(&cases_dir)?;
    fs::create_dir_all(&distractor_dir)?;
    for case in &suite.cases {
        let d = cases_dir.join(&case.id);
        fs::create_dir_all(&d)?;
        for a in &case.assets {
            fs::write(d.join(format!("{}.tif", a.id)), write_exif(&a.tags, a.raster.as_ref()))?;
        }
        fs::write(d.join("truth.bam.json"), case.truth.to_bam_json())?;
        fs::write(d.join("query.txt"), format!("{}\n", case.query_id))?;
        let file = CaseFile {
            spec: &case.spec,
            history: &case.history,
        };
        fs::write(d.join("spec.json"), serde_json::to_string_pretty(&file)?)?;
    }
    for a in &suite.distractors {
        fs::write(distractor_dir.join(format!("{}.tif", a.id)), write_exif(&a.tags, a.raster.as_ref()))?;
    }
    fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&suite.spec)?)?;
    Ok(())
}

#[cfg(test)]
mod tests;
