//! Canonical per-image metadata.
//!
//! A [`TagBundle`] holds exactly the fields the vote heuristics read. Bundles
//! come from three places: embedded EXIF ([`parse_exif`]), JSON sidecars
//! ([`load_sidecar`]), and web post records ([`harvest_posts`]).

mod exif;
mod harvest;
mod sidecar;
pub mod tags;

use std::fmt;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

pub use exif::{parse_exif, ExifError};
pub use harvest::{harvest_posts, load_posts, HarvestError, PostRecord};
pub use sidecar::{load_sidecar, to_sidecar, SidecarError};

/// Zone-less calendar timestamp with second resolution, as EXIF stores it.
pub type Timestamp = NaiveDateTime;

/// EXIF text layout for date tags.
pub const EXIF_DATE_FORMAT: &str = "%Y:%m:%d %H:%M:%S";

pub fn parse_exif_date(s: &str) -> Option<Timestamp> {
    NaiveDateTime::parse_from_str(s.trim_end_matches('\0'), EXIF_DATE_FORMAT).ok()
}

pub fn format_exif_date(t: &Timestamp) -> String {
    t.format(EXIF_DATE_FORMAT).to_string()
}

/// Unsigned EXIF rational kept as the raw numerator/denominator pair.
///
/// Equality is pairwise, so `1/2 != 2/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Degrees, minutes, seconds.
pub type GpsTriple = [Rational; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSource {
    #[default]
    Embedded,
    Sidecar,
    Harvested,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagBundle {
    pub date_time_original: Option<Timestamp>,
    pub modify_date: Option<Timestamp>,
    pub create_date: Option<Timestamp>,
    pub gps_latitude: Option<GpsTriple>,
    pub gps_latitude_ref: Option<String>,
    pub gps_longitude: Option<GpsTriple>,
    pub gps_longitude_ref: Option<String>,
    pub make: Option<String>,
    pub model: Option<String>,
    pub software: Option<String>,
    pub processing_software: Option<String>,
    pub artist: Option<String>,
    pub host_computer: Option<String>,
    pub image_resources: Option<Vec<u8>>,
    pub thumbnail: Option<Vec<u8>>,
    pub source: TagSource,
}

impl TagBundle {
    pub fn empty(source: TagSource) -> Self {
        Self {
            source,
            ..Default::default()
        }
    }

    /// Restores the bundle invariants: empty text and malformed refs become
    /// absent, zero-denominator rationals drop their triple, and a GPS value
    /// without its ref (or the reverse) demotes both.
    pub fn sanitized(mut self) -> Self {
        for s in [
            &mut self.make,
            &mut self.model,
            &mut self.software,
            &mut self.processing_software,
            &mut self.artist,
            &mut self.host_computer,
        ] {
            if s.as_deref().is_some_and(|v| v.is_empty() || v.contains('\0')) {
                *s = None;
            }
        }
        if self.image_resources.as_ref().is_some_and(|b| b.is_empty()) {
            self.image_resources = None;
        }
        if self.thumbnail.as_ref().is_some_and(|b| b.is_empty()) {
            self.thumbnail = None;
        }
        fn pair(
            value: &mut Option<GpsTriple>,
            reference: &mut Option<String>,
            allowed: [&str; 2],
        ) {
            if value.is_some_and(|t| t.iter().any(|r| r.den == 0)) {
                *value = None;
            }
            if reference.as_deref().is_some_and(|r| !allowed.contains(&r)) {
                *reference = None;
            }
            if value.is_none() || reference.is_none() {
                *value = None;
                *reference = None;
            }
        }
        pair(&mut self.gps_latitude, &mut self.gps_latitude_ref, ["N", "S"]);
        pair(&mut self.gps_longitude, &mut self.gps_longitude_ref, ["E", "W"]);
        self
    }

    pub fn has_location(&self) -> bool {
        self.gps_latitude.is_some()
            && self.gps_latitude_ref.is_some()
            && self.gps_longitude.is_some()
            && self.gps_longitude_ref.is_some()
    }

    pub fn has_camera(&self) -> bool {
        self.make.is_some() && self.model.is_some() && self.software.is_some()
    }

    pub fn has_editing_trace(&self) -> bool {
        self.processing_software.is_some()
            || self.artist.is_some()
            || self.host_computer.is_some()
            || self.image_resources.is_some()
    }

    /// True when none of the fifteen tag fields is present.
    pub fn is_all_absent(&self) -> bool {
        *self == Self::empty(self.source)
    }

    /// Number of present tag fields (out of fifteen).
    pub fn present_count(&self) -> usize {
        [
            self.date_time_original.is_some(),
            self.modify_date.is_some(),
            self.create_date.is_some(),
            self.gps_latitude.is_some(),
            self.gps_latitude_ref.is_some(),
            self.gps_longitude.is_some(),
            self.gps_longitude_ref.is_some(),
            self.make.is_some(),
            self.model.is_some(),
            self.software.is_some(),
            self.processing_software.is_some(),
            self.artist.is_some(),
            self.host_computer.is_some(),
            self.image_resources.is_some(),
            self.thumbnail.is_some(),
        ]
        .iter()
        .filter(|&&p| p)
        .count()
    }
}

/// Field-wise fallback: `primary`'s value where present, else `fallback`'s.
/// The result keeps `primary`'s source.
pub fn merge_bundles(primary: &TagBundle, fallback: &TagBundle) -> TagBundle {
    fn pick<T: Clone>(a: &Option<T>, b: &Option<T>) -> Option<T> {
        a.clone().or_else(|| b.clone())
    }
    // GPS value and ref travel together so the pairing invariant survives.
    let (lat, lat_ref) = if primary.gps_latitude.is_some() {
        (primary.gps_latitude, primary.gps_latitude_ref.clone())
    } else {
        (fallback.gps_latitude, fallback.gps_latitude_ref.clone())
    };
    let (lon, lon_ref) = if primary.gps_longitude.is_some() {
        (primary.gps_longitude, primary.gps_longitude_ref.clone())
    } else {
        (fallback.gps_longitude, fallback.gps_longitude_ref.clone())
    };
    TagBundle {
        date_time_original: primary.date_time_original.or(fallback.date_time_original),
        modify_date: primary.modify_date.or(fallback.modify_date),
        create_date: primary.create_date.or(fallback.create_date),
        gps_latitude: lat,
        gps_latitude_ref: lat_ref,
        gps_longitude: lon,
        gps_longitude_ref: lon_ref,
        make: pick(&primary.make, &fallback.make),
        model: pick(&primary.model, &fallback.model),
        software: pick(&primary.software, &fallback.software),
        processing_software: pick(&primary.processing_software, &fallback.processing_software),
        artist: pick(&primary.artist, &fallback.artist),
        host_computer: pick(&primary.host_computer, &fallback.host_computer),
        image_resources: pick(&primary.image_resources, &fallback.image_resources),
        thumbnail: pick(&primary.thumbnail, &fallback.thumbnail),
        source: primary.source,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn ts(s: &str) -> Timestamp {
        parse_exif_date(s).expect("fixture date")
    }

    pub fn gps(d: u32, m: u32, s_num: u32, s_den: u32) -> GpsTriple {
        [Rational::new(d, 1), Rational::new(m, 1), Rational::new(s_num, s_den)]
    }

    /// Every field present.
    pub fn full_bundle() -> TagBundle {
        TagBundle {
            date_time_original: Some(ts("2010:06:01 12:00:00")),
            modify_date: Some(ts("2010:06:02 08:30:00")),
            create_date: Some(ts("2010:06:01 12:00:00")),
            gps_latitude: Some(gps(48, 51, 296, 10)),
            gps_latitude_ref: Some("N".into()),
            gps_longitude: Some(gps(2, 17, 402, 10)),
            gps_longitude_ref: Some("E".into()),
            make: Some("CanonX".into()),
            model: Some("EOS 5".into()),
            software: Some("Firmware 1.0".into()),
            processing_software: Some("Editor Pro".into()),
            artist: Some("someone".into()),
            host_computer: Some("workstation".into()),
            image_resources: Some(vec![0x38, 0x42, 0x49, 0x4d, 0, 1]),
            thumbnail: Some(vec![0xff, 0xd8, 1, 2, 3, 0xff, 0xd9]),
            source: TagSource::Embedded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn sanitize_demotes_unpaired_gps() {
        let mut b = full_bundle();
        b.gps_latitude_ref = None;
        let s = b.sanitized();
        assert!(s.gps_latitude.is_none() && s.gps_latitude_ref.is_none());
        assert!(s.gps_longitude.is_some());

        let mut b = full_bundle();
        b.gps_longitude_ref = Some("Q".into());
        let s = b.sanitized();
        assert!(s.gps_longitude.is_none() && s.gps_longitude_ref.is_none());
    }

    #[test]
    fn merge_identities() {
        let x = full_bundle();
        let empty = TagBundle::empty(TagSource::Harvested);
        let m = merge_bundles(&empty, &x);
        assert_eq!(m.source, TagSource::Harvested);
        assert_eq!(TagBundle { source: x.source, ..m }, x);
        assert_eq!(merge_bundles(&x, &TagBundle::default()), x);
        assert_eq!(merge_bundles(&x, &x), x);
    }

    #[test]
    fn merge_embedded_with_harvested_date() {
        let mut embedded = full_bundle();
        embedded.date_time_original = None;
        embedded.modify_date = None;
        embedded.create_date = None;
        let mut harvested = TagBundle::empty(TagSource::Harvested);
        harvested.date_time_original = Some(ts("2019:01:01 00:00:00"));
        let m = merge_bundles(&embedded, &harvested);

        // Field-wise oracle: every field equals primary's if present else fallback's.
        assert_eq!(m.date_time_original, harvested.date_time_original);
        assert_eq!(m.modify_date, None);
        assert_eq!(m.create_date, None);
        assert_eq!(m.gps_latitude, embedded.gps_latitude);
        assert_eq!(m.gps_longitude_ref, embedded.gps_longitude_ref);
        assert_eq!(m.make, embedded.make);
        assert_eq!(m.model, embedded.model);
        assert_eq!(m.software, embedded.software);
        assert_eq!(m.processing_software, embedded.processing_software);
        assert_eq!(m.artist, embedded.artist);
        assert_eq!(m.host_computer, embedded.host_computer);
        assert_eq!(m.image_resources, embedded.image_resources);
        assert_eq!(m.thumbnail, embedded.thumbnail);
        assert_eq!(m.source, TagSource::Embedded);
        assert_eq!(m.present_count(), 13);
    }

    #[test]
    fn exif_dates_roundtrip_text() {
        let t = ts("1999:12:31 23:59:58");
        assert_eq!(format_exif_date(&t), "1999:12:31 23:59:58");
        assert!(parse_exif_date("1999-12-31 23:59:58").is_none());
    }
}
