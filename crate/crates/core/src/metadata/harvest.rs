//! Upload-time estimates from web post records.
//!
//! When embedded metadata is gone, a post's submission time stands in for
//! `DateTimeOriginal` so the date heuristic can still vote.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{TagBundle, TagSource, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub author: String,
    /// RFC 3339 on the wire; normalized to UTC and stored zone-less.
    #[serde(serialize_with = "ser_rfc3339", deserialize_with = "de_rfc3339")]
    pub submitted_at: Timestamp,
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_post_id: Option<String>,
}

fn ser_rfc3339<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.and_utc().to_rfc3339())
}

fn de_rfc3339<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
    let raw = String::deserialize(d)?;
    DateTime::<FixedOffset>::parse_from_rfc3339(&raw)
        .map(|t| t.naive_utc())
        .map_err(serde::de::Error::custom)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarvestError {
    #[error("no post records supplied")]
    Empty,
    #[error("post {post_id:?} names parent {parent:?}, which is not in the collection")]
    DanglingParent { post_id: String, parent: String },
    #[error("post records are not valid JSON: {0}")]
    Json(String),
}

pub fn load_posts(json_text: &str) -> Result<Vec<PostRecord>, HarvestError> {
    serde_json::from_str(json_text).map_err(|e| HarvestError::Json(e.to_string()))
}

/// Maps every referenced image to a harvested bundle carrying only
/// `date_time_original`. An image posted more than once keeps its earliest time.
pub fn harvest_posts(records: &[PostRecord]) -> Result<BTreeMap<String, TagBundle>, HarvestError> {
    if records.is_empty() {
        return Err(HarvestError::Empty);
    }
    let ids: HashSet<&str> = records.iter().map(|r| r.post_id.as_str()).collect();
    if let Some(r) = records
        .iter()
        .find(|r| r.parent_post_id.as_deref().is_some_and(|p| !ids.contains(p)))
    {
        return Err(HarvestError::DanglingParent {
            post_id: r.post_id.clone(),
            parent: r.parent_post_id.clone().unwrap_or_default(),
        });
    }

    let mut earliest: BTreeMap<String, Timestamp> = BTreeMap::new();
    for r in records {
        earliest
            .entry(r.image_ref.clone())
            .and_modify(|t| *t = (*t).min(r.submitted_at))
            .or_insert(r.submitted_at);
    }
    Ok(earliest
        .into_iter()
        .map(|(image, t)| {
            let mut b = TagBundle::empty(TagSource::Harvested);
            b.date_time_original = Some(t);
            (image, b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::fixtures::ts;
    use proptest::prelude::*;

    fn post(id: &str, at: &str, image: &str, parent: Option<&str>) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            author: "u".into(),
            submitted_at: ts(at),
            image_ref: image.into(),
            parent_post_id: parent.map(Into::into),
        }
    }

    #[test]
    fn root_and_reply() {
        let recs = [
            post("p1", "2018:03:01 10:00:00", "a.jpg", None),
            post("p2", "2018:03:02 11:00:00", "b.jpg", Some("p1")),
        ];
        let out = harvest_posts(&recs).unwrap();
        assert_eq!(out["a.jpg"].date_time_original, Some(ts("2018:03:01 10:00:00")));
        assert_eq!(out["b.jpg"].date_time_original, Some(ts("2018:03:02 11:00:00")));
        assert_eq!(out["b.jpg"].present_count(), 1);
        assert_eq!(out["b.jpg"].source, TagSource::Harvested);
    }

    #[test]
    fn dangling_parent_and_empty() {
        let recs = [post("p2", "2018:03:02 11:00:00", "b.jpg", Some("p9"))];
        assert!(matches!(harvest_posts(&recs), Err(HarvestError::DanglingParent { .. })));
        assert_eq!(harvest_posts(&[]), Err(HarvestError::Empty));
    }

    #[test]
    fn rfc3339_wire_format_normalizes_to_utc() {
        let json = r#"[{"post_id":"p1","author":"x","submitted_at":"2018-03-01T12:00:00+02:00","image_ref":"a"}]"#;
        let recs = load_posts(json).unwrap();
        assert_eq!(recs[0].submitted_at, ts("2018:03:01 10:00:00"));
        assert!(recs[0].parent_post_id.is_none());
        let back: Vec<PostRecord> =
            serde_json::from_str(&serde_json::to_string(&recs).unwrap()).unwrap();
        assert_eq!(back, recs);
    }

    proptest! {
        // Duplicate refs keep the brute-force minimum; outputs come from the inputs.
        #[test]
        fn earliest_wins(entries in prop::collection::vec((0u8..4, 0i64..1_000_000), 1..30)) {
            let base = ts("2015:01:01 00:00:00");
            let recs: Vec<PostRecord> = entries
                .iter()
                .enumerate()
                .map(|(i, &(img, secs))| PostRecord {
                    post_id: format!("p{i}"),
                    author: "a".into(),
                    submitted_at: base + chrono::Duration::seconds(secs),
                    image_ref: format!("img{img}"),
                    parent_post_id: None,
                })
                .collect();
            let out = harvest_posts(&recs).unwrap();
            for (image, bundle) in &out {
                let brute = recs.iter().filter(|r| &r.image_ref == image).map(|r| r.submitted_at).min();
                prop_assert_eq!(bundle.date_time_original, brute);
            }
            let inputs: HashSet<Timestamp> = recs.iter().map(|r| r.submitted_at).collect();
            prop_assert!(out.values().all(|b| inputs.contains(&b.date_time_original.unwrap())));
        }
    }
}
