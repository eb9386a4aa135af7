//! JSON sidecar metadata.
//!
//! One object per image, keyed by EXIF labels (`"DateTimeOriginal"`,
//! `"GPSLatitudeRef"`, ...). Dates use the EXIF text layout; GPS triples are
//! three-element arrays whose items are `[num, den]` pairs or plain numbers.
//! Binary fields (`ImageResources`, `ThumbnailImage`) are base64 strings.
//! Unknown keys are ignored.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{Map, Number, Value};
use thiserror::Error;

use super::{format_exif_date, parse_exif_date, GpsTriple, Rational, TagBundle, TagSource, Timestamp};

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("sidecar is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sidecar root must be a JSON object")]
    NotAnObject,
    #[error("key {key:?}: {reason}")]
    Schema { key: &'static str, reason: String },
}

fn schema(key: &'static str, reason: impl Into<String>) -> SidecarError {
    SidecarError::Schema {
        key,
        reason: reason.into(),
    }
}

pub fn load_sidecar(json_text: &str) -> Result<TagBundle, SidecarError> {
    let root: Value = serde_json::from_str(json_text)?;
    let obj = root.as_object().ok_or(SidecarError::NotAnObject)?;
    let b = TagBundle {
        date_time_original: date(obj, "DateTimeOriginal")?,
        modify_date: date(obj, "ModifyDate")?,
        create_date: date(obj, "CreateDate")?,
        gps_latitude: gps(obj, "GPSLatitude")?,
        gps_latitude_ref: text(obj, "GPSLatitudeRef")?,
        gps_longitude: gps(obj, "GPSLongitude")?,
        gps_longitude_ref: text(obj, "GPSLongitudeRef")?,
        make: text(obj, "Make")?,
        model: text(obj, "Model")?,
        software: text(obj, "Software")?,
        processing_software: text(obj, "ProcessingSoftware")?,
        artist: text(obj, "Artist")?,
        host_computer: text(obj, "HostComputer")?,
        image_resources: bytes(obj, "ImageResources")?,
        thumbnail: bytes(obj, "ThumbnailImage")?,
        source: TagSource::Sidecar,
    };
    Ok(b.sanitized())
}

/// Serializes a bundle in sidecar form. Rationals are written as `[num, den]`
/// pairs so the round trip is exact.
pub fn to_sidecar(b: &TagBundle) -> String {
    let mut m = Map::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    };
    let d = |t: &Option<Timestamp>| t.as_ref().map(|t| Value::String(format_exif_date(t)));
    let s = |t: &Option<String>| t.clone().map(Value::String);
    let g = |t: &Option<GpsTriple>| {
        t.map(|t| {
            Value::Array(
                t.iter()
                    .map(|r| Value::Array(vec![r.num.into(), r.den.into()]))
                    .collect(),
            )
        })
    };
    let bin = |t: &Option<Vec<u8>>| t.as_ref().map(|v| Value::String(BASE64.encode(v)));
    put("DateTimeOriginal", d(&b.date_time_original));
    put("ModifyDate", d(&b.modify_date));
    put("CreateDate", d(&b.create_date));
    put("GPSLatitude", g(&b.gps_latitude));
    put("GPSLatitudeRef", s(&b.gps_latitude_ref));
    put("GPSLongitude", g(&b.gps_longitude));
    put("GPSLongitudeRef", s(&b.gps_longitude_ref));
    put("Make", s(&b.make));
    put("Model", s(&b.model));
    put("Software", s(&b.software));
    put("ProcessingSoftware", s(&b.processing_software));
    put("Artist", s(&b.artist));
    put("HostComputer", s(&b.host_computer));
    put("ImageResources", bin(&b.image_resources));
    put("ThumbnailImage", bin(&b.thumbnail));
    serde_json::to_string_pretty(&Value::Object(m)).expect("JSON values always serialize")
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(key).filter(|v| !v.is_null())
}

fn text(obj: &Map<String, Value>, key: &'static str) -> Result<Option<String>, SidecarError> {
    match get(obj, key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(schema(key, "expected a string")),
    }
}

fn date(obj: &Map<String, Value>, key: &'static str) -> Result<Option<Timestamp>, SidecarError> {
    text(obj, key)?
        .map(|s| parse_exif_date(&s).ok_or_else(|| schema(key, format!("bad date {s:?}"))))
        .transpose()
}

fn bytes(obj: &Map<String, Value>, key: &'static str) -> Result<Option<Vec<u8>>, SidecarError> {
    text(obj, key)?
        .map(|s| BASE64.decode(s).map_err(|e| schema(key, e.to_string())))
        .transpose()
}

fn gps(obj: &Map<String, Value>, key: &'static str) -> Result<Option<GpsTriple>, SidecarError> {
    let Some(v) = get(obj, key) else {
        return Ok(None);
    };
    let items = v
        .as_array()
        .filter(|a| a.len() == 3)
        .ok_or_else(|| schema(key, "expected a 3-element array"))?;
    let mut out = [Rational::new(0, 1); 3];
    for (slot, item) in out.iter_mut().zip(items) {
        *slot = match item {
            Value::Number(n) => number_to_rational(n).ok_or_else(|| schema(key, "unrepresentable number"))?,
            Value::Array(pair) if pair.len() == 2 => {
                let part = |v: &Value| v.as_u64().and_then(|x| u32::try_from(x).ok());
                match (part(&pair[0]), part(&pair[1])) {
                    (Some(num), Some(den)) if den != 0 => Rational::new(num, den),
                    _ => return Err(schema(key, "rational pair must be [u32, nonzero u32]")),
                }
            }
            _ => return Err(schema(key, "items must be numbers or [num, den] pairs")),
        };
    }
    Ok(Some(out))
}

/// Exact conversion of a non-negative decimal literal (`29.6` -> `296/10`).
fn number_to_rational(n: &Number) -> Option<Rational> {
    if let Some(u) = n.as_u64() {
        return Some(Rational::new(u32::try_from(u).ok()?, 1));
    }
    let text = n.to_string();
    if text.contains(['e', 'E', '-']) {
        return None;
    }
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let den = 10u32.checked_pow(frac.len() as u32)?;
    let num: u64 = format!("{int}{frac}").parse().ok()?;
    Some(Rational::new(u32::try_from(num).ok()?, den))
}
