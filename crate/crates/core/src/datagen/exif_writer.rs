//! Minimal little-endian TIFF/EXIF writer, the round-trip partner of
//! [`parse_exif`](crate::metadata::parse_exif).
//!
//! Layout: header, IFD0 (target tags, optionally an uncompressed 8-bit
//! grayscale strip), Exif sub-IFD, GPS sub-IFD, IFD1 (thumbnail pointer),
//! then the thumbnail bytes and pixel strip. Every block starts on an even
//! offset and each IFD's out-of-line values follow it directly.

use crate::metadata::tags::{self, *};
use crate::metadata::{format_exif_date, GpsTriple, TagBundle};
use crate::Raster;

use super::DatagenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    ExifIfd,
    GpsIfd,
    Thumbnail,
    Strip,
}

#[derive(Debug, Clone)]
enum Value {
    Raw { typ: u16, count: u32, bytes: Vec<u8> },
    /// A LONG holding the offset of another block.
    Pointer(Target),
}

#[derive(Debug, Default)]
struct Ifd {
    entries: Vec<(u16, Value)>,
}

impl Ifd {
    fn ascii(&mut self, tag: u16, s: &Option<String>) {
        if let Some(s) = s {
            let mut bytes = s.as_bytes().to_vec();
            bytes.push(0);
            self.raw(tag, TYPE_ASCII, bytes.len() as u32, bytes);
        }
    }

    fn date(&mut self, tag: u16, t: &Option<crate::Timestamp>) {
        self.ascii(tag, &t.as_ref().map(format_exif_date));
    }

    fn rationals(&mut self, tag: u16, v: &Option<GpsTriple>) {
        if let Some(v) = v {
            let bytes = v
                .iter()
                .flat_map(|r| r.num.to_le_bytes().into_iter().chain(r.den.to_le_bytes()))
                .collect();
            self.raw(tag, TYPE_RATIONAL, 3, bytes);
        }
    }

    fn short(&mut self, tag: u16, v: u16) {
        self.raw(tag, TYPE_SHORT, 1, v.to_le_bytes().to_vec());
    }

    fn long(&mut self, tag: u16, v: u32) {
        self.raw(tag, TYPE_LONG, 1, v.to_le_bytes().to_vec());
    }

    fn raw(&mut self, tag: u16, typ: u16, count: u32, bytes: Vec<u8>) {
        self.entries.push((tag, Value::Raw { typ, count, bytes }));
    }

    fn pointer(&mut self, tag: u16, target: Target) {
        self.entries.push((tag, Value::Pointer(target)));
    }

    fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Directory bytes plus out-of-line data, both padded to even length.
    fn size(&self) -> usize {
        let data: usize = self
            .entries
            .iter()
            .map(|(_, v)| match v {
                Value::Raw { bytes, .. } if bytes.len() > 4 => even(bytes.len()),
                _ => 0,
            })
            .sum();
        2 + 12 * self.entries.len() + 4 + data
    }

    fn write(&mut self, out: &mut Vec<u8>, next: u32, resolve: impl Fn(Target) -> u32) {
        self.entries.sort_by_key(|(tag, _)| *tag);
        let start = out.len();
        let mut data_pos = start + 2 + 12 * self.entries.len() + 4;
        let mut data = Vec::new();
        out.extend_from_slice(&(self.entries.len() as u16).to_le_bytes());
        for (tag, value) in &self.entries {
            out.extend_from_slice(&tag.to_le_bytes());
            match value {
                Value::Pointer(t) => {
                    out.extend_from_slice(&TYPE_LONG.to_le_bytes());
                    out.extend_from_slice(&1u32.to_le_bytes());
                    out.extend_from_slice(&resolve(*t).to_le_bytes());
                }
                Value::Raw { typ, count, bytes } => {
                    out.extend_from_slice(&typ.to_le_bytes());
                    out.extend_from_slice(&count.to_le_bytes());
                    if bytes.len() <= 4 {
                        let mut inline = [0u8; 4];
                        inline[..bytes.len()].copy_from_slice(bytes);
                        out.extend_from_slice(&inline);
                    } else {
                        out.extend_from_slice(&(data_pos as u32).to_le_bytes());
                        data.extend_from_slice(bytes);
                        if bytes.len() % 2 == 1 {
                            data.push(0);
                        }
                        data_pos += even(bytes.len());
                    }
                }
            }
        }
        out.extend_from_slice(&next.to_le_bytes());
        out.extend_from_slice(&data);
    }
}

fn even(n: usize) -> usize {
    n + n % 2
}

/// Serializes `bundle` as a TIFF stream; with `base_image` the stream is
/// also a decodable grayscale image.
pub fn write_exif(bundle: &TagBundle, base_image: Option<&Raster>) -> Vec<u8> {
    let b = bundle;
    let mut ifd0 = Ifd::default();
    ifd0.ascii(PROCESSING_SOFTWARE, &b.processing_software);
    ifd0.ascii(MAKE, &b.make);
    ifd0.ascii(MODEL, &b.model);
    ifd0.ascii(SOFTWARE, &b.software);
    ifd0.date(MODIFY_DATE, &b.modify_date);
    ifd0.ascii(ARTIST, &b.artist);
    ifd0.ascii(HOST_COMPUTER, &b.host_computer);
    if let Some(res) = b.image_resources.as_ref().filter(|r| !r.is_empty()) {
        ifd0.raw(IMAGE_RESOURCES, TYPE_UNDEFINED, res.len() as u32, res.clone());
    }
    if let Some(r) = base_image {
        ifd0.long(IMAGE_WIDTH, r.width());
        ifd0.long(IMAGE_LENGTH, r.height());
        ifd0.short(BITS_PER_SAMPLE, 8);
        ifd0.short(COMPRESSION, 1);
        ifd0.short(PHOTOMETRIC_INTERPRETATION, 1);
        ifd0.pointer(STRIP_OFFSETS, Target::Strip);
        ifd0.short(SAMPLES_PER_PIXEL, 1);
        ifd0.long(ROWS_PER_STRIP, r.height());
        ifd0.long(STRIP_BYTE_COUNTS, r.width() * r.height());
    }

    let mut exif = Ifd::default();
    exif.date(DATE_TIME_ORIGINAL, &b.date_time_original);
    exif.date(CREATE_DATE, &b.create_date);

    let mut gps = Ifd::default();
    gps.ascii(GPS_LATITUDE_REF, &b.gps_latitude_ref);
    gps.rationals(GPS_LATITUDE, &b.gps_latitude);
    gps.ascii(GPS_LONGITUDE_REF, &b.gps_longitude_ref);
    gps.rationals(GPS_LONGITUDE, &b.gps_longitude);

    if !exif.is_empty() {
        ifd0.pointer(EXIF_IFD_POINTER, Target::ExifIfd);
    }
    if !gps.is_empty() {
        ifd0.pointer(GPS_IFD_POINTER, Target::GpsIfd);
    }

    let thumb = b.thumbnail.as_deref().filter(|t| !t.is_empty());
    let mut ifd1 = Ifd::default();
    if let Some(t) = thumb {
        ifd1.pointer(tags::THUMBNAIL_OFFSET, Target::Thumbnail);
        ifd1.long(tags::THUMBNAIL_LENGTH, t.len() as u32);
    }

    // Layout pass.
    let ifd0_at = 8;
    let exif_at = ifd0_at + ifd0.size();
    let gps_at = exif_at + if exif.is_empty() { 0 } else { exif.size() };
    let ifd1_at = gps_at + if gps.is_empty() { 0 } else { gps.size() };
    let thumb_at = ifd1_at + if ifd1.is_empty() { 0 } else { ifd1.size() };
    let strip_at = thumb_at + thumb.map_or(0, |t| even(t.len()));
    let resolve = |t: Target| {
        (match t {
            Target::ExifIfd => exif_at,
            Target::GpsIfd => gps_at,
            Target::Thumbnail => thumb_at,
            Target::Strip => strip_at,
        }) as u32
    };

    let mut out = Vec::with_capacity(strip_at + base_image.map_or(0, |r| r.pixels().len()));
    out.extend_from_slice(b"II");
    out.extend_from_slice(&42u16.to_le_bytes());
    out.extend_from_slice(&(ifd0_at as u32).to_le_bytes());
    let next = if ifd1.is_empty() { 0 } else { ifd1_at as u32 };
    ifd0.write(&mut out, next, resolve);
    if !exif.is_empty() {
        exif.write(&mut out, 0, resolve);
    }
    if !gps.is_empty() {
        gps.write(&mut out, 0, resolve);
    }
    if !ifd1.is_empty() {
        ifd1.write(&mut out, 0, resolve);
    }
    if let Some(t) = thumb {
        out.extend_from_slice(t);
        if t.len() % 2 == 1 {
            out.push(0);
        }
    }
    debug_assert_eq!(out.len(), strip_at);
    if let Some(r) = base_image {
        out.extend_from_slice(r.pixels());
    }
    out
}

/// Inserts the bundle as an `Exif\0\0` APP1 segment right after the SOI
/// marker of `jpeg`.
pub fn write_jpeg_exif(bundle: &TagBundle, jpeg: &[u8]) -> Result<Vec<u8>, DatagenError> {
    if !jpeg.starts_with(&[0xFF, 0xD8]) {
        return Err(DatagenError::NotJpeg);
    }
    let tiff = write_exif(bundle, None);
    let len = 2 + 6 + tiff.len();
    let len = u16::try_from(len).map_err(|_| DatagenError::ExifTooLarge(len))?;
    let mut out = Vec::with_capacity(jpeg.len() + len as usize + 2);
    out.extend_from_slice(&jpeg[..2]);
    out.extend_from_slice(&[0xFF, 0xE1]);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(b"Exif\0\0");
    out.extend_from_slice(&tiff);
    out.extend_from_slice(&jpeg[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::fixtures::full_bundle;
    use crate::metadata::{parse_exif, TagSource};

    #[test]
    fn empty_bundle_round_trip() {
        let bytes = write_exif(&TagBundle::default(), None);
        assert!(parse_exif(&bytes).unwrap().is_all_absent());
    }

    #[test]
    fn full_bundle_round_trip() {
        let b = full_bundle();
        assert_eq!(parse_exif(&write_exif(&b, None)).unwrap(), b);
    }

    #[test]
    fn odd_thumbnail_round_trip() {
        let b = TagBundle {
            thumbnail: Some(vec![9, 8, 7]),
            make: Some("X".into()),
            ..TagBundle::empty(TagSource::Embedded)
        };
        assert_eq!(parse_exif(&write_exif(&b, None)).unwrap(), b);
    }

    #[test]
    fn tiff_with_strip_decodes_as_image() {
        let r = Raster::from_fn(40, 33, |x, y| ((x * 7 + y * 3) % 256) as u8);
        let b = full_bundle();
        let bytes = write_exif(&b, Some(&r));
        assert_eq!(parse_exif(&bytes).unwrap(), b);
        assert_eq!(Raster::decode(&bytes).unwrap(), r);
    }

    #[test]
    fn jpeg_wrapper() {
        let mut jpeg = Vec::new();
        let img = image::GrayImage::from_fn(16, 16, |x, y| image::Luma([(x * 16 + y) as u8]));
        img.write_to(&mut std::io::Cursor::new(&mut jpeg), image::ImageFormat::Jpeg)
            .unwrap();
        let b = full_bundle();
        let with = write_jpeg_exif(&b, &jpeg).unwrap();
        assert_eq!(parse_exif(&with).unwrap(), b);
        assert_eq!(Raster::decode(&with).unwrap().width(), 16);
        assert!(matches!(write_jpeg_exif(&b, b"nope"), Err(DatagenError::NotJpeg)));
    }
}
