//! Bounds-checked EXIF reader.
//!
//! Accepts either a JPEG stream (the TIFF block is taken from the first APP1
//! segment carrying the `Exif\0\0` signature) or a bare TIFF stream. Only the
//! target tags are decoded; everything else, MakerNote included, is skipped.
//! A malformed individual tag leaves its field absent instead of failing the
//! whole parse.

use std::collections::HashSet;

use thiserror::Error;

use super::tags::{self, type_size};
use super::{parse_exif_date, GpsTriple, Rational, TagBundle, TagSource};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExifError {
    #[error("malformed container: {0}")]
    MalformedContainer(&'static str),
}

const EXIF_SIGNATURE: &[u8] = b"Exif\0\0";
/// Upper bound on entries read from one IFD; real files stay far below it.
const MAX_IFD_ENTRIES: usize = 1024;

pub fn parse_exif(bytes: &[u8]) -> Result<TagBundle, ExifError> {
    let tiff = locate_tiff(bytes)?;
    let reader = TiffReader::new(tiff)?;
    Ok(reader.read_bundle()?.sanitized())
}

fn locate_tiff(bytes: &[u8]) -> Result<&[u8], ExifError> {
    if bytes.starts_with(b"II") || bytes.starts_with(b"MM") {
        return Ok(bytes);
    }
    if !bytes.starts_with(&[0xFF, 0xD8]) {
        return Err(ExifError::MalformedContainer("neither JPEG nor TIFF"));
    }
    let mut pos = 2;
    while pos + 4 <= bytes.len() {
        if bytes[pos] != 0xFF {
            return Err(ExifError::MalformedContainer("lost JPEG marker sync"));
        }
        let marker = bytes[pos + 1];
        match marker {
            // Fill bytes.
            0xFF => {
                pos += 1;
                continue;
            }
            // Standalone markers carry no length.
            0x01 | 0xD0..=0xD8 => {
                pos += 2;
                continue;
            }
            // Image data begins; metadata segments always precede it.
            0xDA | 0xD9 => break,
            _ => {}
        }
        let len = u16::from_be_bytes([bytes[pos + 2], bytes[pos + 3]]) as usize;
        if len < 2 || pos + 2 + len > bytes.len() {
            return Err(ExifError::MalformedContainer("truncated JPEG segment"));
        }
        let payload = &bytes[pos + 4..pos + 2 + len];
        if marker == 0xE1 && payload.starts_with(EXIF_SIGNATURE) {
            return Ok(&payload[EXIF_SIGNATURE.len()..]);
        }
        pos += 2 + len;
    }
    Err(ExifError::MalformedContainer("no EXIF APP1 segment"))
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    tag: u16,
    typ: u16,
    count: u32,
    /// Offset of the 4-byte value/offset field within the TIFF block.
    field_pos: usize,
}

struct TiffReader<'a> {
    data: &'a [u8],
    little: bool,
}

impl<'a> TiffReader<'a> {
    fn new(data: &'a [u8]) -> Result<Self, ExifError> {
        if data.len() < 8 {
            return Err(ExifError::MalformedContainer("TIFF header too short"));
        }
        let little = match &data[..2] {
            b"II" => true,
            b"MM" => false,
            _ => return Err(ExifError::MalformedContainer("bad byte-order mark")),
        };
        let r = Self { data, little };
        if r.u16_at(2) != Some(42) {
            return Err(ExifError::MalformedContainer("bad TIFF magic"));
        }
        Ok(r)
    }

    fn u16_at(&self, pos: usize) -> Option<u16> {
        let b = self.data.get(pos..pos.checked_add(2)?)?;
        Some(if self.little {
            u16::from_le_bytes([b[0], b[1]])
        } else {
            u16::from_be_bytes([b[0], b[1]])
        })
    }

    fn u32_at(&self, pos: usize) -> Option<u32> {
        let b = self.data.get(pos..pos.checked_add(4)?)?;
        let arr = [b[0], b[1], b[2], b[3]];
        Some(if self.little {
            u32::from_le_bytes(arr)
        } else {
            u32::from_be_bytes(arr)
        })
    }

    /// Reads the IFD at `offset`: its entries and the next-IFD offset.
    fn ifd(&self, offset: usize) -> Option<(Vec<Entry>, u32)> {
        let count = self.u16_at(offset)? as usize;
        if count > MAX_IFD_ENTRIES {
            return None;
        }
        let end = offset.checked_add(2 + 12 * count + 4)?;
        if end > self.data.len() {
            return None;
        }
        let entries = (0..count)
            .map(|i| {
                let p = offset + 2 + 12 * i;
                Entry {
                    tag: self.u16_at(p).unwrap_or(0),
                    typ: self.u16_at(p + 2).unwrap_or(0),
                    count: self.u32_at(p + 4).unwrap_or(0),
                    field_pos: p + 8,
                }
            })
            .collect();
        let next = self.u32_at(offset + 2 + 12 * count)?;
        Some((entries, next))
    }

    /// Raw value bytes of an entry, inline or via offset; `None` if out of bounds.
    fn value_bytes(&self, e: &Entry) -> Option<&'a [u8]> {
        let size = type_size(e.typ)?.checked_mul(e.count as usize)?;
        let start = if size <= 4 {
            e.field_pos
        } else {
            self.u32_at(e.field_pos)? as usize
        };
        self.data.get(start..start.checked_add(size)?)
    }

    fn ascii(&self, e: &Entry) -> Option<String> {
        if e.typ != tags::TYPE_ASCII {
            return None;
        }
        let raw = self.value_bytes(e)?;
        let end = raw.iter().position(|&b| b == 0).unwrap_or(raw.len());
        let s = std::str::from_utf8(&raw[..end]).ok()?;
        (!s.is_empty()).then(|| s.to_string())
    }

    fn long(&self, e: &Entry) -> Option<u32> {
        if e.count != 1 {
            return None;
        }
        match e.typ {
            tags::TYPE_LONG | tags::TYPE_IFD => self.u32_at(e.field_pos),
            tags::TYPE_SHORT => self.u16_at(e.field_pos).map(u32::from),
            _ => None,
        }
    }

    fn rational_triple(&self, e: &Entry) -> Option<GpsTriple> {
        if e.typ != tags::TYPE_RATIONAL || e.count != 3 {
            return None;
        }
        let base = self.u32_at(e.field_pos)? as usize;
        let mut out = [Rational::new(0, 0); 3];
        for (i, slot) in out.iter_mut().enumerate() {
            let p = base.checked_add(8 * i)?;
            *slot = Rational::new(self.u32_at(p)?, self.u32_at(p + 4)?);
            if slot.den == 0 {
                return None;
            }
        }
        Some(out)
    }

    fn read_bundle(&self) -> Result<TagBundle, ExifError> {
        let mut b = TagBundle::empty(TagSource::Embedded);
        let ifd0_offset = self.u32_at(4).unwrap_or(u32::MAX) as usize;
        let (ifd0, ifd1_offset) = self
            .ifd(ifd0_offset)
            .ok_or(ExifError::MalformedContainer("IFD0 offset out of bounds"))?;

        let mut visited = HashSet::from([ifd0_offset]);
        let mut exif_ptr = None;
        let mut gps_ptr = None;
        for e in &ifd0 {
            match e.tag {
                tags::PROCESSING_SOFTWARE => b.processing_software = self.ascii(e),
                tags::MAKE => b.make = self.ascii(e),
                tags::MODEL => b.model = self.ascii(e),
                tags::SOFTWARE => b.software = self.ascii(e),
                tags::MODIFY_DATE => b.modify_date = self.ascii(e).and_then(|s| parse_exif_date(&s)),
                tags::ARTIST => b.artist = self.ascii(e),
                tags::HOST_COMPUTER => b.host_computer = self.ascii(e),
                tags::IMAGE_RESOURCES => {
                    b.image_resources = self
                        .value_bytes(e)
                        .filter(|v| !v.is_empty() && type_size(e.typ) == Some(1))
                        .map(<[u8]>::to_vec)
                }
                tags::EXIF_IFD_POINTER => exif_ptr = self.long(e),
                tags::GPS_IFD_POINTER => gps_ptr = self.long(e),
                _ => {}
            }
        }

        if let Some(off) = exif_ptr.map(|o| o as usize) {
            if visited.insert(off) {
                for e in self.ifd(off).map(|(v, _)| v).unwrap_or_default() {
                    match e.tag {
                        tags::DATE_TIME_ORIGINAL => {
                            b.date_time_original = self.ascii(&e).and_then(|s| parse_exif_date(&s))
                        }
                        tags::CREATE_DATE => {
                            b.create_date = self.ascii(&e).and_then(|s| parse_exif_date(&s))
                        }
                        _ => {}
                    }
                }
            }
        }

        if let Some(off) = gps_ptr.map(|o| o as usize) {
            if visited.insert(off) {
                for e in self.ifd(off).map(|(v, _)| v).unwrap_or_default() {
                    match e.tag {
                        tags::GPS_LATITUDE_REF => b.gps_latitude_ref = self.ascii(&e),
                        tags::GPS_LATITUDE => b.gps_latitude = self.rational_triple(&e),
                        tags::GPS_LONGITUDE_REF => b.gps_longitude_ref = self.ascii(&e),
                        tags::GPS_LONGITUDE => b.gps_longitude = self.rational_triple(&e),
                        _ => {}
                    }
                }
            }
        }

        let ifd1_offset = ifd1_offset as usize;
        if ifd1_offset != 0 && visited.insert(ifd1_offset) {
            if let Some((ifd1, _)) = self.ifd(ifd1_offset) {
                let find = |tag| ifd1.iter().find(|e| e.tag == tag).and_then(|e| self.long(e));
                if let (Some(off), Some(len)) =
                    (find(tags::THUMBNAIL_OFFSET), find(tags::THUMBNAIL_LENGTH))
                {
                    let (off, len) = (off as usize, len as usize);
                    b.thumbnail = off
                        .checked_add(len)
                        .and_then(|end| self.data.get(off..end))
                        .filter(|t| !t.is_empty())
                        .map(<[u8]>::to_vec);
                }
            }
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembled big-endian TIFF with a single Make entry, independent of the writer.
    fn tiff_with_make_be(make: &str) -> Vec<u8> {
        let mut v = b"MM\0\x2a\0\0\0\x08".to_vec();
        v.extend_from_slice(&1u16.to_be_bytes());
        v.extend_from_slice(&tags::MAKE.to_be_bytes());
        v.extend_from_slice(&tags::TYPE_ASCII.to_be_bytes());
        let text = format!("{make}\0");
        v.extend_from_slice(&(text.len() as u32).to_be_bytes());
        if text.len() <= 4 {
            let mut inline = text.as_bytes().to_vec();
            inline.resize(4, 0);
            v.extend_from_slice(&inline);
            v.extend_from_slice(&0u32.to_be_bytes());
        } else {
            v.extend_from_slice(&26u32.to_be_bytes());
            v.extend_from_slice(&0u32.to_be_bytes());
            v.extend_from_slice(text.as_bytes());
        }
        v
    }

    #[test]
    fn bare_big_endian_tiff_make_only() {
        let b = parse_exif(&tiff_with_make_be("CanonX")).unwrap();
        assert_eq!(b.make.as_deref(), Some("CanonX"));
        assert_eq!(b.present_count(), 1);
        assert_eq!(b.source, TagSource::Embedded);
    }

    #[test]
    fn jpeg_without_app1_is_malformed() {
        let jpeg = [0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x04, b'J', b'F', 0xFF, 0xDA, 0, 2, 0xFF, 0xD9];
        assert!(matches!(parse_exif(&jpeg), Err(ExifError::MalformedContainer(_))));
        assert!(parse_exif(b"hello world").is_err());
        assert!(parse_exif(&[]).is_err());
    }

    #[test]
    fn ifd0_out_of_bounds() {
        let mut t = tiff_with_make_be("X");
        t[4..8].copy_from_slice(&9999u32.to_be_bytes());
        assert!(parse_exif(&t).is_err());
    }

    #[test]
    fn value_offset_out_of_bounds_leaves_field_absent() {
        let mut t = tiff_with_make_be("A longer make name");
        // Point the string payload past the end.
        t[18..22].copy_from_slice(&5000u32.to_be_bytes());
        let b = parse_exif(&t).unwrap();
        assert!(b.make.is_none());
    }

    #[test]
    fn self_referencing_ifd_chain_terminates() {
        let mut t = tiff_with_make_be("X");
        // next-IFD pointer back to IFD0
        t[22..26].copy_from_slice(&8u32.to_be_bytes());
        assert_eq!(parse_exif(&t).unwrap().make.as_deref(), Some("X"));
    }
}
