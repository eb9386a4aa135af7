//! Standard EXIF/TIFF tag identifiers for the fields a [`TagBundle`](super::TagBundle) carries.

// IFD0
pub const PROCESSING_SOFTWARE: u16 = 0x000B;
pub const IMAGE_WIDTH: u16 = 0x0100;
pub const IMAGE_LENGTH: u16 = 0x0101;
pub const BITS_PER_SAMPLE: u16 = 0x0102;
pub const COMPRESSION: u16 = 0x0103;
pub const PHOTOMETRIC_INTERPRETATION: u16 = 0x0106;
pub const MAKE: u16 = 0x010F;
pub const MODEL: u16 = 0x0110;
pub const STRIP_OFFSETS: u16 = 0x0111;
pub const SAMPLES_PER_PIXEL: u16 = 0x0115;
pub const ROWS_PER_STRIP: u16 = 0x0116;
pub const STRIP_BYTE_COUNTS: u16 = 0x0117;
pub const SOFTWARE: u16 = 0x0131;
/// Labelled `ModifyDate` by ExifTool; `DateTime` in the TIFF standard.
pub const MODIFY_DATE: u16 = 0x0132;
pub const ARTIST: u16 = 0x013B;
pub const HOST_COMPUTER: u16 = 0x013C;
/// Photoshop image resource block.
pub const IMAGE_RESOURCES: u16 = 0x8649;
pub const EXIF_IFD_POINTER: u16 = 0x8769;
pub const GPS_IFD_POINTER: u16 = 0x8825;

// Exif sub-IFD
pub const DATE_TIME_ORIGINAL: u16 = 0x9003;
/// Labelled `CreateDate` by ExifTool; `DateTimeDigitized` in the Exif standard.
pub const CREATE_DATE: u16 = 0x9004;

// GPS sub-IFD
pub const GPS_LATITUDE_REF: u16 = 0x0001;
pub const GPS_LATITUDE: u16 = 0x0002;
pub const GPS_LONGITUDE_REF: u16 = 0x0003;
pub const GPS_LONGITUDE: u16 = 0x0004;

// IFD1
pub const THUMBNAIL_OFFSET: u16 = 0x0201;
pub const THUMBNAIL_LENGTH: u16 = 0x0202;

// Field types
pub const TYPE_BYTE: u16 = 1;
pub const TYPE_ASCII: u16 = 2;
pub const TYPE_SHORT: u16 = 3;
pub const TYPE_LONG: u16 = 4;
pub const TYPE_RATIONAL: u16 = 5;
pub const TYPE_UNDEFINED: u16 = 7;
pub const TYPE_IFD: u16 = 13;

/// Size in bytes of one component of `typ`, or `None` for unknown types.
pub fn type_size(typ: u16) -> Option<usize> {
    Some(match typ {
        1 | 2 | 6 | 7 => 1,
        3 | 8 => 2,
        4 | 9 | 11 | 13 => 4,
        5 | 10 | 12 => 8,
        _ => return None,
    })
}
