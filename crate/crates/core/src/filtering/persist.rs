//! Single-file index serialization.
//!
//! Layout (all integers little-endian `u32` unless noted):
//!
//! ```text
//! "PVIX"  version:u8  scalar_width:u8
//! C  m  N
//! coarse centroids       C * 256 scalars
//! sub-codebook j=0..m    256 * (256/m) scalars each
//! N times: id_len, id (UTF-8), n_desc, n_desc * 32 descriptor bytes
//! C times: n_post, n_post * (image:u32, code: m bytes)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Cell, Codebook, FilterError, QuantizedIndex, DESCRIPTOR_BYTES};
use crate::scalar::Scalar;
use crate::visual::Descriptor;

pub const MAGIC: &[u8; 4] = b"PVIX";
pub const VERSION: u8 = 1;

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("count exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> Result<usize, FilterError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_scalars<T: Scalar>(r: &mut impl Read, n: usize) -> Result<Vec<T>, FilterError> {
    let mut buf = vec![0u8; n * T::WIDTH];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(T::WIDTH).map(T::read_le).collect())
}

fn bounded(n: usize, limit: usize, what: &str) -> Result<usize, FilterError> {
    if n > limit {
        return Err(FilterError::Format(format!("{what} count {n} exceeds {limit}")));
    }
    Ok(n)
}

impl<T: Scalar> QuantizedIndex<T> {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), FilterError> {
        let m = self.sub.len();
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION, T::TAG])?;
        put_u32(w, self.cells.len())?;
        put_u32(w, m)?;
        put_u32(w, self.ids.len())?;
        let mut buf = Vec::new();
        for book in std::iter::once(&self.coarse).chain(&self.sub) {
            buf.clear();
            for &v in book.centroids() {
                v.write_le(&mut buf);
            }
            w.write_all(&buf)?;
        }
        for (id, ds) in self.ids.iter().zip(&self.descriptors) {
            put_u32(w, id.len())?;
            w.write_all(id.as_bytes())?;
            put_u32(w, ds.len())?;
            for d in ds {
                w.write_all(&super::descriptor_bytes(d))?;
            }
        }
        for cell in &self.cells {
            put_u32(w, cell.images.len())?;
            for (img, code) in cell.images.iter().zip(cell.codes.chunks_exact(m)) {
                w.write_all(&img.to_le_bytes())?;
                w.write_all(code)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, FilterError> {
        let mut head = [0u8; 6];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(FilterError::Format("bad magic".into()));
        }
        if head[4] != VERSION {
            return Err(FilterError::Format(format!("unsupported version {}", head[4])));
        }
        if head[5] != T::TAG {
            return Err(FilterError::Format(format!(
                "scalar width {} does not match the requested {}",
                head[5],
                T::TAG
            )));
        }
        let c = bounded(get_u32(r)?, 1 << 20, "cell")?;
        let m = get_u32(r)?;
        if !matches!(m, 1 | 2 | 4 | 8 | 16 | 32) {
            return Err(FilterError::Format(format!("invalid subquantizer count {m}")));
        }
        let n = bounded(get_u32(r)?, 1 << 28, "image")?;
        let block = DESCRIPTOR_BYTES / m;
        let coarse = Codebook::from_centroids(DESCRIPTOR_BYTES, get_scalars(r, c * 256)?);
        let sub = (0..m)
            .map(|_| Ok(Codebook::from_centroids(block, get_scalars(r, 256 * block * 8)?)))
            .collect::<Result<Vec<_>, FilterError>>()?;

        let mut ids = Vec::with_capacity(n.min(1 << 16));
        let mut descriptors = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let len = bounded(get_u32(r)?, 1 << 16, "id byte")?;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id)?;
            ids.push(String::from_utf8(id).map_err(|_| FilterError::Format("id is not UTF-8".into()))?);
            let count = bounded(get_u32(r)?, 1 << 20, "descriptor")?;
            let mut raw = vec![0u8; count * DESCRIPTOR_BYTES];
            r.read_exact(&mut raw)?;
            descriptors.push(
                raw.chunks_exact(DESCRIPTOR_BYTES)
                    .map(|b| {
                        let mut d: Descriptor = [0; 4];
                        for (w, chunk) in d.iter_mut().zip(b.chunks_exact(8)) {
                            *w = u64::from_le_bytes(chunk.try_into().unwrap());
                        }
                        d
                    })
                    .collect(),
            );
        }
        let mut cells = Vec::with_capacity(c);
        for _ in 0..c {
            let count = bounded(get_u32(r)?, 1 << 28, "posting")?;
            let mut raw = vec![0u8; count * (4 + m)];
            r.read_exact(&mut raw)?;
            let mut cell = Cell {
                images: Vec::with_capacity(count),
                codes: Vec::with_capacity(count * m),
            };
            for rec in raw.chunks_exact(4 + m) {
                let img = u32::from_le_bytes(rec[..4].try_into().unwrap());
                if img as usize >= n {
                    return Err(FilterError::Format(format!("posting names image {img} of {n}")));
                }
                cell.images.push(img);
                cell.codes.extend_from_slice(&rec[4..]);
            }
            cells.push(cell);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(FilterError::Format("trailing bytes".into()));
        }
        Ok(Self {
            coarse,
            sub,
            ids,
            descriptors,
            cells,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FilterError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FilterError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}
