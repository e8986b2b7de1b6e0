//! On-disk matrix cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "IVOP"  version:u8 = 1  kind:u8 (0 dense, 1 quantized)  rows:u32  cols:u32
//! dense:     rows*cols f64, row-major
//! quantized: scale:i8, then rows*cols i64 mantissas, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::quant::QuantizedMatrix;

pub const MAGIC: &[u8; 4] = b"IVOP";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CacheKind {
    Dense,
    Quantized,
}

impl CacheKind {
    fn tag(self) -> u8 {
        match self {
            CacheKind::Dense => 0x00,
            CacheKind::Quantized => 0x01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Dense(DenseMatrix),
    Quantized(QuantizedMatrix),
}

impl Payload {
    pub fn kind(&self) -> CacheKind {
        match self {
            Payload::Dense(_) => CacheKind::Dense,
            Payload::Quantized(_) => CacheKind::Quantized,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Payload::Dense(m) => m.dim(),
            Payload::Quantized(q) => q.dim(),
        }
    }
}

/// What a cached matrix is: the grid, the assembly scheme, and the stage of
/// the pipeline it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CacheKey {
    Operator { nx: usize, ny: usize },
    Inverse { nx: usize, ny: usize },
    QuantizedInverse { nx: usize, ny: usize, digits: u32 },
}

impl CacheKey {
    pub fn operator(grid: &Grid2D) -> Self {
        CacheKey::Operator {
            nx: grid.nx(),
            ny: grid.ny(),
        }
    }

    pub fn inverse(grid: &Grid2D) -> Self {
        CacheKey::Inverse {
            nx: grid.nx(),
            ny: grid.ny(),
        }
    }

    pub fn quantized(grid: &Grid2D, digits: u32) -> Self {
        CacheKey::QuantizedInverse {
            nx: grid.nx(),
            ny: grid.ny(),
            digits,
        }
    }

    pub fn kind(&self) -> CacheKind {
        match self {
            CacheKey::QuantizedInverse { .. } => CacheKind::Quantized,
            _ => CacheKind::Dense,
        }
    }

    pub fn file_name(&self) -> String {
        match *self {
            CacheKey::Operator { nx, ny } => format!("uniform-{nx}x{ny}-operator.ivop"),
            CacheKey::Inverse { nx, ny } => format!("uniform-{nx}x{ny}-inverse.ivop"),
            CacheKey::QuantizedInverse { nx, ny, digits } => {
                format!("uniform-{nx}x{ny}-inverse-m{digits}.ivop")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub kind: CacheKind,
    pub path: PathBuf,
}

pub fn encode(payload: &Payload) -> Vec<u8> {
    let n = payload.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 1 + 8 * n * n);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(payload.kind().tag());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    match payload {
        Payload::Dense(m) => {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Payload::Quantized(q) => {
            out.push(q.scale_digits() as i8 as u8);
            for v in q.mantissas() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Payload> {
    let bad = |reason: String| Error::cache(path, reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!(
            "format version {} (expected {VERSION})",
            bytes[4]
        )));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if rows != cols {
        return Err(bad(format!("non-square matrix {rows}x{cols}")));
    }
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    let (body, scale) = match bytes[5] {
        0x00 => (body, None),
        0x01 => match body.split_first() {
            Some((&s, rest)) => (rest, Some(s as i8)),
            None => return Err(bad("truncated: missing scale byte".into())),
        },
        other => return Err(bad(format!("unknown kind byte {other:#04x}"))),
    };
    if body.len() != 8 * count {
        return Err(bad(format!(
            "payload is {} bytes, expected {}",
            body.len(),
            8 * count
        )));
    }
    let words = body
        .chunks_exact(8)
        .map(|c| <[u8; 8]>::try_from(c).unwrap());
    match scale {
        None => {
            let data = words.map(f64::from_le_bytes).collect();
            DenseMatrix::from_row_major(rows, data)
                .map(Payload::Dense)
                .map_err(|e| bad(e.to_string()))
        }
        Some(s) => {
            if s < 0 {
                return Err(bad(format!("negative scale {s}")));
            }
            let mantissas = words.map(i64::from_le_bytes).collect();
            QuantizedMatrix::from_mantissas(rows, s as u32, mantissas)
                .map(Payload::Quantized)
                .map_err(|e| bad(e.to_string()))
        }
    }
}

/// Writes through a temporary file and renames it into place.
pub fn write(path: &Path, payload: &Payload) -> Result<()> {
    let bytes = encode(payload);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(&bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<Payload> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// A directory of cache files addressed by [`CacheKey`].
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry(&self, key: CacheKey) -> CacheEntry {
        CacheEntry {
            kind: key.kind(),
            path: self.dir.join(key.file_name()),
            key,
        }
    }

    /// `Ok(None)` when no file exists; a present but unreadable file is an error.
    pub fn load(&self, key: CacheKey) -> Result<Option<Payload>> {
        let entry = self.entry(key);
        if !entry.path.exists() {
            return Ok(None);
        }
        let payload = read(&entry.path)?;
        if payload.kind() != entry.kind {
            return Err(Error::cache(&entry.path, "kind does not match its key"));
        }
        Ok(Some(payload))
    }

    pub fn store(&self, key: CacheKey, payload: &Payload) -> Result<CacheEntry> {
        let entry = self.entry(key);
        if payload.kind() != entry.kind {
            return Err(Error::cache(&entry.path, "kind does not match its key"));
        }
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        write(&entry.path, payload)?;
        Ok(entry)
    }

    pub fn load_dense(&self, key: CacheKey) -> Result<Option<DenseMatrix>> {
        Ok(self.load(key)?.map(|p| match p {
            Payload::Dense(m) => m,
            Payload::Quantized(_) => unreachable!("kind checked in load"),
        }))
    }

    pub fn load_quantized(&self, key: CacheKey) -> Result<Option<QuantizedMatrix>> {
        Ok(self.load(key)?.map(|p| match p {
            Payload::Quantized(q) => q,
            Payload::Dense(_) => unreachable!("kind checked in load"),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::invert;
    use crate::grid::build_uniform;
    use crate::quant::quantize;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = DenseMatrix::identity(2).unwrap();
        let bytes = encode(&Payload::Dense(m));
        assert_eq!(&bytes[..6], b"IVOP\x01\x00");
        assert_eq!(&bytes[6..14], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[14..22], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 14 + 32);

        let q = QuantizedMatrix::from_mantissas(1, 3, vec![-7]).unwrap();
        let bytes = encode(&Payload::Quantized(q));
        assert_eq!(&bytes[..6], b"IVOP\x01\x01");
        assert_eq!(bytes[14], 3);
        assert_eq!(&bytes[15..], &(-7i64).to_le_bytes());
    }

    #[test]
    fn dense_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ivop");
        let data: Vec<f64> = (0..16).map(|k| (k as f64).sin() * 1e-3).collect();
        let p = Payload::Dense(DenseMatrix::from_row_major(4, data).unwrap());
        write(&path, &p).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(encode(&back), fs::read(&path).unwrap());
        assert_eq!(back, p);
    }

    #[test]
    fn quantized_grid_inverse_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path().join("nested"));
        let grid = Grid2D::new(3, 5).unwrap();
        let q = quantize(&invert(build_uniform(&grid).unwrap()).unwrap(), 3).unwrap();
        let key = CacheKey::quantized(&grid, 3);
        assert_eq!(cache.load(key.clone()).unwrap(), None);
        let entry = cache
            .store(key.clone(), &Payload::Quantized(q.clone()))
            .unwrap();
        assert_eq!(entry.kind, CacheKind::Quantized);
        let back = cache.load_quantized(key).unwrap().unwrap();
        assert_eq!(back.mantissas(), q.mantissas());
        assert_eq!(back.scale_digits(), 3);
    }

    #[test]
    fn truncated_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.ivop");
        let bytes = encode(&Payload::Dense(DenseMatrix::identity(3).unwrap()));
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = read(&path).unwrap_err();
        assert!(matches!(err, Error::Cache { .. }));
        assert!(err.to_string().contains("short.ivop"), "{err}");
        fs::write(&path, &bytes[..5]).unwrap();
        assert!(matches!(read(&path), Err(Error::Cache { .. })));
    }

    #[test]
    fn corrupt_headers_rejected() {
        let good = encode(&Payload::Dense(DenseMatrix::identity(2).unwrap()));
        let p = Path::new("x.ivop");
        let mut bad_magic = good.clone();
        bad_magic[0] = b'J';
        assert!(decode(&bad_magic, p)
            .unwrap_err()
            .to_string()
            .contains("magic"));
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(decode(&bad_version, p)
            .unwrap_err()
            .to_string()
            .contains("version"));
        let mut bad_kind = good.clone();
        bad_kind[5] = 7;
        assert!(decode(&bad_kind, p).is_err());
        let mut extra = good;
        extra.push(0);
        assert!(decode(&extra, p).is_err());
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let grid = Grid2D::square(3).unwrap();
        let q = QuantizedMatrix::from_mantissas(1, 0, vec![1]).unwrap();
        assert!(cache
            .store(CacheKey::inverse(&grid), &Payload::Quantized(q))
            .is_err());
    }

    proptest! {
        #[test]
        fn quantized_bytes_round_trip(
            mant in prop::collection::vec(any::<i64>(), 9),
            m in 0u32..=12,
        ) {
            let p = Payload::Quantized(QuantizedMatrix::from_mantissas(3, m, mant).unwrap());
            let bytes = encode(&p);
            let back = decode(&bytes, Path::new("p")).unwrap();
            prop_assert_eq!(encode(&back), bytes);
            prop_assert_eq!(back, p);
        }
    }
}
