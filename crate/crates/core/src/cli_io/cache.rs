//! Binary kernel-matrix cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "FPK1" | version u32 | tag u32 | mu f64 | side f64 | lambda f64 | omega f64
//! | cutoff u32 | quad_order u32 | dim u32 | crc32(header) u32
//! | dim² × (re f64, im f64) row-major
//! | tail_bound f64 | error_estimate f64 | c_sing f64 (NaN if absent) | crc32(payload + trailer) u32
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::charge_kernel::{ContentTag, KernelMatrix, KernelMeta};
use crate::error::{Error, Result};
use crate::greens::BoundarySide;

pub const MAGIC: &[u8; 4] = b"FPK1";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 4 * 8 + 3 * 4;

/// Fields of the fixed-size header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub version: u32,
    pub tag: ContentTag,
    pub mu: f64,
    pub side: f64,
    pub lambda: f64,
    pub omega: f64,
    pub cutoff: u32,
    pub quad_order: u32,
    pub dim: u32,
}

fn side_from_code(code: f64) -> Result<BoundarySide> {
    match code {
        c if c == 1.0 => Ok(BoundarySide::Plus),
        c if c == -1.0 => Ok(BoundarySide::Minus),
        c if c == 0.0 => Ok(BoundarySide::NegativeReal),
        c => Err(Error::Cache(format!("side code {c} cannot be cached"))),
    }
}

impl CacheHeader {
    pub fn of(m: &KernelMatrix) -> Self {
        CacheHeader {
            version: FORMAT_VERSION,
            tag: m.meta.tag,
            mu: m.meta.energy,
            side: m.meta.side.code(),
            lambda: m.meta.lambda,
            omega: m.meta.omega,
            cutoff: m.meta.cutoff as u32,
            quad_order: m.meta.quad_order as u32,
            dim: m.dim() as u32,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&self.version.to_le_bytes());
        b.extend_from_slice(&self.tag.code().to_le_bytes());
        for v in [self.mu, self.side, self.lambda, self.omega] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.cutoff, self.quad_order, self.dim] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN || &b[..4] != MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::Cache(format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let tag = ContentTag::from_code(u32_at(8)).ok_or_else(|| Error::Cache("unknown content tag".into()))?;
        Ok(CacheHeader {
            version,
            tag,
            mu: f64_at(12),
            side: f64_at(20),
            lambda: f64_at(28),
            omega: f64_at(36),
            cutoff: u32_at(44),
            quad_order: u32_at(48),
            dim: u32_at(52),
        })
    }
}

/// Serializes a matrix to the cache byte format.
pub fn encode(m: &KernelMatrix) -> Result<Vec<u8>> {
    side_from_code(m.meta.side.code())?;
    let header = CacheHeader::of(m).to_bytes();
    let dim = m.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + 16 * dim * dim + 28);
    out.extend_from_slice(&header);
    out.extend_from_slice(&crc32fast::hash(&header).to_le_bytes());
    let body_start = out.len();
    for i in 0..dim {
        for j in 0..dim {
            let v = m.entries[(i, j)];
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    for v in [m.meta.tail_bound, m.meta.error_estimate, m.meta.c_sing.unwrap_or(f64::NAN)] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[body_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses the cache byte format, verifying both checksums and the length.
pub fn decode(bytes: &[u8]) -> Result<KernelMatrix> {
    let header = CacheHeader::from_bytes(bytes)?;
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Cache("truncated header".into()));
    }
    let stored = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap());
    if crc32fast::hash(&bytes[..HEADER_LEN]) != stored {
        return Err(Error::Cache("header checksum mismatch".into()));
    }
    let dim = header.dim as usize;
    let body_start = HEADER_LEN + 4;
    let body_len = 16 * dim * dim + 24;
    if bytes.len() != body_start + body_len + 4 {
        return Err(Error::Cache(format!(
            "length {} does not match dimension {dim}",
            bytes.len()
        )));
    }
    let body = &bytes[body_start..body_start + body_len];
    let stored = u32::from_le_bytes(bytes[body_start + body_len..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Cache("payload checksum mismatch".into()));
    }
    let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
    let entries = DMatrix::from_fn(dim, dim, |i, j| {
        let o = 16 * (i * dim + j);
        Complex64::new(f64_at(o), f64_at(o + 8))
    });
    let trailer = 16 * dim * dim;
    let c_sing = f64_at(trailer + 16);
    Ok(KernelMatrix {
        entries,
        meta: KernelMeta {
            tag: header.tag,
            energy: header.mu,
            side: side_from_code(header.side)?,
            lambda: header.lambda,
            omega: header.omega,
            cutoff: header.cutoff as usize,
            quad_order: header.quad_order as usize,
            tail_bound: f64_at(trailer),
            error_estimate: f64_at(trailer + 8),
            c_sing: if c_sing.is_nan() { None } else { Some(c_sing) },
        },
    })
}

/// Everything a cached matrix depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub tag: ContentTag,
    pub mu: f64,
    pub side: BoundarySide,
    pub lambda: f64,
    pub omega: f64,
    pub cutoff: usize,
    pub quad_order: usize,
    pub tolerances: Vec<f64>,
}

impl CacheKey {
    /// File name: tag plus a hash over the exact bit patterns of every field.
    pub fn file_name(&self) -> String {
        let mut h = Sha256::new();
        h.update(FORMAT_VERSION.to_le_bytes());
        h.update(self.tag.code().to_le_bytes());
        for v in [self.mu, self.side.code(), self.lambda, self.omega] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.cutoff as u64).to_le_bytes());
        h.update((self.quad_order as u64).to_le_bytes());
        for t in &self.tolerances {
            h.update(t.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        let hex: String = digest[..12].iter().map(|b| format!("{b:02x}")).collect();
        let tag = match self.tag {
            ContentTag::K => "K",
            ContentTag::GammaRef => "gamma-ref",
            ContentTag::GammaBoundary => "gamma",
        };
        format!("{tag}-{hex}.fpk")
    }

    fn matches(&self, m: &KernelMatrix) -> bool {
        m.meta.tag == self.tag
            && m.meta.energy.to_bits() == self.mu.to_bits()
            && m.meta.side.code().to_bits() == self.side.code().to_bits()
            && m.meta.lambda.to_bits() == self.lambda.to_bits()
            && m.meta.omega.to_bits() == self.omega.to_bits()
            && m.meta.cutoff == self.cutoff
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Directory of cached kernel matrices.
#[derive(Debug, Clone)]
pub struct KernelCache {
    pub dir: PathBuf,
}

/// Outcome of a cache lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheEvent {
    Hit,
    Miss,
    Rebuilt,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        KernelCache { dir: dir.into() }
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Cached matrix, or `Err` describing why the entry was rejected.
    pub fn load(&self, key: &CacheKey) -> Result<Option<KernelMatrix>> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let m = decode(&bytes)?;
        if !key.matches(&m) {
            return Err(Error::Cache("header does not match the requested key".into()));
        }
        Ok(Some(m))
    }

    pub fn store(&self, key: &CacheKey, m: &KernelMatrix) -> Result<PathBuf> {
        let path = self.path(key);
        atomic_write(&path, &encode(m)?)?;
        Ok(path)
    }

    /// Returns the cached matrix or builds and stores it; rejected entries
    /// are rebuilt with a warning.
    pub fn get_or_build<F>(&self, key: &CacheKey, build: F) -> Result<(KernelMatrix, CacheEvent)>
    where
        F: FnOnce() -> Result<KernelMatrix>,
    {
        let event = match self.load(key) {
            Ok(Some(m)) => {
                log::info!("cache hit {}", key.file_name());
                return Ok((m, CacheEvent::Hit));
            }
            Ok(None) => CacheEvent::Miss,
            Err(e) => {
                log::warn!("ignoring cache entry {}: {e}", key.file_name());
                CacheEvent::Rebuilt
            }
        };
        let m = build()?;
        self.store(key, &m)?;
        Ok((m, event))
    }

    /// Headers of all readable entries.
    pub fn entries(&self) -> Result<Vec<(PathBuf, std::result::Result<CacheHeader, String>)>> {
        let mut out = Vec::new();
        let rd = match std::fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in rd {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("fpk") {
                continue;
            }
            let header = std::fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|b| decode(&b).map(|m| CacheHeader::of(&m)).map_err(|e| e.to_string()));
            out.push((path, header));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Removes every cache file; returns how many.
    pub fn clear(&self) -> Result<usize> {
        let mut n = 0;
        for (path, _) in self.entries()? {
            std::fs::remove_file(path)?;
            n += 1;
        }
        Ok(n)
    }
}
