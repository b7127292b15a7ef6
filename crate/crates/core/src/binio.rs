//! Little-endian primitives shared by the versioned artifact formats
//! (feature caches, model checkpoints, probability files).
//!
//! Every artifact starts with an 8-byte magic string followed by a `u32`
//! format version. Strings are a `u32` byte length followed by UTF-8.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a {expected} file (magic {found:?}); was it written by another tool?")]
    BadMagic { expected: &'static str, found: String },
    #[error("{kind} format version {found} is not supported (expected {expected}); regenerate the file")]
    VersionMismatch {
        kind: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    pub fn new(inner: W) -> Self {
        Writer { inner }
    }

    pub fn header(&mut self, magic: &[u8; 8], version: u32) -> Result<(), FormatError> {
        self.inner.write_all(magic)?;
        self.u32(version)
    }

    pub fn u32(&mut self, v: u32) -> Result<(), FormatError> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn u64(&mut self, v: u64) -> Result<(), FormatError> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64(&mut self, v: f64) -> Result<(), FormatError> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64s(&mut self, vs: &[f64]) -> Result<(), FormatError> {
        let mut buf = Vec::with_capacity(vs.len() * 8);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        Ok(())
    }

    pub fn str(&mut self, s: &str) -> Result<(), FormatError> {
        self.u32(s.len() as u32)?;
        self.inner.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<(), FormatError> {
        self.inner.write_all(b)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    pub fn new(inner: R) -> Self {
        Reader { inner }
    }

    /// Reads and checks the magic string and version.
    pub fn header(
        &mut self,
        magic: &[u8; 8],
        kind: &'static str,
        version: u32,
    ) -> Result<(), FormatError> {
        let mut found = [0u8; 8];
        self.fill(&mut found, "magic")?;
        if &found != magic {
            return Err(FormatError::BadMagic {
                expected: kind,
                found: String::from_utf8_lossy(&found).into_owned(),
            });
        }
        let v = self.u32("version")?;
        if v != version {
            return Err(FormatError::VersionMismatch {
                kind,
                expected: version,
                found: v,
            });
        }
        Ok(())
    }

    fn fill(&mut self, buf: &mut [u8], what: &'static str) -> Result<(), FormatError> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => FormatError::Truncated(what),
            _ => FormatError::Io(e),
        })
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self, what: &'static str) -> Result<f64, FormatError> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, FormatError> {
        let mut buf = vec![0u8; n * 8];
        self.fill(&mut buf, what)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn str(&mut self, what: &'static str) -> Result<String, FormatError> {
        let n = self.u32(what)? as usize;
        if n > 1 << 24 {
            return Err(FormatError::Invalid(format!("{what}: string length {n} too large")));
        }
        let mut buf = vec![0u8; n];
        self.fill(&mut buf, what)?;
        String::from_utf8(buf).map_err(|_| FormatError::Invalid(format!("{what}: invalid utf-8")))
    }

    pub fn bytes(&mut self, n: usize, what: &'static str) -> Result<Vec<u8>, FormatError> {
        let mut buf = vec![0u8; n];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }

    /// Errors unless the stream is exhausted.
    pub fn finish(mut self) -> Result<(), FormatError> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(FormatError::Invalid("trailing bytes after payload".into())),
        }
    }
}
