//! Little-endian helpers shared by the binary cache formats.

use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub(crate) struct Reader {
    path: PathBuf,
    inner: BufReader<fs::File>,
    pub len: u64,
}

impl Reader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        Ok(Self {
            path: path.to_path_buf(),
            inner: BufReader::new(file),
            len,
        })
    }

    /// Checks an 8-byte magic of the form `<family><version>`, where the
    /// family is the first six bytes.
    pub fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let mut buf = [0u8; 8];
        self.exact(&mut buf, 8)?;
        if &buf == expected {
            return Ok(());
        }
        if buf[..6] == expected[..6] {
            return Err(Error::VersionMismatch {
                path: self.path.clone(),
                detail: format!(
                    "found {:?}, supported {:?}",
                    String::from_utf8_lossy(&buf),
                    String::from_utf8_lossy(expected)
                ),
            });
        }
        Err(Error::BadMagic {
            path: self.path.clone(),
            expected: String::from_utf8_lossy(expected).into(),
        })
    }

    /// Fails with a truncation error unless the file holds exactly
    /// `expected` bytes in total.
    pub fn require_len(&self, expected: u64) -> Result<()> {
        if self.len < expected {
            return Err(Error::Truncated {
                path: self.path.clone(),
                expected,
                found: self.len,
            });
        }
        if self.len > expected {
            return Err(Error::Dimension(format!(
                "{} has {} trailing bytes",
                self.path.display(),
                self.len - expected
            )));
        }
        Ok(())
    }

    fn exact(&mut self, buf: &mut [u8], expected_total: u64) -> Result<()> {
        let found = self.len;
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    path: self.path.clone(),
                    expected: expected_total,
                    found,
                }
            } else {
                Error::io(&self.path, e)
            }
        })
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b, self.len + 1)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b, self.len + 1)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let mut raw = vec![0u8; count * 4];
        self.exact(&mut raw, self.len + 1)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u32s(&mut self, count: usize) -> Result<Vec<u32>> {
        let mut raw = vec![0u8; count * 4];
        self.exact(&mut raw, self.len + 1)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
