//! `MSSE` embedding matrix file.
//!
//! ```text
//! magic "MSSE" | version u16 | method u8 | dim u32 | count u32
//! count x (level u32, k u32, summary_type u8)
//! count x dim f32, row-major
//! ```

use super::{EmbeddingMethod, EmbeddingRecord};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::summarize::SummaryType;

pub const MAGIC: &[u8; 4] = b"MSSE";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub method: EmbeddingMethod,
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingMatrix {
    pub fn new(method: EmbeddingMethod, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.vector.len());
        for r in &records {
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.vector.len(),
                });
            }
            if r.method != method {
                return Err(Error::InvalidArgument("records from mixed methods".into()));
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite embedding for ({}, {})",
                    r.level, r.index
                )));
            }
        }
        Ok(Self { method, dim, records })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u16(VERSION);
        w.u8(self.method as u8);
        w.u32(self.dim as u32);
        w.u32(self.records.len() as u32);
        for r in &self.records {
            w.u32(r.level);
            w.u32(r.index);
            w.u8(r.summary_type as u8);
        }
        for r in &self.records {
            for &x in &r.vector {
                w.f32(x);
            }
        }
        w.into_inner()
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data, "embedding matrix");
        r.expect_magic(MAGIC)?;
        r.expect_version(VERSION)?;
        let method = EmbeddingMethod::from_u8(r.u8()?)
            .ok_or_else(|| Error::Format("unknown embedding method".into()))?;
        let dim = r.u32()? as usize;
        let count = r.len(9)?;
        let mut keys = Vec::with_capacity(count);
        for _ in 0..count {
            let level = r.u32()?;
            let index = r.u32()?;
            let summary_type = SummaryType::from_u8(r.u8()?)
                .ok_or_else(|| Error::Format("unknown summary type".into()))?;
            keys.push((level, index, summary_type));
        }
        let mut records = Vec::with_capacity(count);
        for (level, index, summary_type) in keys {
            let vector = (0..dim).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            records.push(EmbeddingRecord {
                level,
                index,
                summary_type,
                method,
                vector,
            });
        }
        r.finish()?;
        Ok(Self { method, dim, records })
    }
}
