use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::binio::{FormatError, Reader, Writer};

/// Per-face feature vectors with named channels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    channels: Vec<String>,
    faces: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(channels: Vec<String>, faces: usize, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != faces * channels.len() {
            return Err(FeatureError::Shape(format!(
                "{} values for {} faces × {} channels",
                values.len(),
                faces,
                channels.len()
            )));
        }
        let fm = FeatureMatrix {
            channels,
            faces,
            values,
        };
        fm.check_finite()?;
        Ok(fm)
    }

    /// Builds a matrix from per-channel columns, checking every value is finite.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self, FeatureError> {
        let faces = columns.first().map_or(0, |c| c.1.len());
        for (name, col) in &columns {
            if col.len() != faces {
                return Err(FeatureError::Shape(format!(
                    "channel {name} has {} values, expected {faces}",
                    col.len()
                )));
            }
        }
        let channels: Vec<String> = columns.iter().map(|c| c.0.clone()).collect();
        let d = channels.len();
        let mut values = vec![0.0; faces * d];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * d + j] = v;
            }
        }
        FeatureMatrix::new(channels, faces, values)
    }

    fn check_finite(&self) -> Result<(), FeatureError> {
        let d = self.channels.len();
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                channel: self.channels[k % d].clone(),
                face: k / d,
            });
        }
        Ok(())
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn faces(&self) -> usize {
        self.faces
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, face: usize) -> &[f64] {
        let d = self.dim();
        &self.values[face * d..(face + 1) * d]
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        (0..self.faces).map(|i| self.values[i * self.dim() + channel]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim().max(1)).take(self.faces)
    }

    /// Linear combination `a·self + b·other` (same shape and channels).
    pub fn combine(&self, a: f64, other: &FeatureMatrix, b: f64) -> Result<Self, FeatureError> {
        if self.channels != other.channels || self.faces != other.faces {
            return Err(FeatureError::Shape("feature matrices differ in shape".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        FeatureMatrix::new(self.channels.clone(), self.faces, values)
    }
}

/// Per-channel z-score statistics, fitted on training faces only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

/// Channels with a standard deviation below this are treated as constant:
/// they are only centered.
pub const STD_FLOOR: f64 = 1e-12;

impl Normalization {
    pub fn fit<'a>(training: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<Self, FeatureError> {
        let mut channels: Option<Vec<String>> = None;
        let mut sum: Vec<f64> = Vec::new();
        let mut count = 0usize;
        let mats: Vec<&FeatureMatrix> = training.into_iter().collect();
        for m in &mats {
            match &channels {
                None => {
                    channels = Some(m.channels.clone());
                    sum = vec![0.0; m.dim()];
                }
                Some(c) if c != &m.channels => {
                    return Err(FeatureError::Shape("training matrices disagree on channels".into()))
                }
                _ => {}
            }
            for row in m.rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
            }
            count += m.faces;
        }
        let channels = channels.ok_or_else(|| FeatureError::Shape("no training faces".into()))?;
        if count == 0 {
            return Err(FeatureError::Shape("no training faces".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for m in &mats {
            for row in m.rows() {
                for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
        }
        let std = var.iter().map(|v| (v / count as f64).sqrt()).collect();
        Ok(Normalization { channels, mean, std })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if m.channels != self.channels {
            return Err(FeatureError::Shape(format!(
                "feature channels {:?} do not match the normalization's {:?}",
                m.channels, self.channels
            )));
        }
        let d = m.dim();
        let values = m
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let j = k % d;
                let s = if self.std[j] < STD_FLOOR { 1.0 } else { self.std[j] };
                (v - self.mean[j]) / s
            })
            .collect();
        FeatureMatrix::new(m.channels.clone(), m.faces, values)
    }
}

const CACHE_MAGIC: &[u8; 8] = b"MSEGFEAT";
pub const CACHE_VERSION: u32 = 1;

/// Raw features of one mesh plus the SHA-256 of the mesh source they were
/// computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub source_hash: [u8; 32],
    pub features: FeatureMatrix,
}

impl FeatureCache {
    pub fn write<W: Write>(&self, out: W) -> Result<(), FormatError> {
        let mut w = Writer::new(out);
        w.header(CACHE_MAGIC, CACHE_VERSION)?;
        w.bytes(&self.source_hash)?;
        w.u32(self.features.dim() as u32)?;
        for c in &self.features.channels {
            w.str(c)?;
        }
        w.u64(self.features.faces as u64)?;
        w.f64s(&self.features.values)
    }

    pub fn read<R: Read>(input: R) -> Result<Self, FormatError> {
        let mut r = Reader::new(input);
        r.header(CACHE_MAGIC, "feature cache", CACHE_VERSION)?;
        let hash: [u8; 32] = r.bytes(32, "source hash")?.try_into().unwrap();
        let d = r.u32("channel count")? as usize;
        let channels = (0..d).map(|_| r.str("channel name")).collect::<Result<Vec<_>, _>>()?;
        let faces = r.u64("face count")? as usize;
        let values = r.f64s(faces * d, "feature values")?;
        r.finish()?;
        let features = FeatureMatrix::new(channels, faces, values)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        Ok(FeatureCache {
            source_hash: hash,
            features,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(cols: &[(&str, &[f64])]) -> FeatureMatrix {
        FeatureMatrix::from_columns(cols.iter().map(|(n, c)| (n.to_string(), c.to_vec())).collect()).unwrap()
    }

    #[test]
    fn rejects_non_finite_with_location() {
        let err = FeatureMatrix::from_columns(vec![
            ("a".into(), vec![1.0, 2.0]),
            ("b".into(), vec![0.0, f64::NAN]),
        ])
        .unwrap_err();
        match err {
            FeatureError::NonFinite { channel, face } => assert_eq!((channel.as_str(), face), ("b", 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let m = fm(&[("agd", &[1.0, 1.0, 1.0, 1.0]), ("x", &[1.0, 2.0, 3.0, 4.0])]);
        let n = Normalization::fit([&m]).unwrap();
        let z = n.apply(&m).unwrap();
        assert!(z.column(0).iter().all(|&v| v == 0.0));
        let x = z.column(1);
        let mean = x.iter().sum::<f64>() / 4.0;
        let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(mean.abs() < 1e-12 && (std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn test_faces_use_training_stats() {
        let train = fm(&[("x", &[0.0, 2.0])]);
        let test = fm(&[("x", &[5.0, 7.0])]);
        let n = Normalization::fit([&train]).unwrap();
        let z = n.apply(&test).unwrap();
        assert_eq!(z.column(0), vec![4.0, 6.0]);
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let m = fm(&[("gc", &[0.1, -3.5e-300]), ("cf0", &[f64::MIN_POSITIVE, 1e300])]);
        let cache = FeatureCache {
            source_hash: [7; 32],
            features: m,
        };
        let mut buf = Vec::new();
        cache.write(&mut buf).unwrap();
        let back = FeatureCache::read(buf.as_slice()).unwrap();
        assert_eq!(back.features.channels(), cache.features.channels());
        let bits = |m: &FeatureMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.features), bits(&cache.features));
        assert_eq!(back.source_hash, [7; 32]);
    }

    #[test]
    fn cache_rejects_wrong_version_and_truncation() {
        let cache = FeatureCache {
            source_hash: [0; 32],
            features: fm(&[("a", &[1.0])]),
        };
        let mut buf = Vec::new();
        cache.write(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[8] = 99;
        assert!(matches!(
            FeatureCache::read(bad.as_slice()),
            Err(FormatError::VersionMismatch { found: 99, .. })
        ));
        assert!(matches!(
            FeatureCache::read(&buf[..buf.len() - 3]),
            Err(FormatError::Truncated(_))
        ));
        assert!(matches!(FeatureCache::read(&b"NOTMAGIC\x01\0\0\0"[..]), Err(FormatError::BadMagic { .. })));
    }
}
