//! The composable sketch itself: hash-filtered sensitivity samples.
//!
//! A sketch with merge budget `t` holds `t` independent sample sets, one
//! per shared hash function. Creation samples every row with probability
//! proportional to a slight overestimate of its sensitivity; merging space
//! uses the highest-index sample sets of its inputs to build an embedding
//! of the union, re-estimates every surviving candidate's sensitivity
//! against it, and re-filters the remaining indexes with the same hashes.
//! Because the hash value of a key is global, a row dropped by one input
//! could never have been kept by the union, which is exactly what makes the
//! merge insensitive to duplicates.

use super::dataset::Dataset;
use super::sensitivity::{lp_sensitivities, lp_sensitivity_of, L2Oracle, SensitivityError};
use crate::randomness::uniform_hash;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("merge budget t must be at least 1, got {0}")]
    BadBudget(u32),
    #[error("sketch parameters out of range: {0}")]
    BadParams(String),
    #[error("sensitivity count {got} does not match dataset size {expect}")]
    TauCountMismatch { expect: usize, got: usize },
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error("nothing to merge")]
    EmptyMerge,
    #[error("merging a sketch with exhausted budget (t = {0}) is rejected")]
    BudgetExhausted(u32),
    #[error("merge inputs disagree on {0}")]
    ParamMismatch(String),
    #[error("conforming violation: key '{0}' carries different rows")]
    ConformingViolation(String),
    #[error("merge consistency guard fired at key '{key}' (hash index {index})")]
    Fail { key: String, index: u64 },
    #[error("sketch bytes malformed: {0}")]
    BadBytes(String),
}

/// Construction parameters shared by every sketch in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchParams {
    pub eps: f64,
    pub delta: f64,
    /// Norm order p >= 1.
    pub p: f64,
    /// Salt of the shared hash family.
    pub salt: u64,
    /// Multiplier C on the sampling probabilities.
    pub sample_const: f64,
}

impl SketchParams {
    pub fn new(eps: f64, delta: f64, p: f64, salt: u64) -> Result<Self, SketchError> {
        let params = Self {
            eps,
            delta,
            p,
            salt,
            sample_const: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_sample_const(mut self, c: f64) -> Self {
        self.sample_const = c;
        self
    }

    fn validate(&self) -> Result<(), SketchError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(SketchError::BadParams(format!("eps = {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SketchError::BadParams(format!("delta = {}", self.delta)));
        }
        if !(self.p >= 1.0) {
            return Err(SketchError::BadParams(format!("p = {}", self.p)));
        }
        if !(self.sample_const > 0.0) {
            return Err(SketchError::BadParams(format!(
                "sample_const = {}",
                self.sample_const
            )));
        }
        Ok(())
    }

    /// Oversampling factor: the p = 2 case needs only the lighter
    /// log(d/eps) + log(1/delta) term.
    pub fn oversample(&self, d: usize) -> f64 {
        let df = (d.max(2)) as f64;
        let base = (df / self.eps).ln() + (1.0 / self.delta).ln();
        if (self.p - 2.0).abs() < 1e-12 {
            base
        } else {
            df * (df / self.eps).ln() + (1.0 / self.delta).ln()
        }
    }

    /// Unclamped sampling probability for a sensitivity overestimate.
    pub fn p_key(&self, tau_tilde: f64, d: usize) -> f64 {
        self.sample_const * tau_tilde * self.oversample(d) / (self.eps * self.eps)
    }
}

/// One retained row: key, value, and the clamped probability it was kept
/// with.
#[derive(Debug, Clone, PartialEq)]
pub struct SenEntry {
    pub key: String,
    pub val: Vec<f64>,
    pub prob: f64,
}

/// One hash-filtered sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct SenSample {
    /// Which shared hash produced this set (1-based).
    pub hash_index: u64,
    pub entries: Vec<SenEntry>,
}

/// The composable sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub params: SketchParams,
    /// Remaining merge budget; also the number of sample sets.
    pub t: u32,
    /// Failure-probability ledger accumulated by merges.
    pub gamma: f64,
    pub d: usize,
    pub samples: Vec<SenSample>,
}

/// Build a sketch from scratch with exact sensitivities (gamma = 0).
pub fn create_sketch(
    data: &Dataset,
    t: u32,
    params: &SketchParams,
) -> Result<Sketch, SketchError> {
    let taus = if data.is_empty() {
        Vec::new()
    } else {
        lp_sensitivities(&data.matrix(), params.p)?
    };
    create_sketch_with_taus(data, &taus, t, params)
}

/// Build a sketch from precomputed row sensitivities (in dataset key
/// order). Exposed so sweeps over many salts do not recompute solver-grade
/// sensitivities per salt.
pub fn create_sketch_with_taus(
    data: &Dataset,
    taus: &[f64],
    t: u32,
    params: &SketchParams,
) -> Result<Sketch, SketchError> {
    if t < 1 {
        return Err(SketchError::BadBudget(t));
    }
    params.validate()?;
    if taus.len() != data.len() {
        return Err(SketchError::TauCountMismatch {
            expect: data.len(),
            got: taus.len(),
        });
    }
    let grow = (1.0 + params.eps).powi(t as i32);
    let mut samples = Vec::with_capacity(t as usize);
    for hash_index in 1..=t as u64 {
        let mut entries = Vec::new();
        for ((key, val), &tau) in data.iter().zip(taus) {
            let tau_tilde = grow * tau;
            let p_key = params.p_key(tau_tilde, data.d());
            if uniform_hash(key.as_bytes(), params.salt, hash_index) <= p_key {
                entries.push(SenEntry {
                    key: key.to_string(),
                    val: val.to_vec(),
                    prob: p_key.min(1.0),
                });
            }
        }
        samples.push(SenSample {
            hash_index,
            entries,
        });
    }
    Ok(Sketch {
        params: params.clone(),
        t,
        gamma: 0.0,
        d: data.d(),
        samples,
    })
}

/// Weighted embedding rows from one sample set: (1/prob)^(1/p) * val.
fn weighted_matrix(entries: &[SenEntry], d: usize, p: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(entries.len(), d);
    for (r, e) in entries.iter().enumerate() {
        let w = (1.0 / e.prob).powf(1.0 / p);
        for c in 0..d {
            m[(r, c)] = w * e.val[c];
        }
    }
    m
}

/// Subspace embedding from a sketch: the weighted rows of the first sample
/// set. Empty input gives an empty embedding, which is only valid for the
/// empty dataset.
pub fn solve_embedding(sk: &Sketch) -> DMatrix<f64> {
    match sk.samples.first() {
        Some(sample) => weighted_matrix(&sample.entries, sk.d, sk.params.p),
        None => DMatrix::zeros(0, sk.d),
    }
}

fn check_merge_compatibility(sketches: &[Sketch]) -> Result<(), SketchError> {
    let first = &sketches[0];
    for sk in &sketches[1..] {
        if sk.params != first.params {
            return Err(SketchError::ParamMismatch(
                "construction parameters or salt".into(),
            ));
        }
        if sk.d != first.d {
            return Err(SketchError::ParamMismatch("column count".into()));
        }
    }
    Ok(())
}

/// The union candidate pool at one hash index: key -> (val, max stored
/// prob); detects conforming violations on the way.
fn candidate_pool(
    sketches: &[Sketch],
    hash_index: u64,
) -> Result<Vec<(String, Vec<f64>, f64)>, SketchError> {
    let mut pool: std::collections::BTreeMap<String, (Vec<f64>, f64)> =
        std::collections::BTreeMap::new();
    for sk in sketches {
        let sample = &sk.samples[hash_index as usize - 1];
        debug_assert_eq!(sample.hash_index, hash_index);
        for e in &sample.entries {
            match pool.get_mut(&e.key) {
                None => {
                    pool.insert(e.key.clone(), (e.val.clone(), e.prob));
                }
                Some((val, prob)) => {
                    let same = val.len() == e.val.len()
                        && val
                            .iter()
                            .zip(&e.val)
                            .all(|(a, b)| a.to_bits() == b.to_bits());
                    if !same {
                        return Err(SketchError::ConformingViolation(e.key.clone()));
                    }
                    *prob = prob.max(e.prob);
                }
            }
        }
    }
    Ok(pool.into_iter().map(|(k, (v, p))| (k, v, p)).collect())
}

/// Merge conforming sketches built with the same parameters and salt into
/// a sketch of the deduplicated union with budget min(t_i) - 1.
pub fn merge_sketches(sketches: &[Sketch]) -> Result<Sketch, SketchError> {
    if sketches.is_empty() {
        return Err(SketchError::EmptyMerge);
    }
    check_merge_compatibility(sketches)?;
    let t = sketches.iter().map(|s| s.t).min().unwrap();
    if t < 2 {
        return Err(SketchError::BudgetExhausted(t));
    }
    let d = sketches[0].d;
    let params = sketches[0].params.clone();
    let gamma: f64 = params.delta + sketches.iter().map(|s| s.gamma).sum::<f64>();

    // Probability-estimation embedding from the highest shared index.
    let top_pool = candidate_pool(sketches, t as u64)?;
    let top_entries: Vec<SenEntry> = top_pool
        .iter()
        .map(|(k, v, p)| SenEntry {
            key: k.clone(),
            val: v.clone(),
            prob: *p,
        })
        .collect();
    let embedding = weighted_matrix(&top_entries, d, params.p);
    let is_l2 = (params.p - 2.0).abs() < 1e-12;
    let l2_oracle = if is_l2 && embedding.nrows() > 0 {
        L2Oracle::new(embedding.clone()).ok()
    } else {
        None
    };

    let grow = (1.0 + params.eps).powi(t as i32 - 1) * (1.0 + params.eps / 4.0);
    let mut samples = Vec::with_capacity(t as usize - 1);
    for hash_index in 1..t as u64 {
        let pool = candidate_pool(sketches, hash_index)?;
        let mut entries = Vec::new();
        for (key, val, stored_prob) in pool {
            let sens = if embedding.nrows() == 0 {
                f64::INFINITY
            } else if let Some(oracle) = &l2_oracle {
                oracle.sensitivity_of(&val)
            } else {
                lp_sensitivity_of(&embedding, &val, params.p)?
            };
            let tau_approx = grow * sens;
            let p_key = params.p_key(tau_approx, d);
            if p_key.min(1.0) > stored_prob {
                return Err(SketchError::Fail {
                    key,
                    index: hash_index,
                });
            }
            if uniform_hash(key.as_bytes(), params.salt, hash_index) <= p_key {
                entries.push(SenEntry {
                    key,
                    val,
                    prob: p_key.min(1.0),
                });
            }
        }
        samples.push(SenSample {
            hash_index,
            entries,
        });
    }
    Ok(Sketch {
        params,
        t: t - 1,
        gamma,
        d,
        samples,
    })
}

impl Sketch {
    /// Total retained entries across all sample sets.
    pub fn total_entries(&self) -> usize {
        self.samples.iter().map(|s| s.entries.len()).sum()
    }

    /// Message width in words: each entry is key + d values + probability,
    /// plus one framing word per sample set and a parameter header.
    pub fn message_words(&self) -> u64 {
        let per_entry = (self.d + 2) as u64;
        self.total_entries() as u64 * per_entry + self.samples.len() as u64 + 8
    }

    /// Length-prefixed, byte-stable binary encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"CSK1");
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.d as u64).to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
        out.extend_from_slice(&self.params.eps.to_le_bytes());
        out.extend_from_slice(&self.params.delta.to_le_bytes());
        out.extend_from_slice(&self.params.p.to_le_bytes());
        out.extend_from_slice(&self.params.salt.to_le_bytes());
        out.extend_from_slice(&self.params.sample_const.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        for sample in &self.samples {
            out.extend_from_slice(&sample.hash_index.to_le_bytes());
            out.extend_from_slice(&(sample.entries.len() as u64).to_le_bytes());
            for e in &sample.entries {
                out.extend_from_slice(&(e.key.len() as u64).to_le_bytes());
                out.extend_from_slice(e.key.as_bytes());
                for v in &e.val {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&e.prob.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != b"CSK1" {
            return Err(SketchError::BadBytes("bad magic".into()));
        }
        let t = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        let d = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
        let gamma = cur.f64()?;
        let eps = cur.f64()?;
        let delta = cur.f64()?;
        let p = cur.f64()?;
        let salt = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let sample_const = cur.f64()?;
        let n_samples = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let mut samples = Vec::with_capacity(n_samples as usize);
        for _ in 0..n_samples {
            let hash_index = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
            let n_entries = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
            let mut entries = Vec::with_capacity(n_entries as usize);
            for _ in 0..n_entries {
                let key_len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
                let key = String::from_utf8(cur.take(key_len)?.to_vec())
                    .map_err(|e| SketchError::BadBytes(e.to_string()))?;
                let mut val = Vec::with_capacity(d);
                for _ in 0..d {
                    val.push(cur.f64()?);
                }
                let prob = cur.f64()?;
                entries.push(SenEntry { key, val, prob });
            }
            samples.push(SenSample {
                hash_index,
                entries,
            });
        }
        Ok(Sketch {
            params: SketchParams {
                eps,
                delta,
                p,
                salt,
                sample_const,
            },
            t,
            gamma,
            d,
            samples,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], SketchError> {
        if self.pos + len > self.bytes.len() {
            return Err(SketchError::BadBytes("truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn f64(&mut self) -> Result<f64, SketchError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
