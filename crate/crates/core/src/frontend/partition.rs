use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Which samples a likelihood sum runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    Estimation,
    Validation,
}

/// Frame-aligned split of the observation into estimation and validation
/// samples. A sample's frame is its index divided by `frame_block`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRecord", into = "PartitionRecord")]
pub struct DataPartition {
    frames: usize,
    frame_block: usize,
    cv_frames: Vec<usize>,
    mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRecord {
    frames: usize,
    frame_block: usize,
    cv_frames: Vec<usize>,
}

impl TryFrom<PartitionRecord> for DataPartition {
    type Error = Error;
    fn try_from(r: PartitionRecord) -> Result<Self> {
        DataPartition::build(r.frames, r.frame_block, r.cv_frames)
    }
}

impl From<DataPartition> for PartitionRecord {
    fn from(p: DataPartition) -> Self {
        PartitionRecord { frames: p.frames, frame_block: p.frame_block, cv_frames: p.cv_frames }
    }
}

impl DataPartition {
    fn build(frames: usize, frame_block: usize, mut cv_frames: Vec<usize>) -> Result<Self> {
        cv_frames.sort_unstable();
        cv_frames.dedup();
        if cv_frames.iter().any(|&t| t >= frames) {
            return Err(Error::InvalidConfig("validation frame out of range".into()));
        }
        let mut mask = vec![false; frames];
        for &t in &cv_frames {
            mask[t] = true;
        }
        Ok(Self { frames, frame_block, cv_frames, mask })
    }

    /// Partition with the given validation frames (any order). Both sides
    /// must be nonempty.
    pub fn new(frames: usize, frame_block: usize, cv_frames: Vec<usize>) -> Result<Self> {
        let p = Self::build(frames, frame_block, cv_frames)?;
        if p.cv_frames.is_empty() || p.cv_frames.len() == frames {
            return Err(Error::InvalidConfig("both estimation and validation need frames".into()));
        }
        Ok(p)
    }

    /// Everything in the estimation set, nothing held out.
    pub fn trivial(rows: usize) -> Self {
        Self { frames: 1, frame_block: rows, cv_frames: Vec::new(), mask: vec![false] }
    }

    pub fn rows(&self) -> usize {
        self.frames * self.frame_block
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn cv_frames(&self) -> &[usize] {
        &self.cv_frames
    }

    pub fn estimation_frames(&self) -> Vec<usize> {
        (0..self.frames).filter(|&t| !self.mask[t]).collect()
    }

    /// Whether complex sample `i` is held out.
    pub fn is_cv(&self, i: usize) -> bool {
        self.mask[i / self.frame_block]
    }

    /// Whether real-form index `i` (of `2 * rows()`) belongs to `subset`.
    pub fn includes(&self, subset: Subset, i: usize) -> bool {
        let c = i % self.rows();
        match subset {
            Subset::All => true,
            Subset::Estimation => !self.is_cv(c),
            Subset::Validation => self.is_cv(c),
        }
    }

    pub fn count(&self, subset: Subset) -> usize {
        let cv = self.cv_frames.len() * self.frame_block;
        match subset {
            Subset::All => self.rows(),
            Subset::Estimation => self.rows() - cv,
            Subset::Validation => cv,
        }
    }

    /// Complex sample indices in `subset`, ascending.
    pub fn indices(&self, subset: Subset) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.includes(subset, i)).collect()
    }
}

/// Holds out the last `ceil(cv_fraction * N_t)` frames.
pub fn partition_cv(cfg: &SystemConfig) -> Result<DataPartition> {
    if !(cfg.cv_fraction > 0.0 && cfg.cv_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("cv_fraction {} outside (0, 1)", cfg.cv_fraction)));
    }
    let n_cv = (cfg.cv_fraction * cfg.frames as f64 - 1e-9).ceil() as usize;
    if n_cv == 0 || n_cv >= cfg.frames {
        return Err(Error::InvalidConfig(format!(
            "cv_fraction {} of {} frames leaves an empty side",
            cfg.cv_fraction, cfg.frames
        )));
    }
    DataPartition::new(cfg.frames, cfg.rf_chains * cfg.frame_len, (cfg.frames - n_cv..cfg.frames).collect())
}
