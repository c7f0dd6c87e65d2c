use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Disjoint groups of coefficient indices `0..size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    size: usize,
    covers: bool,
}

impl BlockPartition {
    /// Validates disjointness and range. `covers` records whether the union
    /// of the blocks is all of `0..size`.
    pub fn new(blocks: Vec<Vec<usize>>, size: usize) -> Result<Self> {
        let mut seen = vec![false; size];
        for block in &blocks {
            if block.is_empty() {
                return invalid("empty block in partition");
            }
            for &i in block {
                if i >= size {
                    return invalid(format!("block index {i} out of range 0..{size}"));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return invalid(format!("index {i} appears in more than one block"));
                }
            }
        }
        let covers = seen.iter().all(|&s| s);
        Ok(BlockPartition {
            blocks,
            size,
            covers,
        })
    }

    /// Like [`BlockPartition::new`] but also requires full coverage.
    pub fn covering(blocks: Vec<Vec<usize>>, size: usize) -> Result<Self> {
        let p = Self::new(blocks, size)?;
        if !p.covers {
            return invalid("partition does not cover the index set");
        }
        Ok(p)
    }

    /// One block per index.
    pub fn singletons(size: usize) -> Self {
        BlockPartition {
            blocks: (0..size).map(|i| vec![i]).collect(),
            size,
            covers: true,
        }
    }

    /// Consecutive runs of `block_len` indices (the last may be shorter).
    pub fn contiguous(size: usize, block_len: usize) -> Result<Self> {
        if block_len == 0 {
            return invalid("block length must be positive");
        }
        let blocks = (0..size)
            .step_by(block_len)
            .map(|s| (s..(s + block_len).min(size)).collect())
            .collect();
        Self::covering(blocks, size)
    }

    /// Haar-adapted blocks: the scaling coefficient on its own, then each
    /// scale cut into runs of `block_len` locations.
    pub fn haar_levels(n: usize, block_len: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return invalid(format!("Haar blocks need a power-of-two length, got {n}"));
        }
        if block_len == 0 {
            return invalid("block length must be positive");
        }
        let mut blocks = vec![vec![0]];
        let mut start = 1;
        while start < n {
            let end = 2 * start;
            let mut s = start;
            while s < end {
                let e = (s + block_len).min(end);
                blocks.push((s..e).collect());
                s = e;
            }
            start = end;
        }
        Self::covering(blocks, n)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn covers(&self) -> bool {
        self.covers
    }

    /// Gathers the coefficients of block `a`.
    pub fn gather(&self, a: usize, coeffs: &[f64]) -> Vec<f64> {
        self.blocks[a].iter().map(|&i| coeffs[i]).collect()
    }

    /// Euclidean norm of each block.
    pub fn block_norms(&self, coeffs: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&i| coeffs[i] * coeffs[i]).sum::<f64>().sqrt())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(BlockPartition::new(vec![vec![0, 1], vec![1]], 3).is_err());
        assert!(BlockPartition::new(vec![vec![0, 5]], 3).is_err());
        let p = BlockPartition::new(vec![vec![0], vec![2]], 3).unwrap();
        assert!(!p.covers());
        assert!(BlockPartition::covering(vec![vec![0], vec![2]], 3).is_err());
    }

    #[test]
    fn haar_level_blocks_cover() {
        let p = BlockPartition::haar_levels(16, 3).unwrap();
        assert!(p.covers());
        // scaling, (0,*), (1,*), (2,0..3) in 2 blocks, (3,0..8) in 3 blocks
        assert_eq!(p.num_blocks(), 1 + 1 + 1 + 2 + 3);
        assert_eq!(p.blocks()[4], vec![7]);
    }
}
