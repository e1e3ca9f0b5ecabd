use rayon::prelude::*;

use crate::util::{mean_sd, pairwise_sum};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Monte Carlo mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_half: f64,
    pub count: usize,
}

impl McEstimate {
    /// `None` for an empty sample. A single value gets an infinite half-width.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let count = values.len();
        match count {
            0 => None,
            1 => Some(Self {
                mean: values[0],
                ci_half: f64::INFINITY,
                count,
            }),
            _ => {
                let (mean, sd) = mean_sd(values)?;
                Some(Self {
                    mean,
                    ci_half: Z95 * sd / (count as f64).sqrt(),
                    count,
                })
            }
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.ci_half / Z95
    }

    pub fn relative_half_width(&self) -> f64 {
        if self.mean == 0.0 {
            f64::INFINITY
        } else {
            (self.ci_half / self.mean).abs()
        }
    }
}

/// Deterministic per-replicate seed derived from a master seed (SplitMix64).
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `f(0..count)` on the rayon pool; results come back in index order, so
/// downstream reductions do not depend on the thread count.
pub fn run_replicates<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

/// Order-fixed mean (pairwise summation).
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}
