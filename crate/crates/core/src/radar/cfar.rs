//! Cell-averaging CFAR along the range axis.

use super::{PolarMask, RadarImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarParams {
    /// Training cells per side.
    pub n_train: usize,
    /// Guard cells per side.
    pub n_guard: usize,
    /// Target false-alarm probability.
    pub p_fa: f64,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self {
            n_train: 8,
            n_guard: 4,
            p_fa: 1e-3,
        }
    }
}

impl CfarParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 {
            return Err(Error::param("CFAR needs at least one training cell per side"));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::param(format!("p_fa must be in (0, 1), got {}", self.p_fa)));
        }
        Ok(())
    }

    /// Smallest range extent the window fits in.
    pub fn min_range_bins(&self) -> usize {
        2 * (self.n_train + self.n_guard) + 2
    }
}

/// Threshold multiplier for `n` averaged training cells of exponential
/// clutter: `α = n (p_fa^(-1/n) - 1)`.
pub fn cfar_alpha(n: usize, p_fa: f64) -> f64 {
    let n = n as f64;
    n * (p_fa.powf(-1.0 / n) - 1.0)
}

/// Flags cells whose intensity exceeds `α·Z`, with `Z` the mean of the
/// training cells on both sides of the cell under test (guards excluded).
/// Near the ends of the range axis the window is one-sided and `α` is
/// recomputed for the number of cells actually averaged.
pub fn cfar_threshold(img: &RadarImage, params: &CfarParams) -> Result<PolarMask> {
    params.validate()?;
    let nr = img.range_bins;
    let na = img.azimuth_bins;
    if nr < params.min_range_bins() {
        return Err(Error::param(format!(
            "CFAR window of {} bins does not fit {} range bins",
            params.min_range_bins() - 1,
            nr
        )));
    }
    let (t, g) = (params.n_train as isize, params.n_guard as isize);
    let alphas: Vec<f64> = (0..=2 * params.n_train)
        .map(|n| if n == 0 { f64::INFINITY } else { cfar_alpha(n, params.p_fa) })
        .collect();
    let mut mask = PolarMask::new(nr, na);
    let mut prefix = vec![0.0; nr + 1];
    for a in 0..na {
        for i in 0..nr {
            prefix[i + 1] = prefix[i] + img.at(i, a);
        }
        let window = |lo: isize, hi: isize| -> (f64, usize) {
            let lo = lo.max(0) as usize;
            let hi = (hi.min(nr as isize - 1) + 1).max(0) as usize;
            if hi <= lo {
                (0.0, 0)
            } else {
                (prefix[hi] - prefix[lo], hi - lo)
            }
        };
        for i in 0..nr {
            let ii = i as isize;
            let (s_lead, n_lead) = window(ii - g - t, ii - g - 1);
            let (s_lag, n_lag) = window(ii + g + 1, ii + g + t);
            let n = n_lead + n_lag;
            let z = (s_lead + s_lag) / n as f64;
            let x = img.at(i, a);
            if x > alphas[n] * z {
                mask.set(i, a, true);
            }
        }
    }
    Ok(mask)
}
