//! Exposure fusion under a linear sensor response.

use crate::error::{Error, Result};

/// Values at or above this are treated as saturated.
pub const SATURATION: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    /// Row-major pixel values in `[0, 1]`.
    pub pixels: Vec<f64>,
    /// Exposure time in seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureStack {
    pub width: usize,
    pub height: usize,
    pub images: Vec<Exposure>,
}

impl ExposureStack {
    pub fn new(width: usize, height: usize, images: Vec<Exposure>) -> Result<Self> {
        let stack = Self { width, height, images };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.len() < 2 {
            return Err(Error::param("an exposure stack needs at least two images"));
        }
        for (i, img) in self.images.iter().enumerate() {
            if img.pixels.len() != self.width * self.height {
                return Err(Error::param(format!(
                    "exposure {i} has {} pixels, expected {}x{}",
                    img.pixels.len(),
                    self.width,
                    self.height
                )));
            }
            if !(img.time > 0.0 && img.time.is_finite()) {
                return Err(Error::param(format!("exposure {i} has non-positive time")));
            }
            if i > 0 && img.time <= self.images[i - 1].time {
                return Err(Error::param("exposure times must be strictly increasing"));
            }
            if img.pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::param(format!("exposure {i} has values outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn hat(v: f64) -> f64 {
    v.min(1.0 - v)
}

/// Radiance of one pixel from its values across the stack.
pub fn fuse_pixel(values: &[f64], times: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut plain = 0.0;
    let mut count = 0usize;
    for (&v, &t) in values.iter().zip(times) {
        if v >= SATURATION {
            continue;
        }
        let w = hat(v);
        num += w * v / t;
        den += w;
        plain += v / t;
        count += 1;
    }
    if count == 0 {
        values[0] / times[0]
    } else if den > 0.0 {
        num / den
    } else {
        plain / count as f64
    }
}

/// Hat-weighted average of `v/t` over the unsaturated exposures of each
/// pixel; pixels saturated everywhere take the shortest exposure's `v/t`.
pub fn fuse_exposures(stack: &ExposureStack) -> Result<Vec<f64>> {
    stack.validate()?;
    let times: Vec<f64> = stack.images.iter().map(|e| e.time).collect();
    let mut values = vec![0.0; stack.images.len()];
    Ok((0..stack.width * stack.height)
        .map(|p| {
            for (v, img) in values.iter_mut().zip(&stack.images) {
                *v = img.pixels[p];
            }
            fuse_pixel(&values, &times)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn stack(values: &[f64], times: &[f64]) -> ExposureStack {
        ExposureStack::new(
            1,
            1,
            values
                .iter()
                .zip(times)
                .map(|(&v, &t)| Exposure { pixels: vec![v], time: t })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn agreement_and_saturation() {
        let r = fuse_exposures(&stack(&[0.1, 0.2], &[1.0, 2.0])).unwrap();
        assert!((r[0] - 0.1).abs() < 1e-15);
        assert_eq!(fuse_exposures(&stack(&[0.5, 1.0], &[1.0, 2.0])).unwrap(), vec![0.5]);
        assert_eq!(fuse_exposures(&stack(&[0.995, 1.0], &[0.5, 2.0])).unwrap(), vec![1.99]);
    }

    #[test]
    fn invalid_stacks() {
        let e = |t| Exposure { pixels: vec![0.5; 4], time: t };
        assert!(ExposureStack::new(2, 2, vec![e(1.0)]).is_err());
        assert!(ExposureStack::new(2, 2, vec![e(1.0), e(1.0)]).is_err());
        assert!(ExposureStack::new(2, 2, vec![e(1.0), Exposure { pixels: vec![0.5; 3], time: 2.0 }]).is_err());
        assert!(ExposureStack::new(2, 2, vec![e(1.0), Exposure { pixels: vec![1.5; 4], time: 2.0 }]).is_err());
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = stream(5, "hdr.oracle");
        let times = [0.01, 0.02, 0.04];
        let (w, h) = (8, 8);
        let images: Vec<Exposure> = times
            .iter()
            .map(|&t| Exposure {
                pixels: (0..w * h).map(|_| rng.gen_range(0.01..0.98)).collect(),
                time: t,
            })
            .collect();
        let s = ExposureStack::new(w, h, images).unwrap();
        let got = fuse_exposures(&s).unwrap();
        for p in 0..w * h {
            let (mut num, mut den) = (0.0, 0.0);
            for img in &s.images {
                let v = img.pixels[p];
                let wt = if v < 0.5 { v } else { 1.0 - v };
                num += wt * v / img.time;
                den += wt;
            }
            assert!((got[p] - num / den).abs() <= 1e-12 * (num / den).abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn exposure_scale_invariance(vals in proptest::collection::vec(0.0f64..0.98, 3), c in 0.1f64..10.0) {
            let times = [1.0, 2.0, 4.0];
            let a = fuse_exposures(&stack(&vals, &times)).unwrap()[0];
            let scaled: Vec<f64> = times.iter().map(|t| t * c).collect();
            let b = fuse_exposures(&stack(&vals, &scaled)).unwrap()[0];
            prop_assert!((b - a / c).abs() <= 1e-12 * (a / c).abs().max(1e-300));
        }
    }
}
