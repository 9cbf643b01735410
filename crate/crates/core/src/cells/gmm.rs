//! Gaussian mixtures over cell samples: EM fitting with BIC model
//! selection and Bhattacharyya distances.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{CellSample, FeatureWeights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn single(mean: Vector4<f64>, covariance: Matrix4<f64>) -> Self {
        Self {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean,
                covariance,
            }],
        }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::param("mixture has no components"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("mixture weights sum to {total}")));
        }
        for c in &self.components {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::param(format!("component weight {} outside (0, 1]", c.weight)));
            }
            if c.covariance.cholesky().is_none() {
                return Err(Error::Numeric("component covariance is not positive definite".into()));
            }
        }
        Ok(())
    }

    /// Log-likelihood of the samples over the axes active in `weights`.
    pub fn log_likelihood(&self, samples: &[CellSample], weights: &FeatureWeights) -> Result<f64> {
        let axes = weights.active_axes();
        let data: Vec<DVector<f64>> = samples.iter().map(|s| project(&s.to_vector(), &axes)).collect();
        let comps: Vec<Component> = self.components.iter().map(|c| Component::restrict(c, &axes)).collect();
        let mut total = 0.0;
        let chols = cholesky_all(&comps)?;
        let mut buf = vec![0.0; comps.len()];
        for x in &data {
            total += log_sum_row(x, &comps, &chols, &mut buf);
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmParams {
    pub max_iter: usize,
    /// Stop once an iteration gains less log-likelihood than this.
    pub tol: f64,
    /// Ridge added to every covariance.
    pub epsilon: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            epsilon: 1e-6,
        }
    }
}

impl EmParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::param("EM needs at least one iteration"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("EM tolerance must be nonnegative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("covariance ridge must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: GaussianMixture,
    /// Log-likelihood after the initial E-step and after every iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub bic: f64,
}

/// A Gaussian in a subspace of the feature axes.
#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Component {
    fn restrict(c: &GaussianComponent, axes: &[usize]) -> Self {
        Self {
            weight: c.weight,
            mean: project(&c.mean, axes),
            cov: DMatrix::from_fn(axes.len(), axes.len(), |i, j| c.covariance[(axes[i], axes[j])]),
        }
    }
}

fn project(v: &Vector4<f64>, axes: &[usize]) -> DVector<f64> {
    DVector::from_iterator(axes.len(), axes.iter().map(|&a| v[a]))
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

struct Chol {
    l: DMatrix<f64>,
    log_det: f64,
}

fn cholesky(cov: &DMatrix<f64>) -> Result<Chol> {
    let c = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    let l = c.l();
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(Chol { l, log_det })
}

fn cholesky_all(comps: &[Component]) -> Result<Vec<Chol>> {
    comps.iter().map(|c| cholesky(&c.cov)).collect()
}

fn log_density(x: &DVector<f64>, c: &Component, ch: &Chol) -> f64 {
    let diff = x - &c.mean;
    let z = ch
        .l
        .solve_lower_triangular(&diff)
        .expect("Cholesky factor has a positive diagonal");
    -0.5 * (x.len() as f64 * LN_2PI + ch.log_det + z.norm_squared())
}

/// Fills `buf` with `ln w_k + ln N(x | k)` and returns their log-sum-exp.
fn log_sum_row(x: &DVector<f64>, comps: &[Component], chols: &[Chol], buf: &mut [f64]) -> f64 {
    for (k, (c, ch)) in comps.iter().zip(chols).enumerate() {
        buf[k] = c.weight.ln() + log_density(x, c, ch);
    }
    let m = buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + buf.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// E-step; returns the responsibilities (row-major, n × k) and the
/// log-likelihood.
fn e_step(data: &[DVector<f64>], comps: &[Component]) -> Result<(Vec<f64>, f64)> {
    let k = comps.len();
    let chols = cholesky_all(comps)?;
    let mut resp = vec![0.0; data.len() * k];
    let mut ll = 0.0;
    for (i, x) in data.iter().enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        let lse = log_sum_row(x, comps, &chols, row);
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        ll += lse;
    }
    Ok((resp, ll))
}

/// Weighted moments per component, plus `epsilon·I` on each covariance.
fn m_step(data: &[DVector<f64>], resp: &[f64], k: usize, epsilon: f64) -> Vec<Component> {
    let n = data.len();
    let d = data[0].len();
    (0..k)
        .map(|j| {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            let nk_safe = nk.max(f64::MIN_POSITIVE);
            let mut mean = DVector::zeros(d);
            for (i, x) in data.iter().enumerate() {
                mean.axpy(resp[i * k + j], x, 1.0);
            }
            mean /= nk_safe;
            let mut cov = DMatrix::zeros(d, d);
            for (i, x) in data.iter().enumerate() {
                let diff = x - &mean;
                cov.ger(resp[i * k + j], &diff, &diff, 1.0);
            }
            cov /= nk_safe;
            for a in 0..d {
                cov[(a, a)] += epsilon;
            }
            Component {
                weight: (nk / n as f64).max(f64::MIN_POSITIVE),
                mean,
                cov,
            }
        })
        .collect()
}

/// k-means++ seeding on standardized features.
fn seed_means(data: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = data.len();
    let d = data[0].len();
    let mean = data.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n as f64;
    let scale: Vec<f64> = (0..d)
        .map(|a| {
            let var = data.iter().map(|x| (x[a] - mean[a]).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let dist2 = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        (0..d).map(|i| ((a[i] - b[i]) * scale[i]).powi(2)).sum()
    };
    let mut centers = vec![data[rng.gen_range(0..n)].clone()];
    let mut best: Vec<f64> = data.iter().map(|x| dist2(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, b) in best.iter().enumerate() {
                if u < *b {
                    chosen = i;
                    break;
                }
                u -= b;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = data[pick].clone();
        for (b, x) in best.iter_mut().zip(data) {
            *b = b.min(dist2(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn free_parameters(k: usize, d: usize) -> usize {
    k * d + k * d * (d + 1) / 2 + (k - 1)
}

/// Runs EM in the subspace `axes`; the returned 4-D mixture carries the
/// moments of every axis under the final responsibilities.
fn em(
    samples: &[CellSample],
    k: usize,
    axes: &[usize],
    params: &EmParams,
    rng: &mut ChaCha8Rng,
) -> Result<EmFit> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyCell);
    }
    if k == 0 {
        return Err(Error::param("mixture needs at least one component"));
    }
    let d = axes.len();
    let k = if samples.len() >= k * (d + 1) { k } else { 1 };
    let full: Vec<DVector<f64>> = samples.iter().map(|s| DVector::from_column_slice(s.to_vector().as_slice())).collect();
    let data: Vec<DVector<f64>> = samples.iter().map(|s| project(&s.to_vector(), axes)).collect();
    let n = data.len();

    let comps: Vec<Component> = if k == 1 {
        m_step(&data, &vec![1.0; n], 1, params.epsilon)
    } else {
        let pooled = m_step(&data, &vec![1.0; n], 1, params.epsilon).remove(0).cov;
        seed_means(&data, k, rng)
            .into_iter()
            .map(|mean| Component {
                weight: 1.0 / k as f64,
                mean,
                cov: pooled.clone(),
            })
            .collect()
    };
    let (mut resp, mut ll) = e_step(&data, &comps)?;
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let next = m_step(&data, &resp, k, params.epsilon);
        let (next_resp, next_ll) = e_step(&data, &next)?;
        history.push(next_ll);
        let gain = next_ll - ll;
        resp = next_resp;
        ll = next_ll;
        if gain < params.tol {
            converged = true;
            break;
        }
    }
    let components = m_step(&full, &resp, k, params.epsilon)
        .into_iter()
        .map(|c| GaussianComponent {
            weight: c.weight,
            mean: Vector4::from_iterator(c.mean.iter().cloned()),
            covariance: Matrix4::from_iterator(c.cov.iter().cloned()),
        })
        .collect();
    let bic = -2.0 * ll + free_parameters(k, d) as f64 * (n as f64).ln();
    Ok(EmFit {
        mixture: normalize(GaussianMixture { components }),
        log_likelihood: history,
        iterations,
        converged,
        bic,
    })
}

fn normalize(mut m: GaussianMixture) -> GaussianMixture {
    let total: f64 = m.components.iter().map(|c| c.weight).sum();
    for c in &mut m.components {
        c.weight /= total;
    }
    m
}

/// Fits a `k`-component mixture by EM over the axes active in `weights`.
/// Falls back to one component when there are fewer than `k·(d+1)`
/// samples.
pub fn fit_gmm_em(
    samples: &[CellSample],
    k: usize,
    weights: &FeatureWeights,
    params: &EmParams,
    rng: &mut ChaCha8Rng,
) -> Result<EmFit> {
    weights.validate()?;
    em(samples, k, &weights.active_axes(), params, rng)
}

/// Fits `k = 1..=k_max` and keeps the fit with the lowest BIC (ties go to
/// the smaller model).
pub fn fit_gmm_bic(
    samples: &[CellSample],
    k_max: usize,
    weights: &FeatureWeights,
    params: &EmParams,
    rng: &mut ChaCha8Rng,
) -> Result<EmFit> {
    weights.validate()?;
    if k_max == 0 {
        return Err(Error::param("k_max must be at least 1"));
    }
    let axes = weights.active_axes();
    let d = axes.len();
    let mut best = em(samples, 1, &axes, params, rng)?;
    for k in 2..=k_max {
        if samples.len() < k * (d + 1) {
            break;
        }
        let fit = em(samples, k, &axes, params, rng)?;
        if fit.bic < best.bic {
            best = fit;
        }
    }
    Ok(best)
}

/// Closed-form Bhattacharyya distance between two Gaussians.
pub fn bhattacharyya(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    if mean_a.len() != mean_b.len() || cov_a.nrows() != mean_a.len() || cov_b.nrows() != mean_b.len() {
        return Err(Error::param("Gaussian dimensions do not match"));
    }
    let avg = (cov_a + cov_b) * 0.5;
    let ch = cholesky(&avg)?;
    let la = cholesky(cov_a)?.log_det;
    let lb = cholesky(cov_b)?.log_det;
    let diff = mean_a - mean_b;
    let z = ch
        .l
        .solve_lower_triangular(&diff)
        .ok_or_else(|| Error::Numeric("singular average covariance".into()))?;
    Ok(0.125 * z.norm_squared() + 0.5 * (ch.log_det - 0.5 * (la + lb)))
}

/// Scales each feature axis by its weight, drops zero-weight axes, and
/// evaluates [`bhattacharyya`].
pub fn bhattacharyya_gaussian(a: &GaussianComponent, b: &GaussianComponent, weights: &FeatureWeights) -> Result<f64> {
    weights.validate()?;
    let axes = weights.active_axes();
    let s: Vec<f64> = axes.iter().map(|&i| weights.axis_weight(i)).collect();
    let scale = |c: &GaussianComponent| {
        let r = Component::restrict(c, &axes);
        let m = DVector::from_fn(axes.len(), |i, _| r.mean[i] * s[i]);
        let cov = DMatrix::from_fn(axes.len(), axes.len(), |i, j| r.cov[(i, j)] * s[i] * s[j]);
        (m, cov)
    };
    let (ma, ca) = scale(a);
    let (mb, cb) = scale(b);
    bhattacharyya(&ma, &ca, &mb, &cb)
}

/// `Σ_i w_i · min_j D(p_i, q_j)`: each component of `p` is matched to its
/// closest component of `q`.
pub fn gmm_distance(p: &GaussianMixture, q: &GaussianMixture, weights: &FeatureWeights) -> Result<f64> {
    if p.components.is_empty() || q.components.is_empty() {
        return Err(Error::param("mixture has no components"));
    }
    let mut total = 0.0;
    for pi in &p.components {
        let mut best = f64::INFINITY;
        for qj in &q.components {
            best = best.min(bhattacharyya_gaussian(pi, qj, weights)?);
        }
        total += pi.weight * best;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    const ALL: FeatureWeights = FeatureWeights {
        w_chroma: 1.0,
        w_height: 1.0,
        w_temp: 1.0,
    };

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        Distribution::<f64>::sample(&StandardNormal, rng)
    }

    fn sample(r: f64, g: f64, h: f64, t: f64) -> CellSample {
        CellSample {
            chroma: (r, g),
            height: h,
            temperature: t,
        }
    }

    fn blob(rng: &mut ChaCha8Rng, n: usize, center: [f64; 4], sigma: f64) -> Vec<CellSample> {
        (0..n)
            .map(|_| {
                sample(
                    center[0] + 0.01 * gauss(rng),
                    center[1] + 0.01 * gauss(rng),
                    center[2] + sigma * gauss(rng),
                    center[3] + sigma * gauss(rng),
                )
            })
            .collect()
    }

    fn one_d(mean: f64, var: f64) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    #[test]
    fn closed_form_one_dimensional_cases() {
        let (ma, ca) = one_d(0.0, 1.0);
        let (mb, cb) = one_d(2.0, 1.0);
        assert!((bhattacharyya(&ma, &ca, &mb, &cb).unwrap() - 0.5).abs() < 1e-9);
        let (mb, cb) = one_d(0.0, 4.0);
        let d = bhattacharyya(&ma, &ca, &mb, &cb).unwrap();
        assert!((d - 0.5 * 1.25f64.ln()).abs() < 1e-9);
        assert!((d - 0.11157).abs() < 1e-5);
        assert_eq!(bhattacharyya(&ma, &ca, &ma, &ca).unwrap(), 0.0);
    }

    #[test]
    fn single_gaussian_fit_is_sample_moments() {
        let mut rng = stream(1, "gmm.k1");
        let data = blob(&mut rng, 200, [0.3, 0.4, 1.0, 290.0], 0.5);
        let fit = fit_gmm_em(&data, 1, &ALL, &EmParams::default(), &mut rng).unwrap();
        let c = &fit.mixture.components[0];
        let n = data.len() as f64;
        let mean: Vector4<f64> = data.iter().map(|s| s.to_vector()).sum::<Vector4<f64>>() / n;
        let mut cov = Matrix4::zeros();
        for s in &data {
            let d = s.to_vector() - mean;
            cov += d * d.transpose();
        }
        cov /= n;
        cov += Matrix4::identity() * 1e-6;
        assert!((c.mean - mean).amax() < 1e-12);
        assert!((c.covariance - cov).amax() < 1e-12);
        assert_eq!(c.weight, 1.0);
    }

    #[test]
    fn recovers_separated_clusters() {
        let mut rng = stream(2, "gmm.two");
        let a = blob(&mut rng, 150, [0.3, 0.3, 0.0, 288.0], 1.0);
        let b = blob(&mut rng, 150, [0.3, 0.3, 10.0, 298.0], 1.0);
        let centroid = |v: &[CellSample]| {
            let n = v.len() as f64;
            (v.iter().map(|s| s.height).sum::<f64>() / n, v.iter().map(|s| s.temperature).sum::<f64>() / n)
        };
        let (ca, cb) = (centroid(&a), centroid(&b));
        let data: Vec<CellSample> = a.into_iter().chain(b).collect();
        let w = FeatureWeights { w_chroma: 0.0, ..ALL };
        let fit = fit_gmm_em(&data, 2, &w, &EmParams::default(), &mut rng).unwrap();
        let mut means: Vec<(f64, f64)> = fit.mixture.components.iter().map(|c| (c.mean[2], c.mean[3])).collect();
        means.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (got, want) in means.iter().zip([ca, cb]) {
            assert!((got.0 - want.0).abs() < 0.1 && (got.1 - want.1).abs() < 0.1, "{means:?} vs {ca:?} {cb:?}");
        }
        let bic = fit_gmm_bic(&data, 3, &w, &EmParams::default(), &mut rng).unwrap();
        assert!(bic.mixture.k() >= 2);
    }

    #[test]
    fn log_likelihood_never_decreases() {
        for seed in 0..30 {
            let mut rng = stream(seed, "gmm.monotone");
            let mut data = blob(&mut rng, 60, [0.3, 0.3, 0.0, 288.0], 1.0);
            data.extend(blob(&mut rng, 40, [0.3, 0.3, 1.5, 290.0], 0.7));
            for k in 1..=3 {
                let fit = fit_gmm_em(&data, k, &FeatureWeights::default(), &EmParams { tol: 0.0, ..EmParams::default() }, &mut rng).unwrap();
                for w in fit.log_likelihood.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9, "seed {seed} k {k}: {} -> {}", w[0], w[1]);
                }
            }
        }
    }

    #[test]
    fn too_few_samples_fall_back_to_one_component() {
        let mut rng = stream(3, "gmm.few");
        let data = blob(&mut rng, 7, [0.3, 0.3, 0.0, 288.0], 1.0);
        let fit = fit_gmm_em(&data, 3, &ALL, &EmParams::default(), &mut rng).unwrap();
        assert_eq!(fit.mixture.k(), 1);
        assert!(matches!(fit_gmm_em(&[], 1, &ALL, &EmParams::default(), &mut rng), Err(Error::EmptyCell)));
    }

    #[test]
    fn mixture_distance_basics() {
        let mut rng = stream(4, "gmm.dist");
        let mut data = blob(&mut rng, 80, [0.3, 0.3, 0.0, 288.0], 0.3);
        data.extend(blob(&mut rng, 80, [0.3, 0.3, 1.0, 291.0], 0.3));
        let w = FeatureWeights::default();
        let p = fit_gmm_em(&data, 2, &w, &EmParams::default(), &mut rng).unwrap().mixture;
        assert_eq!(gmm_distance(&p, &p, &w).unwrap(), 0.0);

        let a = GaussianMixture::single(Vector4::new(0.3, 0.3, 0.0, 288.0), Matrix4::identity());
        let b = GaussianMixture::single(Vector4::new(0.3, 0.3, 1.0, 290.0), Matrix4::identity() * 2.0);
        assert_eq!(
            gmm_distance(&a, &b, &w).unwrap(),
            bhattacharyya_gaussian(&a.components[0], &b.components[0], &w).unwrap()
        );

        let mut shifted = p.clone();
        let before = gmm_distance(&shifted, &p, &w).unwrap();
        shifted.components[0].mean[3] += 10.0;
        assert!(gmm_distance(&shifted, &p, &w).unwrap() > before);
    }

    #[test]
    fn zero_weight_axes_are_ignored() {
        let a = GaussianComponent { weight: 1.0, mean: Vector4::new(0.2, 0.3, 0.0, 288.0), covariance: Matrix4::identity() };
        let mut b = a.clone();
        b.mean[0] = 0.6;
        b.covariance[(1, 1)] = 9.0;
        let w = FeatureWeights { w_chroma: 0.0, w_height: 1.0, w_temp: 1.0 };
        assert_eq!(bhattacharyya_gaussian(&a, &b, &w).unwrap(), 0.0);
        assert!(bhattacharyya_gaussian(&a, &b, &ALL).unwrap() > 0.0);
    }

    fn spd(vals: &[f64]) -> Matrix4<f64> {
        let m = Matrix4::from_iterator(vals.iter().cloned());
        m * m.transpose() + Matrix4::identity() * 0.1
    }

    proptest! {
        #[test]
        fn distance_symmetric_nonnegative(
            ma in proptest::collection::vec(-5.0f64..5.0, 4),
            mb in proptest::collection::vec(-5.0f64..5.0, 4),
            ca in proptest::collection::vec(-2.0f64..2.0, 16),
            cb in proptest::collection::vec(-2.0f64..2.0, 16),
        ) {
            let a = GaussianComponent { weight: 1.0, mean: Vector4::from_iterator(ma), covariance: spd(&ca) };
            let b = GaussianComponent { weight: 1.0, mean: Vector4::from_iterator(mb), covariance: spd(&cb) };
            let ab = bhattacharyya_gaussian(&a, &b, &ALL).unwrap();
            let ba = bhattacharyya_gaussian(&b, &a, &ALL).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
            prop_assert!(ab >= -1e-12);
            prop_assert_eq!(bhattacharyya_gaussian(&a, &a, &ALL).unwrap(), 0.0);
        }
    }
}
