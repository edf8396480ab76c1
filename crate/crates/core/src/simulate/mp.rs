//! Marchenko-Pastur law and Kolmogorov-Smirnov distances.
//!
//! For a standard Gaussian `n x p` matrix `N` with `p/n -> r`, the spectrum
//! of `N^T N / n` converges to the density
//!
//! ```text
//! sqrt((r+ - x)(x - r-)) / (2 pi r x)   on [r-, r+],   r+- = (1 +- sqrt r)^2
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Marchenko-Pastur distribution for ratio `0 < r <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPastur {
    ratio: f64,
    lower: f64,
    upper: f64,
}

impl MarchenkoPastur {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::BadRatio(ratio));
        }
        let s = ratio.sqrt();
        Ok(MarchenkoPastur {
            ratio,
            lower: (1.0 - s) * (1.0 - s),
            upper: (1.0 + s) * (1.0 + s),
        })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Support endpoints `(r-, r+)`.
    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= self.lower || x >= self.upper || x <= 0.0 {
            return 0.0;
        }
        ((self.upper - x) * (x - self.lower)).sqrt() / (2.0 * PI * self.ratio * x)
    }

    /// Density in the angle `x = r- + w (1 - cos t) / 2`, times `dx/dt`.
    ///
    /// The substitution removes the square-root endpoint behaviour (and the
    /// `1/sqrt(x)` pole at `r = 1`), leaving a smooth integrand on `[0, pi]`.
    fn angular_integrand(&self, t: f64) -> f64 {
        let w = self.upper - self.lower;
        let c = t.cos();
        if self.lower == 0.0 {
            // sin^2 t / x = 2 (1 + cos t) / w
            return w * (1.0 + c) / (4.0 * PI * self.ratio);
        }
        let x = self.lower + 0.5 * w * (1.0 - c);
        let s = t.sin();
        0.25 * w * w * s * s / (2.0 * PI * self.ratio * x)
    }

    /// Cumulative distribution by adaptive Simpson quadrature.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        let w = self.upper - self.lower;
        let arg = (1.0 - 2.0 * (x - self.lower) / w).clamp(-1.0, 1.0);
        let theta = arg.acos();
        adaptive_simpson(&|t| self.angular_integrand(t), 0.0, theta, 1e-12, 50)
    }
}

/// Density at `x` for ratio `r`.
pub fn mp_density(x: f64, r: f64) -> Result<f64> {
    Ok(MarchenkoPastur::new(r)?.density(x))
}

/// CDF at `x` for ratio `r`.
pub fn mp_cdf(x: f64, r: f64) -> Result<f64> {
    Ok(MarchenkoPastur::new(r)?.cdf(x))
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n(x) - F(x)|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Plain midpoint rule directly on the density, kept separate from the
    /// angular substitution used by `cdf`.
    fn midpoint_integral(mp: &MarchenkoPastur, a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        (0..steps).map(|k| mp.density(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn support_endpoints() {
        let mp = MarchenkoPastur::new(1.0).unwrap();
        assert_eq!(mp.support(), (0.0, 4.0));
        let mp = MarchenkoPastur::new(0.25).unwrap();
        assert_eq!(mp.support(), (0.25, 2.25));
        assert_eq!(mp.density(0.25), 0.0);
        assert_eq!(mp.density(2.25), 0.0);
        assert_eq!(mp.density(3.0), 0.0);
        assert!(mp.density(1.0) > 0.0);
    }

    #[test]
    fn density_integrates_to_one() {
        let mp = MarchenkoPastur::new(0.25).unwrap();
        let (lo, hi) = mp.support();
        assert_abs_diff_eq!(midpoint_integral(&mp, lo, hi, 2_000_000), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(mp.cdf(hi), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn cdf_matches_direct_quadrature() {
        for r in [0.1, 0.25, 0.5, 0.9] {
            let mp = MarchenkoPastur::new(r).unwrap();
            let (lo, hi) = mp.support();
            for q in [0.1, 0.3, 0.5, 0.8] {
                let x = lo + q * (hi - lo);
                let direct = midpoint_integral(&mp, lo, x, 400_000);
                assert_abs_diff_eq!(mp.cdf(x), direct, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn cdf_at_unit_ratio() {
        let mp = MarchenkoPastur::new(1.0).unwrap();
        assert_abs_diff_eq!(mp.cdf(4.0 - 1e-12), 1.0, epsilon = 1e-6);
        // median of the r = 1 law is below the mean 1
        assert!(mp.cdf(1.0) > 0.5);
    }

    #[test]
    fn cdf_is_monotone() {
        let mp = MarchenkoPastur::new(0.6).unwrap();
        let (lo, hi) = mp.support();
        let values: Vec<f64> = (0..=200)
            .map(|k| mp.cdf(lo - 0.1 + k as f64 * (hi - lo + 0.2) / 200.0))
            .collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        assert_eq!(values[0], 0.0);
        assert_eq!(values[200], 1.0);
    }

    #[test]
    fn rejects_bad_ratio() {
        assert!(matches!(mp_density(1.0, 0.0), Err(Error::BadRatio(_))));
        assert!(matches!(mp_cdf(1.0, 1.5), Err(Error::BadRatio(_))));
        assert!(mp_cdf(1.0, f64::NAN).is_err());
    }

    #[test]
    fn ks_distances() {
        let xs = [0.1, 0.4, 0.7, 0.2];
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        // sorted 0.1 0.2 0.4 0.7: largest gap is 3/4 - 0.4
        assert_abs_diff_eq!(ks_statistic(&xs, uniform), 0.35, epsilon = 1e-12);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }
}
