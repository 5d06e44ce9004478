//! Atmospheric attenuation and gamma-gamma scintillation.
//!
//! The gamma-gamma intensity `I` is unit-mean: all deterministic loss is
//! carried by the Beers–Lambert factor `L = exp(-Φ d)`, so the end-to-end
//! gain of a link is `g = L·I`. The SIC analysis works on `h = I²`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::special::{ln_bessel_k, ln_gamma};

/// Visibility and laser wavelength of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphericConfig {
    pub visibility_km: f64,
    pub wavelength_nm: f64,
}

impl AtmosphericConfig {
    pub fn new(visibility_km: f64, wavelength_nm: f64) -> Result<Self> {
        let atm = AtmosphericConfig {
            visibility_km,
            wavelength_nm,
        };
        atm.size_distribution_exponent()?;
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(Error::domain("wavelength_nm", wavelength_nm, "> 0"));
        }
        Ok(atm)
    }

    /// Kim-model exponent `q`: `0.16 V + 0.34` for haze (1 < V ≤ 6 km),
    /// 1.3 for average visibility (6 < V ≤ 50 km). The two branches agree at
    /// V = 6.
    pub fn size_distribution_exponent(&self) -> Result<f64> {
        let v = self.visibility_km;
        if v.is_nan() || v <= 1.0 {
            Err(Error::UnsupportedVisibility {
                visibility_km: v,
                band: "below the haze band (1, 6] km",
            })
        } else if v <= 6.0 {
            Ok(0.16 * v + 0.34)
        } else if v <= 50.0 {
            Ok(1.3)
        } else {
            Err(Error::UnsupportedVisibility {
                visibility_km: v,
                band: "above the average-visibility band (6, 50] km",
            })
        }
    }

    /// Attenuation coefficient Φ in km⁻¹: `(3.91 / V)·(λ / 550)^(-q)`.
    pub fn attenuation_coefficient(&self) -> Result<f64> {
        let q = self.size_distribution_exponent()?;
        if !(self.wavelength_nm > 0.0) {
            return Err(Error::domain("wavelength_nm", self.wavelength_nm, "> 0"));
        }
        Ok(3.91 / self.visibility_km * (self.wavelength_nm / 550.0).powf(-q))
    }
}

/// Beers–Lambert path loss `exp(-Φ d)`, with Φ in km⁻¹ and `d` in km.
pub fn path_loss(attenuation_per_km: f64, distance_km: f64) -> Result<f64> {
    if !(attenuation_per_km >= 0.0) {
        return Err(Error::domain("attenuation", attenuation_per_km, ">= 0"));
    }
    if !(distance_km >= 0.0) {
        return Err(Error::domain("distance_km", distance_km, ">= 0"));
    }
    Ok((-attenuation_per_km * distance_km).exp())
}

/// Gamma-gamma shape parameters `(α, β)` for a plane wave of Rytov variance
/// `σ_R²`.
pub fn rytov_to_shape(rytov_variance: f64) -> Result<(f64, f64)> {
    if !(rytov_variance > 0.0 && rytov_variance.is_finite()) {
        return Err(Error::domain("rytov_variance", rytov_variance, "> 0"));
    }
    let s = rytov_variance;
    // the 12/5 power is applied to the variance itself
    let s125 = s.powf(2.4);
    let alpha = 1.0 / (0.49 * s / (1.0 + 1.11 * s125).powf(7.0 / 6.0)).exp_m1();
    let beta = 1.0 / (0.51 * s / (1.0 + 0.69 * s125).powf(5.0 / 6.0)).exp_m1();
    Ok((alpha, beta))
}

/// Turbulence strength and the shape parameters it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceSpec {
    pub rytov_variance: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl TurbulenceSpec {
    pub fn from_rytov(rytov_variance: f64) -> Result<Self> {
        let (alpha, beta) = rytov_to_shape(rytov_variance)?;
        Ok(TurbulenceSpec {
            rytov_variance,
            alpha,
            beta,
        })
    }

    pub fn distribution(&self) -> GammaGammaDist {
        GammaGammaDist::new(self.alpha, self.beta).expect("shape parameters are positive")
    }
}

/// Unit-mean gamma-gamma distribution of the scintillation `I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaGammaDist {
    alpha: f64,
    beta: f64,
    ln_norm: f64,
}

impl GammaGammaDist {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain("alpha", alpha, "> 0"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain("beta", beta, "> 0"));
        }
        let ab = alpha * beta;
        let ln_norm = std::f64::consts::LN_2 + 0.5 * (alpha + beta) * ab.ln()
            - ln_gamma(alpha)
            - ln_gamma(beta);
        Ok(GammaGammaDist {
            alpha,
            beta,
            ln_norm,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `E[I²] = (1 + 1/α)(1 + 1/β)`, which is also `E[h]`.
    pub fn second_moment(&self) -> f64 {
        (1.0 + 1.0 / self.alpha) * (1.0 + 1.0 / self.beta)
    }

    /// `Var[I] = 1/α + 1/β + 1/(αβ)`.
    pub fn variance(&self) -> f64 {
        self.second_moment() - 1.0
    }

    /// Natural log of the intensity density; `-inf` for `I <= 0`.
    pub fn ln_intensity_density(&self, intensity: f64) -> f64 {
        if !(intensity > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.alpha, self.beta);
        let arg = 2.0 * (a * b * intensity).sqrt();
        self.ln_norm + (0.5 * (a + b) - 1.0) * intensity.ln() + ln_bessel_k(a - b, arg)
    }

    /// Intensity density; 0 outside the support.
    pub fn intensity_density(&self, intensity: f64) -> f64 {
        if intensity > 0.0 && intensity.is_finite() {
            self.ln_intensity_density(intensity).exp()
        } else {
            0.0
        }
    }

    /// Density of `h = I²`, `f_I(√h) / (2√h)`; 0 outside the support.
    pub fn h_density(&self, h: f64) -> f64 {
        if h > 0.0 && h.is_finite() {
            let r = h.sqrt();
            (self.ln_intensity_density(r) - (2.0 * r).ln()).exp()
        } else {
            0.0
        }
    }

    pub fn intensity_pdf(&self, intensity: f64) -> Result<f64> {
        if !(intensity > 0.0) {
            return Err(Error::domain("intensity", intensity, "> 0"));
        }
        Ok(self.intensity_density(intensity))
    }

    pub fn h_pdf(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::domain("h", h, "> 0"));
        }
        Ok(self.h_density(h))
    }

    /// Probability mass of `I` in `[lo, hi]`, computed directly so that
    /// small masses keep their relative accuracy.
    pub fn intensity_mass(&self, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
        let lo = lo.max(0.0);
        if !(hi > lo) {
            return Ok(0.0);
        }
        let f = |x: f64| self.intensity_density(x);
        let r = if hi.is_infinite() {
            quadrature::integrate_to_infinity(f, lo, tol)?
        } else {
            quadrature::integrate(f, lo, hi, tol)?
        };
        Ok(r.value.clamp(0.0, 1.0))
    }

    /// `(P(I <= x), P(I > x))`. The smaller side is integrated directly
    /// (below or above the unit mean) and the other is its complement.
    pub fn intensity_cdf_sf(&self, x: f64, tol: Tolerance) -> Result<(f64, f64)> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::domain("x", x, ">= 0"));
        }
        if x == 0.0 {
            return Ok((0.0, 1.0));
        }
        if x.is_infinite() {
            return Ok((1.0, 0.0));
        }
        if x <= 1.0 {
            let cdf = self.intensity_mass(0.0, x, tol)?;
            Ok((cdf, 1.0 - cdf))
        } else {
            let sf = self.intensity_mass(x, f64::INFINITY, tol)?;
            Ok((1.0 - sf, sf))
        }
    }

    pub fn intensity_cdf(&self, x: f64) -> Result<f64> {
        Ok(self.intensity_cdf_sf(x, Tolerance::CDF)?.0)
    }

    /// `F_h(y) = P(I² <= y) = F_I(√y)`, by adaptive quadrature of the
    /// density.
    pub fn h_cdf(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::domain("y", y, ">= 0"));
        }
        Ok(self.intensity_cdf_sf(y.sqrt(), Tolerance::CDF)?.0)
    }

    /// `1 - F_h(y)`.
    pub fn h_sf(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::domain("y", y, ">= 0"));
        }
        Ok(self.intensity_cdf_sf(y.sqrt(), Tolerance::CDF)?.1)
    }

    /// Intensity CDF at ascending points, accumulated segment by segment.
    /// Much cheaper than independent [`Self::intensity_cdf`] calls for
    /// goodness-of-fit tests on large samples.
    pub fn intensity_cdf_sorted(&self, sorted: &[f64]) -> Result<Vec<f64>> {
        const SEGMENT: Tolerance = Tolerance {
            abs: 1e-14,
            rel: 1e-10,
        };
        let mut out = Vec::with_capacity(sorted.len());
        let mut prev_x = 0.0;
        let mut acc = 0.0;
        for &x in sorted {
            if x < prev_x {
                return Err(Error::domain("x", x, "ascending order"));
            }
            if x > prev_x {
                acc += self.intensity_mass(prev_x, x, SEGMENT)?;
                prev_x = x;
            }
            out.push(acc.min(1.0));
        }
        Ok(out)
    }

    pub fn sampler(&self) -> IntensitySampler {
        IntensitySampler {
            first: Gamma::new(self.alpha, 1.0 / self.alpha).expect("alpha > 0"),
            second: Gamma::new(self.beta, 1.0 / self.beta).expect("beta > 0"),
        }
    }
}

/// Draws `I = X·Y` with `X ~ Gamma(α, 1/α)` and `Y ~ Gamma(β, 1/β)`
/// independent, which is gamma-gamma distributed with unit mean.
#[derive(Debug, Clone, Copy)]
pub struct IntensitySampler {
    first: Gamma<f64>,
    second: Gamma<f64>,
}

impl IntensitySampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.first.sample(rng);
        let y = self.second.sample(rng);
        // both factors are a.s. positive; guard against underflow to zero
        (x * y).max(f64::MIN_POSITIVE)
    }
}

impl Distribution<f64> for IntensitySampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        IntensitySampler::sample(self, rng)
    }
}

pub fn sample_intensity<R: Rng + ?Sized>(dist: &GammaGammaDist, rng: &mut R) -> f64 {
    dist.sampler().sample(rng)
}

/// Tabulated intensity CDF with Hermite interpolation (the density is the
/// exact derivative at every knot). Used where many CDF or quantile
/// evaluations are needed, such as quasi-Monte Carlo integration.
#[derive(Debug, Clone)]
pub struct IntensityTable {
    dist: GammaGammaDist,
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    lower_exponent: f64,
}

impl IntensityTable {
    pub fn new(dist: GammaGammaDist, points: usize) -> Result<Self> {
        let points = points.max(64);
        // The lower tail behaves like I^{min(α,β)}; pick the grid so both
        // tails are below 1e-15.
        let lower_exponent = dist.alpha.min(dist.beta);
        let mut lo = 1e-3;
        while dist.intensity_cdf_sf(lo, Tolerance::CDF)?.0 > 1e-15 && lo > 1e-300 {
            lo *= 0.1;
        }
        let mut hi = 10.0;
        while dist.intensity_cdf_sf(hi, Tolerance::CDF)?.1 > 1e-15 {
            hi *= 2.0;
        }
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let knots: Vec<f64> = (0..points)
            .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (points - 1) as f64).exp())
            .collect();
        let cdf = dist.intensity_cdf_sorted(&knots)?;
        let pdf = knots.iter().map(|&x| dist.intensity_density(x)).collect();
        Ok(IntensityTable {
            dist,
            knots,
            cdf,
            pdf,
            lower_exponent,
        })
    }

    pub fn distribution(&self) -> &GammaGammaDist {
        &self.dist
    }

    fn hermite(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[i]
            + (t3 - 2.0 * t2 + t) * h * self.pdf[i]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[i + 1]
            + (t3 - t2) * h * self.pdf[i + 1]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if !(x > 0.0) {
            return 0.0;
        }
        if x <= self.knots[0] {
            return self.cdf[0] * (x / self.knots[0]).powf(self.lower_exponent);
        }
        if x >= self.knots[n - 1] {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        self.hermite(i, x).clamp(self.cdf[i], self.cdf[i + 1])
    }

    /// Inverse CDF for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.knots.len();
        if u <= self.cdf[0] {
            if u <= 0.0 {
                return 0.0;
            }
            return self.knots[0] * (u / self.cdf[0]).powf(1.0 / self.lower_exponent);
        }
        if u >= self.cdf[n - 1] {
            return self.knots[n - 1];
        }
        let i = self.cdf.partition_point(|&c| c <= u) - 1;
        let (mut lo, mut hi) = (self.knots[i], self.knots[i + 1]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let fx = self.hermite(i, x) - u;
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.dist.intensity_density(x);
            let newton = x - fx / slope;
            x = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 4.0 * f64::EPSILON * x || fx == 0.0 {
                break;
            }
        }
        x
    }
}
