//! Power-law rates of `|dℓ/dE|` approaching critical energies.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ell::{dell_de, LdError};
use crate::model::{HamiltonianModel, Truncation};
use crate::quadrature::QuadratureConfig;

pub const DEFAULT_EPS_HI: f64 = 1e-2;
pub const DEFAULT_EPS_LO: f64 = 1e-6;
pub const DEFAULT_PTS_PER_DECADE: usize = 25;
const MIN_FIT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Critical {
    Separatrix,
    Elliptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("need 0 < eps_lo < eps_hi and at least 3 points per decade")]
    InvalidLadder,
    #[error("model has no finite {0:?} energy")]
    NoCritical(Critical),
    #[error("{side:?} side of the {critical:?} energy has no level curves")]
    EmptySide { critical: Critical, side: Side },
    #[error("every ladder point failed (first error: {first})")]
    EmptyLadder { first: LdError },
    #[error("fit needs at least 5 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples span less than one decade in eps")]
    DegenerateFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub eps: f64,
    pub deriv_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateLadder {
    pub samples: Vec<RateSample>,
    /// Ladder points where the derivative could not be computed.
    pub failed: usize,
}

/// Geometric ladder of `n = decades·pts_per_decade + 1` distances from `eps_hi` down to `eps_lo`.
pub fn eps_ladder(eps_hi: f64, eps_lo: f64, pts_per_decade: usize) -> Vec<f64> {
    let decades = (eps_hi / eps_lo).log10();
    let n = (decades * pts_per_decade as f64).round() as usize + 1;
    (0..n)
        .map(|k| match k {
            0 => eps_hi,
            _ if k + 1 == n => eps_lo,
            _ => eps_hi * (eps_lo / eps_hi).powf(k as f64 / (n - 1) as f64),
        })
        .collect()
}

fn critical_energy(model: &HamiltonianModel, critical: Critical, side: Side) -> Result<f64, RateError> {
    let e = match critical {
        Critical::Separatrix => model.e_sx(),
        Critical::Elliptic => model.e_min(),
    };
    if !e.is_finite() {
        return Err(RateError::NoCritical(critical));
    }
    if critical == Critical::Elliptic && side == Side::Below {
        return Err(RateError::EmptySide { critical, side });
    }
    Ok(e)
}

/// `|dℓ/dE|` at `E = E_c ∓ eps` along a geometric ladder.
#[allow(clippy::too_many_arguments)]
pub fn sample_rates(
    model: &HamiltonianModel,
    critical: Critical,
    side: Side,
    eps_hi: f64,
    eps_lo: f64,
    pts_per_decade: usize,
    trunc: Option<Truncation>,
    cfg: &QuadratureConfig,
) -> Result<RateLadder, RateError> {
    if !(eps_lo > 0.0 && eps_lo < eps_hi) || pts_per_decade < 3 {
        return Err(RateError::InvalidLadder);
    }
    let e_c = critical_energy(model, critical, side)?;
    let sign = match side {
        Side::Below => -1.0,
        Side::Above => 1.0,
    };
    let results: Vec<Result<RateSample, LdError>> = eps_ladder(eps_hi, eps_lo, pts_per_decade)
        .into_par_iter()
        .map(|eps| {
            let d = dell_de(model, e_c + sign * eps, trunc, None, cfg)?;
            Ok(RateSample { eps, deriv_abs: d.abs() })
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut first = None;
    for r in results {
        match r {
            Ok(s) if s.deriv_abs > 0.0 && s.deriv_abs.is_finite() => samples.push(s),
            Ok(_) => {}
            Err(e) => {
                first.get_or_insert(e);
            }
        }
    }
    let failed = eps_ladder(eps_hi, eps_lo, pts_per_decade).len() - samples.len();
    if samples.is_empty() {
        let first = first.unwrap_or(LdError::InvalidRange);
        return Err(RateError::EmptyLadder { first });
    }
    Ok(RateLadder { samples, failed })
}

/// Least-squares line through `(log eps, log |dℓ/dE|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_samples: usize,
}

pub fn fit_power_law(samples: &[RateSample]) -> Result<RateFit, RateError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(RateError::TooFewSamples(samples.len()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.eps.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.deriv_abs.ln()).collect();
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi - lo < std::f64::consts::LN_10 * (1.0 - 1e-12) {
        return Err(RateError::DegenerateFit);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { exponent, intercept, r_squared, n_samples: samples.len() })
}

/// One fit of a rate report; failed entries carry the error instead of numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEntry {
    pub critical: Critical,
    pub side: Side,
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    pub n_samples: usize,
    pub n_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RateEntry {
    pub fn fit(&self) -> Option<(f64, f64)> {
        Some((self.exponent?, self.r2?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub model: String,
    pub truncation: Option<f64>,
    pub fits: Vec<RateEntry>,
}

/// The critical approaches a model supports, in report order.
pub fn default_targets(model: &HamiltonianModel) -> Vec<(Critical, Side)> {
    let mut out = Vec::new();
    if model.e_sx().is_finite() {
        out.push((Critical::Separatrix, Side::Below));
        out.push((Critical::Separatrix, Side::Above));
    }
    if model.e_min().is_finite() {
        out.push((Critical::Elliptic, Side::Above));
    }
    out
}

/// Fits for the given approaches over the default `[1e-6, 1e-2]` ladder.
pub fn rate_report_for(
    model: &HamiltonianModel,
    targets: &[(Critical, Side)],
    trunc: Option<Truncation>,
    cfg: &QuadratureConfig,
) -> RateReport {
    let fits = targets
        .iter()
        .map(|&(critical, side)| {
            let ladder = sample_rates(
                model,
                critical,
                side,
                DEFAULT_EPS_HI,
                DEFAULT_EPS_LO,
                DEFAULT_PTS_PER_DECADE,
                trunc,
                cfg,
            );
            let mut entry = RateEntry {
                critical,
                side,
                exponent: None,
                intercept: None,
                r2: None,
                n_samples: 0,
                n_failed: 0,
                error: None,
            };
            match ladder.and_then(|l| Ok((fit_power_law(&l.samples)?, l.failed))) {
                Ok((fit, failed)) => {
                    entry.exponent = Some(fit.exponent);
                    entry.intercept = Some(fit.intercept);
                    entry.r2 = Some(fit.r_squared);
                    entry.n_samples = fit.n_samples;
                    entry.n_failed = failed;
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            entry
        })
        .collect();
    RateReport { model: model.name().to_string(), truncation: trunc.map(|t| t.a), fits }
}

/// Separatrix fits from both sides and the elliptic fit from above, where they exist.
pub fn rate_report(model: &HamiltonianModel, trunc: Option<Truncation>, cfg: &QuadratureConfig) -> RateReport {
    rate_report_for(model, &default_targets(model), trunc, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ladder_size() {
        let l = eps_ladder(1e-2, 1e-6, 25);
        assert_eq!(l.len(), 101);
        assert_eq!((l[0], l[100]), (1e-2, 1e-6));
        assert!((l[25] / 1e-3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_power_law() {
        let samples: Vec<RateSample> = eps_ladder(1e-2, 1e-6, 25)
            .into_iter()
            .map(|eps| RateSample { eps, deriv_abs: 0.5 / eps.sqrt() })
            .collect();
        let fit = fit_power_law(&samples).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 0.5f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        let s = |eps: f64| RateSample { eps, deriv_abs: 1.0 };
        assert_eq!(fit_power_law(&[s(1.0); 4]), Err(RateError::TooFewSamples(4)));
        let narrow: Vec<_> = (0..10).map(|k| s(1.0 + 0.5 * k as f64)).collect();
        assert_eq!(fit_power_law(&narrow), Err(RateError::DegenerateFit));
    }

    #[test]
    fn synthetic_sqrt_model() {
        use crate::model::MechanicalSystem;
        // Harmonic oscillator through the custom path: ℓ = 2π sqrt(2E), so
        // |dℓ/dE| = π sqrt(2) / sqrt(eps) about the minimum.
        let sys = MechanicalSystem::new(|q| 0.5 * q * q, |q| q, -10.0, 10.0);
        let model = HamiltonianModel::custom(sys);
        let ladder = sample_rates(
            &model,
            Critical::Elliptic,
            Side::Above,
            1e-2,
            1e-4,
            5,
            None,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_eq!(ladder.failed, 0);
        for s in &ladder.samples {
            let want = PI * 2f64.sqrt() / s.eps.sqrt();
            assert!((s.deriv_abs / want - 1.0).abs() < 1e-5, "{} {}", s.deriv_abs, want);
        }
    }

    #[test]
    fn pendulum_elliptic_ladder() {
        let pend = HamiltonianModel::pendulum();
        let ladder = sample_rates(
            &pend,
            Critical::Elliptic,
            Side::Above,
            1e-2,
            1e-6,
            5,
            None,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_eq!(ladder.samples.len(), 21);
        for s in &ladder.samples {
            let want = 2.0 * PI / (2.0 * s.eps).sqrt();
            assert!((s.deriv_abs / want - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn missing_critical_energies() {
        let osc = HamiltonianModel::harmonic_oscillator();
        let cfg = QuadratureConfig::default();
        assert_eq!(
            sample_rates(&osc, Critical::Separatrix, Side::Below, 1e-2, 1e-6, 25, None, &cfg),
            Err(RateError::NoCritical(Critical::Separatrix))
        );
        assert!(matches!(
            sample_rates(&osc, Critical::Elliptic, Side::Below, 1e-2, 1e-6, 25, None, &cfg),
            Err(RateError::EmptySide { .. })
        ));
        assert_eq!(
            sample_rates(&osc, Critical::Elliptic, Side::Above, 1e-6, 1e-2, 25, None, &cfg),
            Err(RateError::InvalidLadder)
        );
        assert_eq!(default_targets(&osc), vec![(Critical::Elliptic, Side::Above)]);
    }

    #[test]
    fn report_serializes_with_error_entries() {
        let fish = HamiltonianModel::fishtail();
        // Without a truncation every ladder point fails.
        let report = rate_report_for(
            &fish,
            &[(Critical::Separatrix, Side::Below)],
            None,
            &QuadratureConfig::default(),
        );
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["model"], "fishtail");
        assert!(json["truncation"].is_null());
        assert!(json["fits"][0]["exponent"].is_null());
        assert!(json["fits"][0]["error"].as_str().unwrap().contains("truncation"));
        assert_eq!(json["fits"][0]["critical"], "separatrix");
    }
}
