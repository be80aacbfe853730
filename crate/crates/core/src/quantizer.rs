//! Non-subtractive dithered uniform scalar ADC, applied separately to the
//! real and imaginary part of each complex sample.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;

/// Level counts above this are treated as "infinite resolution".
pub const MAX_LEVELS: u64 = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    /// Reconstruction levels per real dimension.
    pub levels: u64,
    /// Half-width of the non-saturating input range.
    pub support: f64,
    /// Dynamic-range multiplier used to derive `support`.
    pub eta: f64,
    pub dither: bool,
}

impl QuantizerSpec {
    pub fn new(levels: u64, support: f64, eta: f64, dither: bool) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidConfig(
                "quantizer needs at least one level".into(),
            ));
        }
        if !(support >= 0.0) || !support.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "invalid ADC support {support}"
            )));
        }
        Ok(Self {
            levels,
            support,
            eta,
            dither,
        })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.support / self.levels as f64
    }

    /// Variance of the dithered quantization error per complex sample,
    /// `4 gamma^2 / (3 levels^2)`.
    pub fn error_variance(&self) -> f64 {
        let d = self.step();
        d * d / 3.0
    }

    pub fn with_dither(mut self, dither: bool) -> Self {
        self.dither = dither;
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels < 2
    }
}

/// `kappa = eta^2 (1 - 2 eta^2 / (3 levels^2))^{-1}`: the ADC support inflation
/// that accounts for the dither power entering the converter.
pub fn kappa(eta: f64, levels: u64) -> Result<f64> {
    let nu = levels as f64;
    let denom = 1.0 - 2.0 * eta * eta / (3.0 * nu * nu);
    if !(eta > 0.0) || denom <= 0.0 {
        return Err(Error::KappaUndefined { eta, levels });
    }
    Ok(eta * eta / denom)
}

/// Per-ADC level count `floor(2^(total_bits / (2G)))`.
pub fn levels_from_bits(total_bits: f64, n_adc_pairs: usize) -> u64 {
    if n_adc_pairs == 0 || total_bits <= 0.0 {
        return 1;
    }
    let per_adc = total_bits / (2.0 * n_adc_pairs as f64);
    if per_adc >= 52.0 {
        return MAX_LEVELS;
    }
    // Guard against 2^k evaluating to 2^k - ulp.
    (per_adc.exp2() * (1.0 + 1e-12)).floor().max(1.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitBudget {
    pub total_bits: f64,
    pub n_adc_pairs: usize,
    pub levels: u64,
}

impl BitBudget {
    pub fn new(total_bits: f64, n_adc_pairs: usize) -> Self {
        Self {
            total_bits,
            n_adc_pairs,
            levels: levels_from_bits(total_bits, n_adc_pairs),
        }
    }

    pub fn bits_per_adc(&self) -> f64 {
        (self.levels as f64).log2()
    }

    pub fn bits_consumed(&self) -> f64 {
        2.0 * self.n_adc_pairs as f64 * self.bits_per_adc()
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels < 2
    }
}

pub fn q_scalar(input: f64, spec: &QuantizerSpec) -> Result<f64> {
    if !input.is_finite() {
        return Err(Error::NonFinite);
    }
    let gamma = spec.support;
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let step = spec.step();
    let top = (spec.levels - 1) as f64;
    let bin = ((input + gamma) / step).floor().clamp(0.0, top);
    Ok(-gamma + step * (bin + 0.5))
}

/// Quantizes every entry of `v`; returns the ADC outputs and the dither that
/// was added (all zeros when dithering is off).
pub fn quantize_complex_vector<R: Rng + ?Sized>(
    v: &ComplexVector,
    spec: &QuantizerSpec,
    rng: &mut R,
) -> Result<(ComplexVector, ComplexVector)> {
    let half = 0.5 * spec.step();
    let mut out = ComplexVector::zeros(v.len());
    let mut dither = ComplexVector::zeros(v.len());
    for (i, z) in v.iter().enumerate() {
        let beta = if spec.dither && half > 0.0 {
            Complex64::new(
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
            )
        } else {
            Complex64::ZERO
        };
        let w = z + beta;
        out[i] = Complex64::new(q_scalar(w.re, spec)?, q_scalar(w.im, spec)?);
        dither[i] = beta;
    }
    Ok((out, dither))
}

pub fn support_from_kappa(n_adc_pairs: usize, kappa: f64) -> f64 {
    (kappa / n_adc_pairs as f64).sqrt()
}

/// `sqrt(kappa * max_var)`, the support that keeps `eta` standard deviations
/// of (input + dither) inside the ADC range.
pub fn support_from_input_power(max_var: f64, eta: f64, levels: u64) -> Result<f64> {
    if max_var < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "negative input power {max_var}"
        )));
    }
    Ok((kappa(eta, levels)? * max_var).sqrt())
}
