//! Reference estimators: unquantized MMSE, digital-only quantization and
//! least squares.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, pinv, ComplexMatrix, ComplexVector, RANK_TOL};
use crate::quantizer::{levels_from_bits, quantize_complex_vector, QuantizerSpec};

fn check_cols(op: &'static str, m: &ComplexMatrix, y: &ComplexVector) -> Result<()> {
    if m.ncols() != y.len() {
        return Err(Error::DimensionMismatch {
            op,
            detail: format!(
                "matrix {}x{} against vector of length {}",
                m.nrows(),
                m.ncols(),
                y.len()
            ),
        });
    }
    Ok(())
}

/// `Gamma y`.
pub fn mmse_no_quant(y: &ComplexVector, gamma: &ComplexMatrix) -> Result<ComplexVector> {
    check_cols("mmse_no_quant", gamma, y)?;
    Ok(gamma * y)
}

/// Per-entry ADC configuration of the digital-only receiver.
#[derive(Debug, Clone)]
pub struct DigitalOnly {
    pub levels: u64,
    pub eta: f64,
    /// `eta * sqrt([Sigma_y]_ii)` for each entry.
    pub supports: Vec<f64>,
}

impl DigitalOnly {
    /// Splits `total_bits` over all `dim(y)` complex entries.
    pub fn new(sigma_y: &ComplexMatrix, total_bits: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be positive, got {eta}"
            )));
        }
        let n = sigma_y.nrows();
        let levels = levels_from_bits(total_bits, n);
        if levels < 2 {
            log::debug!("digital-only receiver degenerate: {total_bits} bits over {n} entries");
        }
        let supports = sigma_y
            .diagonal()
            .iter()
            .map(|z| eta * z.re.max(0.0).sqrt())
            .collect();
        Ok(Self {
            levels,
            eta,
            supports,
        })
    }

    pub fn n_adc_pairs(&self) -> usize {
        self.supports.len()
    }

    pub fn bits_consumed(&self) -> f64 {
        2.0 * self.n_adc_pairs() as f64 * (self.levels as f64).log2()
    }

    /// Quantizes each entry of `y` with its own support, dither off.
    pub fn quantize<R: Rng + ?Sized>(
        &self,
        y: &ComplexVector,
        rng: &mut R,
    ) -> Result<ComplexVector> {
        if y.len() != self.supports.len() {
            return Err(Error::DimensionMismatch {
                op: "DigitalOnly::quantize",
                detail: format!("{} supports for {} entries", self.supports.len(), y.len()),
            });
        }
        let mut out = ComplexVector::zeros(y.len());
        for (i, (&z, &support)) in y.iter().zip(&self.supports).enumerate() {
            let spec = QuantizerSpec::new(self.levels, support, self.eta, false)?;
            let one = ComplexVector::from_element(1, z);
            out[i] = quantize_complex_vector(&one, &spec, rng)?.0[0];
        }
        Ok(out)
    }
}

/// Quantize `y` entry by entry, then apply `Gamma`.
pub fn digital_only<R: Rng + ?Sized>(
    y: &ComplexVector,
    gamma: &ComplexMatrix,
    receiver: &DigitalOnly,
    rng: &mut R,
) -> Result<ComplexVector> {
    check_cols("digital_only", gamma, y)?;
    let q = receiver.quantize(y, rng)?;
    Ok(gamma * q)
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub estimate: ComplexVector,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Minimum-norm LS solution `pinv(op) y`; warns when `op` lacks full column rank.
pub fn least_squares(y: &ComplexVector, op: &ComplexMatrix) -> Result<LeastSquares> {
    if op.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            op: "least_squares",
            detail: format!(
                "operator {}x{} against {} observations",
                op.nrows(),
                op.ncols(),
                y.len()
            ),
        });
    }
    let rank = numerical_rank(op, RANK_TOL);
    let rank_deficient = rank < op.ncols();
    if rank_deficient {
        log::warn!(
            "least squares operator is rank deficient: rank {rank} < {} columns",
            op.ncols()
        );
    }
    Ok(LeastSquares {
        estimate: pinv(op, RANK_TOL) * y,
        rank,
        rank_deficient,
    })
}
