//! Uplink training: RIS reflection schedule, UE pilots, semi-passive mask,
//! the stacked measurement operators, and noisy observation draws.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian_vector, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, identity, kronecker, numerical_rank, vec, ComplexMatrix, ComplexVector, RANK_TOL,
};
use crate::quantizer::{q_scalar, QuantizerSpec};

/// Redraw cap for rank-deficient pilot matrices.
pub const PILOT_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All RIS elements passive; the cascaded channel is estimated.
    Cascaded,
    /// A few semi-passive sensing elements; `F` then `G` are estimated.
    Individual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotPlan {
    pub mode: Mode,
    pub n_subblocks: usize,
    pub slots_per_subblock: usize,
    /// Raw ±1 reflection coefficients `theta`, L x T.
    pub theta: ComplexMatrix,
    /// `X_C` (K x tau) in cascaded mode, `X_I` (K x T) in individual mode.
    pub pilots: ComplexMatrix,
    /// `Omega`: true at semi-passive positions.
    pub mask: Vec<bool>,
}

impl PilotPlan {
    pub fn n_semi_passive(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Effective reflection matrix `S`, whose column `t` is `Omega^c ⊙ theta[t]`.
    /// Semi-passive elements do not reflect.
    pub fn reflection(&self) -> ComplexMatrix {
        let mut s = self.theta.clone();
        for (l, &sensing) in self.mask.iter().enumerate() {
            if sensing {
                s.row_mut(l).fill(Complex64::ZERO);
            }
        }
        s
    }

    /// `Omega_bar = Omega ⊗ 1_T^T` as a 0/1 matrix, L x T.
    pub fn mask_matrix(&self) -> ComplexMatrix {
        let t = self.pilots.ncols();
        DMatrix::from_fn(self.mask.len(), t, |l, _| {
            if self.mask[l] {
                c64(1.0, 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }

    /// Length of the stacked BS observation vector.
    pub fn bs_obs_len(&self, n_bs: usize) -> usize {
        n_bs * self.n_subblocks * self.slots_per_subblock
    }
}

fn draw_pilots<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    cols: usize,
    power: f64,
) -> Result<ComplexMatrix> {
    let want = k.min(cols);
    for _ in 0..PILOT_REDRAWS {
        let x = complex_gaussian_vector(rng, k * cols, power);
        let x = DMatrix::from_column_slice(k, cols, x.as_slice());
        if numerical_rank(&x, RANK_TOL) == want {
            return Ok(x);
        }
    }
    Err(Error::Singular)
}

/// Draws a training plan. `tau` is ignored in individual mode (always 1) and
/// `l_a` must be zero in cascaded mode.
pub fn make_pilot_plan<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    mode: Mode,
    n_subblocks: usize,
    tau: usize,
    l_a: usize,
    rng: &mut R,
) -> Result<PilotPlan> {
    let l = cfg.n_ris();
    let k = cfg.n_ues;
    if n_subblocks == 0 {
        return Err(Error::InvalidConfig("need at least one subblock".into()));
    }
    let tau = match mode {
        Mode::Cascaded => {
            if tau < k {
                return Err(Error::InvalidConfig(format!(
                    "cascaded training needs tau >= K ({tau} < {k})"
                )));
            }
            if l_a != 0 {
                return Err(Error::InvalidConfig(
                    "cascaded mode has no semi-passive elements".into(),
                ));
            }
            tau
        }
        Mode::Individual => {
            if l_a >= l {
                return Err(Error::InvalidConfig(format!(
                    "L_a = {l_a} must be below L = {l}"
                )));
            }
            1
        }
    };
    let theta = DMatrix::from_fn(l, n_subblocks, |_, _| {
        if rng.random::<bool>() {
            c64(1.0, 0.0)
        } else {
            c64(-1.0, 0.0)
        }
    });
    let cols = if mode == Mode::Cascaded {
        tau
    } else {
        n_subblocks
    };
    let pilots = draw_pilots(rng, k, cols, cfg.tx_power_mw())?;
    let mut mask = vec![false; l];
    for i in sample(rng, l, l_a) {
        mask[i] = true;
    }
    Ok(PilotPlan {
        mode,
        n_subblocks,
        slots_per_subblock: tau,
        theta,
        pilots,
        mask,
    })
}

/// `S_bar = S^T ⊗ X_C^T ⊗ I_N`, NT tau x NKL.
pub fn build_sbar(plan: &PilotPlan, cfg: &ScenarioConfig) -> Result<ComplexMatrix> {
    if plan.mode != Mode::Cascaded {
        return Err(Error::ModeMismatch("cascaded"));
    }
    let inner = kronecker(&plan.pilots.transpose(), &identity(cfg.n_bs_antennas));
    Ok(kronecker(&plan.reflection().transpose(), &inner))
}

/// `W_y = (S ⊙ F X_I)^T ⊗ I_N`, NT x NL.
pub fn build_w_y(
    plan: &PilotPlan,
    f: &ComplexMatrix,
    cfg: &ScenarioConfig,
) -> Result<ComplexMatrix> {
    if plan.mode != Mode::Individual {
        return Err(Error::ModeMismatch("individual"));
    }
    if f.nrows() != cfg.n_ris() || f.ncols() != cfg.n_ues {
        return Err(Error::DimensionMismatch {
            op: "build_w_y",
            detail: format!(
                "F is {}x{}, expected {}x{}",
                f.nrows(),
                f.ncols(),
                cfg.n_ris(),
                cfg.n_ues
            ),
        });
    }
    let x_bar = plan.reflection().component_mul(&(f * &plan.pilots));
    Ok(kronecker(&x_bar.transpose(), &identity(cfg.n_bs_antennas)))
}

/// `W_zhat = diag(vec(Omega_bar)) (X_I^T ⊗ I_L)`, LT x KL.
pub fn build_w_zhat(plan: &PilotPlan, cfg: &ScenarioConfig) -> Result<ComplexMatrix> {
    if plan.mode != Mode::Individual {
        return Err(Error::ModeMismatch("individual"));
    }
    let l = cfg.n_ris();
    let mut w = kronecker(&plan.pilots.transpose(), &identity(l));
    for r in 0..w.nrows() {
        if !plan.mask[r % l] {
            w.row_mut(r).fill(Complex64::ZERO);
        }
    }
    Ok(w)
}

/// Stacked BS observation with the operator and noise that produced it.
#[derive(Debug, Clone)]
pub struct StackedObservation {
    pub y: ComplexVector,
    /// `S_bar` (cascaded) or `W_y` (individual).
    pub operator: ComplexMatrix,
    pub noise: ComplexVector,
}

/// Draws `y = S_bar c + n` (cascaded) or `y = W_y g + n` (individual, with
/// the true `F`).
pub fn simulate_bs_rx<R: Rng + ?Sized>(
    plan: &PilotPlan,
    cfg: &ScenarioConfig,
    ch: &ChannelRealization,
    rng: &mut R,
) -> Result<StackedObservation> {
    let (operator, x) = match plan.mode {
        Mode::Cascaded => (build_sbar(plan, cfg)?, ch.c.clone()),
        Mode::Individual => (build_w_y(plan, &ch.f, cfg)?, ch.vec_g()),
    };
    let noise = complex_gaussian_vector(rng, operator.nrows(), ch.budget.noise_bs);
    let y = &operator * x + &noise;
    Ok(StackedObservation { y, operator, noise })
}

/// Draws the semi-passive observation `Z = Omega_bar ⊙ (F X_I + N_R)` and its
/// quantized vectorization (zero at passive positions).
pub fn simulate_ris_rx<R: Rng + ?Sized>(
    plan: &PilotPlan,
    ch: &ChannelRealization,
    spec: &QuantizerSpec,
    rng: &mut R,
) -> Result<(ComplexMatrix, ComplexVector)> {
    if plan.mode != Mode::Individual {
        return Err(Error::ModeMismatch("individual"));
    }
    let l = ch.f.nrows();
    let t = plan.pilots.ncols();
    let noise = complex_gaussian_vector(rng, l * t, ch.budget.noise_ris);
    let mut z = &ch.f * &plan.pilots + DMatrix::from_column_slice(l, t, noise.as_slice());
    for (r, &sensing) in plan.mask.iter().enumerate() {
        if !sensing {
            z.row_mut(r).fill(Complex64::ZERO);
        }
    }
    let zv = vec(&z);
    let half = 0.5 * spec.step();
    let mut pi = ComplexVector::zeros(zv.len());
    for (i, v) in zv.iter().enumerate() {
        if !plan.mask[i % l] {
            continue;
        }
        let (br, bi) = if spec.dither && half > 0.0 {
            (
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
            )
        } else {
            (0.0, 0.0)
        };
        pi[i] = Complex64::new(q_scalar(v.re + br, spec)?, q_scalar(v.im + bi, spec)?);
    }
    Ok((z, pi))
}
