//! Hardware-limited task-based quantization: analog combiner, identical
//! scalar ADCs, digital reconstruction. Covers the cascaded estimator and
//! the two-stage (F then G) individual estimator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{scaled_var_rb, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::harness::nmse;
use crate::linalg::{
    c64, equalizing_unitary, hermitian_sqrt_pair, identity, khatri_rao, lmmse_matrix,
    observation_covariance, right_singular_desc, solve_hermitian, trace_re, unvec, water_fill,
    ComplexMatrix, ComplexVector,
};
use crate::quantizer::{kappa, levels_from_bits, quantize_complex_vector, QuantizerSpec};

/// A linear MMSE task `x_tilde = Gamma y` together with the observation
/// covariance it was derived from.
#[derive(Debug, Clone)]
pub struct LinearTask {
    pub gamma: ComplexMatrix,
    pub sigma_y: ComplexMatrix,
    /// `tr(Sigma_x)`.
    pub prior_energy: f64,
}

impl LinearTask {
    /// Task for `x = basis * alpha` with independent `alpha_j` of variance
    /// `var[j]`, observed through `y = op x + n`.
    pub fn factored(
        basis: &ComplexMatrix,
        var: &DVector<f64>,
        op: &ComplexMatrix,
        noise: f64,
    ) -> Result<Self> {
        if basis.ncols() != var.len() || op.ncols() != basis.nrows() {
            return Err(Error::DimensionMismatch {
                op: "LinearTask::factored",
                detail: format!(
                    "basis {}x{}, {} variances, operator {}x{}",
                    basis.nrows(),
                    basis.ncols(),
                    var.len(),
                    op.nrows(),
                    op.ncols()
                ),
            });
        }
        if !(noise > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive, got {noise}"
            )));
        }
        let p = op * basis;
        let mut p_weighted = p.clone();
        let mut b_weighted = basis.clone();
        for (j, &v) in var.iter().enumerate() {
            p_weighted.column_mut(j).scale_mut(v);
            b_weighted.column_mut(j).scale_mut(v);
        }
        let mut sigma_y = &p_weighted * p.adjoint();
        for i in 0..sigma_y.nrows() {
            sigma_y[(i, i)] += noise;
        }
        let cross = &b_weighted * p.adjoint();
        let gamma = solve_hermitian(&sigma_y, &cross.adjoint())?.adjoint();
        let prior_energy = basis
            .column_iter()
            .zip(var.iter())
            .map(|(c, &v)| v * c.norm_squared())
            .sum();
        Ok(Self {
            gamma,
            sigma_y,
            prior_energy,
        })
    }

    pub fn dense(sigma_x: &ComplexMatrix, op: &ComplexMatrix, noise: f64) -> Result<Self> {
        let gamma = lmmse_matrix(sigma_x, op, noise)?;
        let sigma_y = observation_covariance(sigma_x, op, noise);
        Ok(Self {
            gamma,
            sigma_y,
            prior_energy: trace_re(sigma_x),
        })
    }

    /// `tr(Gamma Sigma_y Gamma^H)`, the energy of the MMSE estimate.
    pub fn estimate_energy(&self) -> f64 {
        trace_re(&(&self.gamma * &self.sigma_y * self.gamma.adjoint()))
    }

    /// `E||x - Gamma y||^2 = tr(Sigma_x) - tr(Gamma Sigma_y Gamma^H)`.
    pub fn mmse(&self) -> f64 {
        self.prior_energy - self.estimate_energy()
    }
}

/// `Gamma_c = Sigma_c S_bar^H (S_bar Sigma_c S_bar^H + sigma^2 I)^{-1}`.
pub fn mmse_matrix_cascaded(
    sigma_c: &ComplexMatrix,
    sbar: &ComplexMatrix,
    noise_var: f64,
) -> Result<ComplexMatrix> {
    lmmse_matrix(sigma_c, sbar, noise_var)
}

#[derive(Debug, Clone)]
pub struct TaskQuantDesign {
    /// `B`, G x obs.
    pub analog: ComplexMatrix,
    /// `D`, task x G.
    pub digital: ComplexMatrix,
    pub spec: QuantizerSpec,
    pub kappa: f64,
    /// `Gamma`, task x obs.
    pub mmse: ComplexMatrix,
    /// Singular values of `Gamma Sigma_y^{1/2}`, descending.
    pub singular_values: Vec<f64>,
    /// Water-filled `[Lambda]_gg^2`.
    pub lambda_sq: Vec<f64>,
    /// `E||x_tilde - x_hat||^2` from the closed form.
    pub predicted_mse: f64,
    /// `tr(Gamma Sigma_y Gamma^H)`.
    pub estimate_energy: f64,
}

impl TaskQuantDesign {
    pub fn n_adc_pairs(&self) -> usize {
        self.analog.nrows()
    }

    pub fn is_degenerate(&self) -> bool {
        self.spec.is_degenerate()
    }

    /// Quantization noise variance per complex ADC output, `4 gamma^2 / (3 levels^2)`.
    pub fn quant_noise(&self) -> f64 {
        self.spec.error_variance()
    }

    /// `B y`, quantize, `D pi`.
    pub fn apply<R: Rng + ?Sized>(&self, y: &ComplexVector, rng: &mut R) -> Result<ComplexVector> {
        let adc_in = &self.analog * y;
        let (pi, _) = quantize_complex_vector(&adc_in, &self.spec, rng)?;
        Ok(&self.digital * pi)
    }

    /// Same design with the dither switched.
    pub fn with_dither(&self, dither: bool) -> Self {
        Self {
            spec: self.spec.with_dither(dither),
            ..self.clone()
        }
    }
}

/// Distortion `tr(Gamma Sy Gamma^H) - tr(Gamma Sy B^H (B Sy B^H + q I)^{-1} B Sy Gamma^H)`
/// for an arbitrary combiner `b` and per-output quantization noise `q`.
pub fn combiner_distortion(
    gamma: &ComplexMatrix,
    sigma_y: &ComplexMatrix,
    b: &ComplexMatrix,
    q: f64,
) -> Result<f64> {
    let gs = gamma * sigma_y;
    let cross = &gs * b.adjoint();
    let mut inner = b * sigma_y * b.adjoint();
    for i in 0..inner.nrows() {
        inner[(i, i)] += q;
    }
    let sol = solve_hermitian(&inner, &cross.adjoint())?;
    Ok(trace_re(&(&gs * gamma.adjoint())) - trace_re(&(&cross * sol)))
}

/// `kappa`, falling back to `eta^2` for a single-level ADC.
pub fn effective_kappa(eta: f64, levels: u64) -> Result<f64> {
    if levels < 2 {
        if !(eta > 0.0) {
            return Err(Error::KappaUndefined { eta, levels });
        }
        return Ok(eta * eta);
    }
    kappa(eta, levels)
}

/// Optimal combiner, ADC support and digital matrix for the task `Gamma`
/// under `total_bits` shared by `g` complex ADC pairs.
pub fn design_task_quantizer(
    gamma: &ComplexMatrix,
    sigma_y: &ComplexMatrix,
    g: usize,
    total_bits: f64,
    eta: f64,
    dither: bool,
) -> Result<TaskQuantDesign> {
    let obs = sigma_y.nrows();
    if gamma.ncols() != obs {
        return Err(Error::DimensionMismatch {
            op: "design_task_quantizer",
            detail: format!(
                "Gamma has {} columns, Sigma_y is {obs}x{obs}",
                gamma.ncols()
            ),
        });
    }
    if g == 0 || g > obs {
        return Err(Error::DimensionMismatch {
            op: "design_task_quantizer",
            detail: format!("G = {g} must lie in 1..={obs}"),
        });
    }
    let levels = levels_from_bits(total_bits, g);
    let kappa = effective_kappa(eta, levels)?;
    let (sqrt_y, inv_sqrt_y) = hermitian_sqrt_pair(sigma_y)?;
    let gamma_t = gamma * &sqrt_y;
    let (singular_values, v) = right_singular_desc(&gamma_t);
    if singular_values.len() < g {
        return Err(Error::DimensionMismatch {
            op: "design_task_quantizer",
            detail: format!(
                "G = {g} exceeds the task dimension {}",
                singular_values.len()
            ),
        });
    }
    let eig: Vec<f64> = singular_values.iter().map(|s| s * s).collect();
    let nu = levels as f64;
    let coef = 4.0 * kappa / (3.0 * nu * nu * g as f64);
    let support = (kappa / g as f64).sqrt();
    if singular_values[0] == 0.0 {
        // Zero task: nothing to estimate beyond the prior mean.
        return Ok(TaskQuantDesign {
            analog: DMatrix::zeros(g, obs),
            digital: DMatrix::zeros(gamma.nrows(), g),
            spec: QuantizerSpec::new(levels, support, eta, dither)?,
            kappa,
            mmse: gamma.clone(),
            singular_values,
            lambda_sq: vec![0.0; g],
            predicted_mse: 0.0,
            estimate_energy: 0.0,
        });
    }
    let wf = water_fill(&singular_values[..g], coef)?;
    let lambda: Vec<f64> = wf.squared.iter().map(|&s| s.sqrt()).collect();
    let u = equalizing_unitary(&DMatrix::from_diagonal(&DVector::from_iterator(
        g,
        wf.squared.iter().map(|&s| c64(s, 0.0)),
    )));
    let v_g = v.columns(0, g).into_owned();
    let mut lv = v_g.adjoint();
    for (r, &l) in lambda.iter().enumerate() {
        lv.row_mut(r).scale_mut(l);
    }
    let analog = &u * lv * &inv_sqrt_y;
    let spec = QuantizerSpec::new(levels, support, eta, dither)?;
    let q = spec.error_variance();
    let total_energy: f64 = eig.iter().sum();
    let degenerate = spec.is_degenerate();
    let digital = if degenerate {
        DMatrix::zeros(gamma.nrows(), g)
    } else {
        // D = Gamma_t V_G Lambda (Lambda^2 + q)^{-1} U^H
        let mut gv = &gamma_t * &v_g;
        for (j, &l) in lambda.iter().enumerate() {
            gv.column_mut(j).scale_mut(l / (l * l + q));
        }
        gv * u.adjoint()
    };
    let captured: f64 = if degenerate {
        0.0
    } else {
        eig[..g]
            .iter()
            .zip(&wf.squared)
            .map(|(&s2, &l2)| s2 * l2 / (l2 + q))
            .sum()
    };
    Ok(TaskQuantDesign {
        analog,
        digital,
        spec,
        kappa,
        mmse: gamma.clone(),
        singular_values,
        lambda_sq: wf.squared,
        predicted_mse: (total_energy - captured).max(0.0),
        estimate_energy: total_energy,
    })
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub estimate: ComplexVector,
    /// Matrix form: `C_hat` (NK x L), `F_hat` (L x K) or `G_hat` (N x L).
    pub matrix: ComplexMatrix,
    pub nmse: f64,
    pub bits_consumed: f64,
}

impl EstimateReport {
    /// Per-UE cascaded blocks `C_hat_k`, rows `kN..(k+1)N` of `C_hat`.
    pub fn cascaded_blocks(&self, n_bs: usize) -> Vec<ComplexMatrix> {
        (0..self.matrix.nrows() / n_bs)
            .map(|k| self.matrix.rows(k * n_bs, n_bs).into_owned())
            .collect()
    }
}

fn bits_consumed(spec: &QuantizerSpec, pairs: usize) -> f64 {
    2.0 * pairs as f64 * (spec.levels as f64).log2()
}

pub fn estimate_cascaded<R: Rng + ?Sized>(
    y: &ComplexVector,
    design: &TaskQuantDesign,
    truth_c: &ComplexVector,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<EstimateReport> {
    let estimate = design.apply(y, rng)?;
    let rows = cfg.n_bs_antennas * cfg.n_ues;
    let matrix = unvec(&estimate, rows, cfg.n_ris())?;
    let truth = unvec(truth_c, rows, cfg.n_ris())?;
    Ok(EstimateReport {
        nmse: nmse(&truth, &matrix)?,
        bits_consumed: bits_consumed(&design.spec, design.n_adc_pairs()),
        estimate,
        matrix,
    })
}

/// Stage I: RIS-side ADCs with no analog combining, digital matrix
/// `D_f = Gamma_f Sz (Sz + 4 kappa sigma_max^2 / (3 levels^2) I)^{-1}`.
pub fn stage1_design(
    sigma_f: &ComplexMatrix,
    w_zhat: &ComplexMatrix,
    noise_ris: f64,
    levels: u64,
    eta: f64,
    dither: bool,
) -> Result<TaskQuantDesign> {
    let task = LinearTask::dense(sigma_f, w_zhat, noise_ris)?;
    let sigma_z = &task.sigma_y;
    let sigma_max = sigma_z.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    let kappa = effective_kappa(eta, levels)?;
    let spec = QuantizerSpec::new(levels, (kappa * sigma_max).sqrt(), eta, dither)?;
    let q = spec.error_variance();
    let obs = sigma_z.nrows();
    let energy = task.estimate_energy();
    let (digital, predicted) = if spec.is_degenerate() {
        (DMatrix::zeros(task.gamma.nrows(), obs), energy)
    } else {
        let mut loaded = sigma_z.clone();
        for i in 0..obs {
            loaded[(i, i)] += q;
        }
        let gs = &task.gamma * sigma_z;
        let d = solve_hermitian(&loaded, &gs.adjoint())?.adjoint();
        let captured = trace_re(&(&d * gs.adjoint()));
        (d, (energy - captured).max(0.0))
    };
    Ok(TaskQuantDesign {
        analog: identity(obs),
        digital,
        spec,
        kappa,
        mmse: task.gamma,
        singular_values: Vec::new(),
        lambda_sq: Vec::new(),
        predicted_mse: predicted,
        estimate_energy: energy,
    })
}

/// `f_hat = D_f pi_z`, reshaped to `F_hat` (L x K).
pub fn stage1_estimate(
    pi_z: &ComplexVector,
    design: &TaskQuantDesign,
    truth_f: &ComplexMatrix,
    n_semi_passive: usize,
) -> Result<EstimateReport> {
    let estimate = &design.digital * pi_z;
    let matrix = unvec(&estimate, truth_f.nrows(), truth_f.ncols())?;
    Ok(EstimateReport {
        nmse: nmse(truth_f, &matrix)?,
        bits_consumed: bits_consumed(&design.spec, n_semi_passive),
        estimate,
        matrix,
    })
}

/// Stage II: task-based design on `Gamma_{g|f}`. `task` is normally built
/// from `W_y(F_hat)`.
pub fn stage2_design(
    task: &LinearTask,
    g: usize,
    total_bits: f64,
    eta: f64,
    dither: bool,
) -> Result<TaskQuantDesign> {
    design_task_quantizer(&task.gamma, &task.sigma_y, g, total_bits, eta, dither)
}

/// `Gamma_{g|f}` for `vec(G) = g_basis * alpha_RB`, observed through `w_y`.
pub fn g_task(
    ch: &ChannelRealization,
    cfg: &ScenarioConfig,
    w_y: &ComplexMatrix,
) -> Result<LinearTask> {
    let var = DVector::from_element(cfg.paths_rb, scaled_var_rb(cfg, &ch.budget));
    LinearTask::factored(&ch.g_basis(), &var, w_y, ch.budget.noise_bs)
}

pub fn stage2_estimate<R: Rng + ?Sized>(
    y: &ComplexVector,
    design: &TaskQuantDesign,
    truth_g: &ComplexMatrix,
    rng: &mut R,
) -> Result<EstimateReport> {
    let estimate = design.apply(y, rng)?;
    let matrix = unvec(&estimate, truth_g.nrows(), truth_g.ncols())?;
    Ok(EstimateReport {
        nmse: nmse(truth_g, &matrix)?,
        bits_consumed: bits_consumed(&design.spec, design.n_adc_pairs()),
        estimate,
        matrix,
    })
}

/// `C_hat = F_hat^T ⋄ G_hat`, scored against the true cascaded matrix.
pub fn cascaded_from_individual(
    f_hat: &ComplexMatrix,
    g_hat: &ComplexMatrix,
    truth_c: &ComplexMatrix,
) -> Result<EstimateReport> {
    let matrix = khatri_rao(&f_hat.transpose(), g_hat)?;
    Ok(EstimateReport {
        nmse: nmse(truth_c, &matrix)?,
        bits_consumed: 0.0,
        estimate: crate::linalg::vec(&matrix),
        matrix,
    })
}

/// Per-branch ADC input power `diag(B Sigma_y B^H)`.
pub fn adc_input_power(design: &TaskQuantDesign, sigma_y: &ComplexMatrix) -> Vec<f64> {
    let p = &design.analog * sigma_y * design.analog.adjoint();
    p.diagonal().iter().map(|z: &Complex64| z.re).collect()
}
