//! Geometric narrowband mmWave channels for the RIS→BS link `G` and the
//! UE→RIS links `F`, the cascaded channel, and their second-order statistics.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, khatri_rao, kronecker, vec, ComplexMatrix, ComplexVector};

/// Minimum separation enforced between UE→RIS and RIS→BS angles.
pub const ANGLE_COLLISION: f64 = 1e-9;

fn default_spacing() -> f64 {
    0.5
}

fn default_range() -> [f64; 2] {
    [-FRAC_PI_2, FRAC_PI_2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_bs_antennas: usize,
    /// Horizontal RIS dimension `L_h`.
    pub ris_rows: usize,
    /// Vertical RIS dimension `L_v`.
    pub ris_cols: usize,
    pub n_ues: usize,
    pub paths_rb: usize,
    pub paths_ur: Vec<usize>,
    pub carrier_freq_hz: f64,
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    pub ue_circle_center: [f64; 2],
    pub ue_circle_radius: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Element spacing in wavelengths, shared by the BS ULA and the RIS UPA.
    #[serde(default = "default_spacing")]
    pub antenna_spacing: f64,
    #[serde(default = "default_range")]
    pub azimuth_range: [f64; 2],
    #[serde(default = "default_range")]
    pub elevation_range: [f64; 2],
    #[serde(default)]
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Small scenario used by the test suite: N=8, 4x4 RIS, K=2, two paths
    /// per link.
    pub fn desk() -> Self {
        Self {
            n_bs_antennas: 8,
            ris_rows: 4,
            ris_cols: 4,
            n_ues: 2,
            paths_rb: 2,
            paths_ur: vec![2, 2],
            ..Self::full_scale()
        }
    }

    /// Full-size scenario: 24 GHz, N=16, 10x10 RIS, K=3, four paths per link.
    pub fn full_scale() -> Self {
        Self {
            n_bs_antennas: 16,
            ris_rows: 10,
            ris_cols: 10,
            n_ues: 3,
            paths_rb: 4,
            paths_ur: vec![4, 4, 4],
            carrier_freq_hz: 24e9,
            bs_position: [0.0, 0.0],
            ris_position: [20.0, 10.0],
            ue_circle_center: [40.0, 0.0],
            ue_circle_radius: 5.0,
            tx_power_dbm: 23.0,
            bandwidth_hz: 80e6,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            antenna_spacing: 0.5,
            azimuth_range: default_range(),
            elevation_range: default_range(),
            rng_seed: 0,
        }
    }

    pub fn n_ris(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn total_paths_ur(&self) -> usize {
        self.paths_ur.iter().sum()
    }

    pub fn tx_power_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_bs_antennas == 0 || self.ris_rows == 0 || self.ris_cols == 0 {
            return bad("antenna and RIS dimensions must be at least 1".into());
        }
        if self.n_ues == 0 || self.paths_rb == 0 {
            return bad("n_ues and paths_rb must be at least 1".into());
        }
        if self.paths_ur.len() != self.n_ues {
            return bad(format!(
                "paths_ur has {} entries but n_ues = {}",
                self.paths_ur.len(),
                self.n_ues
            ));
        }
        if self.paths_ur.iter().any(|&m| m == 0) {
            return bad("every paths_ur entry must be at least 1".into());
        }
        if !(self.carrier_freq_hz > 0.0) || !(self.bandwidth_hz > 0.0) {
            return bad("carrier frequency and bandwidth must be positive".into());
        }
        if !(self.ue_circle_radius >= 0.0) {
            return bad("ue_circle_radius must be non-negative".into());
        }
        if !(self.antenna_spacing > 0.0) {
            return bad("antenna_spacing must be positive".into());
        }
        for (name, r) in [
            ("azimuth_range", self.azimuth_range),
            ("elevation_range", self.elevation_range),
        ] {
            if !(r[0] < r[1]) || r[0] < -FRAC_PI_2 || r[1] > FRAC_PI_2 {
                return bad(format!(
                    "{name} must be an increasing sub-interval of (-pi/2, pi/2)"
                ));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Line-of-sight dominant path loss in dB, `31.4 + 20 log10(r)`.
pub fn path_loss_db(distance_m: f64) -> f64 {
    31.4 + 20.0 * distance_m.log10()
}

/// Uniform linear array response with unit norm.
pub fn steering_ula(n: usize, spatial_freq: f64) -> ComplexVector {
    let scale = 1.0 / (n as f64).sqrt();
    DVector::from_fn(n, |i, _| {
        Complex64::from_polar(scale, i as f64 * spatial_freq)
    })
}

/// Planar-array response `a_v(psi) ⊗ a_h(phi)` with
/// `psi = 2π d_v sin(ele)` and `phi = 2π d_h cos(ele) sin(azi)`.
pub fn steering_upa(
    l_h: usize,
    l_v: usize,
    azimuth: f64,
    elevation: f64,
    spacing_h: f64,
    spacing_v: f64,
) -> ComplexVector {
    let psi = 2.0 * PI * spacing_v * elevation.sin();
    let phi = 2.0 * PI * spacing_h * elevation.cos() * azimuth.sin();
    let av = steering_ula(l_v, psi);
    let ah = steering_ula(l_h, phi);
    let k = kronecker(
        &DMatrix::from_column_slice(l_v, 1, av.as_slice()),
        &DMatrix::from_column_slice(l_h, 1, ah.as_slice()),
    );
    k.column(0).into_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// Per-path gain variance of the RIS→BS link.
    pub sigma_rb2: f64,
    /// Per-path gain variance of each UE→RIS link.
    pub sigma_ur2: Vec<f64>,
    pub noise_bs: f64,
    pub noise_ris: f64,
    pub distance_rb: f64,
    pub distance_ur: Vec<f64>,
}

/// Noise power `W * N0 * NF` in milliwatts.
pub fn noise_power_mw(cfg: &ScenarioConfig) -> f64 {
    dbm_to_mw(cfg.noise_density_dbm_hz + 10.0 * cfg.bandwidth_hz.log10() + cfg.noise_figure_db)
}

pub fn place_ues<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<[f64; 2]> {
    (0..cfg.n_ues)
        .map(|_| {
            let a = rng.random_range(0.0..2.0 * PI);
            [
                cfg.ue_circle_center[0] + cfg.ue_circle_radius * a.cos(),
                cfg.ue_circle_center[1] + cfg.ue_circle_radius * a.sin(),
            ]
        })
        .collect()
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn link_budget(cfg: &ScenarioConfig, ue_positions: &[[f64; 2]]) -> Result<LinkBudget> {
    let distance_rb = distance(cfg.bs_position, cfg.ris_position);
    if distance_rb == 0.0 {
        return Err(Error::ZeroDistance("BS and RIS"));
    }
    let distance_ur: Vec<f64> = ue_positions
        .iter()
        .map(|&p| distance(p, cfg.ris_position))
        .collect();
    if distance_ur.iter().any(|&d| d == 0.0) {
        return Err(Error::ZeroDistance("UE and RIS"));
    }
    let var = |d: f64| 10f64.powf(-path_loss_db(d) / 10.0);
    let noise = noise_power_mw(cfg);
    Ok(LinkBudget {
        sigma_rb2: var(distance_rb),
        sigma_ur2: distance_ur.iter().map(|&d| var(d)).collect(),
        noise_bs: noise,
        noise_ris: noise,
        distance_rb,
        distance_ur,
    })
}

/// Path angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGeometry {
    pub aoa_bs: Vec<f64>,
    pub aod_ris_azi: Vec<f64>,
    pub aod_ris_ele: Vec<f64>,
    pub aoa_ris_azi: Vec<Vec<f64>>,
    pub aoa_ris_ele: Vec<Vec<f64>>,
}

impl ChannelGeometry {
    /// Draws uniform angles, redrawing any UE→RIS angle that collides with an
    /// RIS→BS angle.
    pub fn sample<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Self {
        let open = |rng: &mut R, r: [f64; 2]| loop {
            let x = rng.random_range(r[0]..r[1]);
            if x > r[0] {
                return x;
            }
        };
        let m_rb = cfg.paths_rb;
        let aoa_bs = (0..m_rb).map(|_| open(rng, cfg.azimuth_range)).collect();
        let aod_ris_azi: Vec<f64> = (0..m_rb).map(|_| open(rng, cfg.azimuth_range)).collect();
        let aod_ris_ele: Vec<f64> = (0..m_rb).map(|_| open(rng, cfg.elevation_range)).collect();
        let distinct =
            |x: f64, against: &[f64]| against.iter().all(|&y| (x - y).abs() > ANGLE_COLLISION);
        let mut aoa_ris_azi = Vec::with_capacity(cfg.n_ues);
        let mut aoa_ris_ele = Vec::with_capacity(cfg.n_ues);
        for &m in &cfg.paths_ur {
            let mut azi = Vec::with_capacity(m);
            let mut ele = Vec::with_capacity(m);
            for _ in 0..m {
                azi.push(loop {
                    let x = open(rng, cfg.azimuth_range);
                    if distinct(x, &aod_ris_azi) {
                        break x;
                    }
                });
                ele.push(loop {
                    let x = open(rng, cfg.elevation_range);
                    if distinct(x, &aod_ris_ele) {
                        break x;
                    }
                });
            }
            aoa_ris_azi.push(azi);
            aoa_ris_ele.push(ele);
        }
        Self {
            aoa_bs,
            aod_ris_azi,
            aod_ris_ele,
            aoa_ris_azi,
            aoa_ris_ele,
        }
    }

    /// BS steering matrix `A_B,RB` (N x M_RB).
    pub fn a_b_rb(&self, cfg: &ScenarioConfig) -> ComplexMatrix {
        let n = cfg.n_bs_antennas;
        let cols: Vec<ComplexVector> = self
            .aoa_bs
            .iter()
            .map(|&phi| steering_ula(n, 2.0 * PI * cfg.antenna_spacing * phi.sin()))
            .collect();
        DMatrix::from_columns(&cols)
    }

    fn upa(&self, cfg: &ScenarioConfig, azi: f64, ele: f64) -> ComplexVector {
        let d = cfg.antenna_spacing;
        steering_upa(cfg.ris_rows, cfg.ris_cols, azi, ele, d, d)
    }

    /// RIS departure steering matrix `A_R,RB` (L x M_RB).
    pub fn a_r_rb(&self, cfg: &ScenarioConfig) -> ComplexMatrix {
        let cols: Vec<ComplexVector> = self
            .aod_ris_azi
            .iter()
            .zip(&self.aod_ris_ele)
            .map(|(&a, &e)| self.upa(cfg, a, e))
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// RIS arrival steering matrix of UE `k` (L x M_UR,k).
    pub fn a_r_ur_k(&self, cfg: &ScenarioConfig, k: usize) -> ComplexMatrix {
        let cols: Vec<ComplexVector> = self.aoa_ris_azi[k]
            .iter()
            .zip(&self.aoa_ris_ele[k])
            .map(|(&a, &e)| self.upa(cfg, a, e))
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// All UE arrival steering matrices side by side (L x M_UR).
    pub fn a_r_ur(&self, cfg: &ScenarioConfig) -> ComplexMatrix {
        let cols: Vec<ComplexVector> = (0..cfg.n_ues)
            .flat_map(|k| {
                let a = self.a_r_ur_k(cfg, k);
                (0..a.ncols())
                    .map(move |j| a.column(j).into_owned())
                    .collect::<Vec<_>>()
            })
            .collect();
        DMatrix::from_columns(&cols)
    }
}

/// Raw complex path gains, before the array-size normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGains {
    pub alpha_rb: Vec<Complex64>,
    pub alpha_ur: Vec<Vec<Complex64>>,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Zero-mean circular complex Gaussian vector with i.i.d. entries.
pub fn complex_gaussian_vector<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    var: f64,
) -> ComplexVector {
    DVector::from_fn(len, |_, _| complex_gaussian(rng, var))
}

impl PathGains {
    pub fn sample<R: Rng + ?Sized>(cfg: &ScenarioConfig, budget: &LinkBudget, rng: &mut R) -> Self {
        let alpha_rb = (0..cfg.paths_rb)
            .map(|_| complex_gaussian(rng, budget.sigma_rb2))
            .collect();
        let alpha_ur = cfg
            .paths_ur
            .iter()
            .zip(&budget.sigma_ur2)
            .map(|(&m, &v)| (0..m).map(|_| complex_gaussian(rng, v)).collect())
            .collect();
        Self { alpha_rb, alpha_ur }
    }

    /// `sqrt(NL/M_RB) * alpha_RB`.
    pub fn scaled_rb(&self, cfg: &ScenarioConfig) -> ComplexVector {
        let s = ((cfg.n_bs_antennas * cfg.n_ris()) as f64 / cfg.paths_rb as f64).sqrt();
        DVector::from_iterator(self.alpha_rb.len(), self.alpha_rb.iter().map(|a| a * s))
    }

    /// `sqrt(L/M_UR,k) * alpha_UR,k`.
    pub fn scaled_ur_k(&self, cfg: &ScenarioConfig, k: usize) -> ComplexVector {
        let s = (cfg.n_ris() as f64 / cfg.paths_ur[k] as f64).sqrt();
        DVector::from_iterator(
            self.alpha_ur[k].len(),
            self.alpha_ur[k].iter().map(|a| a * s),
        )
    }

    /// Stacked scaled UE gains `[alpha_UR,1; ...; alpha_UR,K]`.
    pub fn scaled_ur(&self, cfg: &ScenarioConfig) -> ComplexVector {
        let parts: Vec<Complex64> = (0..cfg.n_ues)
            .flat_map(|k| self.scaled_ur_k(cfg, k).iter().cloned().collect::<Vec<_>>())
            .collect();
        DVector::from_vec(parts)
    }

    /// `alpha_c = alpha_UR ⊗ alpha_RB`.
    pub fn alpha_c(&self, cfg: &ScenarioConfig) -> ComplexVector {
        let ur = self.scaled_ur(cfg);
        let rb = self.scaled_rb(cfg);
        let k = kronecker(
            &DMatrix::from_column_slice(ur.len(), 1, ur.as_slice()),
            &DMatrix::from_column_slice(rb.len(), 1, rb.as_slice()),
        );
        k.column(0).into_owned()
    }
}

/// Variance of the scaled RIS→BS gains, `(NL/M_RB) sigma_RB^2`.
pub fn scaled_var_rb(cfg: &ScenarioConfig, budget: &LinkBudget) -> f64 {
    (cfg.n_bs_antennas * cfg.n_ris()) as f64 / cfg.paths_rb as f64 * budget.sigma_rb2
}

/// Variance of the scaled UE→RIS gains of UE `k`, `(L/M_UR,k) sigma_UR,k^2`.
pub fn scaled_var_ur(cfg: &ScenarioConfig, budget: &LinkBudget, k: usize) -> f64 {
    cfg.n_ris() as f64 / cfg.paths_ur[k] as f64 * budget.sigma_ur2[k]
}

/// Cascaded RIS array response `(A_R,UR^T ⋄ A_R,RB^H)^T` (L x M_UR M_RB).
pub fn ris_cascaded_array(
    geometry: &ChannelGeometry,
    cfg: &ScenarioConfig,
) -> Result<ComplexMatrix> {
    let a_r_rb = geometry.a_r_rb(cfg);
    let a_r_ur = geometry.a_r_ur(cfg);
    Ok(khatri_rao(&a_r_ur.transpose(), &a_r_rb.adjoint())?.transpose())
}

/// `W_c = (A_R,UR^T ⋄ A_R,RB^H)^T ⋄ (blkdiag(1^T_{M_UR,k}) ⊗ A_B,RB)`, so that
/// `vec(F^T ⋄ G) = W_c (alpha_UR ⊗ alpha_RB)`.
pub fn build_w_c(geometry: &ChannelGeometry, cfg: &ScenarioConfig) -> Result<ComplexMatrix> {
    let a_b = geometry.a_b_rb(cfg);
    let ris_part = ris_cascaded_array(geometry, cfg)?;
    let m_ur = cfg.total_paths_ur();
    let mut selector = DMatrix::<Complex64>::zeros(cfg.n_ues, m_ur);
    let mut col = 0;
    for (k, &m) in cfg.paths_ur.iter().enumerate() {
        for _ in 0..m {
            selector[(k, col)] = c64(1.0, 0.0);
            col += 1;
        }
    }
    let a_b_tilde = kronecker(&selector, &a_b);
    khatri_rao(&ris_part, &a_b_tilde)
}

/// One draw of the RIS channels together with the quantities the
/// estimators condition on (steering matrices, second-order statistics).
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub ue_positions: Vec<[f64; 2]>,
    pub budget: LinkBudget,
    pub geometry: ChannelGeometry,
    pub gains: PathGains,
    /// RIS→BS channel, N x L.
    pub g: ComplexMatrix,
    /// UE→RIS channels, L x K.
    pub f: ComplexMatrix,
    pub a_b_rb: ComplexMatrix,
    pub a_r_rb: ComplexMatrix,
    pub a_r_ur: ComplexMatrix,
    pub w_c: ComplexMatrix,
    /// `vec(F^T ⋄ G)`, length NKL.
    pub c: ComplexVector,
    /// Diagonal of `Sigma_{alpha_c}`.
    pub sigma_alpha_c: DVector<f64>,
}

impl ChannelRealization {
    pub fn assemble(
        cfg: &ScenarioConfig,
        ue_positions: Vec<[f64; 2]>,
        budget: LinkBudget,
        geometry: ChannelGeometry,
        gains: PathGains,
    ) -> Result<Self> {
        cfg.validate()?;
        let a_b_rb = geometry.a_b_rb(cfg);
        let a_r_rb = geometry.a_r_rb(cfg);
        let a_r_ur = geometry.a_r_ur(cfg);
        let g = &a_b_rb * DMatrix::from_diagonal(&gains.scaled_rb(cfg)) * a_r_rb.adjoint();
        let f_cols: Vec<ComplexVector> = (0..cfg.n_ues)
            .map(|k| geometry.a_r_ur_k(cfg, k) * gains.scaled_ur_k(cfg, k))
            .collect();
        let f = DMatrix::from_columns(&f_cols);
        let c = vec(&khatri_rao(&f.transpose(), &g)?);
        let w_c = build_w_c(&geometry, cfg)?;
        let var_rb = scaled_var_rb(cfg, &budget);
        let sigma_alpha_c = DVector::from_iterator(
            cfg.total_paths_ur() * cfg.paths_rb,
            (0..cfg.n_ues).flat_map(|k| {
                let v = var_rb * scaled_var_ur(cfg, &budget, k);
                std::iter::repeat(v).take(cfg.paths_ur[k] * cfg.paths_rb)
            }),
        );
        Ok(Self {
            ue_positions,
            budget,
            geometry,
            gains,
            g,
            f,
            a_b_rb,
            a_r_rb,
            a_r_ur,
            w_c,
            c,
            sigma_alpha_c,
        })
    }

    /// Cascaded channel `C = F^T ⋄ G` (NK x L).
    pub fn cascaded(&self) -> ComplexMatrix {
        khatri_rao(&self.f.transpose(), &self.g).expect("F and G share the RIS dimension")
    }

    /// `Sigma_c = W_c Sigma_{alpha_c} W_c^H`.
    pub fn sigma_c(&self) -> ComplexMatrix {
        let weighted = scale_columns(&self.w_c, &self.sigma_alpha_c);
        weighted * self.w_c.adjoint()
    }

    pub fn trace_sigma_c(&self) -> f64 {
        self.w_c
            .column_iter()
            .zip(self.sigma_alpha_c.iter())
            .map(|(col, &v)| v * col.norm_squared())
            .sum()
    }

    /// Block-diagonal `Sigma_f` with blocks `sigma_UR,k^2 A_R,UR,k A_R,UR,k^H`.
    pub fn sigma_f(&self, cfg: &ScenarioConfig) -> ComplexMatrix {
        let l = cfg.n_ris();
        let mut out = DMatrix::zeros(l * cfg.n_ues, l * cfg.n_ues);
        for k in 0..cfg.n_ues {
            let a = self.geometry.a_r_ur_k(cfg, k);
            let block = (&a * a.adjoint()).scale(scaled_var_ur(cfg, &self.budget, k));
            out.view_mut((k * l, k * l), (l, l)).copy_from(&block);
        }
        out
    }

    /// `Sigma_g = sigma_RB^2 (A_R,RB^* ⋄ A_B,RB)(A_R,RB^* ⋄ A_B,RB)^H`.
    pub fn sigma_g(&self, cfg: &ScenarioConfig) -> ComplexMatrix {
        let basis = self.g_basis();
        (&basis * basis.adjoint()).scale(scaled_var_rb(cfg, &self.budget))
    }

    /// `A_R,RB^* ⋄ A_B,RB`, the column space of `vec(G)`.
    pub fn g_basis(&self) -> ComplexMatrix {
        khatri_rao(&self.a_r_rb.conjugate(), &self.a_b_rb).expect("same path count")
    }

    pub fn vec_g(&self) -> ComplexVector {
        vec(&self.g)
    }

    pub fn vec_f(&self) -> ComplexVector {
        vec(&self.f)
    }
}

pub(crate) fn scale_columns(m: &ComplexMatrix, weights: &DVector<f64>) -> ComplexMatrix {
    let mut out = m.clone();
    for (j, &w) in weights.iter().enumerate() {
        out.column_mut(j).scale_mut(w);
    }
    out
}

/// Draws UE positions, angles and gains, and assembles the realization.
/// Identical generator state yields an identical realization.
pub fn sample_channels<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let ue_positions = place_ues(cfg, rng);
    let budget = link_budget(cfg, &ue_positions)?;
    let geometry = ChannelGeometry::sample(cfg, rng);
    let gains = PathGains::sample(cfg, &budget, rng);
    ChannelRealization::assemble(cfg, ue_positions, budget, geometry, gains)
}

/// Redraws only the path gains, keeping positions and angles.
pub fn resample_gains<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    base: &ChannelRealization,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let gains = PathGains::sample(cfg, &base.budget, rng);
    ChannelRealization::assemble(
        cfg,
        base.ue_positions.clone(),
        base.budget.clone(),
        base.geometry.clone(),
        gains,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, RANK_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &ComplexVector, b: &ComplexVector, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn ula_examples() {
        let a = steering_ula(4, 0.0);
        assert!(a.iter().all(|z| (z - c64(0.5, 0.0)).norm() < 1e-15));
        let a = steering_ula(2, PI);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[0] - c64(h, 0.0)).norm() < 1e-15 && (a[1] - c64(-h, 0.0)).norm() < 1e-15);
        let a = steering_ula(3, PI / 2.0);
        let s = 1.0 / 3f64.sqrt();
        let expect = [c64(s, 0.0), c64(0.0, s), c64(-s, 0.0)];
        for (z, e) in a.iter().zip(expect) {
            assert!((z - e).norm() < 1e-15);
        }
    }

    #[test]
    fn upa_examples() {
        let a = steering_upa(2, 2, 0.0, 0.0, 0.5, 0.5);
        assert!(a.iter().all(|z| (z - c64(0.5, 0.0)).norm() < 1e-15));
        let a = steering_upa(2, 2, FRAC_PI_2, 0.0, 0.5, 0.5);
        let expect = [0.5, -0.5, 0.5, -0.5];
        for (z, e) in a.iter().zip(expect) {
            assert!((z - c64(e, 0.0)).norm() < 1e-15);
        }
        // degenerate horizontal axis
        let ele = 0.3;
        let a = steering_upa(1, 5, 0.7, ele, 0.5, 0.5);
        let b = steering_ula(5, PI * ele.sin());
        assert!((a - b).norm() < 1e-15);
        assert!((steering_upa(3, 4, 0.2, -0.4, 0.5, 0.5).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn link_budget_values() {
        assert!((path_loss_db(10.0) - 51.4).abs() < 1e-12);
        let v = 10f64.powf(-path_loss_db(10.0) / 10.0);
        assert!((v - 7.244e-6).abs() < 1e-9);
        assert!((path_loss_db(20.0) - path_loss_db(10.0) - 20.0 * 2f64.log10()).abs() < 1e-12);
        let cfg = ScenarioConfig::full_scale();
        let p = noise_power_mw(&cfg);
        let dbm = 10.0 * p.log10();
        assert!((dbm - (-87.969_100_130_080_56)).abs() < 1e-9);
        assert!((p - 1.596e-9).abs() < 1e-12);

        let b = link_budget(&cfg, &[[25.0, 10.0]]).unwrap();
        assert!((b.distance_ur[0] - 5.0).abs() < 1e-12);
        assert_eq!(
            link_budget(&cfg, &[cfg.ris_position]),
            Err(Error::ZeroDistance("UE and RIS"))
        );
    }

    #[test]
    fn ues_lie_on_circle() {
        let cfg = ScenarioConfig::full_scale();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in place_ues(&cfg, &mut rng) {
            let r = distance(p, cfg.ue_circle_center);
            assert!((r - cfg.ue_circle_radius).abs() < 1e-12);
        }
    }

    #[test]
    fn cascaded_identity_holds_for_every_draw() {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let ch = sample_channels(&cfg, &mut rng).unwrap();
            let via_wc = &ch.w_c * ch.gains.alpha_c(&cfg);
            assert!(close(&via_wc, &ch.c, 1e-9));
            assert_eq!(ch.c.len(), cfg.n_bs_antennas * cfg.n_ues * cfg.n_ris());
        }
    }

    #[test]
    fn single_path_ranks() {
        let cfg = ScenarioConfig {
            n_ues: 1,
            paths_rb: 1,
            paths_ur: vec![1],
            ..ScenarioConfig::desk()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = sample_channels(&cfg, &mut rng).unwrap();
        assert_eq!(numerical_rank(&ch.g, RANK_TOL), 1);
        assert_eq!(numerical_rank(&ch.w_c, RANK_TOL), 1);
    }

    #[test]
    fn w_c_full_column_rank_with_distinct_angles() {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let geo = ChannelGeometry::sample(&cfg, &mut rng);
            let w = build_w_c(&geo, &cfg).unwrap();
            assert_eq!(
                numerical_rank(&w, RANK_TOL),
                cfg.paths_rb * cfg.total_paths_ur()
            );
        }
    }

    fn duplicated_geometry(cfg: &ScenarioConfig, seed: u64) -> ChannelGeometry {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut geo = ChannelGeometry::sample(cfg, &mut rng);
        geo.aoa_ris_azi[0] = geo.aod_ris_azi.clone();
        geo.aoa_ris_ele[0] = geo.aod_ris_ele.clone();
        geo
    }

    #[test]
    fn duplicated_angle_pair_collapses_ris_array() {
        // UE paths equal to the RB departure angles make two cascaded RIS
        // responses identical (both the all-ones vector / L).
        let cfg = ScenarioConfig {
            n_ues: 1,
            paths_ur: vec![2],
            ..ScenarioConfig::desk()
        };
        let r = ris_cascaded_array(&duplicated_geometry(&cfg, 5), &cfg).unwrap();
        assert_eq!(
            numerical_rank(&r, RANK_TOL),
            cfg.paths_rb * cfg.total_paths_ur() - 1
        );
    }

    #[test]
    fn duplicated_angle_pair_drops_w_c_rank_with_single_bs_antenna() {
        let cfg = ScenarioConfig {
            n_bs_antennas: 1,
            n_ues: 1,
            paths_ur: vec![2],
            ..ScenarioConfig::desk()
        };
        let w = build_w_c(&duplicated_geometry(&cfg, 5), &cfg).unwrap();
        assert!(numerical_rank(&w, RANK_TOL) < cfg.paths_rb * cfg.total_paths_ur());
    }

    #[test]
    fn bs_factor_restores_w_c_rank_after_duplication() {
        let cfg = ScenarioConfig {
            n_ues: 1,
            paths_ur: vec![2],
            ..ScenarioConfig::desk()
        };
        let w = build_w_c(&duplicated_geometry(&cfg, 5), &cfg).unwrap();
        assert_eq!(
            numerical_rank(&w, RANK_TOL),
            cfg.paths_rb * cfg.total_paths_ur()
        );
    }

    #[test]
    fn sample_covariance_matches_sigma_c() {
        let cfg = ScenarioConfig {
            n_bs_antennas: 4,
            ris_rows: 2,
            ris_cols: 2,
            n_ues: 1,
            paths_rb: 1,
            paths_ur: vec![1],
            ..ScenarioConfig::desk()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = sample_channels(&cfg, &mut rng).unwrap();
        let analytic = base.sigma_c();
        let n = 20_000;
        let dim = base.c.len();
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for _ in 0..n {
            let ch = resample_gains(&cfg, &base, &mut rng).unwrap();
            acc += &ch.c * ch.c.adjoint();
        }
        acc /= c64(n as f64, 0.0);
        let rel = (&acc - &analytic).norm() / analytic.norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn sampled_angles_respect_distinctness() {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let geo = ChannelGeometry::sample(&cfg, &mut rng);
        for k in 0..cfg.n_ues {
            for (&a, &e) in geo.aoa_ris_azi[k].iter().zip(&geo.aoa_ris_ele[k]) {
                assert!(a.abs() < FRAC_PI_2 && e.abs() < FRAC_PI_2);
                assert!(geo
                    .aod_ris_azi
                    .iter()
                    .all(|&b| (a - b).abs() > ANGLE_COLLISION));
                assert!(geo
                    .aod_ris_ele
                    .iter()
                    .all(|&b| (e - b).abs() > ANGLE_COLLISION));
            }
        }
    }

    #[test]
    fn covariance_structure() {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = sample_channels(&cfg, &mut rng).unwrap();
        let l = cfg.n_ris();
        let sf = ch.sigma_f(&cfg);
        for i in 0..sf.nrows() {
            for j in 0..sf.ncols() {
                if i / l != j / l {
                    assert_eq!(sf[(i, j)], Complex64::ZERO);
                }
            }
        }
        let sg = ch.sigma_g(&cfg);
        assert_eq!(numerical_rank(&sg, RANK_TOL), cfg.paths_rb);
        assert_eq!(numerical_rank(&ch.g_basis(), RANK_TOL), cfg.paths_rb);
        let sc = ch.sigma_c();
        assert!((&sc - sc.adjoint()).norm() <= 1e-12 * sc.norm());
        assert!((ch.trace_sigma_c() - sc.trace().re).abs() <= 1e-12 * ch.trace_sigma_c());
    }

    #[test]
    fn same_seed_same_realization() {
        let cfg = ScenarioConfig::desk();
        let a = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a.c, b.c);
        assert_eq!(a.g, b.g);
        assert_eq!(a.f, b.f);
        assert_eq!(a.geometry, b.geometry);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ScenarioConfig {
            paths_ur: vec![2],
            ..ScenarioConfig::desk()
        };
        assert!(matches!(
            sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::InvalidConfig(_))
        ));
    }
}
