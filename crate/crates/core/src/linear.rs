//! Least-squares and LMMSE estimation of the combined channel `h_c` from
//! stacked pilot observations `ỹ = √ρ Z̃ h_c + w`.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channels::gen_narrowband;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, RANK_RTOL};
use crate::model::{build_cascaded, SystemConfig};
use crate::rng::{complex_normal_vector, trial_rng};
use crate::stats::MeanEstimate;
use crate::training::{stack_training, TrainingFamily, TrainingPlan};

/// An estimate of `h_c` and the number of pilot slots that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub h_hat: CVector,
    pub pilots_used: usize,
}

/// LS estimator with the pseudo-inverse of `Z̃` computed once.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    pinv: CMatrix,
}

impl LsEstimator {
    pub fn new(z: &CMatrix) -> Result<Self> {
        let (pinv, rank) = linalg::pseudo_inverse(z, RANK_RTOL);
        if rank < z.ncols() {
            return Err(Error::Underdetermined {
                rank,
                required: z.ncols(),
            });
        }
        Ok(LsEstimator { pinv })
    }

    /// `(1/√ρ) Z̃† ỹ`.
    pub fn estimate(&self, y: &CVector, rho: f64) -> Result<CVector> {
        crate::error::check_dims("y", (self.pinv.ncols(), 1), (y.len(), 1))?;
        Ok(&self.pinv * y / Complex64::from(rho.sqrt()))
    }
}

pub fn ls_estimate(z: &CMatrix, y: &CVector, rho: f64) -> Result<CVector> {
    LsEstimator::new(z)?.estimate(y, rho)
}

/// LMMSE estimator `√ρ R Z̃ᴴ (ρ Z̃ R Z̃ᴴ + I)⁻¹` for a fixed `Z̃`, `ρ` and `R`.
#[derive(Debug, Clone)]
pub struct LmmseEstimator {
    gain: CMatrix,
}

const PSD_TOL: f64 = 1e-10;

impl LmmseEstimator {
    pub fn new(z: &CMatrix, rho: f64, covariance: &CMatrix) -> Result<Self> {
        let n = z.ncols();
        crate::error::check_dims("R_hc", (n, n), covariance.shape())?;
        let min_eigenvalue = linalg::hermitian_min_eigenvalue(covariance);
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        let rz = covariance * z.adjoint();
        let rows = z.nrows();
        let s = z * &rz * Complex64::from(rho) + CMatrix::identity(rows, rows);
        let chol = Cholesky::new(s).ok_or(Error::Singular {
            operand: "ρ Z R Zᴴ + I",
        })?;
        // gain = √ρ R Zᴴ S⁻¹ = (S⁻¹ (√ρ Z R))ᴴ since S and R are Hermitian
        let gain = chol.solve(&(rz.adjoint() * Complex64::from(rho.sqrt()))).adjoint();
        Ok(LmmseEstimator { gain })
    }

    pub fn estimate(&self, y: &CVector) -> Result<CVector> {
        crate::error::check_dims("y", (self.gain.ncols(), 1), (y.len(), 1))?;
        Ok(&self.gain * y)
    }
}

pub fn lmmse_estimate(z: &CMatrix, y: &CVector, rho: f64, covariance: &CMatrix) -> Result<CVector> {
    LmmseEstimator::new(z, rho, covariance)?.estimate(y)
}

/// `ZᴴZ` scaling constant for the orthogonal closed forms.
fn closed_form_gram(plan: &TrainingPlan) -> Result<f64> {
    if plan.direct_path() {
        return Err(Error::invalid(
            "direct_path",
            "closed-form estimators assume the direct path is absent",
        ));
    }
    let m_t = plan.pilots().nrows() as f64;
    let n = plan.states().nrows() as f64;
    match plan.family() {
        TrainingFamily::Canonical => Ok(m_t),
        TrainingFamily::Dft | TrainingFamily::Hadamard => Ok(m_t * n),
        other => Err(Error::invalid(
            "family",
            format!("no closed form for {} training", other.name()),
        )),
    }
}

/// `(1/(M_t√ρ)) Z̃ᴴỹ` for canonical states, `(1/(M_tN√ρ)) Z̃ᴴỹ` for DFT and
/// Hadamard states.
pub fn ls_closed_form(plan: &TrainingPlan, z: &CMatrix, y: &CVector, rho: f64) -> Result<CVector> {
    let gram = closed_form_gram(plan)?;
    Ok(z.adjoint() * y / Complex64::from(gram * rho.sqrt()))
}

/// LS closed form shrunk by `1/(1 + 1/(ρ·gram))`, the LMMSE estimate for `R = I`.
pub fn mmse_closed_form(plan: &TrainingPlan, z: &CMatrix, y: &CVector, rho: f64) -> Result<CVector> {
    let gram = closed_form_gram(plan)?;
    let scale = gram * rho.sqrt() * (1.0 + 1.0 / (rho * gram));
    Ok(z.adjoint() * y / Complex64::from(scale))
}

/// Per-entry error variances of LS and LMMSE (`R = I`) over Monte Carlo
/// trials on i.i.d. Rayleigh channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub ls: MeanEstimate,
    pub lmmse: MeanEstimate,
    pub slots: usize,
}

/// Runs `trials` independent train-and-estimate rounds. Trial `t` draws its
/// channels and noise from the stream `(seed, grid_point, t)`.
pub fn empirical_mse(
    cfg: &SystemConfig,
    family: TrainingFamily,
    trials: usize,
    seed: u64,
    grid_point: u64,
) -> Result<MseReport> {
    let plan = TrainingPlan::new(family, cfg)?;
    let z = stack_training(&plan, cfg)?;
    let ls = LsEstimator::new(&z)?;
    let n = z.ncols();
    let lmmse = LmmseEstimator::new(&z, cfg.rho, &CMatrix::identity(n, n))?;
    let amp = Complex64::from(cfg.rho.sqrt());

    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, grid_point, t as u64);
            let target = draw_target(cfg, &mut rng);
            let y = &z * &target * amp + complex_normal_vector(z.nrows(), &mut rng);
            let ls_err = (ls.estimate(&y, cfg.rho).expect("dims fixed") - &target).norm_squared();
            let mmse_err = (lmmse.estimate(&y).expect("dims fixed") - &target).norm_squared();
            (ls_err / n as f64, mmse_err / n as f64)
        })
        .collect();
    let (ls_samples, mmse_samples): (Vec<f64>, Vec<f64>) = per_trial.into_iter().unzip();
    Ok(MseReport {
        ls: MeanEstimate::from_samples(&ls_samples),
        lmmse: MeanEstimate::from_samples(&mmse_samples),
        slots: plan.slots(),
    })
}

/// Random estimation target for `cfg`: `vec(H_c)` of an i.i.d. Rayleigh
/// channel, with the direct column dropped when there is no direct path.
pub fn draw_target<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CVector {
    let channels = gen_narrowband(cfg, rng);
    let cascaded = build_cascaded(&channels).expect("generated channels are consistent");
    if cfg.direct_path {
        cascaded.vector()
    } else {
        cascaded.reflected_vector()
    }
}
