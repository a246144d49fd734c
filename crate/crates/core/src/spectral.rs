//! Achievable rates under training overhead, pilot/data power allocation and
//! the choice of how many RIS elements to train.
//!
//! Everything here is single-antenna at both ends with no direct path. The
//! channel estimate entering the rate expression comes from actually running
//! training and MMSE estimation on random channels.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::mmse_closed_form;
use crate::model::SystemConfig;
use crate::rng::{complex_normal_vector, trial_rng};
use crate::stats::MeanEstimate;
use crate::training::{stack_training, TrainingFamily, TrainingPlan};

/// Training family for rate evaluation. `Orthogonal` covers DFT and Hadamard
/// states, which give identical estimation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateFamily {
    Canonical,
    Orthogonal,
}

impl RateFamily {
    pub fn name(self) -> &'static str {
        match self {
            RateFamily::Canonical => "canonical",
            RateFamily::Orthogonal => "dft",
        }
    }

    fn training(self) -> TrainingFamily {
        match self {
            RateFamily::Canonical => TrainingFamily::Canonical,
            RateFamily::Orthogonal => TrainingFamily::Dft,
        }
    }
}

/// Parameters of one rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    /// RIS size, equal to the number of training slots.
    pub n: usize,
    /// Coherence interval in symbols.
    pub t: usize,
    pub rho: f64,
    pub trials: usize,
    pub family: RateFamily,
    pub seed: u64,
    /// Random stream index; evaluations sharing it see the same channels.
    pub grid_point: u64,
}

impl RateConfig {
    pub fn new(n: usize, t: usize, rho: f64, trials: usize, family: RateFamily) -> Result<Self> {
        let cfg = RateConfig {
            n,
            t,
            rho,
            trials,
            family,
            seed: 0,
            grid_point: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64, grid_point: u64) -> Self {
        self.seed = seed;
        self.grid_point = grid_point;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_interval(self.n, self.t)?;
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::invalid("rho", format!("must be positive, got {}", self.rho)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_interval(n: usize, t: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    if n >= t {
        return Err(Error::invalid(
            "T",
            format!("coherence interval {t} must exceed the {n} training slots"),
        ));
    }
    Ok(())
}

/// Division of the energy `ρT` of one coherence block between `N` training
/// symbols at power `ρ_τ` and `T − N` data symbols at power `ρ_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSplit {
    /// Fraction of the energy spent on data.
    pub beta: f64,
    pub rho_tau: f64,
    pub rho_d: f64,
}

impl PowerSplit {
    pub fn new(beta: f64, n: usize, t: usize, rho: f64) -> Result<Self> {
        check_interval(n, t)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
        }
        let energy = rho * t as f64;
        Ok(PowerSplit {
            beta,
            rho_tau: (1.0 - beta) * energy / n as f64,
            rho_d: beta * energy / (t - n) as f64,
        })
    }

    /// Training and data symbols at the same power `ρ`.
    pub fn equal(n: usize, t: usize, rho: f64) -> Result<Self> {
        check_interval(n, t)?;
        let mut split = PowerSplit::new((t - n) as f64 / t as f64, n, t, rho)?;
        split.rho_tau = rho;
        split.rho_d = rho;
        Ok(split)
    }
}

/// Noise-plus-estimation-error term in the rate denominator.
fn interference(family: RateFamily, n: usize, split: &PowerSplit) -> f64 {
    let n = n as f64;
    match family {
        RateFamily::Canonical => 1.0 + n * split.rho_d / (1.0 + split.rho_tau),
        RateFamily::Orthogonal => 1.0 + n * split.rho_d / (1.0 + n * split.rho_tau),
    }
}

/// Per-trial rates for `cfg` under `split`, in trial order.
pub fn rate_samples(cfg: &RateConfig, split: &PowerSplit) -> Result<Vec<f64>> {
    cfg.validate()?;
    let sys = SystemConfig::new(1, 1, cfg.n, split.rho_tau, false, cfg.seed)?;
    let plan = TrainingPlan::new(cfg.family.training(), &sys)?;
    let z = stack_training(&plan, &sys)?;
    let amp = Complex64::from(split.rho_tau.sqrt());
    let prefactor = 1.0 - cfg.n as f64 / cfg.t as f64;
    let denom = interference(cfg.family, cfg.n, split);

    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, cfg.grid_point, trial as u64);
            let h = complex_normal_vector(cfg.n, &mut rng);
            let w = complex_normal_vector(cfg.n, &mut rng);
            let y = &z * h * amp + w;
            let h_hat = mmse_closed_form(&plan, &z, &y, split.rho_tau).expect("dims fixed");
            let coherent: f64 = h_hat.iter().map(|v| v.norm()).sum();
            prefactor * (1.0 + split.rho_d * coherent * coherent / denom).log2()
        })
        .collect())
}

fn rate(cfg: &RateConfig, split: &PowerSplit) -> Result<MeanEstimate> {
    Ok(MeanEstimate::from_samples(&rate_samples(cfg, split)?))
}

/// Rate with canonical (one element on per slot) training.
pub fn rate_canonical(cfg: &RateConfig, split: &PowerSplit) -> Result<MeanEstimate> {
    rate(
        &RateConfig {
            family: RateFamily::Canonical,
            ..*cfg
        },
        split,
    )
}

/// Rate with DFT (equivalently Hadamard) training.
pub fn rate_orthogonal(cfg: &RateConfig, split: &PowerSplit) -> Result<MeanEstimate> {
    rate(
        &RateConfig {
            family: RateFamily::Orthogonal,
            ..*cfg
        },
        split,
    )
}

/// The effective SNR `ρ_d σ²_ĥ / D` that the rate depends on through `β`,
/// with `σ²_ĥ` the per-entry estimate variance and `D` the interference term.
pub fn effective_snr(family: RateFamily, n: usize, split: &PowerSplit) -> f64 {
    let nf = n as f64;
    let gain = match family {
        RateFamily::Canonical => split.rho_tau / (1.0 + split.rho_tau),
        RateFamily::Orthogonal => nf * split.rho_tau / (1.0 + nf * split.rho_tau),
    };
    split.rho_d * gain / interference(family, n, split)
}

/// Closed-form rate-maximizing split. Falls back to a numerical maximization
/// of [`effective_snr`] where the closed form degenerates to `0/0`.
pub fn optimal_split(family: RateFamily, n: usize, t: usize, rho: f64) -> Result<PowerSplit> {
    check_interval(n, t)?;
    let (nf, tf) = (n as f64, t as f64);
    let data = nf * rho * tf / (tf - nf);
    let (a, b) = match family {
        RateFamily::Canonical => (1.0 + rho * tf / nf, data - rho * tf / nf),
        RateFamily::Orthogonal => (1.0 + rho * tf, data - rho * tf),
    };
    let beta = if b.abs() <= 1e-12 * a {
        golden_section_max(
            |beta| effective_snr(family, n, &PowerSplit::new(beta, n, t, rho).expect("interior β")),
            1e-9,
            1.0 - 1e-9,
            1e-12,
        )
    } else {
        // (√(a(a+b)) − a)/b without the cancellation
        a / ((a * (a + b)).sqrt() + a)
    };
    PowerSplit::new(beta, n, t, rho)
}

pub fn optimal_split_canonical(n: usize, t: usize, rho: f64) -> Result<PowerSplit> {
    optimal_split(RateFamily::Canonical, n, t, rho)
}

pub fn optimal_split_orthogonal(n: usize, t: usize, rho: f64) -> Result<PowerSplit> {
    optimal_split(RateFamily::Orthogonal, n, t, rho)
}

/// Maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Result of the RIS-size search.
#[derive(Debug, Clone, PartialEq)]
pub struct RisSizeSearch {
    pub n_star: usize,
    /// Optimally split rate for `N = 1..=N_max`, index `N − 1`.
    pub rates: Vec<MeanEstimate>,
}

/// Number of elements `N* ≤ N_max` to train so that the optimally split
/// rate is largest; ties go to the smaller `N`.
///
/// Every `N` is evaluated on the same random stream `(seed, grid_point)`.
pub fn optimal_ris_size(
    n_max: usize,
    t: usize,
    rho: f64,
    family: RateFamily,
    trials: usize,
    seed: u64,
    grid_point: u64,
) -> Result<RisSizeSearch> {
    check_interval(n_max, t)?;
    let rates = (1..=n_max)
        .map(|n| {
            let cfg = RateConfig::new(n, t, rho, trials, family)?.with_seed(seed, grid_point);
            rate(&cfg, &optimal_split(family, n, t, rho)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut n_star = 1;
    for (i, r) in rates.iter().enumerate() {
        if r.mean > rates[n_star - 1].mean {
            n_star = i + 1;
        }
    }
    Ok(RisSizeSearch { n_star, rates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_is_conserved() {
        for (n, t, rho, beta) in [(1, 2, 1.0, 0.3), (32, 150, 10.0, 0.71), (63, 64, 0.01, 0.5)] {
            let s = PowerSplit::new(beta, n, t, rho).unwrap();
            let lhs = rho * t as f64;
            let rhs = s.rho_tau * n as f64 + s.rho_d * (t - n) as f64;
            assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
        let s = PowerSplit::equal(32, 150, 3.0).unwrap();
        assert_eq!((s.rho_tau, s.rho_d), (3.0, 3.0));
        assert!((s.beta - 118.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_intervals_rejected() {
        assert!(RateConfig::new(5, 5, 1.0, 10, RateFamily::Canonical).is_err());
        assert!(RateConfig::new(0, 5, 1.0, 10, RateFamily::Canonical).is_err());
        assert!(RateConfig::new(1, 5, 1.0, 0, RateFamily::Canonical).is_err());
        assert!(PowerSplit::new(1.0, 1, 2, 1.0).is_err());
        assert!(optimal_split_canonical(4, 4, 1.0).is_err());
    }

    #[test]
    fn vanishing_snr_gives_vanishing_rate() {
        let cfg = RateConfig::new(8, 20, 1e-8, 500, RateFamily::Canonical).unwrap();
        let split = PowerSplit::equal(8, 20, 1e-8).unwrap();
        assert!(rate_canonical(&cfg, &split).unwrap().mean <= 1e-4);
        assert!(rate_orthogonal(&cfg, &split).unwrap().mean <= 1e-4);
    }

    #[test]
    fn families_coincide_for_single_element() {
        let cfg = RateConfig::new(1, 5, 4.0, 2000, RateFamily::Canonical).unwrap();
        let split = PowerSplit::new(0.6, 1, 5, 4.0).unwrap();
        let a = rate_canonical(&cfg, &split).unwrap();
        let b = rate_orthogonal(&cfg, &split).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-12);
    }

    #[test]
    fn optimal_split_is_interior() {
        for family in [RateFamily::Canonical, RateFamily::Orthogonal] {
            for n in [1, 2, 8, 32, 64] {
                for t in [n + 1, 2 * n, n * (n + 1), 150.max(n + 1)] {
                    for rho_db in [-20.0, 0.0, 30.0] {
                        let rho = 10f64.powf(rho_db / 10.0);
                        let s = optimal_split(family, n, t, rho).unwrap();
                        assert!(s.beta > 0.0 && s.beta < 1.0, "{family:?} {n} {t} {rho_db}");
                    }
                }
            }
        }
    }

    #[test]
    fn singular_points_give_half() {
        let s = optimal_split_orthogonal(16, 32, 5.0).unwrap();
        assert!((s.beta - 0.5).abs() < 1e-6);
        let s = optimal_split_canonical(4, 20, 5.0).unwrap();
        assert!((s.beta - 0.5).abs() < 1e-6);
    }

    #[test]
    fn closed_form_is_continuous_across_singular_point() {
        let at = optimal_split_orthogonal(16, 32, 5.0).unwrap().beta;
        let below = optimal_split_orthogonal(16, 31, 5.0).unwrap().beta;
        let above = optimal_split_orthogonal(16, 33, 5.0).unwrap().beta;
        assert!(below < at && at < above || below > at && at > above);
        assert!((below - at).abs() < 0.05 && (above - at).abs() < 0.05);
    }

    #[test]
    fn ris_size_picks_smallest_on_ties() {
        // With ρ → 0 every rate rounds to zero, so the first N must win.
        let r = optimal_ris_size(4, 10, 1e-300, RateFamily::Canonical, 10, 0, 0).unwrap();
        assert_eq!(r.n_star, 1);
        assert_eq!(r.rates.len(), 4);
    }
}
