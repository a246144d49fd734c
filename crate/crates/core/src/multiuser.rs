//! Training-overhead reduction for many users sharing one RIS.
//!
//! The uplink is `y = Σ_k √ρ (h_dk + H diag(ψ) g_k) x_k + w` with an
//! `M`-antenna base station, single-antenna users and the RIS–BS channel `H`
//! common to all users.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, dft_matrix, CMatrix, CVector, RANK_RTOL};
use crate::model::NarrowbandChannelSet;
use crate::rng::{complex_normal_matrix, complex_normal_vector, unit_modulus_matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiuserConfig {
    pub users: usize,
    pub bs_antennas: usize,
    pub ris_elements: usize,
    pub rho: f64,
    pub direct_path: bool,
}

impl MultiuserConfig {
    pub fn new(users: usize, bs_antennas: usize, ris_elements: usize, rho: f64, direct_path: bool) -> Result<Self> {
        let cfg = MultiuserConfig {
            users,
            bs_antennas,
            ris_elements,
            rho,
            direct_path,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("K", self.users), ("M", self.bs_antennas), ("N", self.ris_elements)] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::invalid("rho", format!("must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Slots of the common-channel protocol:
/// `K + N + max(K − 1, ⌈(K − 1)N/M⌉)`.
pub fn overhead_common_channel(users: usize, ris_elements: usize, bs_antennas: usize) -> Result<usize> {
    for (name, v) in [("K", users), ("N", ris_elements), ("M", bs_antennas)] {
        if v == 0 {
            return Err(Error::invalid(name, "must be at least 1"));
        }
    }
    Ok(users + ris_elements + ratio_slots(users, ris_elements, bs_antennas))
}

fn ratio_slots(users: usize, ris_elements: usize, bs_antennas: usize) -> usize {
    let others = users - 1;
    others.max((others * ris_elements).div_ceil(bs_antennas))
}

/// Overhead per short coherence block when `H` is re-estimated only every
/// `α` blocks: `2(N + 1)/α + K⌈N/M⌉ + K`.
pub fn overhead_two_timescale(users: usize, ris_elements: usize, bs_antennas: usize, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 1.0 {
        return Err(Error::invalid("alpha", format!("must be at least 1, got {alpha}")));
    }
    if bs_antennas == 0 {
        return Err(Error::invalid("M", "must be at least 1"));
    }
    let k = users as f64;
    Ok(2.0 * (ris_elements as f64 + 1.0) / alpha + k * ris_elements.div_ceil(bs_antennas) as f64 + k)
}

/// Channels of all users: the common `H` (`M × N`) and per-user `h_dk`, `g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiuserChannels {
    pub ris_bs: CMatrix,
    pub direct: Vec<CVector>,
    pub user_ris: Vec<CVector>,
}

impl MultiuserChannels {
    /// `H diag(g_k)`.
    pub fn cascaded(&self, user: usize) -> CMatrix {
        &self.ris_bs * CMatrix::from_diagonal(&self.user_ris[user])
    }
}

/// i.i.d. CN(0,1) channels. Draw order: `H`, then `(h_dk, g_k)` per user;
/// `h_dk` is drawn and zeroed when there is no direct path.
pub fn gen_multiuser<R: Rng + ?Sized>(cfg: &MultiuserConfig, rng: &mut R) -> MultiuserChannels {
    let ris_bs = complex_normal_matrix(cfg.bs_antennas, cfg.ris_elements, rng);
    let mut direct = Vec::with_capacity(cfg.users);
    let mut user_ris = Vec::with_capacity(cfg.users);
    for _ in 0..cfg.users {
        let h_d = complex_normal_vector(cfg.bs_antennas, rng);
        direct.push(if cfg.direct_path {
            h_d
        } else {
            CVector::zeros(cfg.bs_antennas)
        });
        user_ris.push(complex_normal_vector(cfg.ris_elements, rng));
    }
    MultiuserChannels {
        ris_bs,
        direct,
        user_ris,
    }
}

/// Which protocol phases see receiver noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseNoise {
    pub direct: bool,
    pub reference: bool,
    pub ratios: bool,
}

impl PhaseNoise {
    pub const ALL: PhaseNoise = PhaseNoise {
        direct: true,
        reference: true,
        ratios: true,
    };
    pub const NONE: PhaseNoise = PhaseNoise {
        direct: false,
        reference: false,
        ratios: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEstimate {
    pub direct: Option<CVector>,
    /// Estimate of `H diag(g_k)`.
    pub cascaded: CMatrix,
    /// Set when the reference estimate has a column too weak to scale from.
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonChannelOutcome {
    pub users: Vec<UserEstimate>,
    pub slots: usize,
}

const WEAK_COLUMN: f64 = 1e-6;
const MAX_CONDITION: f64 = 1e6;
const MAX_RESAMPLES: usize = 100;

/// Slot-by-slot receiver for the protocol, counting every transmission.
struct Uplink<'a, R: Rng + ?Sized> {
    channels: &'a MultiuserChannels,
    amp: Complex64,
    slots: usize,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Uplink<'_, R> {
    /// One slot in which `users[i]` sends `pilots[i]` under RIS state `psi`.
    fn slot(&mut self, users: &[usize], pilots: &[Complex64], psi: &CVector, noisy: bool) -> CVector {
        self.slots += 1;
        let m = self.channels.ris_bs.nrows();
        let mut y = CVector::zeros(m);
        for (&k, &x) in users.iter().zip(pilots) {
            let path = &self.channels.direct[k] + &self.channels.ris_bs * psi.component_mul(&self.channels.user_ris[k]);
            y += path * (x * self.amp);
        }
        if noisy {
            y += complex_normal_vector(m, self.rng);
        }
        y
    }
}

/// Runs the common-channel protocol:
///
/// 1. with the RIS off, each user sends one pilot for its direct channel
///    (skipped without a direct path);
/// 2. user 1 sends `N` pilots under the `N` DFT states, giving
///    `Â₁ = H diag(g₁)` by LS;
/// 3. users `2..K` transmit together for `max(K − 1, ⌈(K − 1)N/M⌉)` slots
///    with random unit-modulus pilots and RIS states, and the ratios
///    `c_{k,n} = g_k(n)/g₁(n)` are solved jointly by LS, so that user `k`'s
///    estimate is `Â₁ diag(c_k)`. States are redrawn while the system's
///    condition number exceeds `1e6`.
pub fn simulate_common_channel<R: Rng + ?Sized>(
    cfg: &MultiuserConfig,
    channels: &MultiuserChannels,
    noise: PhaseNoise,
    rng: &mut R,
) -> Result<CommonChannelOutcome> {
    cfg.validate()?;
    let (k_users, m, n) = (cfg.users, cfg.bs_antennas, cfg.ris_elements);
    crate::error::check_dims("H", (m, n), channels.ris_bs.shape())?;
    if channels.direct.len() != k_users || channels.user_ris.len() != k_users {
        return Err(Error::DimensionMismatch {
            operand: "user channels",
            expected: (k_users, k_users),
            found: (channels.direct.len(), channels.user_ris.len()),
        });
    }
    let amp = Complex64::from(cfg.rho.sqrt());
    let one = Complex64::from(1.0);
    let mut link = Uplink {
        channels,
        amp,
        slots: 0,
        rng,
    };

    let direct: Vec<CVector> = if cfg.direct_path {
        (0..k_users)
            .map(|k| link.slot(&[k], &[one], &CVector::zeros(n), noise.direct) / amp)
            .collect()
    } else {
        vec![CVector::zeros(m); k_users]
    };

    // user 1 under the N DFT states; (Y − ĥ_d1 1ᵀ) = Â₁ Ψ with ΨΨᴴ = N I
    let states = dft_matrix(n);
    let mut y1 = CMatrix::zeros(m, n);
    for j in 0..n {
        let y = link.slot(&[0], &[one], &states.column(j).into_owned(), noise.reference);
        y1.set_column(j, &(y / amp - &direct[0]));
    }
    let reference = y1 * states.adjoint() / Complex64::from(n as f64);
    let ill_conditioned = reference.column_iter().any(|c| c.norm() < WEAK_COLUMN);

    let mut users = vec![UserEstimate {
        direct: cfg.direct_path.then(|| direct[0].clone()),
        cascaded: reference.clone(),
        ill_conditioned,
    }];
    if k_users > 1 {
        let others: Vec<usize> = (1..k_users).collect();
        let slots = ratio_slots(k_users, n, m);
        let unknowns = (k_users - 1) * n;
        let mut attempt = 0;
        let (pilots, psis, system) = loop {
            let pilots = unit_modulus_matrix(k_users - 1, slots, link.rng);
            let psis = unit_modulus_matrix(n, slots, link.rng);
            // rows (slot, antenna), columns (user, element)
            let mut system = CMatrix::zeros(slots * m, unknowns);
            for s in 0..slots {
                for (u, _) in others.iter().enumerate() {
                    for e in 0..n {
                        let col = reference.column(e) * (psis[(e, s)] * pilots[(u, s)]);
                        system.view_mut((s * m, u * n + e), (m, 1)).copy_from(&col);
                    }
                }
            }
            attempt += 1;
            let cond = linalg::condition_number(&system);
            if cond <= MAX_CONDITION || attempt >= MAX_RESAMPLES || ill_conditioned {
                break (pilots, psis, system);
            }
        };
        let mut observed = CVector::zeros(slots * m);
        for s in 0..slots {
            let x: Vec<Complex64> = pilots.column(s).iter().copied().collect();
            let mut y = link.slot(&others, &x, &psis.column(s).into_owned(), noise.ratios) / amp;
            for (u, &k) in others.iter().enumerate() {
                y -= &direct[k] * x[u];
            }
            observed.rows_mut(s * m, m).copy_from(&y);
        }
        let (pinv, _) = linalg::pseudo_inverse(&system, RANK_RTOL);
        let ratios = pinv * observed;
        for (u, &k) in others.iter().enumerate() {
            let c = ratios.rows(u * n, n).into_owned();
            users.push(UserEstimate {
                direct: cfg.direct_path.then(|| direct[k].clone()),
                cascaded: &reference * CMatrix::from_diagonal(&c),
                ill_conditioned,
            });
        }
    }
    Ok(CommonChannelOutcome {
        users,
        slots: link.slots,
    })
}

/// `Q` random unit-modulus RIS states, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct OpportunisticCodebook {
    states: CMatrix,
}

impl OpportunisticCodebook {
    pub fn random<R: Rng + ?Sized>(ris_elements: usize, q: usize, rng: &mut R) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("Q", "must be at least 1"));
        }
        Ok(OpportunisticCodebook {
            states: unit_modulus_matrix(ris_elements, q, rng),
        })
    }

    pub fn from_states(states: CMatrix) -> Result<Self> {
        if states.ncols() == 0 {
            return Err(Error::invalid("Q", "must be at least 1"));
        }
        if states.iter().any(|v| (v.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::invalid("states", "entries must have unit modulus"));
        }
        Ok(OpportunisticCodebook { states })
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    /// The codebook made of the first `q` states.
    pub fn prefix(&self, q: usize) -> Result<Self> {
        if q == 0 || q > self.len() {
            return Err(Error::invalid("Q", format!("need 1 ≤ Q ≤ {}, got {q}", self.len())));
        }
        Ok(OpportunisticCodebook {
            states: self.states.columns(0, q).into_owned(),
        })
    }
}

/// How each candidate's effective channel is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    Noiseless,
    /// Averaging `n` pilots: per-entry noise variance `1/(nρ)`.
    Pilots(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// `log₂(1 + ρ‖h_eff‖²)` for the chosen state.
    pub rate: f64,
    pub measured_gains: Vec<f64>,
}

/// Probes every codebook state, keeps the one with the largest measured
/// `‖ĥ_eff‖²` (lowest index on ties) and reports its true rate. Noise for
/// candidate `q` is the `q`-th draw from `rng`, so nested codebooks see the
/// same measurements.
pub fn opportunistic_select<R: Rng + ?Sized>(
    codebook: &OpportunisticCodebook,
    channels: &NarrowbandChannelSet,
    rho: f64,
    measurement: Measurement,
    rng: &mut R,
) -> Result<Selection> {
    let n = channels.ris_elements();
    crate::error::check_dims("states", (n, codebook.len()), codebook.states.shape())?;
    let noise_std = match measurement {
        Measurement::Noiseless => 0.0,
        Measurement::Pilots(0) => return Err(Error::invalid("pilots", "must be at least 1")),
        Measurement::Pilots(p) => 1.0 / (p as f64 * rho).sqrt(),
    };
    let mut true_gains = Vec::with_capacity(codebook.len());
    let mut measured_gains = Vec::with_capacity(codebook.len());
    for q in 0..codebook.len() {
        let state = crate::model::RisState::new(codebook.states.column(q).into_owned())?;
        let h_eff = channels.effective(&state)?;
        let mut measured = h_eff.clone();
        if noise_std > 0.0 {
            let (r, c) = h_eff.shape();
            measured += complex_normal_matrix(r, c, rng) * Complex64::from(noise_std);
        }
        true_gains.push(h_eff.norm_squared());
        measured_gains.push(measured.norm_squared());
    }
    let mut index = 0;
    for (q, &g) in measured_gains.iter().enumerate() {
        if g > measured_gains[index] {
            index = q;
        }
    }
    Ok(Selection {
        index,
        rate: (1.0 + rho * true_gains[index]).log2(),
        measured_gains,
    })
}
