//! Random channel generation: i.i.d. Rayleigh, Rician, geometric (few-path)
//! and frequency-selective multi-tap channels.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{NarrowbandChannelSet, SystemConfig};
use crate::rng::{complex_normal, complex_normal_matrix, complex_normal_vector};

/// Matrix with i.i.d. CN(0,1) entries.
pub fn gen_iid_rayleigh<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    complex_normal_matrix(rows, cols, rng)
}

/// i.i.d. Rayleigh channel triple for `cfg`; `H_d = 0` when the direct path
/// is disabled. Draw order is `H_d`, `G`, `H`.
pub fn gen_narrowband<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> NarrowbandChannelSet {
    let (m_t, m_r, n) = (cfg.tx_antennas, cfg.rx_antennas, cfg.ris_elements);
    let direct = if cfg.direct_path {
        gen_iid_rayleigh(m_r, m_t, rng)
    } else {
        CMatrix::zeros(m_r, m_t)
    };
    let g = gen_iid_rayleigh(n, m_t, rng);
    let h = gen_iid_rayleigh(m_r, n, rng);
    NarrowbandChannelSet::new(direct, g, h).expect("generated dimensions are consistent")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicianParams {
    k_factor: f64,
    los: CMatrix,
}

impl RicianParams {
    pub fn new(k_factor: f64, los: CMatrix) -> Result<Self> {
        if k_factor.is_nan() || k_factor < 0.0 {
            return Err(Error::invalid(
                "k_factor",
                format!("must be nonnegative, got {k_factor}"),
            ));
        }
        if los.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("los_component", "entries must be finite"));
        }
        Ok(RicianParams { k_factor, los })
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    pub fn los(&self) -> &CMatrix {
        &self.los
    }
}

/// `√(K/(1+K)) · LoS + √(1/(1+K)) · W` with `W` i.i.d. CN(0,1).
pub fn gen_rician<R: Rng + ?Sized>(params: &RicianParams, rng: &mut R) -> CMatrix {
    let k = params.k_factor;
    let los_weight = (k / (1.0 + k)).sqrt();
    let nlos_weight = (1.0 / (1.0 + k)).sqrt();
    let (rows, cols) = params.los.shape();
    let scatter = complex_normal_matrix(rows, cols, rng);
    &params.los * Complex64::from(los_weight) + scatter * Complex64::from(nlos_weight)
}

/// Path gains and azimuth angles of a few-path channel (ULAs at both ends).
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricParams {
    gains: CVector,
    departure: Vec<f64>,
    arrival: Vec<f64>,
}

fn check_angle(name: &'static str, a: f64) -> Result<()> {
    if (-FRAC_PI_2..FRAC_PI_2).contains(&a) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("angle {a} outside [-π/2, π/2)")))
    }
}

impl GeometricParams {
    pub fn new(gains: CVector, departure: Vec<f64>, arrival: Vec<f64>) -> Result<Self> {
        let l = gains.len();
        if l == 0 {
            return Err(Error::invalid("num_paths", "at least one path is required"));
        }
        if departure.len() != l || arrival.len() != l {
            return Err(Error::DimensionMismatch {
                operand: "angles",
                expected: (l, l),
                found: (departure.len(), arrival.len()),
            });
        }
        for &a in &departure {
            check_angle("departure_angles", a)?;
        }
        for &a in &arrival {
            check_angle("arrival_angles", a)?;
        }
        Ok(GeometricParams {
            gains,
            departure,
            arrival,
        })
    }

    /// `paths` paths with CN(0,1) gains and uniform angles.
    pub fn random<R: Rng + ?Sized>(paths: usize, rng: &mut R) -> Result<Self> {
        let gains = complex_normal_vector(paths, rng);
        let departure = (0..paths).map(|_| rng.random_range(-FRAC_PI_2..FRAC_PI_2)).collect();
        let arrival = (0..paths).map(|_| rng.random_range(-FRAC_PI_2..FRAC_PI_2)).collect();
        Self::new(gains, departure, arrival)
    }

    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &CVector {
        &self.gains
    }

    pub fn departure(&self) -> &[f64] {
        &self.departure
    }

    pub fn arrival(&self) -> &[f64] {
        &self.arrival
    }
}

/// Unnormalized half-wavelength ULA response, `a(φ)_m = exp(jπ m sin φ)`.
pub fn steering_vector(size: usize, angle: f64) -> CVector {
    steering_vector_sin(size, angle.sin())
}

/// Same as [`steering_vector`], parameterized by `sin φ`.
pub fn steering_vector_sin(size: usize, sin_angle: f64) -> CVector {
    CVector::from_fn(size, |m, _| Complex64::from_polar(1.0, PI * m as f64 * sin_angle))
}

/// `A_arr diag(α) A_depᴴ` for a `rows × cols` channel (arrival array of
/// `rows` elements, departure array of `cols` elements).
pub fn gen_geometric(params: &GeometricParams, rows: usize, cols: usize) -> CMatrix {
    let l = params.num_paths();
    let a_arr = CMatrix::from_fn(rows, l, |m, p| steering_vector(rows, params.arrival[p])[m]);
    let a_dep = CMatrix::from_fn(cols, l, |m, p| steering_vector(cols, params.departure[p])[m]);
    let diag = CMatrix::from_diagonal(&params.gains);
    a_arr * diag * a_dep.adjoint()
}

/// OFDM link dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidebandConfig {
    pub subcarriers: usize,
    pub taps: usize,
    pub cyclic_prefix: usize,
    pub ris_elements: usize,
}

impl WidebandConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(Error::invalid("taps", "at least one tap is required"));
        }
        if self.ris_elements == 0 {
            return Err(Error::invalid("ris_elements", "must be at least 1"));
        }
        if self.taps > self.subcarriers {
            return Err(Error::invalid(
                "taps",
                format!("{} taps exceed {} subcarriers", self.taps, self.subcarriers),
            ));
        }
        if self.cyclic_prefix < self.taps || self.cyclic_prefix > self.subcarriers {
            return Err(Error::invalid(
                "cyclic_prefix",
                format!(
                    "need taps ({}) <= cyclic_prefix ({}) <= subcarriers ({})",
                    self.taps, self.cyclic_prefix, self.subcarriers
                ),
            ));
        }
        Ok(())
    }
}

/// Zero-padded time-domain impulse responses (length `M_c`) of the direct
/// channel and of each RIS element's incoming and outgoing links.
#[derive(Debug, Clone, PartialEq)]
pub struct WidebandChannelSet {
    config: WidebandConfig,
    direct: CVector,
    tx_ris: Vec<CVector>,
    ris_rx: Vec<CVector>,
}

impl WidebandChannelSet {
    pub fn new(config: WidebandConfig, direct: CVector, tx_ris: Vec<CVector>, ris_rx: Vec<CVector>) -> Result<Self> {
        config.validate()?;
        let m_c = config.subcarriers;
        if tx_ris.len() != config.ris_elements || ris_rx.len() != config.ris_elements {
            return Err(Error::DimensionMismatch {
                operand: "element taps",
                expected: (config.ris_elements, config.ris_elements),
                found: (tx_ris.len(), ris_rx.len()),
            });
        }
        for v in std::iter::once(&direct).chain(&tx_ris).chain(&ris_rx) {
            if v.len() != m_c {
                return Err(Error::DimensionMismatch {
                    operand: "tap vector",
                    expected: (m_c, 1),
                    found: (v.len(), 1),
                });
            }
            if v.iter().skip(config.taps).any(|z| *z != Complex64::default()) {
                return Err(Error::invalid("taps", "entries beyond the tap count must be zero"));
            }
        }
        Ok(WidebandChannelSet {
            config,
            direct,
            tx_ris,
            ris_rx,
        })
    }

    pub fn config(&self) -> &WidebandConfig {
        &self.config
    }

    pub fn direct(&self) -> &CVector {
        &self.direct
    }

    pub fn tx_ris(&self) -> &[CVector] {
        &self.tx_ris
    }

    pub fn ris_rx(&self) -> &[CVector] {
        &self.ris_rx
    }
}

fn tap_vector<R: Rng + ?Sized>(cfg: &WidebandConfig, rng: &mut R) -> CVector {
    let per_tap = 1.0 / cfg.taps as f64;
    let mut v = CVector::zeros(cfg.subcarriers);
    for t in 0..cfg.taps {
        v[t] = complex_normal(rng, per_tap);
    }
    v
}

/// First `L` taps i.i.d. CN(0, 1/L), the remainder zero. Draw order is the
/// direct channel, then `(g_n, h_n)` for each element.
pub fn gen_wideband<R: Rng + ?Sized>(cfg: &WidebandConfig, rng: &mut R) -> Result<WidebandChannelSet> {
    cfg.validate()?;
    let direct = tap_vector(cfg, rng);
    let mut tx_ris = Vec::with_capacity(cfg.ris_elements);
    let mut ris_rx = Vec::with_capacity(cfg.ris_elements);
    for _ in 0..cfg.ris_elements {
        tx_ris.push(tap_vector(cfg, rng));
        ris_rx.push(tap_vector(cfg, rng));
    }
    WidebandChannelSet::new(*cfg, direct, tx_ris, ris_rx)
}
