//! Wideband (OFDM) training with a single-antenna transmitter and receiver.
//!
//! Time-domain signals are mapped to subcarriers with the unitary DFT, so
//! noise keeps its variance in both domains. Channel frequency responses are
//! the unnormalized DFT of the zero-padded taps, which makes circular
//! convolution a per-subcarrier product: `F_u(x ⊛ h) = (F_u x) ⊙ (F h)`.
//! The cyclic prefix is ideal and only enters slot counting.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::channels::WidebandChannelSet;
use crate::error::{check_dims, Error, Result};
use crate::linalg::{self, CMatrix, CVector, RANK_RTOL};
use crate::rng::{complex_normal_vector, unit_modulus_vector};

fn transform(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(&mut buf);
    buf
}

/// Unnormalized DFT, `X[k] = Σ_m x[m] e^{−j2πkm/M}`.
pub fn fft(x: &CVector) -> CVector {
    CVector::from_vec(transform(x.as_slice(), false))
}

/// Frequency response of zero-padded taps (unnormalized DFT).
pub fn frequency_response(taps: &CVector) -> CVector {
    fft(taps)
}

/// Unitary DFT, time to frequency.
pub fn dft_unitary(x: &CVector) -> CVector {
    let scale = Complex64::from(1.0 / (x.len() as f64).sqrt());
    fft(x) * scale
}

/// Unitary inverse DFT, frequency to time.
pub fn idft_unitary(x: &CVector) -> CVector {
    let scale = Complex64::from(1.0 / (x.len() as f64).sqrt());
    CVector::from_vec(transform(x.as_slice(), true)) * scale
}

/// Circular convolution of two equal-length sequences.
pub fn circular_convolution(a: &CVector, b: &CVector) -> CVector {
    let m = a.len();
    let support: Vec<usize> = (0..m).filter(|&i| b[i] != Complex64::default()).collect();
    CVector::from_fn(m, |k, _| support.iter().map(|&i| a[(k + m - i) % m] * b[i]).sum())
}

/// Frame layout: `training_len` training symbols followed by data, out of
/// `symbols` OFDM symbols of `M_c` subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    pub subcarriers: usize,
    pub symbols: usize,
    pub training_len: usize,
    pub pilot_indices: Option<Vec<usize>>,
}

impl OfdmFrame {
    /// With `pilot_count = Some(N_p)`, pilots sit on subcarriers
    /// `0, Δ, …, (N_p − 1)Δ` with `Δ = ⌊M_c/N_p⌋`.
    pub fn new(subcarriers: usize, symbols: usize, training_len: usize, pilot_count: Option<usize>) -> Result<Self> {
        if subcarriers == 0 {
            return Err(Error::invalid("subcarriers", "must be at least 1"));
        }
        if training_len == 0 || training_len >= symbols {
            return Err(Error::invalid(
                "training_len",
                format!("need 1 ≤ training_len < T = {symbols}, got {training_len}"),
            ));
        }
        let pilot_indices = match pilot_count {
            None => None,
            Some(n_p) if n_p == 0 || n_p > subcarriers => {
                return Err(Error::invalid(
                    "pilot_count",
                    format!("need 1 ≤ N_p ≤ M_c = {subcarriers}, got {n_p}"),
                ))
            }
            Some(n_p) => Some(pilot_positions(subcarriers, n_p)),
        };
        Ok(OfdmFrame {
            subcarriers,
            symbols,
            training_len,
            pilot_indices,
        })
    }

    /// Time slots spent on training, each symbol occupying `M_c + L_cp`.
    pub fn training_time_slots(&self, cyclic_prefix: usize) -> usize {
        self.training_len * (self.subcarriers + cyclic_prefix)
    }
}

pub fn pilot_positions(subcarriers: usize, pilot_count: usize) -> Vec<usize> {
    let spacing = subcarriers / pilot_count;
    (0..pilot_count).map(|p| p * spacing).collect()
}

/// Training time slots when each of `symbols` training symbols is shortened
/// to `M_c'` subcarriers (`L ≤ M_c'`).
pub fn short_symbol_time_slots(
    symbols: usize,
    short_subcarriers: usize,
    taps: usize,
    cyclic_prefix: usize,
) -> Result<usize> {
    if short_subcarriers < taps {
        return Err(Error::invalid(
            "short_subcarriers",
            format!("{short_subcarriers} subcarriers cannot resolve {taps} taps"),
        ));
    }
    Ok(symbols * (short_subcarriers + cyclic_prefix))
}

/// Per-subcarrier direct response `ȟ_d` and cascaded responses
/// `B = [ǧ_1 ⊙ ȟ_1, …, ǧ_N ⊙ ȟ_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedFreqChannel {
    pub direct: CVector,
    pub b: CMatrix,
}

impl CascadedFreqChannel {
    pub fn from_wideband(channels: &WidebandChannelSet) -> Self {
        let m_c = channels.config().subcarriers;
        let n = channels.tx_ris().len();
        let mut b = CMatrix::zeros(m_c, n);
        for (i, (g, h)) in channels.tx_ris().iter().zip(channels.ris_rx()).enumerate() {
            b.set_column(i, &frequency_response(g).component_mul(&frequency_response(h)));
        }
        CascadedFreqChannel {
            direct: frequency_response(channels.direct()),
            b,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.b.nrows()
    }

    pub fn ris_elements(&self) -> usize {
        self.b.ncols()
    }

    /// `C = [ȟ_d  B]`.
    pub fn c_matrix(&self) -> CMatrix {
        let mut c = CMatrix::zeros(self.subcarriers(), self.ris_elements() + 1);
        c.set_column(0, &self.direct);
        c.view_mut((0, 1), self.b.shape()).copy_from(&self.b);
        c
    }
}

/// Time-domain received symbol
/// `y = √ρ(Σ_n ψ_n (x ⊛ g_n) ⊛ h_n + x ⊛ h_d) + w`.
pub fn rx_time(
    channels: &WidebandChannelSet,
    psi: &CVector,
    x_time: &CVector,
    rho: f64,
    noise: &CVector,
) -> Result<CVector> {
    let m_c = channels.config().subcarriers;
    check_dims("psi", (channels.tx_ris().len(), 1), (psi.len(), 1))?;
    check_dims("x_time", (m_c, 1), (x_time.len(), 1))?;
    check_dims("noise", (m_c, 1), (noise.len(), 1))?;
    let mut y = circular_convolution(x_time, channels.direct());
    for ((g, h), p) in channels.tx_ris().iter().zip(channels.ris_rx()).zip(psi.iter()) {
        y += circular_convolution(&circular_convolution(x_time, g), h) * *p;
    }
    Ok(y * Complex64::from(rho.sqrt()) + noise)
}

/// Frequency-domain received symbol `y̌ = √ρ X(Bψ + ȟ_d) + w`, `X = diag(x̌)`.
pub fn rx_freq(
    channel: &CascadedFreqChannel,
    psi: &CVector,
    x_freq: &CVector,
    rho: f64,
    noise: &CVector,
) -> Result<CVector> {
    let m_c = channel.subcarriers();
    check_dims("psi", (channel.ris_elements(), 1), (psi.len(), 1))?;
    check_dims("x_freq", (m_c, 1), (x_freq.len(), 1))?;
    check_dims("noise", (m_c, 1), (noise.len(), 1))?;
    let q = &channel.b * psi + &channel.direct;
    Ok(x_freq.component_mul(&q) * Complex64::from(rho.sqrt()) + noise)
}

fn invert_states(states: &CMatrix) -> Result<CMatrix> {
    let n = states.nrows();
    check_dims("states", (n, n), states.shape())?;
    if linalg::numerical_rank(states, RANK_RTOL) < n {
        return Err(Error::Singular { operand: "Ψ̃" });
    }
    states.clone().try_inverse().ok_or(Error::Singular { operand: "Ψ̃" })
}

/// Divides received symbols by their pilots and by `√ρ`.
fn equalize(received: &CMatrix, pilots: &CMatrix, rho: f64) -> Result<CMatrix> {
    check_dims("pilots", received.shape(), pilots.shape())?;
    if pilots.iter().any(|p| p.norm() == 0.0) {
        return Err(Error::invalid("pilots", "pilot symbols must be nonzero"));
    }
    Ok(received.component_div(pilots) / Complex64::from(rho.sqrt()))
}

/// `Ĉ = (1/√ρ) Q Ψ̃⁻¹` where column `j` of `Q` is received symbol `j` divided
/// by its pilots. `received` and `pilots` are `M_c × (N+1)`; column `j` of
/// `states` is `[1; ψ_j]`.
pub fn full_pilot_ls(received: &CMatrix, pilots: &CMatrix, states: &CMatrix, rho: f64) -> Result<CMatrix> {
    let inv = invert_states(states)?;
    check_dims("received", (received.nrows(), states.nrows()), received.shape())?;
    Ok(equalize(received, pilots, rho)? * inv)
}

/// Interpolates one symbol's response from pilot bins to all `M_c`
/// subcarriers, assuming it is the DFT of at most `taps` taps.
fn interpolate(samples: &CVector, indices: &[usize], subcarriers: usize, taps: usize) -> CVector {
    let n_p = indices.len();
    let spacing = subcarriers / n_p;
    let uniform = n_p * spacing == subcarriers && indices.iter().enumerate().all(|(p, &k)| k == p * spacing);
    let tap_estimate: CVector = if uniform {
        // pilot bins sample the N_p-point DFT of the taps
        let t = transform(samples.as_slice(), true);
        CVector::from_fn(taps, |i, _| t[i] / n_p as f64)
    } else {
        let basis = CMatrix::from_fn(n_p, taps, |p, t| {
            let angle = -2.0 * std::f64::consts::PI * ((indices[p] * t) % subcarriers) as f64 / subcarriers as f64;
            Complex64::from_polar(1.0, angle)
        });
        linalg::least_squares(&basis, samples)
    };
    let mut padded = CVector::zeros(subcarriers);
    padded.rows_mut(0, taps).copy_from(&tap_estimate);
    fft(&padded)
}

/// As [`full_pilot_ls`] with pilots only on `pilot_indices`: each symbol's
/// response is estimated on the pilot bins, interpolated across subcarriers
/// through the tap domain (keeping `taps` taps), then `Ψ̃⁻¹` is applied.
///
/// `taps` is the delay spread of the responses being interpolated; for a
/// cascade of two `L`-tap links it is `2L − 1`.
pub fn interp_pilot_ls(
    received: &CMatrix,
    pilots: &CMatrix,
    pilot_indices: &[usize],
    taps: usize,
    states: &CMatrix,
    rho: f64,
) -> Result<CMatrix> {
    let m_c = received.nrows();
    if pilot_indices.len() == m_c {
        return full_pilot_ls(received, pilots, states, rho);
    }
    if pilot_indices.len() < taps {
        return Err(Error::Underdetermined {
            rank: pilot_indices.len(),
            required: taps,
        });
    }
    if taps == 0 {
        return Err(Error::invalid("taps", "must be at least 1"));
    }
    if pilot_indices.iter().any(|&k| k >= m_c) {
        return Err(Error::invalid(
            "pilot_indices",
            format!("indices must be below M_c = {m_c}"),
        ));
    }
    let inv = invert_states(states)?;
    check_dims("received", (m_c, states.nrows()), received.shape())?;
    check_dims("pilots", received.shape(), pilots.shape())?;

    let mut q = CMatrix::zeros(m_c, states.ncols());
    for j in 0..states.ncols() {
        let samples = CVector::from_fn(pilot_indices.len(), |p, _| {
            let k = pilot_indices[p];
            received[(k, j)] / pilots[(k, j)]
        });
        if samples.len() != pilot_indices.len() || pilot_indices.iter().any(|&k| pilots[(k, j)].norm() == 0.0) {
            return Err(Error::invalid("pilots", "pilot symbols must be nonzero"));
        }
        q.set_column(j, &interpolate(&samples, pilot_indices, m_c, taps));
    }
    Ok(q / Complex64::from(rho.sqrt()) * inv)
}

/// Channel with `N_g` contiguous element groups tied to one coefficient each.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedChannel {
    pub channel: CascadedFreqChannel,
    /// Group of each original element.
    pub mapping: Vec<usize>,
}

impl GroupedChannel {
    /// Per-element state realizing the per-group state `psi_groups`.
    pub fn expand_state(&self, psi_groups: &CVector) -> Result<CVector> {
        check_dims("psi", (self.channel.ris_elements(), 1), (psi_groups.len(), 1))?;
        Ok(CVector::from_iterator(
            self.mapping.len(),
            self.mapping.iter().map(|&g| psi_groups[g]),
        ))
    }
}

/// Sums the cascaded responses of each group of `N/N_g` neighbouring elements.
pub fn group_elements(channel: &CascadedFreqChannel, groups: usize) -> Result<GroupedChannel> {
    let n = channel.ris_elements();
    if groups == 0 || !n.is_multiple_of(groups) {
        return Err(Error::invalid(
            "group_count",
            format!("{groups} groups do not evenly divide {n} elements"),
        ));
    }
    let size = n / groups;
    let mapping: Vec<usize> = (0..n).map(|i| i / size).collect();
    let mut b = CMatrix::zeros(channel.subcarriers(), groups);
    for (i, &g) in mapping.iter().enumerate() {
        let col = b.column(g) + channel.b.column(i);
        b.set_column(g, &col);
    }
    Ok(GroupedChannel {
        channel: CascadedFreqChannel {
            direct: channel.direct.clone(),
            b,
        },
        mapping,
    })
}

/// Training states with the direct-path row fixed to ones and the remaining
/// rows of unit-modulus random phases.
pub fn random_training_states<R: Rng + ?Sized>(size: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::from_element(size, size, Complex64::from(1.0));
    for j in 0..size {
        let col = unit_modulus_vector(size - 1, rng);
        m.view_mut((1, j), (size - 1, 1)).copy_from(&col);
    }
    m
}

/// Estimate and resources of one simulated training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmTrainingOutcome {
    pub estimate: CMatrix,
    pub symbols_used: usize,
    pub time_slots: usize,
}

/// Transmits `frame.training_len` all-ones pilot symbols through `channel`
/// with RIS states taken from rows `1..` of the columns of `states`, then
/// estimates `C` with full or interpolated pilots depending on the frame.
/// `taps` is the response delay spread used for interpolation.
#[allow(clippy::too_many_arguments)]
pub fn simulate_training<R: Rng + ?Sized>(
    channel: &CascadedFreqChannel,
    frame: &OfdmFrame,
    states: &CMatrix,
    taps: usize,
    cyclic_prefix: usize,
    rho: f64,
    noisy: bool,
    rng: &mut R,
) -> Result<OfdmTrainingOutcome> {
    let m_c = channel.subcarriers();
    let n = channel.ris_elements();
    check_dims("states", (n + 1, frame.training_len), states.shape())?;
    check_dims("frame", (m_c, 1), (frame.subcarriers, 1))?;
    if states.row(0).iter().any(|v| (v - Complex64::from(1.0)).norm() > 1e-12) {
        return Err(Error::invalid("states", "the direct-path row must be all ones"));
    }
    let pilots = CMatrix::from_element(m_c, frame.training_len, Complex64::from(1.0));
    let mut received = CMatrix::zeros(m_c, frame.training_len);
    for j in 0..frame.training_len {
        let psi = states.column(j).rows(1, n).into_owned();
        let noise = if noisy {
            complex_normal_vector(m_c, rng)
        } else {
            CVector::zeros(m_c)
        };
        let y = rx_freq(channel, &psi, &pilots.column(j).into_owned(), rho, &noise)?;
        received.set_column(j, &y);
    }
    let estimate = match &frame.pilot_indices {
        None => full_pilot_ls(&received, &pilots, states, rho)?,
        Some(idx) => interp_pilot_ls(&received, &pilots, idx, taps, states, rho)?,
    };
    Ok(OfdmTrainingOutcome {
        estimate,
        symbols_used: frame.training_len,
        time_slots: frame.training_time_slots(cyclic_prefix),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gen_wideband, WidebandConfig};
    use crate::linalg::{dft_matrix, relative_error};
    use crate::rng::seeded;

    fn wideband(m_c: usize, n: usize, taps: usize, seed: u64) -> WidebandChannelSet {
        let cfg = WidebandConfig {
            subcarriers: m_c,
            taps,
            cyclic_prefix: taps,
            ris_elements: n,
        };
        gen_wideband(&cfg, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn fft_matches_dft_matrix() {
        let x = complex_normal_vector(12, &mut seeded(0));
        let a = fft(&x);
        let b = dft_matrix(12) * &x;
        assert!(relative_error(a.as_slice(), b.as_slice()) < 1e-12);
        let direct = CVector::from_fn(12, |k, _| {
            (0..12)
                .map(|m| x[m] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * m) as f64 / 12.0))
                .sum()
        });
        assert!(relative_error(a.as_slice(), direct.as_slice()) < 1e-12);
    }

    #[test]
    fn unitary_transforms_preserve_energy() {
        let w = complex_normal_vector(64, &mut seeded(1));
        let f = dft_unitary(&w);
        assert!((f.norm_squared() - w.norm_squared()).abs() <= 1e-12 * w.norm_squared());
        let back = idft_unitary(&f);
        assert!(relative_error(back.as_slice(), w.as_slice()) < 1e-13);
    }

    #[test]
    fn time_and_frequency_models_agree() {
        for m_c in [8, 64] {
            for n in [1, 4] {
                for taps in [1, 4] {
                    let ch = wideband(m_c, n, taps, (m_c * 100 + n * 10 + taps) as u64);
                    let freq = CascadedFreqChannel::from_wideband(&ch);
                    let mut rng = seeded(7);
                    let psi = unit_modulus_vector(n, &mut rng);
                    let x = complex_normal_vector(m_c, &mut rng);
                    let zero = CVector::zeros(m_c);
                    let y_t = rx_time(&ch, &psi, &x, 3.0, &zero).unwrap();
                    let y_f = rx_freq(&freq, &psi, &dft_unitary(&x), 3.0, &zero).unwrap();
                    let err = relative_error(dft_unitary(&y_t).as_slice(), y_f.as_slice());
                    assert!(err <= 1e-9, "M_c={m_c} N={n} L={taps}: {err}");
                }
            }
        }
    }

    #[test]
    fn single_tap_scales_input() {
        let ch = wideband(8, 2, 1, 3);
        let psi = unit_modulus_vector(2, &mut seeded(4));
        let x = complex_normal_vector(8, &mut seeded(5));
        let y = rx_time(&ch, &psi, &x, 1.0, &CVector::zeros(8)).unwrap();
        let gain = ch.direct()[0]
            + (0..2)
                .map(|n| psi[n] * ch.tx_ris()[n][0] * ch.ris_rx()[n][0])
                .sum::<Complex64>();
        assert!(relative_error(y.as_slice(), (x * gain).as_slice()) < 1e-12);
    }

    #[test]
    fn zero_state_leaves_direct_path() {
        let ch = wideband(16, 3, 4, 6);
        let x = complex_normal_vector(16, &mut seeded(6));
        let y = rx_time(&ch, &CVector::zeros(3), &x, 2.0, &CVector::zeros(16)).unwrap();
        let expect = circular_convolution(&x, ch.direct()) * Complex64::from(2f64.sqrt());
        assert!(relative_error(y.as_slice(), expect.as_slice()) < 1e-14);
    }

    #[test]
    fn noiseless_full_pilot_is_exact() {
        let ch = CascadedFreqChannel::from_wideband(&wideband(32, 4, 3, 8));
        let frame = OfdmFrame::new(32, 20, 5, None).unwrap();
        let mut rng = seeded(9);
        for states in [dft_matrix(5), random_training_states(5, &mut rng)] {
            let out = simulate_training(&ch, &frame, &states, 5, 3, 2.0, false, &mut rng).unwrap();
            let c = ch.c_matrix();
            assert!(relative_error(out.estimate.as_slice(), c.as_slice()) <= 1e-9);
            assert_eq!(out.symbols_used, 5);
            assert_eq!(out.time_slots, 5 * 35);
        }
    }

    #[test]
    fn hand_computed_two_by_two() {
        // N = 1, M_c = 4, Ψ̃ = [[1, 1], [1, −1]]
        let states = CMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0].map(Complex64::from));
        let c = CMatrix::from_fn(4, 2, |k, j| Complex64::new(k as f64 + 1.0, j as f64 - 0.5));
        let received = &c * &states * Complex64::from(2.0);
        let pilots = CMatrix::from_element(4, 2, Complex64::from(1.0));
        let est = full_pilot_ls(&received, &pilots, &states, 4.0).unwrap();
        for k in 0..4 {
            let (y0, y1) = (received[(k, 0)] / 2.0, received[(k, 1)] / 2.0);
            assert!((est[(k, 0)] - (y0 + y1) / 2.0).norm() < 1e-14);
            assert!((est[(k, 1)] - (y0 - y1) / 2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_states_rejected() {
        let states = CMatrix::from_element(3, 3, Complex64::from(1.0));
        let received = CMatrix::zeros(4, 3);
        let pilots = CMatrix::from_element(4, 3, Complex64::from(1.0));
        assert!(matches!(
            full_pilot_ls(&received, &pilots, &states, 1.0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn interpolation_exact_for_short_responses() {
        // two 2-tap hops give 3-tap cascaded responses
        let ch = CascadedFreqChannel::from_wideband(&wideband(64, 3, 2, 10));
        let frame = OfdmFrame::new(64, 20, 4, Some(8)).unwrap();
        let out = simulate_training(&ch, &frame, &dft_matrix(4), 3, 2, 1.0, false, &mut seeded(0)).unwrap();
        assert!(relative_error(out.estimate.as_slice(), ch.c_matrix().as_slice()) <= 1e-8);
    }

    #[test]
    fn interpolation_with_uneven_spacing_is_exact() {
        let ch = CascadedFreqChannel::from_wideband(&wideband(60, 2, 2, 11));
        let frame = OfdmFrame::new(60, 20, 3, Some(7)).unwrap();
        let out = simulate_training(&ch, &frame, &dft_matrix(3), 3, 2, 1.0, false, &mut seeded(0)).unwrap();
        assert!(relative_error(out.estimate.as_slice(), ch.c_matrix().as_slice()) <= 1e-8);
    }

    #[test]
    fn all_pilots_matches_full_estimation() {
        let ch = CascadedFreqChannel::from_wideband(&wideband(16, 2, 2, 12));
        let states = dft_matrix(3);
        let full = OfdmFrame::new(16, 10, 3, None).unwrap();
        let all = OfdmFrame::new(16, 10, 3, Some(16)).unwrap();
        let a = simulate_training(&ch, &full, &states, 3, 2, 1.0, true, &mut seeded(1)).unwrap();
        let b = simulate_training(&ch, &all, &states, 3, 2, 1.0, true, &mut seeded(1)).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn too_few_pilots_rejected() {
        let received = CMatrix::zeros(16, 2);
        let pilots = CMatrix::from_element(16, 2, Complex64::from(1.0));
        let idx = pilot_positions(16, 2);
        assert!(matches!(
            interp_pilot_ls(&received, &pilots, &idx, 3, &dft_matrix(2), 1.0),
            Err(Error::Underdetermined { rank: 2, required: 3 })
        ));
    }

    #[test]
    fn grouping_examples() {
        let ch = CascadedFreqChannel::from_wideband(&wideband(16, 4, 2, 13));
        let same = group_elements(&ch, 4).unwrap();
        assert_eq!(same.channel.b, ch.b);
        let one = group_elements(&ch, 1).unwrap();
        let row_sum = CVector::from_fn(16, |k, _| ch.b.row(k).sum());
        assert!(relative_error(one.channel.b.as_slice(), row_sum.as_slice()) < 1e-14);
        assert!(group_elements(&ch, 3).is_err());

        let two = group_elements(&ch, 2).unwrap();
        assert_eq!(two.mapping, vec![0, 0, 1, 1]);
        let psi_g = unit_modulus_vector(2, &mut seeded(2));
        let x = CVector::from_element(16, Complex64::from(1.0));
        let zero = CVector::zeros(16);
        let a = rx_freq(&ch, &two.expand_state(&psi_g).unwrap(), &x, 1.0, &zero).unwrap();
        let b = rx_freq(&two.channel, &psi_g, &x, 1.0, &zero).unwrap();
        assert!(relative_error(a.as_slice(), b.as_slice()) < 1e-13);

        let frame = OfdmFrame::new(16, 10, 3, None).unwrap();
        let out = simulate_training(&two.channel, &frame, &dft_matrix(3), 3, 2, 1.0, false, &mut seeded(0)).unwrap();
        assert!(relative_error(out.estimate.as_slice(), two.channel.c_matrix().as_slice()) <= 1e-9);
        assert_eq!(out.symbols_used, 3);
    }

    #[test]
    fn frame_validation() {
        assert!(OfdmFrame::new(16, 5, 5, None).is_err());
        assert!(OfdmFrame::new(16, 5, 2, Some(0)).is_err());
        assert!(OfdmFrame::new(16, 5, 2, Some(17)).is_err());
        assert_eq!(OfdmFrame::new(64, 10, 2, Some(8)).unwrap().pilot_indices.unwrap()[1], 8);
        assert_eq!(short_symbol_time_slots(5, 8, 4, 4).unwrap(), 60);
        assert!(short_symbol_time_slots(5, 2, 4, 4).is_err());
    }
}
