use num_complex::Complex64;
use proptest::prelude::*;

use risestim::channels::{gen_geometric, gen_narrowband, gen_wideband, GeometricParams, WidebandConfig};
use risestim::linalg::{dft_matrix, numerical_rank, pseudo_inverse};
use risestim::linear::{lmmse_estimate, ls_closed_form, ls_estimate, mmse_closed_form};
use risestim::model::{build_cascaded, rx_matrix_form, rx_vectorized, NarrowbandChannelSet, RisState, SystemConfig};
use risestim::multiuser::{gen_multiuser, simulate_common_channel, MultiuserConfig, PhaseNoise};
use risestim::ofdm::{
    dft_unitary, full_pilot_ls, idft_unitary, random_training_states, rx_freq, rx_time, CascadedFreqChannel,
};
use risestim::rng::{complex_normal_matrix, complex_normal_vector, seeded, unit_modulus_vector};
use risestim::sparse::{stack_sparse, SensingOperator, SparseProblem};
use risestim::spectral::PowerSplit;
use risestim::training::{stack_training, TrainingPlan};
use risestim::{CMatrix, CVector, TrainingFamily};

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn channels(m_t: usize, m_r: usize, n: usize, direct: bool, seed: u64) -> NarrowbandChannelSet {
    let cfg = SystemConfig::new(m_t, m_r, n, 1.0, direct, 0).unwrap();
    gen_narrowband(&cfg, &mut seeded(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matrix_and_vectorized_forms_agree(
        m_t in 1usize..=4, m_r in 1usize..=4, n in 1usize..=8, direct: bool, seed: u64,
    ) {
        let ch = channels(m_t, m_r, n, direct, seed);
        let mut rng = seeded(seed ^ 1);
        let state = RisState::new(unit_modulus_vector(n, &mut rng)).unwrap();
        let x = complex_normal_vector(m_t, &mut rng);
        let w = complex_normal_vector(m_r, &mut rng);
        let a = rx_matrix_form(&ch, &state, &x, &w, 3.0).unwrap();
        let b = rx_vectorized(&build_cascaded(&ch).unwrap(), &state, &x, &w, 3.0).unwrap();
        prop_assert!(rel_err(b.as_slice(), a.as_slice()) <= 1e-10);
    }

    #[test]
    fn diagonal_rescaling_is_unobservable(
        m_t in 1usize..=4, m_r in 1usize..=4, n in 1usize..=8, seed: u64,
        mags in proptest::collection::vec(0.1f64..10.0, 8),
        phases in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 8),
    ) {
        let ch = channels(m_t, m_r, n, true, seed);
        let d: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(mags[i], phases[i])).collect();
        let dm = CMatrix::from_diagonal(&CVector::from_vec(d.clone()));
        let dinv = CMatrix::from_diagonal(&CVector::from_iterator(n, d.iter().map(|v| v.inv())));
        let twisted = NarrowbandChannelSet::new(ch.direct().clone(), dinv * ch.tx_ris(), ch.ris_rx() * dm).unwrap();
        let mut rng = seeded(seed ^ 2);
        let state = RisState::new(unit_modulus_vector(n, &mut rng)).unwrap();
        let x = complex_normal_vector(m_t, &mut rng);
        let zero = CVector::zeros(m_r);
        let a = rx_matrix_form(&ch, &state, &x, &zero, 1.0).unwrap();
        let b = rx_matrix_form(&twisted, &state, &x, &zero, 1.0).unwrap();
        prop_assert!(rel_err(b.as_slice(), a.as_slice()) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cascaded_channel_is_linear_in_each_factor(
        m_t in 1usize..=4, m_r in 1usize..=4, n in 1usize..=6, seed: u64, a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let c1 = channels(m_t, m_r, n, true, seed);
        let c2 = channels(m_t, m_r, n, true, seed.wrapping_add(1));
        let (ca, cb) = (Complex64::from(a), Complex64::from(b));
        let cascade = |d: &CMatrix, g: &CMatrix, h: &CMatrix| {
            build_cascaded(&NarrowbandChannelSet::new(d.clone(), g.clone(), h.clone()).unwrap())
                .unwrap()
                .matrix()
                .clone()
        };
        let (d1, g1, h1) = (c1.direct(), c1.tx_ris(), c1.ris_rx());
        let (d2, g2, h2) = (c2.direct(), c2.tx_ris(), c2.ris_rx());

        let direct = cascade(&(d1 * ca + d2 * cb), g1, h1).column(0).into_owned();
        let expect = cascade(d1, g1, h1).column(0) * ca + cascade(d2, g1, h1).column(0) * cb;
        prop_assert!(rel_err(direct.as_slice(), expect.as_slice()) <= 1e-12);

        let reflected = |m: CMatrix| m.columns(1, n).into_owned();
        let via_g = reflected(cascade(d1, &(g1 * ca + g2 * cb), h1));
        let expect = reflected(cascade(d1, g1, h1)) * ca + reflected(cascade(d1, g2, h1)) * cb;
        prop_assert!(rel_err(via_g.as_slice(), expect.as_slice()) <= 1e-12);

        let via_h = reflected(cascade(d1, g1, &(h1 * ca + h2 * cb)));
        let expect = reflected(cascade(d1, g1, h1)) * ca + reflected(cascade(d1, g1, h2)) * cb;
        prop_assert!(rel_err(via_h.as_slice(), expect.as_slice()) <= 1e-12);
    }

    #[test]
    fn geometric_rank_bounded_by_paths(paths in 1usize..=4, rows in 1usize..=8, cols in 1usize..=8, seed: u64) {
        let params = GeometricParams::random(paths, &mut seeded(seed)).unwrap();
        let m = gen_geometric(&params, rows, cols);
        prop_assert!(numerical_rank(&m, 1e-10) <= paths);
    }

    #[test]
    fn orthogonal_and_canonical_training_have_full_column_rank(
        log_n in 0u32..=4, m_t in 1usize..=3, m_r in 1usize..=2, direct: bool, family_idx in 0usize..3,
    ) {
        let family = [TrainingFamily::Canonical, TrainingFamily::Dft, TrainingFamily::Hadamard][family_idx];
        let n = if direct && family == TrainingFamily::Hadamard { (1usize << log_n).max(2) - 1 } else { 1 << log_n };
        let cfg = SystemConfig::new(m_t, m_r, n, 1.0, direct, 0).unwrap();
        let plan = TrainingPlan::new(family, &cfg).unwrap();
        let z = stack_training(&plan, &cfg).unwrap();
        let states = if direct { n + 1 } else { n };
        prop_assert_eq!(plan.slots(), m_t * states);
        prop_assert_eq!(numerical_rank(&z, 1e-10), z.ncols());
    }

    #[test]
    fn closed_forms_match_general_estimators(
        log_n in 1u32..=4, m_t in 1usize..=2, m_r in 1usize..=2, family_idx in 0usize..3, snr_db in -10.0f64..30.0,
        seed: u64,
    ) {
        let n = 1usize << log_n;
        let family = [TrainingFamily::Canonical, TrainingFamily::Dft, TrainingFamily::Hadamard][family_idx];
        let rho = 10f64.powf(snr_db / 10.0);
        let cfg = SystemConfig::new(m_t, m_r, n, rho, false, 0).unwrap();
        let plan = TrainingPlan::new(family, &cfg).unwrap();
        let z = stack_training(&plan, &cfg).unwrap();
        let y = complex_normal_vector(z.nrows(), &mut seeded(seed));
        let ls = ls_estimate(&z, &y, rho).unwrap();
        let ls_cf = ls_closed_form(&plan, &z, &y, rho).unwrap();
        prop_assert!(rel_err(ls_cf.as_slice(), ls.as_slice()) <= 1e-9);
        let eye = CMatrix::identity(z.ncols(), z.ncols());
        let mmse = lmmse_estimate(&z, &y, rho, &eye).unwrap();
        let mmse_cf = mmse_closed_form(&plan, &z, &y, rho).unwrap();
        prop_assert!(rel_err(mmse_cf.as_slice(), mmse.as_slice()) <= 1e-9);
    }

    #[test]
    fn power_split_conserves_energy(t in 2usize..400, n_frac in 0.0f64..1.0, beta in 0.001f64..0.999, snr_db in -20.0f64..40.0) {
        let n = 1 + ((t - 2) as f64 * n_frac) as usize;
        let rho = 10f64.powf(snr_db / 10.0);
        let split = PowerSplit::new(beta, n, t, rho).unwrap();
        let total = rho * t as f64;
        let spent = split.rho_tau * n as f64 + split.rho_d * (t - n) as f64;
        prop_assert!((spent - total).abs() <= 1e-12 * total);
        let equal = PowerSplit::equal(n, t, rho).unwrap();
        prop_assert!((equal.rho_tau - rho).abs() <= 1e-12 * rho && (equal.rho_d - rho).abs() <= 1e-12 * rho);
    }

    #[test]
    fn structured_operator_matches_dense(
        m_t in 1usize..=3, n in 1usize..=4, m_r in 1usize..=3, g in 1usize..=4, h in 1usize..=4, slots in 1usize..=4,
        seed: u64,
    ) {
        let problem = SparseProblem::new(m_t, n, m_r, g, h).unwrap();
        let mut rng = seeded(seed);
        let xs: Vec<_> = (0..slots).map(|_| unit_modulus_vector(m_t, &mut rng)).collect();
        let psis: Vec<_> = (0..slots).map(|_| unit_modulus_vector(n, &mut rng)).collect();
        let op = stack_sparse(&xs, &psis, &problem).unwrap();
        let dense = op.to_dense(1 << 24).unwrap();
        let lambda = complex_normal_vector(op.ncols(), &mut rng);
        let r = complex_normal_vector(op.nrows(), &mut rng);
        prop_assert!(rel_err(op.apply(&lambda).as_slice(), dense.apply(&lambda).as_slice()) <= 1e-10);
        prop_assert!(rel_err(op.apply_adjoint(&r).as_slice(), dense.apply_adjoint(&r).as_slice()) <= 1e-10);
    }

    #[test]
    fn time_and_frequency_models_agree(
        large: bool, n in prop::sample::select(vec![1usize, 4]), taps in prop::sample::select(vec![1usize, 4]),
        seed: u64,
    ) {
        let m_c = if large { 64 } else { 8 };
        let cfg = WidebandConfig { subcarriers: m_c, taps, cyclic_prefix: taps, ris_elements: n };
        let mut rng = seeded(seed);
        let wb = gen_wideband(&cfg, &mut rng).unwrap();
        let ch = CascadedFreqChannel::from_wideband(&wb);
        let psi = unit_modulus_vector(n, &mut rng);
        let x = complex_normal_vector(m_c, &mut rng);
        let w = complex_normal_vector(m_c, &mut rng);
        let via_time = dft_unitary(&rx_time(&wb, &psi, &x, 2.0, &idft_unitary(&w)).unwrap());
        let via_freq = rx_freq(&ch, &psi, &dft_unitary(&x), 2.0, &w).unwrap();
        prop_assert!(rel_err(via_time.as_slice(), via_freq.as_slice()) <= 1e-9);
        // noise power is preserved by the unitary transform
        let w_time = idft_unitary(&w);
        prop_assert!((w_time.norm_squared() - w.norm_squared()).abs() <= 1e-12 * w.norm_squared());
    }

    #[test]
    fn noiseless_full_pilots_exact_for_invertible_states(n in 1usize..=6, seed: u64) {
        let m_c = 16;
        let cfg = WidebandConfig { subcarriers: m_c, taps: 2, cyclic_prefix: 3, ris_elements: n };
        let mut rng = seeded(seed);
        let ch = CascadedFreqChannel::from_wideband(&gen_wideband(&cfg, &mut rng).unwrap());
        let states = if seed % 2 == 0 { random_training_states(n + 1, &mut rng) } else { dft_matrix(n + 1) };
        prop_assume!(pseudo_inverse(&states, 1e-8).1 == n + 1);
        let pilots = complex_normal_matrix(m_c, n + 1, &mut rng);
        let mut received = CMatrix::zeros(m_c, n + 1);
        for j in 0..=n {
            let psi = states.column(j).rows(1, n).into_owned();
            let y = rx_freq(&ch, &psi, &pilots.column(j).into_owned(), 5.0, &CVector::zeros(m_c)).unwrap();
            received.set_column(j, &y);
        }
        let est = full_pilot_ls(&received, &pilots, &states, 5.0).unwrap();
        prop_assert!(rel_err(est.as_slice(), ch.c_matrix().as_slice()) <= 1e-8);
    }

    #[test]
    fn common_channel_slots_and_noiseless_recovery(k in 1usize..=5, n in 1usize..=12, m in 1usize..=10, direct: bool, seed: u64) {
        let cfg = MultiuserConfig::new(k, m, n, 10.0, direct).unwrap();
        let mut rng = seeded(seed);
        let ch = gen_multiuser(&cfg, &mut rng);
        let out = simulate_common_channel(&cfg, &ch, PhaseNoise::NONE, &mut rng).unwrap();
        let phase3 = (k - 1).max(((k - 1) * n).div_ceil(m));
        let expected = if direct { k } else { 0 } + n + phase3;
        prop_assert_eq!(out.slots, expected);
        for (u, est) in out.users.iter().enumerate() {
            prop_assume!(!est.ill_conditioned);
            prop_assert!(rel_err(est.cascaded.as_slice(), ch.cascaded(u).as_slice()) <= 1e-8);
            if direct {
                let d = est.direct.as_ref().unwrap();
                prop_assert!(rel_err(d.as_slice(), ch.direct[u].as_slice()) <= 1e-8);
            }
        }
    }
}
