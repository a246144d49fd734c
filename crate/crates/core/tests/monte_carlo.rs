use risestim::channels::{gen_wideband, WidebandConfig};
use risestim::linalg::dft_matrix;
use risestim::multiuser::{gen_multiuser, simulate_common_channel, MultiuserConfig, PhaseNoise};
use risestim::ofdm::{group_elements, simulate_training, CascadedFreqChannel, OfdmFrame};
use risestim::rng::{seeded, trial_rng, unit_modulus_vector};
use risestim::sparse::{nmse, omp, reconstruct_cascaded, stack_sparse, SparseChannel, SparseProblem};
use risestim::spectral::{optimal_split, rate_samples, PowerSplit, RateConfig, RateFamily};
use risestim::stats::{median, MeanEstimate};
use risestim::CMatrix;

fn within(lower: &MeanEstimate, upper: &MeanEstimate, sigmas: f64) -> bool {
    upper.mean >= lower.mean - sigmas * (lower.std_error.powi(2) + upper.std_error.powi(2)).sqrt()
}

#[test]
fn rate_grows_with_snr_at_fixed_split() {
    for family in [RateFamily::Canonical, RateFamily::Orthogonal] {
        let mut previous: Option<MeanEstimate> = None;
        for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
            let rho = 10f64.powf(snr_db / 10.0);
            let cfg = RateConfig::new(16, 100, rho, 2000, family).unwrap().with_seed(5, 0);
            let split = PowerSplit::new(0.6, 16, 100, rho).unwrap();
            let samples = rate_samples(&cfg, &split).unwrap();
            assert!(samples.iter().all(|&r| r >= 0.0));
            let est = MeanEstimate::from_samples(&samples);
            if let Some(prev) = previous {
                assert!(
                    within(&prev, &est, 2.0),
                    "{family:?} at {snr_db} dB: {prev:?} -> {est:?}"
                );
            }
            previous = Some(est);
        }
    }
}

#[test]
fn optimal_split_never_loses_to_equal_split() {
    for family in [RateFamily::Canonical, RateFamily::Orthogonal] {
        for (n, t) in [(8, 40), (32, 150)] {
            for snr_db in [-10.0, 0.0, 10.0, 30.0] {
                let rho = 10f64.powf(snr_db / 10.0);
                let cfg = RateConfig::new(n, t, rho, 2000, family).unwrap().with_seed(9, 1);
                let equal =
                    MeanEstimate::from_samples(&rate_samples(&cfg, &PowerSplit::equal(n, t, rho).unwrap()).unwrap());
                let best = MeanEstimate::from_samples(
                    &rate_samples(&cfg, &optimal_split(family, n, t, rho).unwrap()).unwrap(),
                );
                assert!(
                    within(&equal, &best, 2.0),
                    "{family:?} N={n} T={t} {snr_db} dB: {equal:?} vs {best:?}"
                );
            }
        }
    }
}

/// Per-trial OMP NMSE at 20 dB for `j` training slots and the given offset.
fn sparse_nmse(j: usize, offset: f64, trials: u64) -> Vec<f64> {
    let problem = SparseProblem::new(4, 8, 4, 8, 8).unwrap();
    let noise_std = 0.1;
    (0..trials)
        .map(|t| {
            let mut rng = trial_rng(31, 0, t);
            let ch = if offset == 0.0 {
                SparseChannel::on_grid(&problem, 1, 1, &mut rng).unwrap()
            } else {
                SparseChannel::off_grid(&problem, 1, 1, offset, &mut rng).unwrap()
            };
            let xs: Vec<_> = (0..j).map(|_| unit_modulus_vector(4, &mut rng)).collect();
            let psis: Vec<_> = (0..j).map(|_| unit_modulus_vector(8, &mut rng)).collect();
            let mut y = risestim::CVector::zeros(4 * j);
            for s in 0..j {
                let rx = &ch.ris_rx * CMatrix::from_diagonal(&psis[s]) * (&ch.tx_ris * &xs[s]);
                let w = risestim::rng::complex_normal_vector(4, &mut rng) * num_complex::Complex64::from(noise_std);
                y.rows_mut(4 * s, 4).copy_from(&(rx + w));
            }
            let op = stack_sparse(&xs, &psis, &problem).unwrap();
            let est = omp(&op, &y, 1).unwrap();
            nmse(&reconstruct_cascaded(&est.lambda, &problem).unwrap(), &ch.cascaded())
        })
        .collect()
}

#[test]
fn sparse_error_falls_with_more_pilots() {
    let means: Vec<MeanEstimate> = [1, 2, 4, 8]
        .iter()
        .map(|&j| MeanEstimate::from_samples(&sparse_nmse(j, 0.0, 200)))
        .collect();
    for pair in means.windows(2) {
        assert!(
            pair[1].mean <= pair[0].mean + 2.0 * (pair[0].std_error + pair[1].std_error),
            "{means:?}"
        );
    }
    assert!(means[3].mean < means[0].mean);
}

#[test]
fn off_grid_angles_degrade_recovery() {
    let on = median(&sparse_nmse(6, 0.0, 200));
    let off = median(&sparse_nmse(6, 0.5, 200));
    assert!(off > on, "on-grid median {on}, off-grid median {off}");
}

#[test]
fn reference_user_noise_propagates_to_other_users() {
    let cfg = MultiuserConfig::new(3, 8, 8, 10.0, true).unwrap();
    let clean_reference = PhaseNoise {
        reference: false,
        ..PhaseNoise::ALL
    };
    let mut noisy = Vec::new();
    let mut clean = Vec::new();
    for t in 0..300 {
        let ch = gen_multiuser(&cfg, &mut trial_rng(12, 0, t));
        for (noise, out) in [(PhaseNoise::ALL, &mut noisy), (clean_reference, &mut clean)] {
            let est = simulate_common_channel(&cfg, &ch, noise, &mut trial_rng(13, 0, t)).unwrap();
            for (u, user) in est.users.iter().enumerate().skip(1) {
                out.push(nmse(&user.cascaded, &ch.cascaded(u)));
            }
        }
    }
    assert!(
        median(&clean) < median(&noisy),
        "clean {} vs noisy {}",
        median(&clean),
        median(&noisy)
    );
}

#[test]
fn grouped_training_uses_group_count_plus_one_symbols() {
    let cfg = WidebandConfig {
        subcarriers: 32,
        taps: 2,
        cyclic_prefix: 3,
        ris_elements: 8,
    };
    let mut rng = seeded(4);
    let ch = CascadedFreqChannel::from_wideband(&gen_wideband(&cfg, &mut rng).unwrap());
    for groups in [1, 2, 4, 8] {
        let grouped = group_elements(&ch, groups).unwrap();
        let frame = OfdmFrame::new(32, 50, groups + 1, None).unwrap();
        let out = simulate_training(
            &grouped.channel,
            &frame,
            &dft_matrix(groups + 1),
            3,
            3,
            1.0,
            false,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.symbols_used, groups + 1);
        assert_eq!(out.time_slots, (groups + 1) * (32 + 3));
        let err = (&out.estimate - grouped.channel.c_matrix()).norm() / grouped.channel.c_matrix().norm();
        assert!(err <= 1e-9);
    }
}
