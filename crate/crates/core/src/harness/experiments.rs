use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{format_float, ExperimentKind, ExperimentRecord, Grid, HarnessError};
use crate::channels::{gen_narrowband, gen_wideband, WidebandConfig};
use crate::linalg::{dft_matrix, CMatrix, CVector};
use crate::linear::{empirical_mse, LsEstimator};
use crate::model::{NarrowbandChannelSet, SystemConfig};
use crate::multiuser::{
    gen_multiuser, opportunistic_select, overhead_common_channel, overhead_two_timescale, simulate_common_channel,
    Measurement, MultiuserConfig, OpportunisticCodebook, PhaseNoise,
};
use crate::ofdm::{group_elements, random_training_states, simulate_training, CascadedFreqChannel, OfdmFrame};
use crate::rng::{complex_normal_vector, trial_rng, unit_modulus_vector};
use crate::sparse::{
    nmse, omp, pilot_budget, reconstruct_cascaded, stack_sparse, subspace_pursuit, SparseAlgorithm, SparseChannel,
    SparseProblem, DEFAULT_BUDGET_CONSTANT,
};
use crate::spectral::{optimal_ris_size, optimal_split, rate_samples, PowerSplit, RateConfig, RateFamily};
use crate::stats::MeanEstimate;
use crate::training::{stack_training, TrainingFamily, TrainingPlan};

type Errors = Vec<String>;

/// A validated experiment with every grid list resolved.
#[derive(Debug, Clone)]
pub enum Experiment {
    NarrowbandMse(NarrowbandMse),
    SpectralEfficiency(SpectralEfficiency),
    OptimalSize(OptimalSize),
    Sparse(Sparse),
    Ofdm(Ofdm),
    Multiuser(Multiuser),
    Opportunistic(Opportunistic),
}

impl Experiment {
    pub fn resolve(kind: ExperimentKind, grid: &Grid) -> Result<Self, Errors> {
        let mut errors = Vec::new();
        let exp = match kind {
            ExperimentKind::NarrowbandMse => Experiment::NarrowbandMse(NarrowbandMse::resolve(grid, &mut errors)),
            ExperimentKind::SpectralEfficiency => {
                Experiment::SpectralEfficiency(SpectralEfficiency::resolve(grid, &mut errors))
            }
            ExperimentKind::OptimalSize => Experiment::OptimalSize(OptimalSize::resolve(grid, &mut errors)),
            ExperimentKind::Sparse => Experiment::Sparse(Sparse::resolve(grid, &mut errors)),
            ExperimentKind::Ofdm => Experiment::Ofdm(Ofdm::resolve(grid, &mut errors)),
            ExperimentKind::Multiuser => Experiment::Multiuser(Multiuser::resolve(grid, &mut errors)),
            ExperimentKind::Opportunistic => Experiment::Opportunistic(Opportunistic::resolve(grid, &mut errors)),
        };
        reject_unused(grid, exp.parameters(), kind, &mut errors);
        let mut seen = BTreeSet::new();
        errors.retain(|e| seen.insert(e.clone()));
        if errors.is_empty() {
            Ok(exp)
        } else {
            Err(errors)
        }
    }

    fn parameters(&self) -> &'static [&'static str] {
        match self {
            Experiment::NarrowbandMse(_) => &["snr_db", "N", "M_t", "M_r", "families", "direct_path"],
            Experiment::SpectralEfficiency(_) => &["snr_db", "N", "T", "families"],
            Experiment::OptimalSize(_) => &["snr_db", "N_max", "T", "families"],
            Experiment::Sparse(_) => &[
                "snr_db",
                "M_t",
                "M_r",
                "N",
                "G",
                "H",
                "L",
                "P",
                "J",
                "algorithms",
                "budget_constant",
                "offset",
                "noiseless",
            ],
            Experiment::Ofdm(_) => &[
                "snr_db",
                "M_c",
                "L",
                "N",
                "T",
                "cyclic_prefix",
                "N_p",
                "N_g",
                "noiseless",
            ],
            Experiment::Multiuser(_) => &["snr_db", "K", "M", "N", "alpha", "direct_path", "noiseless"],
            Experiment::Opportunistic(_) => &["snr_db", "N", "M_t", "Q", "measurement_pilots", "direct_path"],
        }
    }

    pub fn run(&self, trials: usize, seed: u64) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let ctx = Ctx { trials, seed };
        match self {
            Experiment::NarrowbandMse(e) => e.run(&ctx),
            Experiment::SpectralEfficiency(e) => e.run(&ctx),
            Experiment::OptimalSize(e) => e.run(&ctx),
            Experiment::Sparse(e) => e.run(&ctx),
            Experiment::Ofdm(e) => e.run(&ctx),
            Experiment::Multiuser(e) => e.run(&ctx),
            Experiment::Opportunistic(e) => e.run(&ctx),
        }
    }
}

fn reject_unused(grid: &Grid, allowed: &[&str], kind: ExperimentKind, errors: &mut Errors) {
    let value = serde_json::to_value(grid).expect("grid serializes");
    if let Some(obj) = value.as_object() {
        for key in obj.keys().filter(|k| !allowed.contains(&k.as_str())) {
            errors.push(format!("{key}: not a parameter of the {kind} experiment"));
        }
    }
}

fn list<T: Clone>(name: &str, value: &Option<Vec<T>>, default: &[T], errors: &mut Errors) -> Vec<T> {
    match value {
        Some(v) if v.is_empty() => {
            errors.push(format!("{name}: list must not be empty"));
            default.to_vec()
        }
        Some(v) => v.clone(),
        None => default.to_vec(),
    }
}

fn positive(name: &str, values: &[usize], errors: &mut Errors) {
    if values.contains(&0) {
        errors.push(format!("{name}: values must be at least 1"));
    }
}

fn finite(name: &str, values: &[f64], errors: &mut Errors) {
    if values.iter().any(|v| !v.is_finite()) {
        errors.push(format!("{name}: values must be finite"));
    }
}

fn snr_list(grid: &Grid, default: &[f64], errors: &mut Errors) -> Vec<f64> {
    let snr = list("snr_db", &grid.snr_db, default, errors);
    finite("snr_db", &snr, errors);
    snr
}

fn rho(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

fn rate_family(name: &str) -> Option<RateFamily> {
    match name {
        "canonical" => Some(RateFamily::Canonical),
        "dft" | "orthogonal" => Some(RateFamily::Orthogonal),
        _ => None,
    }
}

fn rate_families(grid: &Grid, errors: &mut Errors) -> Vec<RateFamily> {
    let names = list("families", &grid.families, &["canonical".into(), "dft".into()], errors);
    names
        .iter()
        .filter_map(|s| {
            let f = rate_family(s);
            if f.is_none() {
                errors.push(format!(
                    "families: unknown rate family `{s}` (expected canonical or dft)"
                ));
            }
            f
        })
        .collect()
}

struct Ctx {
    trials: usize,
    seed: u64,
}

impl Ctx {
    /// Runs `f` for every trial in parallel and returns one sample column per
    /// metric, in trial order.
    fn monte_carlo<F>(&self, metrics: usize, f: F) -> crate::Result<Vec<Vec<f64>>>
    where
        F: Fn(u64) -> crate::Result<Vec<f64>> + Sync,
    {
        let rows: Vec<Vec<f64>> = (0..self.trials as u64)
            .into_par_iter()
            .map(&f)
            .collect::<crate::Result<_>>()?;
        let mut columns = vec![Vec::with_capacity(rows.len()); metrics];
        for row in rows {
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(columns)
    }
}

/// Fixed columns of every row produced at one grid point.
#[derive(Debug, Clone, Copy)]
struct Point {
    kind: ExperimentKind,
    snr_db: Option<f64>,
    n: Option<usize>,
    t: Option<usize>,
    trials: usize,
    seed: u64,
}

impl Point {
    fn record(&self, scheme: &str, j: Option<usize>, metric: &str, est: MeanEstimate) -> ExperimentRecord {
        ExperimentRecord {
            experiment: self.kind,
            scheme: scheme.to_string(),
            snr_db: self.snr_db,
            n: self.n,
            t: self.t,
            j,
            metric_name: metric.to_string(),
            metric_value: est.mean,
            std_error: est.std_error,
            trials: self.trials,
            seed: self.seed,
        }
    }

    fn exact(&self, scheme: &str, j: Option<usize>, metric: &str, value: f64) -> ExperimentRecord {
        let est = MeanEstimate {
            mean: value,
            std_error: 0.0,
            count: 1,
        };
        self.record(scheme, j, metric, est)
    }
}

fn runtime(grid_point: usize, detail: String) -> impl FnOnce(crate::Error) -> HarnessError {
    move |source| HarnessError::Runtime {
        context: format!("grid point {grid_point} ({detail})"),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct NarrowbandMse {
    snr_db: Vec<f64>,
    n: Vec<usize>,
    m_t: Vec<usize>,
    m_r: Vec<usize>,
    families: Vec<TrainingFamily>,
    direct_path: bool,
}

impl NarrowbandMse {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let snr_db = snr_list(grid, &[10.0], errors);
        let n = list("N", &grid.n, &[8], errors);
        let m_t = list("M_t", &grid.m_t, &[1], errors);
        let m_r = list("M_r", &grid.m_r, &[1], errors);
        positive("N", &n, errors);
        positive("M_t", &m_t, errors);
        positive("M_r", &m_r, errors);
        let names = list("families", &grid.families, &["canonical".into(), "dft".into()], errors);
        let families: Vec<TrainingFamily> = names
            .iter()
            .filter_map(|s| {
                s.parse()
                    .map_err(|e: crate::Error| errors.push(format!("families: {e}")))
                    .ok()
            })
            .collect();
        let direct_path = grid.direct_path.unwrap_or(false);
        for &n in &n {
            for &family in &families {
                if let Ok(cfg) = SystemConfig::new(1, 1, n.max(1), 1.0, direct_path, 0) {
                    let check = TrainingPlan::new(family, &cfg)
                        .and_then(|plan| stack_training(&plan, &cfg))
                        .and_then(|z| LsEstimator::new(&z));
                    if let Err(e) = check {
                        errors.push(format!("families: {} with N={n}: {e}", family.name()));
                    }
                }
            }
        }
        NarrowbandMse {
            snr_db,
            n,
            m_t,
            m_r,
            families,
            direct_path,
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        for &n in &self.n {
            for &m_t in &self.m_t {
                for &m_r in &self.m_r {
                    for &snr in &self.snr_db {
                        let detail = format!("N={n}, M_t={m_t}, M_r={m_r}, snr_db={snr}");
                        let cfg = SystemConfig::new(m_t, m_r, n, rho(snr), self.direct_path, ctx.seed)
                            .map_err(runtime(gp, detail.clone()))?;
                        let point = Point {
                            kind: ExperimentKind::NarrowbandMse,
                            snr_db: Some(snr),
                            n: Some(n),
                            t: None,
                            trials: ctx.trials,
                            seed: ctx.seed,
                        };
                        for &family in &self.families {
                            let report = empirical_mse(&cfg, family, ctx.trials, ctx.seed, gp as u64)
                                .map_err(runtime(gp, detail.clone()))?;
                            let scheme = family.name();
                            records.push(point.record(&scheme, Some(report.slots), "ls_mse", report.ls));
                            records.push(point.record(&scheme, Some(report.slots), "lmmse_mse", report.lmmse));
                        }
                        gp += 1;
                    }
                }
            }
        }
        Ok(records)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEfficiency {
    snr_db: Vec<f64>,
    n: Vec<usize>,
    t: Vec<usize>,
    families: Vec<RateFamily>,
}

fn check_interval(n: &[usize], t: &[usize], n_name: &str, errors: &mut Errors) {
    for &n in n {
        for &t in t {
            if n >= t {
                errors.push(format!("{n_name}: {n_name}={n} must be smaller than T={t}"));
            }
        }
    }
}

impl SpectralEfficiency {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let snr_db = snr_list(grid, &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0], errors);
        let n = list("N", &grid.n, &[32], errors);
        let t = list("T", &grid.t, &[150], errors);
        positive("N", &n, errors);
        check_interval(&n, &t, "N", errors);
        SpectralEfficiency {
            snr_db,
            n,
            t,
            families: rate_families(grid, errors),
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        for &n in &self.n {
            for &t in &self.t {
                for &snr in &self.snr_db {
                    let detail = format!("N={n}, T={t}, snr_db={snr}");
                    let point = Point {
                        kind: ExperimentKind::SpectralEfficiency,
                        snr_db: Some(snr),
                        n: Some(n),
                        t: Some(t),
                        trials: ctx.trials,
                        seed: ctx.seed,
                    };
                    let r = rho(snr);
                    for &family in &self.families {
                        let cfg = RateConfig::new(n, t, r, ctx.trials, family)
                            .map_err(runtime(gp, detail.clone()))?
                            .with_seed(ctx.seed, gp as u64);
                        let splits = [
                            ("equal", PowerSplit::equal(n, t, r)),
                            ("optimal", optimal_split(family, n, t, r)),
                        ];
                        for (label, split) in splits {
                            let split = split.map_err(runtime(gp, detail.clone()))?;
                            let samples = rate_samples(&cfg, &split).map_err(runtime(gp, detail.clone()))?;
                            let scheme = format!("{}-{label}", family.name());
                            records.push(point.record(&scheme, Some(n), "rate", MeanEstimate::from_samples(&samples)));
                        }
                    }
                    gp += 1;
                }
            }
        }
        Ok(records)
    }
}

#[derive(Debug, Clone)]
pub struct OptimalSize {
    snr_db: Vec<f64>,
    n_max: Vec<usize>,
    t: Vec<usize>,
    families: Vec<RateFamily>,
}

impl OptimalSize {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let default_snr: Vec<f64> = (0..9).map(|i| -10.0 + 5.0 * i as f64).collect();
        let snr_db = snr_list(grid, &default_snr, errors);
        let n_max = list("N_max", &grid.n_max, &[64], errors);
        let t = list("T", &grid.t, &[150], errors);
        positive("N_max", &n_max, errors);
        check_interval(&n_max, &t, "N_max", errors);
        OptimalSize {
            snr_db,
            n_max,
            t,
            families: rate_families(grid, errors),
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        for &n_max in &self.n_max {
            for &t in &self.t {
                for &snr in &self.snr_db {
                    let detail = format!("N_max={n_max}, T={t}, snr_db={snr}");
                    let point = Point {
                        kind: ExperimentKind::OptimalSize,
                        snr_db: Some(snr),
                        n: Some(n_max),
                        t: Some(t),
                        trials: ctx.trials,
                        seed: ctx.seed,
                    };
                    for &family in &self.families {
                        let search = optimal_ris_size(n_max, t, rho(snr), family, ctx.trials, ctx.seed, gp as u64)
                            .map_err(runtime(gp, detail.clone()))?;
                        let j = Some(search.n_star);
                        records.push(point.exact(family.name(), j, "n_star", search.n_star as f64));
                        records.push(point.record(family.name(), j, "rate", search.rates[search.n_star - 1]));
                    }
                    gp += 1;
                }
            }
        }
        Ok(records)
    }
}

#[derive(Debug, Clone)]
pub struct Sparse {
    snr_db: Vec<f64>,
    m_t: Vec<usize>,
    m_r: Vec<usize>,
    n: Vec<usize>,
    g: Vec<usize>,
    h: Vec<usize>,
    l: Vec<usize>,
    p: Vec<usize>,
    j: Option<Vec<usize>>,
    algorithms: Vec<SparseAlgorithm>,
    budget_constant: f64,
    offset: Vec<f64>,
    noiseless: bool,
}

/// Coefficient-domain problems larger than this are refused.
const MAX_SPARSE_ATOMS: usize = 1 << 20;

impl Sparse {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let snr_db = snr_list(grid, &[20.0], errors);
        let m_t = list("M_t", &grid.m_t, &[4], errors);
        let m_r = list("M_r", &grid.m_r, &[4], errors);
        let n = list("N", &grid.n, &[8], errors);
        let g = list("G", &grid.g, &[8], errors);
        let h = list("H", &grid.h, &[8], errors);
        let l = list("L", &grid.l, &[1], errors);
        let p = list("P", &grid.p, &[1], errors);
        for (name, v) in [
            ("M_t", &m_t),
            ("M_r", &m_r),
            ("N", &n),
            ("G", &g),
            ("H", &h),
            ("L", &l),
            ("P", &p),
        ] {
            positive(name, v, errors);
        }
        let j = grid.j.as_ref().map(|j| list("J", &Some(j.clone()), &[], errors));
        if let Some(j) = &j {
            positive("J", j, errors);
        }
        let names = list("algorithms", &grid.algorithms, &["omp".into(), "sp".into()], errors);
        let algorithms: Vec<SparseAlgorithm> = names
            .iter()
            .filter_map(|s| match s.as_str() {
                "omp" => Some(SparseAlgorithm::Omp),
                "sp" => Some(SparseAlgorithm::Sp),
                _ => {
                    errors.push(format!("algorithms: unknown algorithm `{s}` (expected omp or sp)"));
                    None
                }
            })
            .collect();
        let budget_constant = grid.budget_constant.unwrap_or(DEFAULT_BUDGET_CONSTANT);
        if !(budget_constant.is_finite() && budget_constant > 0.0) {
            errors.push(format!("budget_constant: must be positive, got {budget_constant}"));
        }
        let offset = list("offset", &grid.offset, &[0.0], errors);
        finite("offset", &offset, errors);

        let mut s = Sparse {
            snr_db,
            m_t,
            m_r,
            n,
            g,
            h,
            l,
            p,
            j,
            algorithms,
            budget_constant,
            offset,
            noiseless: grid.noiseless.unwrap_or(false),
        };
        if errors.is_empty() {
            s.check(errors);
        } else {
            s.algorithms.clear();
        }
        s
    }

    fn check(&self, errors: &mut Errors) {
        for &g in &self.g {
            for &h in &self.h {
                if (g * h) * (g * h) > MAX_SPARSE_ATOMS {
                    errors.push(format!(
                        "G, H: G={g}, H={h} give {} atoms, above the {MAX_SPARSE_ATOMS} limit",
                        (g * h).pow(2)
                    ));
                }
                for &l in &self.l {
                    if l > g * h {
                        errors.push(format!("L: L={l} paths exceed the G·H={} angle pairs", g * h));
                    }
                }
                for &p in &self.p {
                    if p > g * h {
                        errors.push(format!("P: P={p} paths exceed the G·H={} angle pairs", g * h));
                    }
                }
            }
        }
        for &m_r in &self.m_r {
            for &l in &self.l {
                for &p in &self.p {
                    for &g in &self.g {
                        for &h in &self.h {
                            for (alg, j) in self.schemes(l, p, g, h, m_r) {
                                if l * p > j * m_r {
                                    errors.push(format!(
                                        "J: {} with J={j} gives {} measurements, fewer than the sparsity L·P={}",
                                        alg.name(),
                                        j * m_r,
                                        l * p
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `(algorithm, J)` pairs evaluated at one grid point.
    fn schemes(&self, l: usize, p: usize, g: usize, h: usize, m_r: usize) -> Vec<(SparseAlgorithm, usize)> {
        let mut out = Vec::new();
        for &alg in &self.algorithms {
            match &self.j {
                Some(js) => out.extend(js.iter().map(|&j| (alg, j))),
                None => {
                    let j = pilot_budget(l, p, g, h, m_r, alg, self.budget_constant).unwrap_or(1);
                    out.push((alg, j));
                }
            }
        }
        out
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        for &m_t in &self.m_t {
            for &m_r in &self.m_r {
                for &n in &self.n {
                    for &g in &self.g {
                        for &h in &self.h {
                            for &l in &self.l {
                                for &p in &self.p {
                                    for &offset in &self.offset {
                                        for &snr in &self.snr_db {
                                            let detail = format!(
                                                "M_t={m_t}, M_r={m_r}, N={n}, G={g}, H={h}, L={l}, P={p}, offset={offset}, snr_db={snr}"
                                            );
                                            let point = Point {
                                                kind: ExperimentKind::Sparse,
                                                snr_db: Some(snr),
                                                n: Some(n),
                                                t: None,
                                                trials: ctx.trials,
                                                seed: ctx.seed,
                                            };
                                            let problem = SparseProblem::new(m_t, n, m_r, g, h)
                                                .map_err(runtime(gp, detail.clone()))?;
                                            let schemes = self.schemes(l, p, g, h, m_r);
                                            let columns = ctx
                                                .monte_carlo(2 * schemes.len(), |trial| {
                                                    self.trial(
                                                        &problem,
                                                        &schemes,
                                                        (l, p, offset, rho(snr)),
                                                        ctx.seed,
                                                        gp,
                                                        trial,
                                                    )
                                                })
                                                .map_err(runtime(gp, detail))?;
                                            for (i, (alg, j)) in schemes.iter().enumerate() {
                                                let scheme = if offset == 0.0 {
                                                    alg.name().to_string()
                                                } else {
                                                    format!("{}-offset{}", alg.name(), format_float(offset))
                                                };
                                                let mean = |c: &Vec<f64>| MeanEstimate::from_samples(c);
                                                records.push(point.record(
                                                    &scheme,
                                                    Some(*j),
                                                    "nmse",
                                                    mean(&columns[2 * i]),
                                                ));
                                                if offset == 0.0 {
                                                    records.push(point.record(
                                                        &scheme,
                                                        Some(*j),
                                                        "support_recovery",
                                                        mean(&columns[2 * i + 1]),
                                                    ));
                                                }
                                            }
                                            gp += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(records)
    }

    /// One channel and one set of `max J` training slots shared by every
    /// scheme; each scheme uses the first `J` slots. Returns
    /// `(nmse, support hit)` per scheme.
    fn trial(
        &self,
        problem: &SparseProblem,
        schemes: &[(SparseAlgorithm, usize)],
        (l, p, offset, rho): (usize, usize, f64, f64),
        seed: u64,
        gp: usize,
        trial: u64,
    ) -> crate::Result<Vec<f64>> {
        let mut rng = trial_rng(seed, gp as u64, trial);
        let channel = if offset == 0.0 {
            SparseChannel::on_grid(problem, l, p, &mut rng)?
        } else {
            SparseChannel::off_grid(problem, l, p, offset, &mut rng)?
        };
        let slots = schemes.iter().map(|s| s.1).max().unwrap_or(0);
        let (m_t, n, m_r) = (problem.tx_antennas(), problem.ris_elements(), problem.rx_antennas());
        let xs: Vec<CVector> = (0..slots).map(|_| unit_modulus_vector(m_t, &mut rng)).collect();
        let psis: Vec<CVector> = (0..slots).map(|_| unit_modulus_vector(n, &mut rng)).collect();
        let noise_std = if self.noiseless { 0.0 } else { 1.0 / rho.sqrt() };
        // y_j/√ρ = H diag(ψ_j) G x_j + w_j/√ρ
        let mut y = CVector::zeros(slots * m_r);
        for s in 0..slots {
            let rx = &channel.ris_rx * CMatrix::from_diagonal(&psis[s]) * (&channel.tx_ris * &xs[s]);
            let w = complex_normal_vector(m_r, &mut rng) * Complex64::from(noise_std);
            y.rows_mut(s * m_r, m_r).copy_from(&(rx + w));
        }
        let truth = channel.cascaded();
        let mut out = Vec::with_capacity(2 * schemes.len());
        for &(alg, j) in schemes {
            let op = stack_sparse(&xs[..j], &psis[..j], problem)?;
            let obs = y.rows(0, j * m_r).into_owned();
            let est = match alg {
                SparseAlgorithm::Omp => omp(&op, &obs, l * p)?,
                SparseAlgorithm::Sp => subspace_pursuit(&op, &obs, l * p)?,
            };
            out.push(nmse(&reconstruct_cascaded(&est.lambda, problem)?, &truth));
            let hit = offset == 0.0 && problem.same_support(&est.support, &channel.support);
            out.push(if hit { 1.0 } else { 0.0 });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Ofdm {
    snr_db: Vec<f64>,
    m_c: Vec<usize>,
    l: Vec<usize>,
    n: Vec<usize>,
    t: Vec<usize>,
    cyclic_prefix: Option<usize>,
    n_p: Vec<usize>,
    n_g: Vec<usize>,
    noiseless: bool,
}

impl Ofdm {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let snr_db = snr_list(grid, &[10.0], errors);
        let m_c = list("M_c", &grid.m_c, &[64], errors);
        let l = list("L", &grid.l, &[4], errors);
        let n = list("N", &grid.n, &[8], errors);
        let t = list("T", &grid.t, &[100], errors);
        for (name, v) in [("M_c", &m_c), ("L", &l), ("N", &n)] {
            positive(name, v, errors);
        }
        let n_p = grid.n_p.clone().unwrap_or_default();
        let n_g = grid.n_g.clone().unwrap_or_default();
        positive("N_p", &n_p, errors);
        positive("N_g", &n_g, errors);
        let s = Ofdm {
            snr_db,
            m_c,
            l,
            n,
            t,
            cyclic_prefix: grid.cyclic_prefix,
            n_p,
            n_g,
            noiseless: grid.noiseless.unwrap_or(false),
        };
        if errors.is_empty() {
            s.check(errors);
        }
        s
    }

    /// Taps of the cascaded Tx → RIS → Rx response.
    fn cascade_taps(l: usize) -> usize {
        2 * l - 1
    }

    fn check(&self, errors: &mut Errors) {
        for &m_c in &self.m_c {
            for &l in &self.l {
                let taps = Self::cascade_taps(l);
                let cp = self.cyclic_prefix.unwrap_or(taps);
                if cp < taps || cp > m_c {
                    errors.push(format!(
                        "cyclic_prefix: need 2L-1={taps} <= cyclic_prefix={cp} <= M_c={m_c}"
                    ));
                }
                for &n_p in &self.n_p {
                    if n_p < taps || n_p > m_c {
                        errors.push(format!("N_p: need 2L-1={taps} <= N_p={n_p} <= M_c={m_c}"));
                    }
                }
            }
        }
        for &n in &self.n {
            for &t in &self.t {
                if n + 1 >= t {
                    errors.push(format!(
                        "T: T={t} leaves no data symbols after N+1={} training symbols",
                        n + 1
                    ));
                }
            }
            for &g in &self.n_g {
                if !n.is_multiple_of(g) {
                    errors.push(format!("N_g: N_g={g} does not divide N={n}"));
                }
            }
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        for &m_c in &self.m_c {
            for &l in &self.l {
                for &n in &self.n {
                    for &t in &self.t {
                        for &snr in &self.snr_db {
                            let detail = format!("M_c={m_c}, L={l}, N={n}, T={t}, snr_db={snr}");
                            let point = Point {
                                kind: ExperimentKind::Ofdm,
                                snr_db: Some(snr),
                                n: Some(n),
                                t: Some(t),
                                trials: ctx.trials,
                                seed: ctx.seed,
                            };
                            let mut schemes = vec![("full-dft".to_string(), n + 1), ("full-random".to_string(), n + 1)];
                            schemes.extend(self.n_p.iter().map(|p| (format!("interp-{p}"), n + 1)));
                            schemes.extend(self.n_g.iter().map(|g| (format!("grouped-{g}"), g + 1)));
                            let columns = ctx
                                .monte_carlo(schemes.len(), |trial| {
                                    self.trial((m_c, l, n, t, rho(snr)), ctx.seed, gp, trial)
                                })
                                .map_err(runtime(gp, detail))?;
                            for ((scheme, j), col) in schemes.iter().zip(&columns) {
                                records.push(point.record(scheme, Some(*j), "nmse", MeanEstimate::from_samples(col)));
                            }
                            gp += 1;
                        }
                    }
                }
            }
        }
        Ok(records)
    }

    fn trial(
        &self,
        (m_c, l, n, t, rho): (usize, usize, usize, usize, f64),
        seed: u64,
        gp: usize,
        trial: u64,
    ) -> crate::Result<Vec<f64>> {
        let mut rng = trial_rng(seed, gp as u64, trial);
        let taps = Self::cascade_taps(l);
        let cp = self.cyclic_prefix.unwrap_or(taps);
        let wb = gen_wideband(
            &WidebandConfig {
                subcarriers: m_c,
                taps: l,
                cyclic_prefix: cp,
                ris_elements: n,
            },
            &mut rng,
        )?;
        let channel = CascadedFreqChannel::from_wideband(&wb);
        let truth = channel.c_matrix();
        let noisy = !self.noiseless;
        let dft = dft_matrix(n + 1);
        let random = random_training_states(n + 1, &mut rng);

        let mut out = Vec::new();
        let full = OfdmFrame::new(m_c, t, n + 1, None)?;
        for states in [&dft, &random] {
            let est = simulate_training(&channel, &full, states, taps, cp, rho, noisy, &mut rng)?;
            out.push(nmse(&est.estimate, &truth));
        }
        for &n_p in &self.n_p {
            let frame = OfdmFrame::new(m_c, t, n + 1, Some(n_p))?;
            let est = simulate_training(&channel, &frame, &dft, taps, cp, rho, noisy, &mut rng)?;
            out.push(nmse(&est.estimate, &truth));
        }
        for &groups in &self.n_g {
            let grouped = group_elements(&channel, groups)?;
            let frame = OfdmFrame::new(m_c, t, groups + 1, None)?;
            let est = simulate_training(
                &grouped.channel,
                &frame,
                &dft_matrix(groups + 1),
                taps,
                cp,
                rho,
                noisy,
                &mut rng,
            )?;
            out.push(nmse(&est.estimate, &grouped.channel.c_matrix()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Multiuser {
    snr_db: Vec<f64>,
    k: Vec<usize>,
    m: Vec<usize>,
    n: Vec<usize>,
    alpha: Vec<f64>,
    direct_path: bool,
    noiseless: bool,
}

impl Multiuser {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let snr_db = snr_list(grid, &[10.0], errors);
        let k = list("K", &grid.k, &[4], errors);
        let m = list("M", &grid.m, &[8], errors);
        let n = list("N", &grid.n, &[32], errors);
        for (name, v) in [("K", &k), ("M", &m), ("N", &n)] {
            positive(name, v, errors);
        }
        let alpha = grid.alpha.clone().unwrap_or_default();
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 1.0)) {
            errors.push("alpha: values must be at least 1".to_string());
        }
        Multiuser {
            snr_db,
            k,
            m,
            n,
            alpha,
            direct_path: grid.direct_path.unwrap_or(true),
            noiseless: grid.noiseless.unwrap_or(false),
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        for &k in &self.k {
            for &m in &self.m {
                for &n in &self.n {
                    for &snr in &self.snr_db {
                        let detail = format!("K={k}, M={m}, N={n}, snr_db={snr}");
                        let err = |gp| runtime(gp, detail.clone());
                        let point = Point {
                            kind: ExperimentKind::Multiuser,
                            snr_db: Some(snr),
                            n: Some(n),
                            t: None,
                            trials: ctx.trials,
                            seed: ctx.seed,
                        };
                        let cfg = MultiuserConfig::new(k, m, n, rho(snr), self.direct_path).map_err(err(gp))?;
                        let noise = if self.noiseless {
                            PhaseNoise::NONE
                        } else {
                            PhaseNoise::ALL
                        };
                        let columns = ctx
                            .monte_carlo(3, |trial| {
                                let mut rng = trial_rng(ctx.seed, gp as u64, trial);
                                let channels = gen_multiuser(&cfg, &mut rng);
                                let out = simulate_common_channel(&cfg, &channels, noise, &mut rng)?;
                                let errs: Vec<f64> = out
                                    .users
                                    .iter()
                                    .enumerate()
                                    .map(|(u, est)| nmse(&est.cascaded, &channels.cascaded(u)))
                                    .collect();
                                let others = if k > 1 {
                                    errs[1..].iter().sum::<f64>() / (k - 1) as f64
                                } else {
                                    f64::NAN
                                };
                                Ok(vec![errs[0], others, out.slots as f64])
                            })
                            .map_err(err(gp))?;
                        let slots = columns[2][0] as usize;
                        let conventional = if self.direct_path { k * (n + 1) } else { k * n };
                        let common = "common-channel";
                        records.push(point.exact(common, Some(slots), "overhead", slots as f64));
                        records.push(point.record(
                            common,
                            Some(slots),
                            "nmse_reference",
                            MeanEstimate::from_samples(&columns[0]),
                        ));
                        if k > 1 {
                            records.push(point.record(
                                common,
                                Some(slots),
                                "nmse_others",
                                MeanEstimate::from_samples(&columns[1]),
                            ));
                        }
                        records.push(point.exact("conventional", Some(conventional), "overhead", conventional as f64));
                        for &alpha in &self.alpha {
                            let overhead = overhead_two_timescale(k, n, m, alpha).map_err(err(gp))?;
                            let scheme = format!("two-timescale-alpha{}", format_float(alpha));
                            records.push(point.exact(&scheme, None, "overhead", overhead));
                        }
                        if self.direct_path {
                            let expected = overhead_common_channel(k, n, m).map_err(err(gp))?;
                            debug_assert_eq!(slots, expected);
                        }
                        gp += 1;
                    }
                }
            }
        }
        Ok(records)
    }
}

#[derive(Debug, Clone)]
pub struct Opportunistic {
    snr_db: Vec<f64>,
    n: Vec<usize>,
    m_t: Vec<usize>,
    q: Vec<usize>,
    measurement: Measurement,
    direct_path: bool,
}

impl Opportunistic {
    fn resolve(grid: &Grid, errors: &mut Errors) -> Self {
        let snr_db = snr_list(grid, &[0.0], errors);
        let n = list("N", &grid.n, &[16], errors);
        let m_t = list("M_t", &grid.m_t, &[4], errors);
        let q = list("Q", &grid.q, &[1, 2, 4, 8, 16], errors);
        for (name, v) in [("N", &n), ("M_t", &m_t), ("Q", &q)] {
            positive(name, v, errors);
        }
        let measurement = match grid.measurement_pilots {
            None => Measurement::Noiseless,
            Some(0) => {
                errors.push("measurement_pilots: must be at least 1".to_string());
                Measurement::Noiseless
            }
            Some(p) => Measurement::Pilots(p),
        };
        Opportunistic {
            snr_db,
            n,
            m_t,
            q,
            measurement,
            direct_path: grid.direct_path.unwrap_or(false),
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<ExperimentRecord>, HarnessError> {
        let mut records = Vec::new();
        let mut gp = 0;
        let q_max = self.q.iter().copied().max().unwrap_or(1);
        let pilots = match self.measurement {
            Measurement::Noiseless => 1,
            Measurement::Pilots(p) => p,
        };
        for &n in &self.n {
            for &m_t in &self.m_t {
                for &snr in &self.snr_db {
                    let detail = format!("N={n}, M_t={m_t}, snr_db={snr}");
                    let point = Point {
                        kind: ExperimentKind::Opportunistic,
                        snr_db: Some(snr),
                        n: Some(n),
                        t: None,
                        trials: ctx.trials,
                        seed: ctx.seed,
                    };
                    let r = rho(snr);
                    let cfg = SystemConfig::new(m_t, 1, n, r, self.direct_path, ctx.seed)
                        .map_err(runtime(gp, detail.clone()))?;
                    let columns = ctx
                        .monte_carlo(self.q.len(), |trial| {
                            let mut rng = trial_rng(ctx.seed, gp as u64, trial);
                            let channels: NarrowbandChannelSet = gen_narrowband(&cfg, &mut rng);
                            let codebook = OpportunisticCodebook::random(n, q_max, &mut rng)?;
                            self.q
                                .iter()
                                .map(|&q| {
                                    // identical measurement noise for every Q
                                    let mut noise_rng = rng.clone();
                                    let sel = opportunistic_select(
                                        &codebook.prefix(q)?,
                                        &channels,
                                        r,
                                        self.measurement,
                                        &mut noise_rng,
                                    )?;
                                    Ok(sel.rate)
                                })
                                .collect()
                        })
                        .map_err(runtime(gp, detail))?;
                    for (&q, col) in self.q.iter().zip(&columns) {
                        records.push(point.record(
                            "opportunistic",
                            Some(q * pilots),
                            "rate",
                            MeanEstimate::from_samples(col),
                        ));
                    }
                    gp += 1;
                }
            }
        }
        Ok(records)
    }
}
