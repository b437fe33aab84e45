//! Experiment orchestration: JSON configs, deterministic replica seeding,
//! parallel execution, CSV/JSON emission, and the built-in validation suite.
//!
//! Determinism contract: every replica draws from a stream derived by hashing
//! (master seed, experiment label, replica index), results are aggregated in
//! index order, and CSVs are written single-threaded with 17 significant
//! digits — so reruns with the same config and seed are byte-identical and
//! independent of the worker count.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;
use crate::levy::{LevyMeasureSpec, LevySampler};
use crate::pwit::{
    self, escape_prob_bracket, ConstantRatioEnv, PwitEnvironment, VertexId, DEFAULT_CACHE_LIMIT,
};
use crate::seeding;
use crate::spectrum;
use crate::walk;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Spectrum,
    Speed,
    Traps,
    Validate,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Speed => "speed",
            ExperimentKind::Traps => "traps",
            ExperimentKind::Validate => "validate",
        }
    }
}

/// Experiment description. All tuning fields are optional; unset fields fall
/// back to per-experiment defaults at run time. Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Lévy measure encoding, e.g. "tempered:c=1,alpha=0.5,p=1".
    #[serde(default)]
    pub levy: Option<String>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub guard: Option<u64>,
    /// Trap threshold; defaults to the median max child conductance.
    #[serde(default, rename = "M")]
    pub trap_threshold: Option<f64>,
    #[serde(default)]
    pub r_max: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            levy: None,
            n_list: None,
            horizon: None,
            replicas: None,
            cutoff: None,
            guard: None,
            trap_threshold: None,
            r_max: None,
            master_seed: 0,
            out_dir: None,
            workers: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.levy {
            let spec: LevyMeasureSpec = s.parse()?;
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(nl) = &self.n_list {
            if nl.is_empty() || nl.iter().any(|&n| n < 2) {
                return Err(Error::Config("n_list entries must be >= 2".into()));
            }
            if nl.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("n_list must be strictly ascending".into()));
            }
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.replicas == Some(0) {
            return Err(Error::Config("replicas must be positive".into()));
        }
        if let Some(c) = self.cutoff {
            if !(c > 0.0) {
                return Err(Error::Config(format!("cutoff must be positive, got {c}")));
            }
        }
        if let Some(m) = self.trap_threshold {
            if !(m > 0.0) {
                return Err(Error::Config(format!("M must be positive, got {m}")));
            }
        }
        if let (Some(g), Some(h)) = (self.guard, self.horizon) {
            if g >= h {
                return Err(Error::Config(format!("guard {g} must be below horizon {h}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn levy_spec(&self) -> Result<LevyMeasureSpec> {
        match &self.levy {
            Some(s) => s.parse(),
            None => Ok(LevyMeasureSpec::TemperedStable {
                c: 1.0,
                alpha: 0.5,
                p: 1.0,
            }),
        }
    }

    fn run_id(&self) -> String {
        format!("{}-{:016x}", self.experiment.name(), self.master_seed)
    }
}

/// Derives a 64-bit sub-seed for a labeled stream.
fn sub_seed(master_seed: u64, labels: &[&[u8]]) -> u64 {
    let s = seeding::derive_seed(master_seed, labels);
    u64::from_le_bytes(s[..8].try_into().unwrap())
}

/// Tracks files created by a runner so that a failed run leaves no partial
/// outputs behind.
struct OutputSet {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    fn cleanup(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
    }
}

fn with_outputs<T>(
    dir: &Path,
    f: impl FnOnce(&mut OutputSet) -> Result<T>,
) -> Result<T> {
    let mut out = OutputSet::new(dir)?;
    match f(&mut out) {
        Ok(v) => Ok(v),
        Err(e) => {
            out.cleanup();
            Err(e)
        }
    }
}

fn write_json(w: &mut impl Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Spectrum experiment
// ---------------------------------------------------------------------------

/// In-memory result of a spectrum run, mirroring summary.json.
#[derive(Clone, Debug)]
pub struct SpectrumOutcome {
    pub n_list: Vec<usize>,
    /// Per n: averaged (|m_1|, |m_3|, |m_5|) over replicas.
    pub odd_moment_means: Vec<(usize, [f64; 3])>,
    /// Kolmogorov distances between pooled ECDFs at successive n.
    pub ks_sequence: Vec<(usize, usize, f64)>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// For each n and replicate: generate a divisible-conductance matrix,
/// symmetrize, eigensolve, and summarize. Emits esd.csv, moments.csv, ks.csv,
/// summary.json.
pub fn run_spectrum_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SpectrumOutcome> {
    cfg.validate()?;
    let spec = cfg.levy_spec()?;
    let n_list = cfg
        .n_list
        .clone()
        .unwrap_or_else(|| vec![50, 100, 200, 400]);
    let replicas = cfg.replicas.unwrap_or(20);
    let cutoff = cfg.cutoff.unwrap_or(1e-3);
    let r_max = cfg.r_max.unwrap_or(spectrum::DEFAULT_R_MAX);
    let run_id = cfg.run_id();
    let sampler = LevySampler::new(spec, cutoff)?;

    // (n, replicate) tasks in index order; rayon preserves collect order.
    let tasks: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..replicas).map(move |rep| (n, rep)))
        .collect();
    let eigs: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(n, rep)| -> Result<Vec<f64>> {
            let mut rng = seeding::rng(
                cfg.master_seed,
                &[
                    b"spectrum",
                    &(n as u64).to_le_bytes(),
                    &(rep as u64).to_le_bytes(),
                ],
            );
            let c = graph::generate_divisible_with(n, &sampler, &mut rng)?;
            let s = graph::symmetrize(&c)?;
            spectrum::jacobi_eigenvalues(&s, spectrum::DEFAULT_JACOBI_TOL)
        })
        .collect::<Result<_>>()?;

    let mut per_n: Vec<(usize, Vec<&Vec<f64>>)> = Vec::new();
    for (i, &(n, _)) in tasks.iter().enumerate() {
        if per_n.last().map(|(m, _)| *m) != Some(n) {
            per_n.push((n, Vec::new()));
        }
        per_n.last_mut().unwrap().1.push(&eigs[i]);
    }

    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for e in &eigs {
        min_eig = min_eig.min(e[0]);
        max_eig = max_eig.max(*e.last().unwrap());
    }

    let mut odd_moment_means = Vec::new();
    let mut pooled_summaries = Vec::new();
    for (n, reps) in &per_n {
        let mut mean_abs = [0.0f64; 3];
        let mut pooled = Vec::new();
        for e in reps {
            let s = spectrum::esd_with_order(e, r_max.max(5))?;
            for (acc, r) in mean_abs.iter_mut().zip([1usize, 3, 5]) {
                *acc += s.moment(r).abs() / reps.len() as f64;
            }
            pooled.extend_from_slice(e);
        }
        odd_moment_means.push((*n, mean_abs));
        pooled_summaries.push((*n, spectrum::esd_with_order(&pooled, 0)?));
    }
    let ks_sequence: Vec<(usize, usize, f64)> = pooled_summaries
        .windows(2)
        .map(|w| {
            (
                w[0].0,
                w[1].0,
                spectrum::kolmogorov_distance(&w[0].1, &w[1].1),
            )
        })
        .collect();

    with_outputs(out_dir, |out| {
        let mut f = out.create("esd.csv")?;
        writeln!(f, "run_id,n,replicate,eigenvalue")?;
        for (i, &(n, rep)) in tasks.iter().enumerate() {
            for &e in &eigs[i] {
                writeln!(f, "{run_id},{n},{rep},{e:.16e}")?;
            }
        }

        let mut f = out.create("moments.csv")?;
        writeln!(f, "run_id,n,r,mean_moment,stderr")?;
        for (n, reps) in &per_n {
            let summaries: Vec<_> = reps
                .iter()
                .map(|e| spectrum::esd_with_order(e, r_max))
                .collect::<Result<Vec<_>>>()?;
            for r in 0..=r_max {
                let vals: Vec<f64> = summaries.iter().map(|s| s.moment(r)).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (vals.len().max(2) - 1) as f64;
                let se = (var / vals.len() as f64).sqrt();
                writeln!(f, "{run_id},{n},{r},{mean:.16e},{se:.16e}")?;
            }
        }

        let mut f = out.create("ks.csv")?;
        writeln!(f, "n_small,n_large,ks_distance")?;
        for &(a, b, d) in &ks_sequence {
            writeln!(f, "{a},{b},{d:.16e}")?;
        }

        let mut f = out.create("summary.json")?;
        write_json(
            &mut f,
            &serde_json::json!({
                "run_id": run_id,
                "experiment": "spectrum",
                "levy": spec.to_string(),
                "n_list": n_list,
                "replicas": replicas,
                "cutoff": cutoff,
                "min_eigenvalue": min_eig,
                "max_eigenvalue": max_eig,
                "odd_moment_means": odd_moment_means
                    .iter()
                    .map(|(n, m)| serde_json::json!({"n": n, "abs_m1": m[0], "abs_m3": m[1], "abs_m5": m[2]}))
                    .collect::<Vec<_>>(),
                "ks_sequence": ks_sequence
                    .iter()
                    .map(|(a, b, d)| serde_json::json!({"n_small": a, "n_large": b, "ks": d}))
                    .collect::<Vec<_>>(),
            }),
        )?;
        Ok(())
    })?;

    Ok(SpectrumOutcome {
        n_list,
        odd_moment_means,
        ks_sequence,
        min_eigenvalue: min_eig,
        max_eigenvalue: max_eig,
    })
}

// ---------------------------------------------------------------------------
// Speed experiment
// ---------------------------------------------------------------------------

/// Per-replica speed statistics.
#[derive(Clone, Debug)]
pub struct SpeedReplicate {
    pub replicate: usize,
    pub point: f64,
    pub windowed_min: f64,
    /// Accepted regeneration times.
    pub regen_times: Vec<u64>,
    /// (window m, depth(m)/m) on the dyadic grid.
    pub profile: Vec<(u64, f64)>,
    /// First hitting time per dyadic depth level; None = censored.
    pub hits: Vec<(u32, Option<u64>)>,
}

#[derive(Clone, Debug)]
pub struct SpeedOutcome {
    pub replicates: Vec<SpeedReplicate>,
    pub mean_point: f64,
    pub stderr_point: f64,
    pub horizon: u64,
}

const BURN_IN_FRACTION: f64 = 0.1;

/// Runs PWIT walks and emits speed.csv, hitting.csv, summary.json.
pub fn run_speed_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SpeedOutcome> {
    cfg.validate()?;
    let spec = cfg.levy_spec()?;
    let horizon = cfg.horizon.unwrap_or(100_000);
    let replicas = cfg.replicas.unwrap_or(200);
    let cutoff = cfg.cutoff.unwrap_or(1e-2);
    let guard = cfg.guard.unwrap_or(horizon / 10);
    if guard >= horizon {
        return Err(Error::Config(format!("guard {guard} must be below horizon {horizon}")));
    }
    let run_id = cfg.run_id();
    let sampler = LevySampler::new(spec, cutoff)?;

    // Depth levels for hitting times: dyadic up to 2^12, within the horizon.
    let levels: Vec<u32> = (0..=12)
        .map(|k| 1u32 << k)
        .filter(|&l| (l as u64) < horizon)
        .collect();

    let replicates: Vec<SpeedReplicate> = (0..replicas)
        .into_par_iter()
        .map(|rep| -> Result<SpeedReplicate> {
            let env_seed = sub_seed(cfg.master_seed, &[b"speed-env", &(rep as u64).to_le_bytes()]);
            let env = PwitEnvironment::from_sampler(sampler.clone(), env_seed, DEFAULT_CACHE_LIMIT);
            let mut rng = seeding::rng(
                cfg.master_seed,
                &[b"speed-walk", &(rep as u64).to_le_bytes()],
            );
            let trace = walk::run_walk(&env, horizon, &mut rng)?;
            let est = walk::speed_estimate(&trace, BURN_IN_FRACTION)?;
            let regen = walk::regeneration_times(&trace, guard)?;
            let hits = walk::hitting_times(&trace, &levels)?;
            Ok(SpeedReplicate {
                replicate: rep,
                point: est.point,
                windowed_min: est.windowed_min,
                regen_times: regen.times,
                profile: walk::dyadic_profile(&trace),
                hits,
            })
        })
        .collect::<Result<_>>()?;

    let points: Vec<f64> = replicates.iter().map(|r| r.point).collect();
    let mean_point = points.iter().sum::<f64>() / points.len() as f64;
    let var = points
        .iter()
        .map(|p| (p - mean_point) * (p - mean_point))
        .sum::<f64>()
        / (points.len().max(2) - 1) as f64;
    let stderr_point = (var / points.len() as f64).sqrt();

    // Median depth(m)/m per dyadic window across replicas.
    let window_count = replicates
        .iter()
        .map(|r| r.profile.len())
        .min()
        .unwrap_or(0);
    let mut window_medians = Vec::new();
    for w in 0..window_count {
        let mut vals: Vec<f64> = replicates.iter().map(|r| r.profile[w].1).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        window_medians.push((replicates[0].profile[w].0, vals[vals.len() / 2]));
    }

    // T(n)/n statistics per level over uncensored replicas.
    let mut hitting_stats = Vec::new();
    for (li, &level) in levels.iter().enumerate() {
        let ratios: Vec<f64> = replicates
            .iter()
            .filter_map(|r| r.hits[li].1.map(|t| t as f64 / level as f64))
            .collect();
        if ratios.len() < 2 {
            continue;
        }
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let m15 = ratios.iter().map(|x| (x - mean).abs().powf(1.5)).sum::<f64>() / n;
        let m2 = ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        hitting_stats.push(serde_json::json!({
            "level": level,
            "uncensored": ratios.len(),
            "mean_ratio": mean,
            "variance": var,
            "central_moment_q1_5": m15,
            "central_moment_q2": m2,
        }));
    }

    with_outputs(out_dir, |out| {
        let mut f = out.create("speed.csv")?;
        writeln!(
            f,
            "run_id,replicate,horizon,point,windowed_min,n_regens,mean_regen_gap"
        )?;
        for r in &replicates {
            let n_regens = r.regen_times.len();
            let mean_gap = if n_regens >= 2 {
                (r.regen_times[n_regens - 1] - r.regen_times[0]) as f64 / (n_regens - 1) as f64
            } else {
                f64::NAN
            };
            writeln!(
                f,
                "{run_id},{},{horizon},{:.16e},{:.16e},{n_regens},{mean_gap:.16e}",
                r.replicate, r.point, r.windowed_min
            )?;
        }

        let mut f = out.create("hitting.csv")?;
        writeln!(f, "run_id,replicate,n,t_n,censored")?;
        for r in &replicates {
            for &(level, t) in &r.hits {
                match t {
                    Some(t) => writeln!(f, "{run_id},{},{level},{t},0", r.replicate)?,
                    None => writeln!(f, "{run_id},{},{level},,1", r.replicate)?,
                }
            }
        }

        let mut f = out.create("summary.json")?;
        write_json(
            &mut f,
            &serde_json::json!({
                "run_id": run_id,
                "experiment": "speed",
                "levy": spec.to_string(),
                "horizon": horizon,
                "replicas": replicas,
                "cutoff": cutoff,
                "guard": guard,
                "burn_in_fraction": BURN_IN_FRACTION,
                "mean_point": mean_point,
                "stderr_point": stderr_point,
                "window_medians": window_medians
                    .iter()
                    .map(|(m, v)| serde_json::json!({"window": m, "median_depth_ratio": v}))
                    .collect::<Vec<_>>(),
                "hitting_stats": hitting_stats,
            }),
        )?;
        Ok(())
    })?;

    Ok(SpeedOutcome {
        replicates,
        mean_point,
        stderr_point,
        horizon,
    })
}

// ---------------------------------------------------------------------------
// Trap experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrapOutcome {
    /// Uncensored durations S_v − T_v, ordered by (replicate, T_v).
    pub durations: Vec<u64>,
    pub censored_fraction: f64,
    /// Log-log slope of the survival function over the 1%-10% survival band.
    pub tail_slope: Option<f64>,
    pub n_events: usize,
    pub threshold: f64,
}

/// Collects trap events across PWIT walk replicas and emits traps.csv and
/// summary.json.
///
/// Replicas are simulated in chunks and their rows streamed to disk: event
/// counts (and their vertex-path strings) can be large when the threshold is
/// low, so the full event set is never held in memory at once.
pub fn run_trap_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrapOutcome> {
    cfg.validate()?;
    let spec = cfg.levy_spec()?;
    let horizon = cfg.horizon.unwrap_or(20_000);
    let replicas = cfg.replicas.unwrap_or(100);
    let cutoff = cfg.cutoff.unwrap_or(1e-2);
    let threshold = match cfg.trap_threshold {
        Some(m) => m,
        None => spec.median_max_conductance()?,
    };
    let run_id = cfg.run_id();
    let sampler = LevySampler::new(spec, cutoff)?;

    let mut durations = Vec::new();
    let mut censored = 0usize;
    let mut n_events = 0usize;

    with_outputs(out_dir, |out| {
        let mut f = out.create("traps.csv")?;
        writeln!(
            f,
            "run_id,replicate,vertex,c_parent,c_top_child,T_v,S_v,censored"
        )?;
        const CHUNK: usize = 8;
        let mut start = 0usize;
        while start < replicas {
            let stop = (start + CHUNK).min(replicas);
            let chunk: Vec<(usize, walk::TrapStats, Vec<String>)> = (start..stop)
                .into_par_iter()
                .map(|rep| -> Result<(usize, walk::TrapStats, Vec<String>)> {
                    let env_seed =
                        sub_seed(cfg.master_seed, &[b"trap-env", &(rep as u64).to_le_bytes()]);
                    let env = PwitEnvironment::from_sampler(
                        sampler.clone(),
                        env_seed,
                        DEFAULT_CACHE_LIMIT,
                    );
                    let mut rng =
                        seeding::rng(cfg.master_seed, &[b"trap-walk", &(rep as u64).to_le_bytes()]);
                    let trace = walk::run_walk(&env, horizon, &mut rng)?;
                    let stats = walk::trap_events(&trace, threshold)?;
                    let paths = stats
                        .events
                        .iter()
                        .map(|e| trace.vertex_path(e.node).to_string())
                        .collect();
                    Ok((rep, stats, paths))
                })
                .collect::<Result<_>>()?;
            for (rep, stats, paths) in &chunk {
                for (e, path) in stats.events.iter().zip(paths) {
                    n_events += 1;
                    match e.s_v {
                        Some(s) => {
                            durations.push(s - e.t_v);
                            writeln!(
                                f,
                                "{run_id},{rep},{path},{:.16e},{:.16e},{},{s},0",
                                e.c_parent, e.c_top_child, e.t_v
                            )?;
                        }
                        None => {
                            censored += 1;
                            writeln!(
                                f,
                                "{run_id},{rep},{path},{:.16e},{:.16e},{},,1",
                                e.c_parent, e.c_top_child, e.t_v
                            )?;
                        }
                    }
                }
            }
            start = stop;
        }

        let censored_fraction = if n_events == 0 {
            0.0
        } else {
            censored as f64 / n_events as f64
        };
        let tail_slope = survival_log_slope(&durations, 0.01, 0.10);

        let mut f = out.create("summary.json")?;
        write_json(
            &mut f,
            &serde_json::json!({
                "run_id": run_id,
                "experiment": "traps",
                "levy": spec.to_string(),
                "horizon": horizon,
                "replicas": replicas,
                "cutoff": cutoff,
                "threshold": threshold,
                "n_events": n_events,
                "n_uncensored": durations.len(),
                "censored_fraction": censored_fraction,
                "survival_tail_slope": tail_slope,
            }),
        )?;
        Ok(())
    })?;

    let censored_fraction = if n_events == 0 {
        0.0
    } else {
        censored as f64 / n_events as f64
    };
    let tail_slope = survival_log_slope(&durations, 0.01, 0.10);
    Ok(TrapOutcome {
        durations,
        censored_fraction,
        tail_slope,
        n_events,
        threshold,
    })
}

/// Least-squares slope of ln(survival) against ln(duration) over the survival
/// window [`lo_survival`, `hi_survival`] (at least 20 points, else None).
///
/// Ranks near the sample maximum are excluded on purpose: durations there are
/// depleted by horizon censoring, which steepens a naive top-decade fit.
pub fn survival_log_slope(
    durations: &[u64],
    lo_survival: f64,
    hi_survival: f64,
) -> Option<f64> {
    if durations.len() < 20 || !(0.0 < lo_survival && lo_survival < hi_survival) {
        return None;
    }
    let mut sorted: Vec<u64> = durations.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a)); // descending
    let n = sorted.len() as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &d) in sorted.iter().enumerate() {
        let survival = (k + 1) as f64 / n;
        if survival < lo_survival || d < 2 {
            continue;
        }
        if survival > hi_survival {
            break;
        }
        xs.push((d as f64).ln());
        ys.push(survival.ln());
    }
    if xs.len() < 20 {
        return None;
    }
    let nx = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nx;
    let my = ys.iter().sum::<f64>() / nx;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

// ---------------------------------------------------------------------------
// Validation suite
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Measured value (NaN if the check errored before producing one).
    pub value: f64,
    /// The check passes iff value <= threshold.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn outcome(name: &str, threshold: f64, value: Result<f64>) -> CheckOutcome {
    match value {
        Ok(v) => CheckOutcome {
            name: name.into(),
            value: v,
            threshold,
            pass: v <= threshold,
        },
        Err(_) => CheckOutcome {
            name: name.into(),
            value: f64::NAN,
            threshold,
            pass: false,
        },
    }
}

const EXAMPLE_SPECS: [LevyMeasureSpec; 2] = [
    LevyMeasureSpec::TemperedStable {
        c: 1.0,
        alpha: 0.5,
        p: 1.0,
    },
    LevyMeasureSpec::Stable { c: 1.0, alpha: 0.5 },
];

/// Cross-module invariant suite. Runs every check even after failures; writes
/// report.json if an output directory is given.
pub fn run_validation_suite(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ValidationReport> {
    cfg.validate()?;
    let seed = cfg.master_seed;
    let checks = vec![
        outcome("tail_inverse_round_trip", 1e-8, check_tail_round_trip()),
        outcome("levy_exponent_char_function", 3.0, check_char_function(seed)),
        outcome(
            "max_conductance_cdf_ks",
            1.0,
            check_max_conductance_cdf(seed),
        ),
        outcome("detailed_balance", 1e-12, check_detailed_balance(seed)),
        outcome(
            "kernel_spectrum_similarity",
            1e-8,
            check_spectrum_similarity(seed),
        ),
        outcome("top_eigenvalue_unit", 1e-10, check_top_eigenvalue(seed)),
        outcome(
            "eigensolver_vs_charpoly",
            1e-8,
            check_eigensolver_oracle(seed),
        ),
        outcome(
            "moment_return_identity",
            1e-8,
            check_moment_return_identity(seed),
        ),
        outcome("escape_bracket_vs_mc", 0.0, check_escape_bracket(seed)),
        outcome(
            "regeneration_brute_force",
            0.0,
            check_regeneration_brute_force(seed),
        ),
    ];
    let report = ValidationReport { checks };
    if let Some(dir) = out_dir {
        with_outputs(dir, |out| {
            let mut f = out.create("report.json")?;
            write_json(&mut f, &serde_json::to_value(&report)?)?;
            Ok(())
        })?;
    }
    Ok(report)
}

/// Max relative error of inverse_tail(tail_mass(x)) over a log grid.
fn check_tail_round_trip() -> Result<f64> {
    // Tempered tails underflow past x of a few hundred, so cap those grids.
    let specs = [
        (EXAMPLE_SPECS[0], 1.0f64),
        (EXAMPLE_SPECS[1], 3.0),
        (LevyMeasureSpec::GammaType { a: 1.0, b: 1.0 }, 1.0),
    ];
    let mut worst = 0.0f64;
    for (spec, top) in specs {
        for i in 0..=40 {
            let x = 10f64.powf(-6.0 + (top + 6.0) * i as f64 / 40.0);
            let u = spec.tail_mass(x)?;
            let back = spec.inverse_tail(u)?;
            worst = worst.max((back - x).abs() / x);
        }
    }
    Ok(worst)
}

/// Max |ecf(θ) − exp(Ψ(θ))| in units of the empirical standard error.
fn check_char_function(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for (tag, spec) in EXAMPLE_SPECS.iter().enumerate() {
        let sampler = LevySampler::new(*spec, 1e-4)?;
        let mut rng = seeding::rng(seed, &[b"validate-ecf", &(tag as u64).to_le_bytes()]);
        let n = 2000usize;
        let samples: Vec<f64> = (0..n)
            .map(|_| sampler.sample_id(1.0, &mut rng))
            .collect::<Result<_>>()?;
        for theta in [0.5, 1.0, 2.0] {
            let vals: Vec<Complex64> = samples
                .iter()
                .map(|&x| Complex64::new(0.0, theta * x).exp())
                .collect();
            let mean = vals.iter().sum::<Complex64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
            let sigma = (var / n as f64).sqrt().max(1e-300);
            let target = spec.levy_exponent(theta)?.exp();
            worst = worst.max((mean - target).norm() / sigma);
        }
    }
    Ok(worst)
}

/// Max ratio of the one-sample KS statistic of the max child conductance
/// against exp(−Π(x,∞)) to the 1% critical value.
fn check_max_conductance_cdf(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    let reps = 2000usize;
    for (tag, spec) in EXAMPLE_SPECS.iter().enumerate() {
        let sampler = LevySampler::new(*spec, 1e-2)?;
        let mut samples: Vec<f64> = (0..reps)
            .map(|i| -> Result<f64> {
                let env_seed = sub_seed(
                    seed,
                    &[b"validate-maxc", &(tag as u64).to_le_bytes(), &(i as u64).to_le_bytes()],
                );
                let env =
                    PwitEnvironment::from_sampler(sampler.clone(), env_seed, DEFAULT_CACHE_LIMIT);
                env.max_child_conductance(&VertexId::root())
            })
            .collect::<Result<_>>()?;
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        for (i, &x) in samples.iter().enumerate() {
            let f = (-spec.tail_mass(x)?).exp();
            ks = ks
                .max((f - i as f64 / reps as f64).abs())
                .max((f - (i + 1) as f64 / reps as f64).abs());
        }
        let critical = 1.6276 / (reps as f64).sqrt();
        worst = worst.max(ks / critical);
    }
    Ok(worst)
}

fn validation_kernel(
    seed: u64,
    n: usize,
    stable_domain: bool,
) -> Result<(graph::ConductanceMatrix, graph::KernelMatrix)> {
    let mut rng = seeding::rng(seed, &[b"validate-kernel", &[u8::from(stable_domain)]]);
    let c = if stable_domain {
        graph::generate_stable_domain(n, 0.5, &mut rng)?
    } else {
        graph::generate_divisible(n, &EXAMPLE_SPECS[0], 1e-3, &mut rng)?
    };
    let k = graph::kernel(&c)?;
    Ok((c, k))
}

/// Max relative detailed-balance residual over both generators.
fn check_detailed_balance(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for stable_domain in [false, true] {
        let (c, k) = validation_kernel(seed, 50, stable_domain)?;
        let max_rho = c.rho().iter().cloned().fold(0.0f64, f64::max);
        worst = worst.max(k.detailed_balance_residual() / max_rho);
    }
    Ok(worst)
}

/// K and its symmetrization share all power traces: max over r ≤ 12 of
/// |tr(K^r)/n − m_r(ESD of S)|.
fn check_spectrum_similarity(seed: u64) -> Result<f64> {
    let (c, k) = validation_kernel(seed, 40, false)?;
    let s = graph::symmetrize(&c)?;
    let eigs = spectrum::jacobi_eigenvalues(&s, spectrum::DEFAULT_JACOBI_TOL)?;
    let summary = spectrum::esd_with_order(&eigs, 12)?;
    let n = k.n();
    let mut worst = 0.0f64;
    for r in 1..=12 {
        let mut tr = 0.0;
        for v in 0..n {
            tr += spectrum::return_probability_power(&k, v, r)?;
        }
        worst = worst.max((tr / n as f64 - summary.moment(r)).abs());
    }
    Ok(worst)
}

fn check_top_eigenvalue(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for stable_domain in [false, true] {
        let (c, _) = validation_kernel(seed, 50, stable_domain)?;
        let s = graph::symmetrize(&c)?;
        let eigs = spectrum::jacobi_eigenvalues(&s, spectrum::DEFAULT_JACOBI_TOL)?;
        worst = worst.max((eigs.last().unwrap() - 1.0).abs());
    }
    Ok(worst)
}

/// Jacobi vs inertia-bisection eigenvalues on random 5×5 matrices.
fn check_eigensolver_oracle(seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut rng = seeding::rng(seed, &[b"validate-eigs"]);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let jac = spectrum::jacobi_eigenvalues_raw(n, &a, spectrum::DEFAULT_JACOBI_TOL)?;
        let bis = spectrum::bisection_eigenvalues(n, &a)?;
        for (x, y) in jac.iter().zip(&bis) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// Spectral-theorem identity: (1/n) Σ_j (K^r)(j,j) = m_r for r ∈ {2, 4, 6}.
fn check_moment_return_identity(seed: u64) -> Result<f64> {
    let (c, k) = validation_kernel(seed, 50, false)?;
    let s = graph::symmetrize(&c)?;
    let eigs = spectrum::jacobi_eigenvalues(&s, spectrum::DEFAULT_JACOBI_TOL)?;
    let summary = spectrum::esd_with_order(&eigs, 6)?;
    let n = k.n();
    let mut worst = 0.0f64;
    for r in [2usize, 4, 6] {
        let mut tr = 0.0;
        for v in 0..n {
            tr += spectrum::return_probability_power(&k, v, r)?;
        }
        worst = worst.max((tr / n as f64 - summary.moment(r)).abs());
    }
    Ok(worst)
}

/// Bracket/Monte-Carlo/closed-form agreement for escape probabilities; the
/// value is the largest tolerance excess (0 = no violation).
fn check_escape_bracket(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;

    // Synthetic constant-ratio chain against the closed form.
    let env = ConstantRatioEnv::new(4.0)?;
    let v = VertexId::from_path(&[1])?;
    let (lo, hi) = escape_prob_bracket(&env, &v, 20, pwit::DEFAULT_BRACKET_BUDGET)?;
    let mut rng = seeding::rng(seed, &[b"validate-escape-sync"]);
    let (p, se) = walk::escape_prob_mc(&env, &v, 3000, 10_000, &mut rng)?;
    let exact = env.escape_probability();
    let tol = 3.0 * se + (hi - lo);
    worst = worst.max((p - exact).abs() - tol);
    worst = worst.max((hi - exact).abs() - tol);

    // PWIT vertices: the MC estimate must sit inside the inflated bracket.
    let sampler = LevySampler::new(EXAMPLE_SPECS[0], 1e-2)?;
    for i in 0..5u64 {
        let env_seed = sub_seed(seed, &[b"validate-escape-env", &i.to_le_bytes()]);
        let env = PwitEnvironment::from_sampler(sampler.clone(), env_seed, DEFAULT_CACHE_LIMIT);
        let v = VertexId::from_path(&[1])?;
        let (lo, hi) = escape_prob_bracket(&env, &v, 20, pwit::DEFAULT_BRACKET_BUDGET)?;
        let mut rng = seeding::rng(seed, &[b"validate-escape-mc", &i.to_le_bytes()]);
        let (p, se) = walk::escape_prob_mc(&env, &v, 400, 5_000, &mut rng)?;
        worst = worst.max(lo - p - 3.0 * se);
        worst = worst.max(p - hi - 3.0 * se);
    }
    Ok(worst.max(0.0))
}

/// Regeneration scan vs the O(horizon²) definition, as a mismatch count.
fn check_regeneration_brute_force(seed: u64) -> Result<f64> {
    let sampler = LevySampler::new(EXAMPLE_SPECS[0], 1e-2)?;
    let mut mismatches = 0u64;
    for i in 0..5u64 {
        let env_seed = sub_seed(seed, &[b"validate-regen-env", &i.to_le_bytes()]);
        let env = PwitEnvironment::from_sampler(sampler.clone(), env_seed, DEFAULT_CACHE_LIMIT);
        let mut rng = seeding::rng(seed, &[b"validate-regen-walk", &i.to_le_bytes()]);
        let trace = walk::run_walk(&env, 3000, &mut rng)?;
        let guard = 300u64;
        let fast = walk::regeneration_times(&trace, guard)?;
        let depths = trace.depths();
        let horizon = depths.len() - 1;
        let mut slow = Vec::new();
        for k in 0..horizon {
            if k as u64 > horizon as u64 - guard {
                continue;
            }
            if (k + 1..=horizon).all(|u| depths[k] < depths[u]) {
                slow.push(k as u64);
            }
        }
        if fast.times != slow {
            mismatches += 1;
        }
    }
    Ok(mismatches as f64)
}
