use std::fs;
use std::path::{Path, PathBuf};

use gibbs_core::bounds::{
    bound_general_bias_estimation, bound_hog_sparse_estimation, bound_hogwild_bias,
    bound_mixing, bound_seq_sparse_estimation, BoundInputs, MixingVariant,
};
use gibbs_core::coupling::tau_sweep;
use gibbs_core::experiments::{
    run_badmix_series, run_bias_experiment, run_throughput, BadmixMode,
};
use gibbs_core::influence::{
    ising_influence_report, total_influence_exact, InfluenceReport,
};
use gibbs_core::{build_random_ising, Error as CoreError, RngStream};
use serde_json::json;

use crate::config::*;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ConfigError(m) => CliError::Config(m),
            other => CliError::Core(other),
        }
    }
}

pub type CmdResult = Result<CmdOutcome, CliError>;

/// What a command produced; `guards_ok = false` triggers exit code 3 in
/// strict mode.
#[derive(Debug)]
pub struct CmdOutcome {
    pub guards_ok: bool,
    pub files: Vec<PathBuf>,
}

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output dir: {e}")))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn csv_path(&self, experiment: &str) -> PathBuf {
        self.dir.join(format!("{experiment}.csv"))
    }

    fn meta_path(&self, experiment: &str) -> PathBuf {
        self.dir.join(format!("{experiment}.meta.json"))
    }

    fn write_csv(
        &self,
        experiment: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.csv_path(experiment);
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        w.write_record(header)
            .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
            .and_then(|_| w.flush().map_err(Into::into))
            .map_err(|e| CliError::Config(format!("csv write failed: {e}")))?;
        Ok(path)
    }

    fn write_meta(&self, experiment: &str, meta: serde_json::Value) -> Result<PathBuf, CliError> {
        let path = self.meta_path(experiment);
        fs::write(&path, serde_json::to_string_pretty(&meta).unwrap())
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn state_label(values: &[u32]) -> String {
    format!(
        "({})",
        values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    )
}

pub fn cmd_bias(cfg: &BiasConfig, out: &OutDir) -> CmdResult {
    let burn_in = cfg
        .burn_in
        .unwrap_or_else(|| gibbs_core::SampleSink::default_burn_in(cfg.steps));
    let core_cfg = gibbs_core::experiments::BiasConfig {
        steps: cfg.steps,
        burn_in,
        stride: cfg.stride,
        rho: cfg.rho,
        stream: RngStream::new(cfg.seed, 0),
    };
    let r = run_bias_experiment(&core_cfg)?;
    let header = [
        "state",
        "exact_prob",
        "oracle_prob",
        "sequential_count",
        "sequential_prob",
        "hogwild_count",
        "hogwild_prob",
    ];
    let seq_total = r.sequential.total.max(1) as f64;
    let hog_total = r.hogwild.total.max(1) as f64;
    let rows: Vec<Vec<String>> = (0..4usize)
        .map(|idx| {
            let values = [(idx >> 1) as u32, (idx & 1) as u32];
            vec![
                state_label(&values),
                r.exact.probs[idx].to_string(),
                r.oracle.probs[idx].to_string(),
                r.sequential.counts[idx].to_string(),
                (r.sequential.counts[idx] as f64 / seq_total).to_string(),
                r.hogwild.counts[idx].to_string(),
                (r.hogwild.counts[idx] as f64 / hog_total).to_string(),
            ]
        })
        .collect();
    let csv = out.write_csv("bias", &header, &rows)?;
    let meta = out.write_meta(
        "bias",
        json!({
            "experiment": "bias",
            "config": cfg,
            "burn_in_used": burn_in,
            "delay_model": format!("iid-bernoulli(rho={}, k=1)", cfg.rho),
            "columns": header,
            "distances": {
                "tv_sequential_to_pi": r.tv_sequential,
                "sv1_sequential_to_pi": r.sv1_sequential,
                "tv_hogwild_to_pi": r.tv_hogwild,
                "sv1_hogwild_to_pi": r.sv1_hogwild,
            },
        }),
    )?;
    Ok(CmdOutcome {
        guards_ok: true,
        files: vec![csv, meta],
    })
}

pub fn cmd_badmix(cfg: &BadmixConfig, out: &OutDir) -> CmdResult {
    let core_cfg = cfg.to_core();
    let seq = run_badmix_series(&core_cfg, BadmixMode::Sequential, RngStream::new(cfg.seed, 0))?;
    let hog = run_badmix_series(
        &core_cfg,
        BadmixMode::TwoThread,
        RngStream::new(cfg.seed, 1_000_000_007),
    )?;
    let header = ["updates", "p_sequential", "p_hogwild", "reference"];
    let rows: Vec<Vec<String>> = seq
        .iter()
        .zip(&hog)
        .map(|(s, h)| {
            vec![
                s.updates.to_string(),
                s.p_y_positive.to_string(),
                h.p_y_positive.to_string(),
                // true asymptote by Y -> -Y symmetry
                "0.5".to_string(),
            ]
        })
        .collect();
    let csv = out.write_csv("badmix", &header, &rows)?;
    let meta = out.write_meta(
        "badmix",
        json!({
            "experiment": "badmix",
            "config": cfg,
            "delay_model": format!("two-thread-pattern(race_vars={})", cfg.n_bank),
            "columns": header,
            "final": {
                "sequential": seq.last().map(|p| p.p_y_positive),
                "hogwild": hog.last().map(|p| p.p_y_positive),
            },
        }),
    )?;
    Ok(CmdOutcome {
        guards_ok: true,
        files: vec![csv, meta],
    })
}

pub fn cmd_tausweep(cfg: &TauSweepConfig, out: &OutDir) -> CmdResult {
    let mut graph_rng = RngStream::new(cfg.seed, 0).rng();
    let graph = build_random_ising(cfg.n, cfg.degree, cfg.beta, &[], &mut graph_rng)?;
    let rows = tau_sweep(
        &graph,
        &cfg.tau_star_grid,
        cfg.support_max,
        cfg.trials,
        cfg.epsilon,
        RngStream::new(cfg.seed, 1),
        cfg.max_steps,
    )?;
    let header = [
        "tau_star",
        "t_hat",
        "band_lo",
        "band_hi",
        "theory_prediction",
        "trials",
        "censored_count",
    ];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.tau_star.to_string(),
                r.t_hat.to_string(),
                r.band_lo.to_string(),
                r.band_hi.to_string(),
                r.theory_prediction.to_string(),
                r.trials.to_string(),
                r.censored_count.to_string(),
            ]
        })
        .collect();
    let csv = out.write_csv("tausweep", &header, &csv_rows)?;
    let meta = out.write_meta(
        "tausweep",
        json!({
            "experiment": "tausweep",
            "config": cfg,
            "columns": header,
            "alpha_bound": gibbs_core::coupling::ising_alpha_bound(&graph),
            "quantile_epsilon": cfg.epsilon,
        }),
    )?;
    Ok(CmdOutcome {
        guards_ok: true,
        files: vec![csv, meta],
    })
}

pub fn cmd_throughput(cfg: &ThroughputConfig, out: &OutDir) -> CmdResult {
    if cfg.worker_counts.is_empty() {
        return Err(CliError::Config("worker_counts must not be empty".into()));
    }
    let mut graph_rng = RngStream::new(cfg.seed, 0).rng();
    let graph = build_random_ising(cfg.n, cfg.degree, cfg.beta, &[], &mut graph_rng)?;
    let rows = run_throughput(
        &graph,
        &cfg.worker_counts,
        cfg.steps_per_point,
        RngStream::new(cfg.seed, 1),
    )?;
    let header = ["workers", "hogwild_updates_per_sec", "multimodel_updates_per_sec"];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.workers.to_string(),
                format!("{:.1}", r.hogwild_updates_per_sec),
                format!("{:.1}", r.multimodel_updates_per_sec),
            ]
        })
        .collect();
    let csv = out.write_csv("throughput", &header, &csv_rows)?;
    let meta = out.write_meta(
        "throughput",
        json!({
            "experiment": "throughput",
            "config": cfg,
            "columns": header,
            "available_parallelism": std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1),
            "note": "wall-clock measurements; reproducible statistically, not byte-exactly",
        }),
    )?;
    Ok(CmdOutcome {
        guards_ok: true,
        files: vec![csv, meta],
    })
}

pub fn cmd_influence_report(cfg: &InfluenceConfig, out: &OutDir) -> CmdResult {
    let report: InfluenceReport = if let Some(preset) = &cfg.ising {
        ising_influence_report(preset.n, preset.degree, preset.beta)
    } else {
        let graph = if let Some(model) = &cfg.model {
            model.to_graph()?
        } else if let Some(path) = &cfg.model_file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            gibbs_core::modelfile::load_model(&text)?
        } else {
            gibbs_core::build_bias_example()
        };
        total_influence_exact(&graph)?
    };
    let header = ["target_variable", "source_variable", "influence"];
    let rows: Vec<Vec<String>> = match &report.per_variable_rows {
        Some(rows) => rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter().enumerate().map(move |(j, &v)| {
                    vec![i.to_string(), j.to_string(), v.to_string()]
                })
            })
            .collect(),
        None => vec![vec!["*".into(), "*".into(), report.alpha.to_string()]],
    };
    let csv = out.write_csv("influence-report", &header, &rows)?;
    let meta = out.write_meta(
        "influence-report",
        json!({
            "experiment": "influence-report",
            "config": cfg,
            "columns": header,
            "report": {
                "alpha": report.alpha,
                "method": report.method,
                "dobrushin_satisfied": report.dobrushin_satisfied,
                "n": report.n,
                "cap_used": report.cap_used,
            },
        }),
    )?;
    Ok(CmdOutcome {
        guards_ok: report.dobrushin_satisfied,
        files: vec![csv, meta],
    })
}

pub fn cmd_bounds_table(cfg: &BoundsConfig, out: &OutDir) -> CmdResult {
    let alpha = match (cfg.alpha, &cfg.ising) {
        (Some(a), _) => a,
        (None, Some(p)) => gibbs_core::ising_influence_bound(p.degree, p.beta),
        (None, None) => {
            return Err(CliError::Config(
                "bounds-table needs either alpha or an ising preset".into(),
            ))
        }
    };
    let inputs = BoundInputs {
        n: cfg.n,
        alpha,
        tau: cfg.tau,
        tau_star: cfg.tau_star,
        omega: cfg.omega,
        epsilon: cfg.epsilon,
        t: cfg.t,
    };
    let seq_fn = {
        let n = cfg.n as f64;
        let omega = cfg.omega as f64;
        move |eps: f64| n / (1.0 - alpha) * (omega / eps).ln()
    };
    let mut rows: Vec<(String, Result<f64, CoreError>)> = vec![
        (
            "sparse-estimation-sequential".into(),
            bound_seq_sparse_estimation(&inputs).map(|v| v as f64),
        ),
        (
            "sparse-estimation-hogwild".into(),
            bound_hog_sparse_estimation(&inputs).map(|v| v as f64),
        ),
        ("bias-at-t".into(), Ok(bound_hogwild_bias(&inputs))),
        (
            "sparse-estimation-hogwild-general".into(),
            if alpha < 1.0 {
                bound_general_bias_estimation(&inputs, seq_fn).map(|v| v as f64)
            } else {
                Err(CoreError::DobrushinViolated { alpha })
            },
        ),
        (
            "mixing-sequential".into(),
            bound_mixing(&inputs, MixingVariant::Sequential),
        ),
        (
            "mixing-hogwild".into(),
            bound_mixing(&inputs, MixingVariant::Hogwild),
        ),
    ];
    rows.push((
        "mixing-ratio-hogwild-over-sequential".into(),
        Ok(1.0 + alpha * cfg.tau_star / cfg.n as f64),
    ));
    let header = ["bound", "value", "guard_satisfied", "note"];
    let mut guards_ok = true;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, res)| match res {
            Ok(v) => vec![name.clone(), v.to_string(), "true".into(), String::new()],
            Err(e) => {
                guards_ok = false;
                vec![name.clone(), String::new(), "false".into(), e.to_string()]
            }
        })
        .collect();
    let csv = out.write_csv("bounds-table", &header, &csv_rows)?;
    let table: serde_json::Map<String, serde_json::Value> = rows
        .iter()
        .map(|(name, res)| {
            let v = match res {
                Ok(v) => json!({ "value": v, "guard_satisfied": true }),
                Err(e) => json!({ "guard_satisfied": false, "violation": e.to_string() }),
            };
            (name.clone(), v)
        })
        .collect();
    let meta = out.write_meta(
        "bounds-table",
        json!({
            "experiment": "bounds-table",
            "config": cfg,
            "columns": header,
            "inputs": inputs,
            "alpha_used": alpha,
            "bounds": table,
        }),
    )?;
    Ok(CmdOutcome {
        guards_ok,
        files: vec![csv, meta],
    })
}
