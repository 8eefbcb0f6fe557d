//! Runs the configured estimators and writes the manifest and per-run JSON.

use crate::config::CampaignConfig;
use crate::error::CliError;
use crate::manifest::{write_manifest, ManifestRow};
use etuq::tensor_train::GreedyDiagnostics;
use etuq::uq::{mc_estimate, sg_estimate, tt_estimate_sweeps, MomentEstimate, QoiOracle, RandomVector};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Metadata written next to the manifest for every estimate.
#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    estimate: &'a MomentEstimate,
    rel_err_mean_pct: Option<f64>,
    rel_err_std_pct: Option<f64>,
    model: &'a str,
    started_unix_s: f64,
    finished_unix_s: f64,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tt_diagnostics: Option<GreedyDiagnostics>,
    config: &'a CampaignConfig,
}

#[derive(Debug, Clone)]
pub struct CampaignSummary {
    pub manifest: PathBuf,
    pub rows: Vec<ManifestRow>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn run_name(est: &MomentEstimate) -> String {
    let mut s = est.method.to_string();
    if let Some(l) = est.level {
        s += &format!("_l{l}");
    }
    if let Some(k) = est.sweeps {
        s += &format!("_s{k}");
    }
    s
}

struct Sink<'a> {
    cfg: &'a CampaignConfig,
    model: String,
    manifest: PathBuf,
    runs: PathBuf,
    rows: Vec<ManifestRow>,
}

impl Sink<'_> {
    /// Appends a row, rewrites the manifest and writes the run record, so a
    /// later failure leaves everything finished so far on disk.
    fn push(
        &mut self,
        est: &MomentEstimate,
        reference: Option<&MomentEstimate>,
        started: f64,
        clock: Instant,
        tt_diagnostics: Option<GreedyDiagnostics>,
    ) -> Result<(), CliError> {
        let row = ManifestRow::new(est, reference)?;
        let record = RunRecord {
            estimate: est,
            rel_err_mean_pct: row.rel_err_mean_pct,
            rel_err_std_pct: row.rel_err_std_pct,
            model: &self.model,
            started_unix_s: started,
            finished_unix_s: unix_now(),
            wall_time_s: clock.elapsed().as_secs_f64(),
            tt_diagnostics,
            config: self.cfg,
        };
        let path = self.runs.join(format!("{}.json", run_name(est)));
        let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Output(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.rows.push(row);
        write_manifest(&self.manifest, &self.rows)
    }
}

/// Validates `cfg`, then runs MC (reference), SG levels and TT levels × sweep
/// budgets as requested, inside a thread pool of `cfg.threads` workers.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignSummary, CliError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let rv = RandomVector::elongations(model.num_wires())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let runs = cfg.out.join("runs");
    std::fs::create_dir_all(&runs).map_err(|e| CliError::Output(format!("{}: {e}", runs.display())))?;
    let mut sink = Sink {
        cfg,
        model: model.def.name.clone(),
        manifest: cfg.out.join("manifest.csv"),
        runs,
        rows: Vec::new(),
    };
    write_manifest(&sink.manifest, &[])?;
    let oracle = QoiOracle::new(&model, rv.clone())?;

    pool.install(|| -> Result<(), CliError> {
        let mut reference = None;
        if cfg.runs_mc() {
            let (started, clock) = (unix_now(), Instant::now());
            let mc = mc_estimate(&oracle, &rv, cfg.mc.samples, cfg.mc.seed)?;
            sink.push(&mc, None, started, clock, None)?;
            reference = Some(mc);
        }
        if cfg.runs_sg() {
            for &level in &cfg.sg.levels {
                let (started, clock) = (unix_now(), Instant::now());
                let est = sg_estimate(&oracle, &rv, level, cfg.sg.growth)?;
                sink.push(&est, reference.as_ref(), started, clock, None)?;
            }
        }
        if cfg.runs_tt() {
            let opts = cfg.tt.greedy_options();
            for &level in &cfg.tt.levels {
                let (started, clock) = (unix_now(), Instant::now());
                let run = tt_estimate_sweeps(&oracle, &rv, level, &opts)?;
                for &budget in &cfg.tt.sweeps {
                    let est = run.at_budget(budget).expect("budgets are validated to be >= 1");
                    let mut diag = run.diagnostics.clone();
                    diag.sweeps.truncate(budget);
                    sink.push(&est, reference.as_ref(), started, clock, Some(diag))?;
                }
            }
        }
        Ok(())
    })?;
    Ok(CampaignSummary { manifest: sink.manifest, rows: sink.rows })
}

/// Runs one transient of the configured model and writes its wire trace as CSV.
/// `delta` holds one elongation per wire, or a single value for all wires.
pub fn write_trace(cfg: &CampaignConfig, delta: &[f64], path: &Path) -> Result<f64, CliError> {
    let model = cfg.build_model()?;
    let delta = match delta {
        [d] => vec![*d; model.num_wires()],
        d if d.len() == model.num_wires() => d.to_vec(),
        d => {
            return Err(CliError::Config(format!(
                "{} elongations given for {} wires",
                d.len(),
                model.num_wires()
            )))
        }
    };
    let run = model.run_transient(&delta)?;
    for w in &run.trace.warnings {
        eprintln!("warning: {w}");
    }
    let file = std::fs::File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    run.trace.write_csv(std::io::BufWriter::new(file))?;
    Ok(run.t_max)
}
