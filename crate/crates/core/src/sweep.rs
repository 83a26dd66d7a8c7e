//! Sweeps over transverse-momentum channels.
//!
//! Every (case, channel index) pair is an independent job. A job writes two
//! immutable files under `channels/`, named by its identity hash: a KLB1
//! array (p⊥ axis followed by one occupation row per snapshot) and a JSON
//! sidecar with the N(t) samples and the fitted rate. Snapshot spectra are
//! averaged over the same Gaussian time window as the rate fit. A job counts
//! as done when its sidecar carries the current config hash and the KLB1
//! checksum it records still matches, so a killed sweep resumes where it
//! stopped.
//!
//! Aggregates are built in one ordered pass that only reads channel files,
//! which makes them byte-identical for any worker count or resume history.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Array, CsvTable, RunManifest, Tagged};
use crate::observables::{fit_rate, fit_smoothed_rate, ChannelEngine, Emd2d, MomentumSpectrum};
use crate::units::{to_config_document, Case, Channel, SimConfig};

pub const LEDGER: &str = "ledger.json";
pub const CONFIG: &str = "config.toml";
pub const MANIFEST: &str = "manifest.json";
pub const CHANNELS: &str = "channels";
pub const AGGREGATE: &str = "aggregate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub case: Case,
    pub index: usize,
    pub p_par: f64,
    pub id: String,
}

impl Job {
    pub fn klb_name(&self) -> String {
        format!("{}.klb", self.id)
    }
    pub fn sidecar_name(&self) -> String {
        format!("{}.json", self.id)
    }
}

pub fn job_id(case: Case, index: usize, config_hash: &str) -> String {
    io::sha256_hex(format!("{case}|{index}|{config_hash}").as_bytes())[..16].to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub case: Case,
    pub index: usize,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
    #[serde(default)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub config_hash: String,
    pub jobs: BTreeMap<String, LedgerEntry>,
}

impl Ledger {
    pub fn done(&self, id: &str) -> bool {
        self.jobs.get(id).is_some_and(|e| e.status == JobStatus::Done)
    }
}

/// Scalars stored next to each channel array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub job: String,
    pub config_hash: String,
    pub case: Case,
    pub index: usize,
    pub p_par: Tagged,
    pub units: String,
    pub dk: f64,
    pub times: Vec<f64>,
    pub particle_number: Vec<f64>,
    /// Pair-creation rate dN/dt of this channel (one spin state).
    pub rate: f64,
    pub rate_error: f64,
    pub rate_relative_residual: f64,
    pub fit_window: (f64, f64),
    pub smoothing: f64,
    /// Times of the occupation rows in the KLB1 file, in row order.
    pub snapshots: Vec<f64>,
    pub klb: String,
    pub klb_sha256: String,
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub config: SimConfig,
    pub config_doc: String,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub jobs: Vec<Job>,
    pub ledger: Ledger,
}

impl SweepPlan {
    pub fn cases(&self) -> Vec<Case> {
        let mut c: Vec<Case> = self.jobs.iter().map(|j| j.case).collect();
        c.dedup();
        c
    }

    pub fn pending(&self) -> Vec<&Job> {
        self.jobs.iter().filter(|j| !self.ledger.done(&j.id)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.pending().is_empty()
    }

    pub fn channel_dir(&self) -> PathBuf {
        self.out_dir.join(CHANNELS)
    }

    pub fn aggregate_dir(&self) -> PathBuf {
        self.out_dir.join(AGGREGATE)
    }

    pub fn case_config(&self, case: Case) -> Result<SimConfig> {
        self.config.for_case(case)
    }

    /// Snapshot times written per channel: the configured ones plus the
    /// fit-window ends, which the rate maps are built from.
    pub fn snapshot_times(&self) -> Vec<f64> {
        snapshot_times(&self.config)
    }

    fn check_job(&self, job: &Job) -> bool {
        let dir = self.channel_dir();
        let Ok(rec) = io::read_json::<ChannelRecord>(&dir.join(job.sidecar_name())) else { return false };
        rec.config_hash == self.config_hash
            && io::file_sha256(&dir.join(&rec.klb)).is_ok_and(|h| h == rec.klb_sha256)
    }
}

fn snapshot_times(cfg: &SimConfig) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.run.snapshots.clone();
    t.push(cfg.run.fit_window.0);
    t.push(cfg.run.fit_window.1);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

pub fn config_hash(cfg: &SimConfig) -> String {
    io::sha256_hex(to_config_document(cfg).as_bytes())
}

/// Lay out the jobs for `cfg` under `out_dir`, picking up finished work
/// from a previous run with the same configuration.
pub fn plan_sweep(cfg: &SimConfig, out_dir: &Path) -> Result<SweepPlan> {
    let plan = inspect(cfg, out_dir)?;
    fs::create_dir_all(out_dir.join(CHANNELS)).map_err(|e| Error::io(out_dir, e))?;
    io::atomic_write(&out_dir.join(CONFIG), plan.config_doc.as_bytes())?;
    io::write_json(&out_dir.join(LEDGER), &plan.ledger)?;
    Ok(plan)
}

/// The plan `plan_sweep` would produce, without touching the directory.
pub fn inspect(cfg: &SimConfig, out_dir: &Path) -> Result<SweepPlan> {
    cfg.validate()?;
    let cases = if cfg.sweep.cases.is_empty() { vec![cfg.fields.case] } else { cfg.sweep.cases.clone() };
    for &case in &cases {
        cfg.for_case(case)?;
    }
    let config_doc = to_config_document(cfg);
    let hash = io::sha256_hex(config_doc.as_bytes());

    let ledger_path = out_dir.join(LEDGER);
    let previous: Option<Ledger> = if ledger_path.exists() { Some(io::read_json(&ledger_path)?) } else { None };
    if let Some(prev) = &previous {
        if prev.config_hash != hash {
            return Err(Error::config(
                "output",
                format!(
                    "{} holds a sweep with a different configuration (hash {} vs {}); use a fresh directory",
                    out_dir.display(),
                    &prev.config_hash[..12.min(prev.config_hash.len())],
                    &hash[..12]
                ),
            ));
        }
    }
    let grid = cfg.sweep.p_grid();
    let jobs: Vec<Job> = cases
        .iter()
        .flat_map(|&case| {
            let hash = &hash;
            grid.iter().enumerate().map(move |(index, &p_par)| Job { case, index, p_par, id: job_id(case, index, hash) })
        })
        .collect();

    let mut plan = SweepPlan {
        config: cfg.clone(),
        config_doc,
        config_hash: hash.clone(),
        out_dir: out_dir.to_path_buf(),
        jobs,
        ledger: Ledger { config_hash: hash, jobs: BTreeMap::new() },
    };
    let prev_jobs = previous.map(|l| l.jobs).unwrap_or_default();
    for job in &plan.jobs {
        if plan.check_job(job) {
            let seconds = prev_jobs.get(&job.id).map_or(0.0, |e| e.seconds);
            plan.ledger.jobs.insert(
                job.id.clone(),
                LedgerEntry { case: job.case, index: job.index, status: JobStatus::Done, diagnostics: None, seconds },
            );
        } else if let Some(e) = prev_jobs.get(&job.id).filter(|e| e.status == JobStatus::Failed) {
            plan.ledger.jobs.insert(job.id.clone(), e.clone());
        }
    }
    Ok(plan)
}

/// Run one channel and write its files. Single-threaded.
pub fn run_channel(cfg: &SimConfig, job: &Job, config_hash: &str, dir: &Path) -> Result<ChannelRecord> {
    let with_channel = |e: Error| match e {
        Error::Numerical { msg, .. } => Error::Numerical { msg, channel: Some(format!("{} #{}", job.case, job.index)) },
        other => other,
    };
    let channel = Channel::new(job.p_par);
    let mut engine = ChannelEngine::new(cfg, channel).map_err(with_channel)?;

    let r = &cfg.run;
    let steps = (r.t_max / r.sample_dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * r.sample_dt).collect();
    let series = engine.particle_number_series(&times);
    let fit = if r.smoothing > 0.0 {
        fit_smoothed_rate(&series, r.fit_window, r.smoothing)
    } else {
        fit_rate(&series, r.fit_window)
    }
    .map_err(with_channel)?;

    let snaps = snapshot_times(cfg);
    let mut rows = Vec::with_capacity(snaps.len() + 1);
    let mut dk = 0.0;
    for (i, &t) in snaps.iter().enumerate() {
        let m = engine.filtered_momentum_spectrum(t, r.smoothing);
        if i == 0 {
            dk = m.dk;
            rows.push(m.p_perp);
        }
        rows.push(m.occupation);
    }
    let array = Array::from_rows(&rows)?;
    let klb_bytes = io::encode_klb1(&array);
    io::atomic_write(&dir.join(job.klb_name()), &klb_bytes)?;

    let record = ChannelRecord {
        job: job.id.clone(),
        config_hash: config_hash.to_string(),
        case: job.case,
        index: job.index,
        p_par: Tagged::natural(job.p_par),
        units: "natural".into(),
        dk,
        times: series.times,
        particle_number: series.values,
        rate: fit.rate,
        rate_error: fit.rate_error,
        rate_relative_residual: fit.relative_residual,
        fit_window: r.fit_window,
        smoothing: r.smoothing,
        snapshots: snaps,
        klb: job.klb_name(),
        klb_sha256: io::sha256_hex(&klb_bytes),
    };
    // The sidecar goes last: its presence marks the job complete.
    io::write_json(&dir.join(job.sidecar_name()), &record)?;
    Ok(record)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub workers: usize,
    /// Stop after this many jobs (the rest stay pending).
    pub limit: Option<usize>,
    /// Recompute jobs that are already complete.
    pub force: bool,
}

impl RunOptions {
    pub fn workers(workers: usize) -> Self {
        RunOptions { workers, limit: None, force: false }
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub ran: usize,
    pub failed: Vec<(String, String)>,
    /// Present once every job is complete.
    pub aggregate: Option<SweepAggregate>,
}

pub fn run_jobs(plan: &mut SweepPlan, opts: &RunOptions) -> Result<SweepOutcome> {
    if opts.workers == 0 {
        return Err(Error::config("workers", "need at least one worker"));
    }
    let mut todo: Vec<Job> = if opts.force {
        plan.jobs.clone()
    } else {
        plan.pending().into_iter().cloned().collect()
    };
    if let Some(n) = opts.limit {
        todo.truncate(n);
    }
    let configs: BTreeMap<Case, SimConfig> =
        plan.cases().into_iter().map(|c| Ok((c, plan.case_config(c)?))).collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Contract(format!("worker pool: {e}")))?;
    let dir = plan.channel_dir();
    let ledger_path = plan.out_dir.join(LEDGER);
    let hash = plan.config_hash.clone();
    let ledger = Mutex::new(std::mem::take(&mut plan.ledger));

    let results: Vec<Result<()>> = pool.install(|| {
        todo.par_iter()
            .map(|job| {
                let start = Instant::now();
                let outcome = run_channel(&configs[&job.case], job, &hash, &dir);
                let entry = LedgerEntry {
                    case: job.case,
                    index: job.index,
                    status: if outcome.is_ok() { JobStatus::Done } else { JobStatus::Failed },
                    diagnostics: outcome.as_ref().err().map(|e| e.to_string()),
                    seconds: start.elapsed().as_secs_f64(),
                };
                let mut l = ledger.lock().unwrap_or_else(|p| p.into_inner());
                l.jobs.insert(job.id.clone(), entry);
                io::write_json(&ledger_path, &*l)
            })
            .collect()
    });
    plan.ledger = ledger.into_inner().unwrap_or_else(|p| p.into_inner());
    for r in results {
        r?;
    }

    let failed: Vec<(String, String)> = plan
        .ledger
        .jobs
        .iter()
        .filter(|(_, e)| e.status == JobStatus::Failed)
        .map(|(id, e)| (id.clone(), e.diagnostics.clone().unwrap_or_default()))
        .collect();
    let aggregate = if plan.is_complete() { Some(aggregate(plan)?) } else { None };
    Ok(SweepOutcome { ran: todo.len(), failed, aggregate })
}

/// Everything the sweep produced for one case, channels in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseAggregate {
    pub case: Case,
    pub p_par: Vec<f64>,
    pub dp: f64,
    pub p_perp: Vec<f64>,
    pub dk: f64,
    pub rate: Vec<f64>,
    pub rate_error: Vec<f64>,
    pub times: Vec<f64>,
    /// Per-channel N(t), one row per channel.
    pub particle_number: Vec<Vec<f64>>,
    pub snapshots: Vec<f64>,
    /// Occupations per (snapshot, channel, p⊥ slot).
    pub occupation: Vec<Vec<Vec<f64>>>,
    pub fit_window: (f64, f64),
}

impl CaseAggregate {
    fn snapshot_index(&self, t: f64) -> Option<usize> {
        self.snapshots.iter().position(|&s| (s - t).abs() < 1e-9)
    }

    pub fn momentum_spectrum(&self, channel: usize, t: f64) -> Option<MomentumSpectrum> {
        let k = self.snapshot_index(t)?;
        Some(MomentumSpectrum {
            t,
            p_par: self.p_par[channel],
            dk: self.dk,
            p_perp: self.p_perp.clone(),
            occupation: self.occupation[k][channel].clone(),
        })
    }

    /// Electron momentum distribution at a snapshot time (density per unit p⊥).
    pub fn emd(&self, t: f64) -> Option<Emd2d> {
        let k = self.snapshot_index(t)?;
        let values = self.occupation[k].iter().map(|row| row.iter().map(|o| o / self.dk).collect()).collect();
        Some(Emd2d { p_par: self.p_par.clone(), p_perp: self.p_perp.clone(), values })
    }

    /// Creation-rate map: occupation growth across the fit window.
    pub fn rate_map(&self) -> Emd2d {
        let (t0, t1) = self.fit_window;
        let a = &self.occupation[self.snapshot_index(t0).expect("fit window start is a snapshot")];
        let b = &self.occupation[self.snapshot_index(t1).expect("fit window end is a snapshot")];
        let values = a
            .iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (y - x) / (t1 - t0) / self.dk).collect())
            .collect();
        Emd2d { p_par: self.p_par.clone(), p_perp: self.p_perp.clone(), values }
    }

    /// Total over channels of both spin states: 2·Σ γ Δp∥ · weight.
    pub fn total_rate(&self, weight: f64) -> f64 {
        2.0 * self.rate.iter().sum::<f64>() * self.dp * weight
    }

    pub fn total_particle_number(&self, weight: f64) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| 2.0 * self.particle_number.iter().map(|row| row[i]).sum::<f64>() * self.dp * weight)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAggregate {
    pub weight: f64,
    pub cases: Vec<CaseAggregate>,
}

impl SweepAggregate {
    pub fn case(&self, case: Case) -> Option<&CaseAggregate> {
        self.cases.iter().find(|c| c.case == case)
    }
}

/// Read every channel file of a complete plan in (case, index) order.
pub fn collect(plan: &SweepPlan) -> Result<SweepAggregate> {
    if !plan.is_complete() {
        return Err(Error::Contract(format!("{} jobs still pending", plan.pending().len())));
    }
    let dir = plan.channel_dir();
    let grid = plan.config.sweep.p_grid();
    let dp = if grid.len() > 1 { grid[1] - grid[0] } else { 1.0 };
    let mut cases = Vec::new();
    for case in plan.cases() {
        let mut agg = CaseAggregate {
            case,
            p_par: Vec::new(),
            dp,
            p_perp: Vec::new(),
            dk: 0.0,
            rate: Vec::new(),
            rate_error: Vec::new(),
            times: Vec::new(),
            particle_number: Vec::new(),
            snapshots: plan.snapshot_times(),
            occupation: vec![Vec::new(); plan.snapshot_times().len()],
            fit_window: plan.config.run.fit_window,
        };
        for job in plan.jobs.iter().filter(|j| j.case == case) {
            let rec: ChannelRecord = io::read_json(&dir.join(job.sidecar_name()))?;
            let arr = io::read_klb1(&dir.join(&rec.klb))?;
            let mut rows = arr.rows().into_iter();
            let p_perp = rows.next().unwrap_or_default();
            if agg.p_perp.is_empty() {
                agg.p_perp = p_perp;
                agg.dk = rec.dk;
                agg.times = rec.times.clone();
            }
            for (k, row) in rows.enumerate() {
                agg.occupation[k].push(row);
            }
            agg.p_par.push(rec.p_par.value);
            agg.rate.push(rec.rate);
            agg.rate_error.push(rec.rate_error);
            agg.particle_number.push(rec.particle_number);
        }
        cases.push(agg);
    }
    Ok(SweepAggregate { weight: plan.config.sweep.weight, cases })
}

fn time_tag(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

/// Build and write the aggregate files and the run manifest.
pub fn aggregate(plan: &SweepPlan) -> Result<SweepAggregate> {
    let agg = collect(plan)?;
    let out = plan.aggregate_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut put = |name: String| {
        let rel = PathBuf::from(AGGREGATE).join(&name);
        written.push(rel);
        out.join(name)
    };

    let mut totals = BTreeMap::new();
    for c in &agg.cases {
        let tag = c.case.as_str();
        let mut profile = CsvTable::new(&["p_par_over_c", "rate", "rate_error"])
            .meta("quantity", "pair-creation rate per channel and spin state, dN/dt")
            .meta("units", "natural")
            .meta("case", tag)
            .meta("fit_window", format!("{:?}", c.fit_window));
        for i in 0..c.p_par.len() {
            profile.push(vec![c.p_par[i], c.rate[i], c.rate_error[i]]);
        }
        io::write_csv(&put(format!("rate_profile_{tag}.csv")), &profile)?;

        let mut n = CsvTable::new(&["t", "N_total"])
            .meta("quantity", "created pairs, summed over channels and spin")
            .meta("units", "natural")
            .meta("case", tag)
            .meta("weight", agg.weight);
        for (t, v) in c.times.iter().zip(c.total_particle_number(agg.weight)) {
            n.push(vec![*t, v]);
        }
        io::write_csv(&put(format!("n_total_{tag}.csv")), &n)?;

        let mut maps: Vec<(String, Emd2d, Option<f64>)> = c
            .snapshots
            .iter()
            .map(|&t| (format!("emd_{tag}_t{}", time_tag(t)), c.emd(t).expect("snapshot"), Some(t)))
            .collect();
        maps.push((format!("rate_map_{tag}"), c.rate_map(), None));
        for (name, map, t) in maps {
            io::write_klb1(&put(format!("{name}.klb")), &Array::from_rows(&map.values)?)?;
            let axes = serde_json::json!({
                "case": tag,
                "units": "natural",
                "t": t,
                "rows": "p_par_over_c",
                "cols": "p_perp_over_c",
                "p_par": map.p_par,
                "p_perp": map.p_perp,
            });
            io::write_json(&put(format!("{name}.json")), &axes)?;
        }
        totals.insert(tag.to_string(), Tagged::natural(c.total_rate(agg.weight)));
    }
    io::write_json(&put("totals.json".into()), &totals)?;

    let mut manifest = RunManifest::new(plan.config_doc.clone());
    for job in &plan.jobs {
        for name in [job.klb_name(), job.sidecar_name()] {
            manifest.add_file(&plan.out_dir, PathBuf::from(CHANNELS).join(name))?;
        }
        if let Some(e) = plan.ledger.jobs.get(&job.id) {
            manifest.timings.push((format!("{} #{}", job.case, job.index), e.seconds));
        }
    }
    for rel in &written {
        manifest.add_file(&plan.out_dir, rel)?;
    }
    io::write_json(&plan.out_dir.join(MANIFEST), &manifest)?;
    Ok(agg)
}

/// Reload the aggregate of a finished sweep directory (read-only).
pub fn load(out_dir: &Path) -> Result<SweepAggregate> {
    let cfg_path = out_dir.join(CONFIG);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg = crate::units::parse_config(&text)?;
    collect(&inspect(&cfg, out_dir)?)
}
