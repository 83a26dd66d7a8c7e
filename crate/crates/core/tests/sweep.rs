mod common;

use std::fs;
use std::path::Path;

use schwinger::io;
use schwinger::sweep::{self, plan_sweep, run_jobs, RunOptions};
use schwinger::units::Case;
use schwinger::Error;

fn aggregate_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join(sweep::AGGREGATE))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap())).collect()
}

#[test]
fn plan_has_one_job_per_case_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny(Case::II);
    cfg.sweep.count = 61;
    cfg.sweep.p_min = -1.5;
    cfg.sweep.p_max = 1.5;
    cfg.sweep.cases = vec![Case::I, Case::II];
    let plan = plan_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(plan.jobs.len(), 122);
    assert_eq!(plan.pending().len(), 122);
    let again = plan_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(plan.jobs, again.jobs);
}

#[test]
fn resume_skips_finished_channels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny(Case::I);
    let mut plan = plan_sweep(&cfg, dir.path()).unwrap();
    let out = run_jobs(&mut plan, &RunOptions { workers: 2, limit: Some(3), force: false }).unwrap();
    assert_eq!(out.ran, 3);
    assert!(out.aggregate.is_none());

    let mut replanned = plan_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(replanned.pending().len(), 2);
    let out = run_jobs(&mut replanned, &RunOptions::workers(2)).unwrap();
    assert_eq!(out.ran, 2);
    assert!(out.aggregate.is_some());
}

#[test]
fn changed_physics_in_the_same_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny(Case::I);
    plan_sweep(&cfg, dir.path()).unwrap();
    let mut other = cfg.clone();
    other.fields.e_phi0 = 2.6;
    match plan_sweep(&other, dir.path()) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "output"),
        r => panic!("expected refusal, got {r:?}"),
    }
}

#[test]
fn tampered_channel_file_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny(Case::I);
    let mut plan = plan_sweep(&cfg, dir.path()).unwrap();
    run_jobs(&mut plan, &RunOptions::workers(1)).unwrap();
    let victim = plan.channel_dir().join(plan.jobs[1].klb_name());
    let mut bytes = fs::read(&victim).unwrap();
    bytes[20] ^= 0xff;
    fs::write(&victim, bytes).unwrap();
    let plan = plan_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(plan.pending().len(), 1);
    assert_eq!(plan.pending()[0].index, 1);
}

#[test]
fn aggregates_do_not_depend_on_worker_count() {
    let mut cfg = common::tiny(Case::II);
    cfg.sweep.cases = vec![Case::I, Case::II];
    let mut runs = Vec::new();
    for workers in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = plan_sweep(&cfg, dir.path()).unwrap();
        run_jobs(&mut plan, &RunOptions::workers(workers)).unwrap();
        runs.push(aggregate_bytes(dir.path()));
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn single_channel_aggregate_is_the_channel_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny(Case::III);
    cfg.sweep.count = 1;
    cfg.sweep.p_min = 0.6;
    let mut plan = plan_sweep(&cfg, dir.path()).unwrap();
    let agg = run_jobs(&mut plan, &RunOptions::workers(1)).unwrap().aggregate.unwrap();
    let job = &plan.jobs[0];
    let rec: sweep::ChannelRecord = io::read_json(&plan.channel_dir().join(job.sidecar_name())).unwrap();
    let rows = io::read_klb1(&plan.channel_dir().join(job.klb_name())).unwrap().rows();
    let c = agg.case(Case::III).unwrap();
    assert_eq!(c.rate, vec![rec.rate]);
    assert_eq!(c.p_perp, rows[0]);
    let last = rec.snapshots.len() - 1;
    let emd = io::read_klb1(&dir.path().join("aggregate/emd_III_t6.klb")).unwrap();
    let expect: Vec<f64> = rows[last + 1].iter().map(|o| o / rec.dk).collect();
    assert_eq!(emd.data, expect);
    assert_eq!(sweep::load(dir.path()).unwrap(), agg);
}

#[test]
fn manifest_lists_every_output_with_a_valid_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = plan_sweep(&common::tiny(Case::I), dir.path()).unwrap();
    run_jobs(&mut plan, &RunOptions::workers(2)).unwrap();
    let m: io::RunManifest = io::read_json(&dir.path().join(sweep::MANIFEST)).unwrap();
    assert_eq!(m.files.iter().filter(|f| f.path.starts_with(sweep::CHANNELS)).count(), 10);
    assert!(m.verify(dir.path()).is_empty());
}
