//! Schedule, output and checkpoint behavior of the experiment harness.

use std::path::{Path, PathBuf};
use std::process::Command;

use qcombo_core::algorithms::{Algorithm, IdentityEncoding};
use qcombo_core::harness::{
    self, final_cycle, read_csv, Controller, ExperimentConfig, LossRecord, MetricRecord, ReferencePolicy, ScheduleConfig, Session,
};
use qcombo_core::neural::Checkpoint;
use qcombo_core::sim::FlowPeriod;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Three short cycles with a small network, fast enough for unit runs.
fn tiny(rows: usize, cols: usize, rate: u32) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(rows, cols, vec![rate; rows], vec![rate; cols]);
    c.schedule = ScheduleConfig { horizon: 700, warmup: 100, train_steps: 100, eval_steps: 100, record_last: 50, ..Default::default() };
    c.learner.hidden = vec![16, 16];
    c.learner.actor_hidden = vec![8];
    c.learner.rnn_hidden = 8;
    c.learner.mixer_embed = 8;
    c.learner.minibatches = 2;
    c.learner.batch_size = 8;
    c.learner.reward_scale = 0.1;
    c
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn default_schedule_arithmetic() {
    let s = ScheduleConfig::default();
    assert_eq!(s.cycles(), 13);
    assert_eq!(s.decisions(s.record_last), 40);
    assert_eq!(s.decisions(s.train_steps), 80);
    assert_eq!(s.cycle_start(0), 1000);
    assert_eq!(s.cycle_start(12), 10_600);
    assert!(s.cycle_start(12) + s.train_steps + s.eval_steps <= s.horizon);
}

#[test]
fn evaluation_records_cover_the_tail_of_each_window() {
    let config = tiny(1, 1, 400);
    let records = harness::run_reference(&config, ReferencePolicy::Static, None).unwrap();
    let s = &config.schedule;
    assert_eq!(records.len(), s.cycles() * s.decisions(s.record_last));
    for c in 0..s.cycles() {
        let steps: Vec<u64> = records.iter().filter(|r| r.segment == c).map(|r| r.step).collect();
        let end = s.cycle_start(c) + s.train_steps + s.eval_steps;
        let expected: Vec<u64> = (end - s.record_last + 5..=end).step_by(5).collect();
        assert_eq!(steps, expected, "cycle {c}");
    }
    assert_eq!(final_cycle(&records).len(), 10);
}

#[test]
fn evaluation_leaves_parameters_and_buffer_untouched() {
    for algorithm in Algorithm::ALL {
        let mut config = tiny(1, 2, 500);
        config.learner.algorithm = algorithm;
        let learner = harness::build_learner(&config).unwrap();
        let mut session = Session::new(config, Controller::Learner(Box::new(learner)), true).unwrap();
        session.warmup().unwrap();
        session.train_window(0).unwrap();
        let before = session.learner().unwrap().to_checkpoint(0, [0; 32]).unwrap().to_bytes();
        let buffered = session.buffer().len();
        let t = session.env.time_step();
        session.eval_window(0).unwrap();
        let after = session.learner().unwrap().to_checkpoint(0, [0; 32]).unwrap().to_bytes();
        assert_eq!(before, after, "{algorithm}");
        assert_eq!(session.buffer().len(), buffered);
        assert_eq!(session.env.time_step(), t + 100);
    }
}

#[test]
fn empty_network_has_zero_traffic_metrics() {
    let config = tiny(2, 2, 0);
    for policy in [ReferencePolicy::Static, ReferencePolicy::Random] {
        let records = harness::run_reference(&config, policy, None).unwrap();
        for r in &records {
            assert_eq!((r.mean_queue, r.mean_wait, r.mean_delay), (0.0, 0.0, 0.0));
            // Only phase changes are penalized.
            assert!(r.global_reward <= 0.0 && r.global_reward >= -1.0);
        }
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut config = tiny(1, 2, 600);
    for (i, d) in dirs.iter().enumerate() {
        config.run.seed = if i == 2 { 9 } else { 4 };
        harness::run_training(&config, Some(d.path())).unwrap();
    }
    for f in ["metrics.csv", "losses.csv", "metrics/cycle_02.csv", "checkpoint.qckp", "checkpoints/cycle_00.qckp"] {
        assert_eq!(read(&dirs[0].path().join(f)), read(&dirs[1].path().join(f)), "{f}");
    }
    assert_ne!(read(&dirs[0].path().join("metrics.csv")), read(&dirs[2].path().join("metrics.csv")));
}

#[test]
fn training_outputs_are_complete_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(1, 1, 500);
    config.learner.algorithm = Algorithm::Coma;
    let outcome = harness::run_training(&config, Some(dir.path())).unwrap();
    let back: Vec<MetricRecord> = read_csv(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(back, outcome.records);
    let losses: Vec<LossRecord> = read_csv(&dir.path().join("losses.csv")).unwrap();
    assert_eq!(losses.len(), outcome.losses.len());
    assert!(losses.iter().all(|l| l.critic_loss.is_some() && l.actor_loss.is_some() && l.q_loss.is_none()));
    for c in 0..3 {
        assert!(dir.path().join(format!("metrics/cycle_{c:02}.csv")).exists());
        assert!(dir.path().join(format!("checkpoints/cycle_{c:02}.qckp")).exists());
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains(&config.hash_hex()));
}

#[test]
fn checkpoint_evaluation_is_repeatable_and_grid_checked() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(1, 2, 600);
    harness::run_training(&config, Some(dir.path())).unwrap();
    let ck = Checkpoint::load(&dir.path().join("checkpoint.qckp")).unwrap();
    let a = harness::run_evaluation(&config, &ck, None).unwrap();
    let b = harness::run_evaluation(&config, &ck, None).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.epsilon == 0.0));
    let err = harness::run_evaluation(&tiny(2, 2, 600), &ck, None).unwrap_err();
    assert!(err.to_string().contains("1x2"), "{err}");
}

#[test]
fn program_runs_are_segmented_by_flow_period() {
    let mut config = ExperimentConfig::load(&configs_dir().join("generalize_flow1_test.toml")).unwrap();
    config.schedule.horizon = 6000;
    let records = harness::run_program(&config, Controller::Reference(ReferencePolicy::Static), None, "test").unwrap();
    assert_eq!(records.len(), 1200);
    for (p, range) in [(0, 5..=2000), (1, 2005..=4000), (2, 4005..=6000)] {
        let steps: Vec<u64> = records.iter().filter(|r| r.segment == p).map(|r| r.step).collect();
        assert_eq!(steps.len(), 400);
        assert_eq!((steps[0], *steps.last().unwrap()), (*range.start(), *range.end()));
    }
}

#[test]
fn one_hot_checkpoints_cannot_transfer() {
    let mut config = tiny(2, 2, 500);
    config.learner.identity = IdentityEncoding::OneHot;
    let outcome = harness::run_training(&config, None).unwrap();
    let ck = outcome.learner.to_checkpoint(0, config.hash()).unwrap();
    let target = tiny(6, 6, 300);
    let err = harness::transfer_learner(&ck, &target).unwrap_err().to_string();
    assert!(err.contains("coordinates"), "{err}");
}

#[test]
fn two_by_two_policy_runs_on_six_by_six() {
    let outcome = harness::run_training(&tiny(2, 2, 500), None).unwrap();
    let ck = outcome.learner.to_checkpoint(0, [0; 32]).unwrap();
    let mut target = ExperimentConfig::load(&configs_dir().join("6x6_transfer.toml")).unwrap();
    target.schedule = ScheduleConfig { horizon: 300, ..tiny(1, 1, 0).schedule };
    let records = harness::run_transfer(&target, &ck, None).unwrap();
    assert_eq!(records.len(), 60);
    for r in &records {
        assert!(r.global_reward.is_finite());
        assert_eq!(r.phase_list().len(), 36);
    }
    assert!(records.last().unwrap().mean_queue + records.last().unwrap().mean_delay > 0.0);
}

#[test]
fn shipped_configs_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
            n += 1;
        }
    }
    assert!(n >= 9);
    let test = ExperimentConfig::load(&configs_dir().join("generalize_flow2_test.toml")).unwrap();
    let expected = [(0, 2000, [1000, 580], [110, 920]), (2000, 4000, [1000, 800], [900, 700]), (4000, 6000, [1400, 1000], [400, 900])];
    for (p, (s, e, h, v)) in test.flow.periods.iter().zip(expected) {
        assert_eq!(*p, FlowPeriod { start: s, end: e, horizontal: h.to_vec(), vertical: v.to_vec() });
    }
}

#[test]
fn command_line_train_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    let mut config = tiny(1, 1, 400);
    config.schedule.horizon = 500;
    std::fs::write(&cfg, config.to_toml()).unwrap();
    let bin = env!("CARGO_BIN_EXE_qcombo");
    let out = dir.path().join("run");
    let status = Command::new(bin)
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "3", "--algo", "idqn", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("checkpoint.qckp").exists());
    let eval = dir.path().join("eval");
    let status = Command::new(bin)
        .args(["eval", "--checkpoint"])
        .arg(out.join("checkpoint.qckp"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&eval)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(eval.join("metrics.csv").exists());
    config.learner.algorithm = Algorithm::Vdn;
    let vdn = dir.path().join("vdn.toml");
    std::fs::write(&vdn, config.to_toml()).unwrap();
    let bad = Command::new(bin).args(["sweep", "--lambda", "0.5,1", "--config"]).arg(&vdn).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("qcombo"));
}
