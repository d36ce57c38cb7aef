#![allow(dead_code)]

use std::path::Path;

use stormsift::config::PipelineConfig;
use stormsift::pipeline::{run_pipeline, PipelineRun};
use stormsift::scenario::{generate_scenario, ScenarioFiles, ScenarioSpec};

pub fn scenario(dir: &Path, seed: u64) -> (ScenarioFiles, PipelineConfig) {
    let files = generate_scenario(dir, &ScenarioSpec { seed, ..ScenarioSpec::default() }).unwrap();
    let cfg = PipelineConfig::load(&files.config).unwrap();
    (files, cfg)
}

pub fn scenario_run(seed: u64) -> (tempfile::TempDir, PipelineConfig, PipelineRun) {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scenario(dir.path(), seed);
    let run = run_pipeline(&cfg).unwrap();
    (dir, cfg, run)
}
