//! Experiment runner, trace persistence and replay.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::episode::{run_episode, EpisodeOptions};
use super::HarnessError;
use crate::agents::{BackendFactory, BackendSpec};
use crate::metrics::{
    aggregate, chance_baseline, episode_metrics, AggregateMetrics, BaselineReport, EpisodeMetrics,
    EpisodeTrace,
};
use crate::render::CameraSpec;
use crate::world::{generate_scenario, Condition, ScenarioConfig, MAX_STEPS};

/// Bumped whenever a persisted field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub conditions: Vec<Condition>,
    pub backend: BackendSpec,
    pub base_seed: u64,
    pub seeds_per_condition: u32,
    pub runs_per_seed: u32,
    pub max_steps: u32,
    pub output_dir: PathBuf,
    pub save_frames: bool,
    /// Episodes executed concurrently. Does not affect results.
    pub parallel: usize,
}

impl RunConfig {
    /// 3 seeds x 7 runs, 100-step cap.
    pub fn new(conditions: Vec<Condition>, backend: BackendSpec, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            conditions,
            backend,
            base_seed: 0,
            seeds_per_condition: 3,
            runs_per_seed: 7,
            max_steps: MAX_STEPS,
            output_dir: output_dir.into(),
            save_frames: false,
            parallel: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn episodes_per_condition(&self) -> u32 {
        self.seeds_per_condition * self.runs_per_seed
    }
}

/// Stable 64-bit episode seed from the declared indices only.
pub fn episode_seed(base_seed: u64, condition: Condition, seed_index: u32, run_index: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"mirrorbench/episode/v1");
    h.update(base_seed.to_le_bytes());
    h.update([condition.index()]);
    h.update(seed_index.to_le_bytes());
    h.update(run_index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// First line of every trace file; the only place a timestamp appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub created_at: String,
    pub condition: Condition,
    pub backend: String,
    pub base_seed: u64,
    pub seeds_per_condition: u32,
    pub runs_per_seed: u32,
    pub max_steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed_index: u32,
    pub run_index: u32,
    pub episode_seed: u64,
    pub scenario: ScenarioConfig,
    pub trace: EpisodeTrace,
    pub metrics: EpisodeMetrics,
    pub frame_digests: Vec<String>,
    pub prompts_hash: String,
    pub backend: BackendSpec,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateFile {
    pub schema_version: u32,
    pub condition: Condition,
    pub backend: String,
    /// `None` when every episode was aborted.
    pub aggregate: Option<AggregateMetrics>,
    pub baseline: BaselineReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedEpisode {
    pub seed_index: u32,
    pub run_index: u32,
    pub episode_seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub condition: Condition,
    pub attempted: u32,
    pub completed: u32,
    pub aborted: Vec<AbortedEpisode>,
    pub traces_path: PathBuf,
    pub aggregate_path: PathBuf,
    #[serde(skip)]
    pub aggregate: Option<AggregateMetrics>,
}

/// Episodes excluded for infrastructure reasons, per condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfrastructureReport {
    pub schema_version: u32,
    pub backend: String,
    pub conditions: Vec<ConditionOutcome>,
}

impl InfrastructureReport {
    pub fn aborted_total(&self) -> usize {
        self.conditions.iter().map(|c| c.aborted.len()).sum()
    }
}

pub fn traces_file_name(condition: Condition) -> String {
    format!("traces_{condition}.jsonl")
}

pub fn aggregate_file_name(condition: Condition) -> String {
    format!("aggregate_{condition}.json")
}

pub const INFRASTRUCTURE_FILE: &str = "infrastructure.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Runs every configured episode with a backend built from `cfg.backend`.
pub fn run_experiment(cfg: &RunConfig) -> Result<InfrastructureReport, HarnessError> {
    let factory = BackendFactory::new(cfg.backend.clone())?;
    run_experiment_with(cfg, &factory)
}

/// As [`run_experiment`] with an explicit factory (e.g. a pre-built client).
pub fn run_experiment_with(
    cfg: &RunConfig,
    factory: &BackendFactory,
) -> Result<InfrastructureReport, HarnessError> {
    if cfg.max_steps == 0 || cfg.max_steps > MAX_STEPS {
        return Err(HarnessError::Usage(format!("max_steps must be in 1..={MAX_STEPS}")));
    }
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel.max(1))
        .build()
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let backend_id = factory.spec().id();

    let mut outcomes = Vec::new();
    for &condition in &cfg.conditions {
        let jobs: Vec<(u32, u32)> = (0..cfg.seeds_per_condition)
            .flat_map(|s| (0..cfg.runs_per_seed).map(move |r| (s, r)))
            .collect();
        let results: Vec<Result<EpisodeRecord, AbortedEpisode>> = pool.install(|| {
            jobs.par_iter()
                .map(|&(seed_index, run_index)| run_one(cfg, factory, condition, seed_index, run_index))
                .collect()
        });

        let traces_path = cfg.output_dir.join(traces_file_name(condition));
        let header = TraceHeader {
            schema_version: SCHEMA_VERSION,
            created_at: chrono::Utc::now().to_rfc3339(),
            condition,
            backend: backend_id.clone(),
            base_seed: cfg.base_seed,
            seeds_per_condition: cfg.seeds_per_condition,
            runs_per_seed: cfg.runs_per_seed,
            max_steps: cfg.max_steps,
        };
        let mut records = Vec::new();
        let mut aborted = Vec::new();
        for r in results {
            match r {
                Ok(rec) => records.push(rec),
                Err(a) => {
                    tracing::warn!(%condition, seed = a.seed_index, run = a.run_index, error = %a.error, "episode aborted");
                    aborted.push(a);
                }
            }
        }
        write_traces(&traces_path, &header, &records)?;

        let metrics: Vec<EpisodeMetrics> = records.iter().map(|r| r.metrics).collect();
        let agg = aggregate(&metrics).ok();
        let aggregate_path = cfg.output_dir.join(aggregate_file_name(condition));
        let file = AggregateFile {
            schema_version: SCHEMA_VERSION,
            condition,
            backend: backend_id.clone(),
            aggregate: agg.clone(),
            baseline: chance_baseline(condition),
        };
        write_json(&aggregate_path, &file)?;

        outcomes.push(ConditionOutcome {
            condition,
            attempted: jobs.len() as u32,
            completed: records.len() as u32,
            aborted,
            traces_path,
            aggregate_path,
            aggregate: agg,
        });
    }

    let report = InfrastructureReport {
        schema_version: SCHEMA_VERSION,
        backend: backend_id,
        conditions: outcomes,
    };
    write_json(&cfg.output_dir.join(INFRASTRUCTURE_FILE), &report)?;
    Ok(report)
}

fn run_one(
    cfg: &RunConfig,
    factory: &BackendFactory,
    condition: Condition,
    seed_index: u32,
    run_index: u32,
) -> Result<EpisodeRecord, AbortedEpisode> {
    let seed = episode_seed(cfg.base_seed, condition, seed_index, run_index);
    let abort = |error: String| AbortedEpisode { seed_index, run_index, episode_seed: seed, error };
    let mut scenario = generate_scenario(condition, seed);
    scenario.max_steps = cfg.max_steps;
    let opts = EpisodeOptions {
        camera: CameraSpec::default(),
        frame_dir: cfg.save_frames.then(|| {
            cfg.output_dir
                .join("frames")
                .join(condition.to_string())
                .join(format!("s{seed_index}_r{run_index}"))
        }),
    };
    let mut agent = factory.agent_for(&scenario);
    let run = run_episode(&scenario, agent.as_mut(), &factory.spec().id(), &opts)
        .map_err(|e| abort(e.to_string()))?;
    let metrics = episode_metrics(&run.trace).map_err(|e| abort(format!("invalid trace: {e}")))?;
    Ok(EpisodeRecord {
        seed_index,
        run_index,
        episode_seed: seed,
        scenario,
        trace: run.trace,
        metrics,
        frame_digests: run.frame_digests,
        prompts_hash: run.prompts_hash,
        backend: factory.spec().clone(),
        temperature: factory.spec().temperature(),
    })
}

fn write_traces(path: &Path, header: &TraceHeader, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut line = |v: String| writeln!(w, "{v}").map_err(io_err(path));
    line(serde_json::to_string(header)?)?;
    for r in records {
        line(serde_json::to_string(r)?)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

/// Reads a trace file, checking the schema version on line 1.
pub fn load_traces(path: &Path) -> Result<(TraceHeader, Vec<EpisodeRecord>), HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let first = loop {
        match lines.next() {
            None => return Err(HarnessError::Usage(format!("{} is empty", path.display()))),
            Some(l) => {
                let l = l.map_err(io_err(path))?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
        }
    };
    let raw: serde_json::Value = serde_json::from_str(&first)
        .map_err(|e| HarnessError::Malformed { line: 1, detail: e.to_string() })?;
    let found = raw.get("schema_version").and_then(serde_json::Value::as_u64);
    if found != Some(u64::from(SCHEMA_VERSION)) {
        return Err(HarnessError::SchemaMismatch {
            found: found.map_or_else(|| "missing".to_string(), |v| v.to_string()),
            expected: SCHEMA_VERSION,
        });
    }
    let header: TraceHeader = serde_json::from_value(raw)
        .map_err(|e| HarnessError::Malformed { line: 1, detail: e.to_string() })?;
    let mut records = Vec::new();
    for (i, l) in lines.enumerate() {
        let l = l.map_err(io_err(path))?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: EpisodeRecord = serde_json::from_str(&l)
            .map_err(|e| HarnessError::Malformed { line: i + 2, detail: e.to_string() })?;
        records.push(rec);
    }
    Ok((header, records))
}

/// Recomputes every metric from stored traces alone.
pub fn replay(path: &Path) -> Result<AggregateMetrics, HarnessError> {
    let (_, records) = load_traces(path)?;
    let mut metrics = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let m = episode_metrics(&r.trace).map_err(|e| HarnessError::Malformed {
            line: i + 2,
            detail: format!("invalid trace: {e}"),
        })?;
        metrics.push(m);
    }
    aggregate(&metrics).map_err(|_| HarnessError::Usage(format!("{} holds no episodes", path.display())))
}

pub fn load_aggregate(path: &Path) -> Result<AggregateFile, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: AggregateFile = serde_json::from_str(&text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::SchemaMismatch {
            found: file.schema_version.to_string(),
            expected: SCHEMA_VERSION,
        });
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_index() {
        let base = episode_seed(7, Condition::E1, 0, 0);
        assert_eq!(base, episode_seed(7, Condition::E1, 0, 0));
        assert_ne!(base, episode_seed(8, Condition::E1, 0, 0));
        assert_ne!(base, episode_seed(7, Condition::E2, 0, 0));
        assert_ne!(base, episode_seed(7, Condition::E1, 1, 0));
        assert_ne!(base, episode_seed(7, Condition::E1, 0, 1));
    }

    #[test]
    fn default_counts() {
        let cfg = RunConfig::new(vec![Condition::E1], BackendSpec::BlindGuesser, "/tmp/x");
        assert_eq!(cfg.episodes_per_condition(), 21);
        assert_eq!(cfg.max_steps, 100);
    }
}
