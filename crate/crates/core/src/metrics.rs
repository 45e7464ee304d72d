//! Episode-level metrics and their aggregation.
//!
//! Every metric is a pure function of an [`EpisodeTrace`]. Windows written
//! as `t < tau` are strict: evidence seen at the termination step itself
//! does not count.

use serde::{Deserialize, Serialize};

use crate::color::ColorLabel;
use crate::protocol::{ProtocolErrorKind, SelfColor};
use crate::world::{Action, Condition, Pose, MAX_STEPS};

/// Protocol bookkeeping for one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolFlags {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fenced_output: bool,
    /// Error that triggered the single re-prompt, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reprompted: Option<ProtocolErrorKind>,
    /// Error on the second attempt; the step became a no-op.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol_error: Option<ProtocolErrorKind>,
}

impl ProtocolFlags {
    pub fn is_noop(&self) -> bool {
        self.protocol_error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    /// `None` for a no-op step after two invalid replies.
    pub action: Option<Action>,
    /// Ego reflection visible (the metric input).
    pub m: bool,
    pub visible_fraction: f64,
    pub mirror_surface_in_view: bool,
    pub identification: SelfColor,
    pub selected_cube: Option<ColorLabel>,
    /// Ego pose when the frame was observed.
    pub pose: Pose,
    /// This step's movement was blocked by a wall.
    pub bumped: bool,
    #[serde(default)]
    pub flags: ProtocolFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub condition: Condition,
    pub c_star: ColorLabel,
    /// Trajectory length `T`.
    pub steps_taken: u32,
    /// `C_i`: the episode ended with `done`.
    pub terminated: bool,
    pub tau: u32,
    pub steps: Vec<StepRecord>,
    /// `z_tau`: selected cube (E1-E4) or final self-attribution (E5).
    pub final_decision: Option<ColorLabel>,
    pub scenario_seed: u64,
    pub backend: String,
    pub proximity_violation: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("trace has no steps")]
    Empty,
    #[error("step {index} has t={t}, expected {expected}")]
    NonConsecutive { index: usize, t: u32, expected: u32 },
    #[error("trace length {0} exceeds the {MAX_STEPS}-step cap")]
    TooLong(usize),
    #[error("steps_taken={recorded} but {actual} steps are present")]
    LengthMismatch { recorded: u32, actual: usize },
    #[error("tau={recorded} disagrees with the action stream (expected {expected})")]
    TauMismatch { recorded: u32, expected: u32 },
    #[error("terminated={recorded} disagrees with the action stream")]
    TerminationMismatch { recorded: bool },
    #[error("final_decision {recorded:?} disagrees with step tau ({expected:?})")]
    DecisionMismatch { recorded: Option<ColorLabel>, expected: Option<ColorLabel> },
}

impl EpisodeTrace {
    /// First `done` step, if any.
    pub fn first_done(&self) -> Option<u32> {
        self.steps.iter().find(|s| s.action == Some(Action::Done)).map(|s| s.t)
    }

    /// The decision implied by the step at `tau` for this condition.
    pub fn implied_decision(&self) -> Option<ColorLabel> {
        let tau = self.first_done()?;
        let step = &self.steps[tau as usize - 1];
        if self.condition.is_cube_task() {
            step.selected_cube
        } else {
            step.identification.color()
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.steps.is_empty() {
            return Err(TraceError::Empty);
        }
        if self.steps.len() > MAX_STEPS as usize {
            return Err(TraceError::TooLong(self.steps.len()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            let expected = i as u32 + 1;
            if s.t != expected {
                return Err(TraceError::NonConsecutive { index: i, t: s.t, expected });
            }
        }
        if self.steps_taken as usize != self.steps.len() {
            return Err(TraceError::LengthMismatch {
                recorded: self.steps_taken,
                actual: self.steps.len(),
            });
        }
        let done = self.first_done();
        if self.terminated != done.is_some() {
            return Err(TraceError::TerminationMismatch { recorded: self.terminated });
        }
        let expected_tau = done.unwrap_or(self.steps_taken);
        if self.tau != expected_tau {
            return Err(TraceError::TauMismatch { recorded: self.tau, expected: expected_tau });
        }
        let expected = self.implied_decision();
        if self.final_decision != expected {
            return Err(TraceError::DecisionMismatch { recorded: self.final_decision, expected });
        }
        Ok(())
    }
}

/// The ten per-episode values. `None` marks an undefined metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub tsa: bool,
    pub ttd: u32,
    pub mcr: bool,
    pub mtato: Option<bool>,
    pub caal: bool,
    pub cr: bool,
    pub mgd: u32,
    pub sc: Option<bool>,
    /// `A_i`: a wrong committed pre-mirror attribution exists.
    pub ar_sc_applicable: bool,
    /// `C_i`.
    pub completed: bool,
}

pub fn episode_metrics(trace: &EpisodeTrace) -> Result<EpisodeMetrics, TraceError> {
    trace.validate()?;
    let tau = trace.tau;
    let c_star = trace.c_star;
    let before_tau = || trace.steps.iter().filter(move |s| s.t < tau);

    let tsa = trace.final_decision == Some(c_star);
    let t_mirror_pre = before_tau().find(|s| s.m).map(|s| s.t);
    let t_claim = before_tau().find(|s| s.identification.is_claim()).map(|s| s.t);
    let mcr = t_mirror_pre.is_some();
    let caal = before_tau().any(|s| s.identification == SelfColor::Color(c_star));
    let cr = match (t_claim, t_mirror_pre) {
        (Some(_), None) => true,
        (Some(claim), Some(mirror)) => claim < mirror,
        (None, _) => false,
    };
    let mgd = trace.steps.iter().filter(|s| s.m).count() as u32;

    // Self-correction looks at the first mirror step over the whole trajectory.
    let t_mirror = trace.steps.iter().find(|s| s.m).map(|s| s.t);
    let guess = t_mirror.and_then(|tm| {
        trace
            .steps
            .iter()
            .take_while(|s| s.t < tm)
            .find(|s| s.identification.is_claim())
    });
    let applicable = matches!(guess, Some(g) if g.identification != SelfColor::Color(c_star));
    let sc = applicable.then(|| {
        let tm = t_mirror.expect("applicable implies a mirror step");
        trace
            .steps
            .iter()
            .filter(|s| s.t >= tm && s.t <= tau)
            .any(|s| s.identification == SelfColor::Color(c_star))
    });

    Ok(EpisodeMetrics {
        tsa,
        ttd: tau,
        mcr,
        mtato: tsa.then_some(mcr),
        caal,
        cr,
        mgd,
        sc,
        ar_sc_applicable: applicable,
        completed: trace.terminated,
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean and standard error over the defined values of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Sample-sd SEM; `None` when fewer than two values are defined.
    pub sem: Option<f64>,
    pub n_defined: usize,
}

impl MetricSummary {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> MetricSummary {
        let xs: Vec<f64> = values.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return MetricSummary { mean: None, sem: None, n_defined: 0 };
        }
        let mut s = CompensatedSum::default();
        xs.iter().for_each(|&x| s.add(x));
        let mean = s.value() / n as f64;
        let sem = (n > 1).then(|| {
            let mut ss = CompensatedSum::default();
            xs.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
            (ss.value() / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        });
        MetricSummary { mean: Some(mean), sem, n_defined: n }
    }

    fn from_options<I: IntoIterator<Item = Option<f64>>>(values: I) -> MetricSummary {
        MetricSummary::from_values(values.into_iter().flatten())
    }
}

fn b(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub n_episodes: usize,
    pub tsa: MetricSummary,
    pub ttd: MetricSummary,
    pub mcr: MetricSummary,
    pub mtato: MetricSummary,
    pub caal: MetricSummary,
    pub cr: MetricSummary,
    pub mgd: MetricSummary,
    pub sc: MetricSummary,
    pub ar_sc: MetricSummary,
    pub completion: MetricSummary,
    /// TSA over completed episodes only.
    pub tsa_c: MetricSummary,
    /// `tsa_c - tsa`, when both are defined.
    pub completion_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("cannot aggregate an empty episode set")]
    Empty,
}

pub fn aggregate(episodes: &[EpisodeMetrics]) -> Result<AggregateMetrics, AggregateError> {
    if episodes.is_empty() {
        return Err(AggregateError::Empty);
    }
    let col = |f: fn(&EpisodeMetrics) -> f64| MetricSummary::from_values(episodes.iter().map(f));
    let tsa = col(|e| b(e.tsa));
    let tsa_c = MetricSummary::from_values(
        episodes.iter().filter(|e| e.completed).map(|e| b(e.tsa)),
    );
    let completion_gap = match (tsa_c.mean, tsa.mean) {
        (Some(c), Some(t)) => Some(c - t),
        _ => None,
    };
    Ok(AggregateMetrics {
        n_episodes: episodes.len(),
        tsa,
        ttd: col(|e| f64::from(e.ttd)),
        mcr: col(|e| b(e.mcr)),
        mtato: MetricSummary::from_options(episodes.iter().map(|e| e.mtato.map(b))),
        caal: col(|e| b(e.caal)),
        cr: col(|e| b(e.cr)),
        mgd: col(|e| f64::from(e.mgd)),
        sc: MetricSummary::from_options(episodes.iter().map(|e| e.sc.map(b))),
        ar_sc: col(|e| b(e.ar_sc_applicable)),
        completion: col(|e| b(e.completed)),
        tsa_c,
        completion_gap,
    })
}

/// Chance level for TSA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineReport {
    /// Uniform choice among the three candidate cubes.
    Single { value: f64, label: String },
    /// Open-ended attribution: reference points only, no single marker.
    References { values: Vec<(String, f64)> },
}

pub fn chance_baseline(condition: Condition) -> BaselineReport {
    if condition.is_cube_task() {
        BaselineReport::Single { value: 1.0 / 3.0, label: "1/3".into() }
    } else {
        let n = ColorLabel::ALL.len() as f64;
        BaselineReport::References {
            values: vec![
                (format!("1/{}", ColorLabel::ALL.len()), 1.0 / n),
                (format!("1/{}", ColorLabel::ALL.len() + 1), 1.0 / (n + 1.0)),
            ],
        }
    }
}
