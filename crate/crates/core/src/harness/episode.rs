//! The per-episode control loop.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::agents::{Agent, BackendError, StepContext};
use crate::metrics::{EpisodeTrace, ProtocolFlags, StepRecord};
use crate::protocol::{
    format_history, format_noop_history, format_position, parse_agent_output, reprompt_suffix,
    system_prompt, user_prompt, ParsedReply, ProtocolErrorKind, SchemaFamily, SelfColor, StepInput,
    BUMP_WARNING, NO_HISTORY,
};
use crate::render::{ego_reflection_visibility, render_with_stats, CameraSpec};
use crate::world::{apply_action, cube_within_reach, step_distractors, Action, ScenarioConfig};

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions {
    pub camera: CameraSpec,
    /// Write every observed frame as `t###.png` into this directory.
    pub frame_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub trace: EpisodeTrace,
    /// SHA-256 of every observed frame, in step order.
    pub frame_digests: Vec<String>,
    /// SHA-256 over every (system, user) prompt pair sent, re-prompts included.
    pub prompts_hash: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("writing frame {path}: {source}")]
    Frame {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn save_frame(dir: &Path, t: u32, png: &[u8]) -> Result<(), EpisodeError> {
    let path = dir.join(format!("t{t:03}.png"));
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, png))
        .map_err(|source| EpisodeError::Frame { path, source })
}

/// Runs one episode to `done` or the step cap.
///
/// Invalid replies get one re-prompt with the error appended; a second
/// invalid reply turns the step into a no-op. Backend failures abort.
pub fn run_episode(
    scenario: &ScenarioConfig,
    agent: &mut dyn Agent,
    backend_id: &str,
    opts: &EpisodeOptions,
) -> Result<EpisodeRun, EpisodeError> {
    scenario.validate().map_err(EpisodeError::InvalidScenario)?;
    let family = SchemaFamily::for_condition(scenario.condition);
    let cam = opts.camera;
    let system = system_prompt(scenario);

    let mut state = scenario.initial_state();
    let mut history = NO_HISTORY.to_string();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut digests = Vec::new();
    let mut hasher = Sha256::new();
    let mut done_at: Option<(u32, bool)> = None;

    for t in 1..=scenario.max_steps {
        debug_assert_eq!(state.t, t);
        let (frame, stats) = render_with_stats(&state, scenario, &cam);
        let vis = ego_reflection_visibility(&state, scenario, &cam);
        digests.push(frame.digest());
        if let Some(dir) = &opts.frame_dir {
            save_frame(dir, t, &frame.to_png())?;
        }

        let input = StepInput {
            frame,
            instruction: family.instruction().to_string(),
            history_text: history.clone(),
            position_text: format_position(&state.ego, t, scenario.max_steps),
            warning: state.bumped_last.then(|| BUMP_WARNING.to_string()),
        };
        let user = user_prompt(family, &input);
        let ctx = StepContext {
            t,
            scenario,
            state: &state,
            visibility: &vis,
            input: &input,
            system_text: &system,
            user_text: &user,
        };

        let mut flags = ProtocolFlags::default();
        hash_prompt(&mut hasher, &system, &user);
        let raw = agent.act(&ctx)?;
        let parsed: Option<ParsedReply> = match parse_agent_output(&raw, family) {
            Ok(p) => Some(p),
            Err(err) => {
                tracing::debug!(t, kind = %err.kind, "invalid reply, re-prompting");
                flags.reprompted = Some(err.kind);
                let retry_user = format!("{user}{}", reprompt_suffix(&err));
                hash_prompt(&mut hasher, &system, &retry_user);
                let raw = agent.act(&StepContext { user_text: &retry_user, ..ctx })?;
                match parse_agent_output(&raw, family) {
                    Ok(p) => Some(p),
                    Err(err) => {
                        flags.protocol_error = Some(err.kind);
                        None
                    }
                }
            }
        };

        let mut record = StepRecord {
            t,
            action: None,
            m: vis.m,
            visible_fraction: vis.visible_fraction,
            mirror_surface_in_view: stats.mirror_surface_in_view(),
            identification: SelfColor::Unknown,
            selected_cube: None,
            pose: state.ego,
            bumped: false,
            flags,
        };

        let Some(reply) = parsed else {
            // No-op: the ego stays put, the rest of the world moves on.
            steps.push(record);
            let mut next = step_distractors(&state, scenario);
            next.t += 1;
            next.bumped_last = false;
            state = next;
            history = format_noop_history();
            continue;
        };

        let step = reply.step;
        record.flags.fenced_output = reply.warnings.contains(&ProtocolErrorKind::FencedOutput);
        record.action = Some(step.action);
        record.identification = step.identification;
        record.selected_cube = step.selected_cube;

        if step.action == Action::Done {
            let violation = scenario.condition.is_cube_task()
                && step.selected_cube.is_some_and(|c| {
                    scenario.candidate_colored(c).is_none_or(|cube| !cube_within_reach(&state, cube))
                });
            steps.push(record);
            done_at = Some((t, violation));
            break;
        }

        let moved = step_distractors(&state, scenario);
        let (next, bumped) = apply_action(&moved, step.action, &scenario.room);
        record.bumped = bumped;
        steps.push(record);
        state = next;
        history = format_history(Some(&step));
    }

    let steps_taken = steps.len() as u32;
    let (tau, terminated, proximity_violation) = match done_at {
        Some((t, v)) => (t, true, v),
        None => (steps_taken, false, false),
    };
    let final_decision = if terminated {
        let last = &steps[tau as usize - 1];
        if scenario.condition.is_cube_task() {
            last.selected_cube
        } else {
            last.identification.color()
        }
    } else {
        None
    };
    let trace = EpisodeTrace {
        condition: scenario.condition,
        c_star: scenario.ego_color,
        steps_taken,
        terminated,
        tau,
        steps,
        final_decision,
        scenario_seed: scenario.seed,
        backend: backend_id.to_string(),
        proximity_violation,
    };
    debug_assert!(trace.validate().is_ok());
    Ok(EpisodeRun {
        trace,
        frame_digests: digests,
        prompts_hash: hex(&hasher.finalize()),
    })
}

fn hash_prompt(h: &mut Sha256, system: &str, user: &str) {
    h.update(system.as_bytes());
    h.update([0]);
    h.update(user.as_bytes());
    h.update([0]);
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
