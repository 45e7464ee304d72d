//! Deterministic test policies.
//!
//! Each policy sees the scenario, the world state and the visibility report
//! directly. They exist to drive every metric into a known regime.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Agent, BackendError, BackendSpec, StepContext};
use crate::color::ColorLabel;
use crate::protocol::{AgentStep, SchemaFamily, SelfColor};
use crate::render::{ego_reflection_visibility, CameraSpec};
use crate::world::{cube_within_reach, Action, Heading, Pose, ScenarioConfig, WorldState};

/// Within this distance of a viewpoint the policy stops walking.
const ARRIVE_RADIUS: f64 = 0.5;
/// Bearing dead zone for greedy steering, degrees.
const STEER_DEADZONE: f64 = 15.0;
const MIN_VIEWPOINT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptedKind {
    PerfectOracle,
    RandomWalker { done_prob: f64 },
    BlindGuesser,
    Confabulator { force_wrong: bool },
    MirrorStarer,
}

impl ScriptedKind {
    pub fn from_spec(spec: &BackendSpec) -> Option<ScriptedKind> {
        Some(match *spec {
            BackendSpec::PerfectOracle => ScriptedKind::PerfectOracle,
            BackendSpec::RandomWalker { done_prob } => ScriptedKind::RandomWalker { done_prob },
            BackendSpec::BlindGuesser => ScriptedKind::BlindGuesser,
            BackendSpec::Confabulator { force_wrong } => ScriptedKind::Confabulator { force_wrong },
            BackendSpec::MirrorStarer => ScriptedKind::MirrorStarer,
            BackendSpec::Remote(_) => return None,
        })
    }

    fn salt(self) -> u64 {
        match self {
            ScriptedKind::PerfectOracle => 0x6f72_6163_6c65,
            ScriptedKind::RandomWalker { .. } => 0x7761_6c6b,
            ScriptedKind::BlindGuesser => 0x0067_7565_7373,
            ScriptedKind::Confabulator { .. } => 0x636f_6e66,
            ScriptedKind::MirrorStarer => 0x7374_6172,
        }
    }
}

/// Greedy steering: `a` above +15 degrees of bearing, `d` below -15, else `w`.
pub fn plan_turn_toward(ego: Pose, target: (f64, f64)) -> Action {
    let (dx, dy) = (target.0 - ego.x, target.1 - ego.y);
    if dx == 0.0 && dy == 0.0 {
        return Action::Forward;
    }
    let mut bearing = dy.atan2(dx).to_degrees() - f64::from(ego.heading.degrees());
    while bearing > 180.0 {
        bearing -= 360.0;
    }
    while bearing <= -180.0 {
        bearing += 360.0;
    }
    if bearing > STEER_DEADZONE {
        Action::TurnLeft
    } else if bearing < -STEER_DEADZONE {
        Action::TurnRight
    } else {
        Action::Forward
    }
}

/// Turn that brings `from` closer to `to`; `None` when already aligned.
fn turn_to_heading(from: Heading, to: Heading) -> Option<Action> {
    if from == to {
        return None;
    }
    let left = (i32::from(to.degrees()) - i32::from(from.degrees())).rem_euclid(360);
    Some(if left <= 180 { Action::TurnLeft } else { Action::TurnRight })
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    kind: ScriptedKind,
    family: SchemaFamily,
    rng: ChaCha8Rng,
    /// First step at which the ego's reflection was visible.
    first_mirror: Option<u32>,
    viewpoints: Option<Vec<(f64, f64)>>,
    viewpoint_idx: usize,
    wrong_claim: Option<ColorLabel>,
    oscillate_left: bool,
}

impl ScriptedAgent {
    pub fn new(kind: ScriptedKind, scenario: &ScenarioConfig) -> Self {
        ScriptedAgent {
            kind,
            family: SchemaFamily::for_condition(scenario.condition),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ kind.salt()),
            first_mirror: None,
            viewpoints: None,
            viewpoint_idx: 0,
            wrong_claim: None,
            oscillate_left: true,
        }
    }

    fn step(&self, action: Action, ident: SelfColor, sel: Option<ColorLabel>, note: &str) -> AgentStep {
        AgentStep {
            action,
            identification: ident,
            selected_cube: if self.family == SchemaFamily::CubeSelection { sel } else { None },
            view_description: String::new(),
            reasoning: note.to_string(),
            summary: note.to_string(),
        }
    }

    fn random_candidate(&mut self, scenario: &ScenarioConfig) -> Option<ColorLabel> {
        let colors: Vec<ColorLabel> = scenario.candidates().map(|c| c.color).collect();
        colors.choose(&mut self.rng).copied()
    }

    fn random_color(&mut self) -> ColorLabel {
        *ColorLabel::ALL.choose(&mut self.rng).expect("palette")
    }

    /// Mirror viewpoints with an unobstructed view of the ego's reflection
    /// in the static scene, nearest to the current position first.
    fn viewpoints(&mut self, scenario: &ScenarioConfig, state: &WorldState) -> &[(f64, f64)] {
        if self.viewpoints.is_none() {
            let mut found = Vec::new();
            if let Some(m) = &scenario.room.mirror {
                let facing = m.wall.facing_heading();
                let cam = CameraSpec::default();
                let mut u = m.u_min + 0.5;
                while u <= m.u_max - 0.5 + 1e-9 {
                    for dist in [2.0, 1.5, 2.5, 1.0, 3.0] {
                        let p = m.wall.point_at(u, dist);
                        let probe = WorldState {
                            t: state.t,
                            ego: Pose::new(p.0, p.1, facing),
                            distractors: Vec::new(),
                            bumped_last: false,
                        };
                        let vis = ego_reflection_visibility(&probe, scenario, &cam);
                        if vis.visible_fraction >= MIN_VIEWPOINT_FRACTION {
                            found.push(p);
                        }
                    }
                    u += 0.5;
                }
                // Prefer the point straight in front of the mirror center.
                let center = m.front_point(2.0);
                let ego = state.ego;
                found.sort_by(|a, b| {
                    let key = |p: &(f64, f64)| {
                        if (p.0 - center.0).abs() < 1e-9 && (p.1 - center.1).abs() < 1e-9 {
                            -1.0
                        } else {
                            ego.distance_to(*p)
                        }
                    };
                    key(a).total_cmp(&key(b))
                });
            }
            self.viewpoints = Some(found);
        }
        self.viewpoints.as_deref().unwrap_or(&[])
    }

    /// Walks to a mirror viewpoint and faces the mirror. Without a mirror,
    /// heads for the room center and turns in place.
    fn seek_mirror(&mut self, scenario: &ScenarioConfig, state: &WorldState, m_now: bool) -> Action {
        let ego = state.ego;
        let Some(mirror) = scenario.room.mirror.clone() else {
            return if ego.distance_to((0.0, 0.0)) > ARRIVE_RADIUS {
                plan_turn_toward(ego, (0.0, 0.0))
            } else {
                Action::TurnLeft
            };
        };
        let facing = mirror.wall.facing_heading();
        let n = self.viewpoints(scenario, state).len();
        if n == 0 {
            let target = mirror.front_point(2.0);
            return if ego.distance_to(target) > ARRIVE_RADIUS {
                plan_turn_toward(ego, target)
            } else {
                turn_to_heading(ego.heading, facing).unwrap_or(Action::TurnLeft)
            };
        }
        let target = self.viewpoints.as_ref().expect("computed")[self.viewpoint_idx % n];
        if ego.distance_to(target) > ARRIVE_RADIUS {
            return plan_turn_toward(ego, target);
        }
        match turn_to_heading(ego.heading, facing) {
            Some(turn) => turn,
            None => {
                // Facing the mirror without seeing ourselves: try another spot.
                if !m_now {
                    self.viewpoint_idx += 1;
                    let next = self.viewpoints.as_ref().expect("computed")[self.viewpoint_idx % n];
                    if ego.distance_to(next) > ARRIVE_RADIUS {
                        return plan_turn_toward(ego, next);
                    }
                }
                Action::Backward
            }
        }
    }

    /// Phase two of the oracle: walk to the matching cube and select it, or
    /// stop with the self-attribution in the exploration task.
    fn finish(&mut self, scenario: &ScenarioConfig, state: &WorldState, ident: SelfColor) -> AgentStep {
        let c_star = scenario.ego_color;
        if self.family == SchemaFamily::Exploration {
            return self.step(Action::Done, ident, None, "reflection seen; reporting my color");
        }
        let Some(cube) = scenario.candidate_colored(c_star) else {
            return self.step(Action::TurnLeft, ident, None, "no matching cube");
        };
        if cube_within_reach(state, cube) {
            self.step(Action::Done, ident, Some(c_star), "selecting the cube matching my reflection")
        } else {
            let a = plan_turn_toward(state.ego, (cube.center[0], cube.center[1]));
            self.step(a, ident, None, "walking to the matching cube")
        }
    }

    /// One scripted decision.
    pub fn decide(&mut self, ctx: &StepContext<'_>) -> AgentStep {
        let (scenario, state, t) = (ctx.scenario, ctx.state, ctx.t);
        let m_now = ctx.visibility.m;
        if m_now && self.first_mirror.is_none() {
            self.first_mirror = Some(t);
        }
        let seen = self.first_mirror.is_some();
        let seen_before = self.first_mirror.is_some_and(|f| f < t);
        let c_star = SelfColor::Color(scenario.ego_color);

        match self.kind {
            ScriptedKind::PerfectOracle | ScriptedKind::Confabulator { .. } => {
                if let ScriptedKind::Confabulator { force_wrong } = self.kind {
                    if self.wrong_claim.is_none() {
                        let claim = loop {
                            let c = self.random_color();
                            if !force_wrong || c != scenario.ego_color {
                                break c;
                            }
                        };
                        self.wrong_claim = Some(claim);
                    }
                }
                let ident = if seen {
                    c_star
                } else {
                    self.wrong_claim.map_or(SelfColor::Unknown, SelfColor::Color)
                };
                if seen_before {
                    self.finish(scenario, state, ident)
                } else {
                    let a = self.seek_mirror(scenario, state, m_now);
                    self.step(a, ident, None, "looking for the mirror")
                }
            }
            ScriptedKind::MirrorStarer => {
                if seen {
                    let a = if self.oscillate_left { Action::TurnLeft } else { Action::TurnRight };
                    self.oscillate_left = !self.oscillate_left;
                    self.step(a, SelfColor::Unknown, None, "watching the mirror")
                } else {
                    let a = self.seek_mirror(scenario, state, m_now);
                    self.step(a, SelfColor::Unknown, None, "looking for the mirror")
                }
            }
            ScriptedKind::BlindGuesser => {
                let ident = SelfColor::Color(self.random_color());
                let sel = self.random_candidate(scenario);
                self.step(Action::Done, ident, sel, "guessing")
            }
            ScriptedKind::RandomWalker { done_prob } => {
                if self.rng.gen_bool(done_prob) {
                    let ident = if self.family == SchemaFamily::Exploration {
                        SelfColor::Color(self.random_color())
                    } else {
                        SelfColor::Unknown
                    };
                    let sel = self.random_candidate(scenario);
                    self.step(Action::Done, ident, sel, "stopping")
                } else {
                    let a = *Action::MOVES.choose(&mut self.rng).expect("four moves");
                    self.step(a, SelfColor::Unknown, None, "wandering")
                }
            }
        }
    }
}

impl Agent for ScriptedAgent {
    fn act(&mut self, ctx: &StepContext<'_>) -> Result<String, BackendError> {
        let step = self.decide(ctx);
        Ok(step.to_json(self.family).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(h: u16) -> Pose {
        Pose::new(0.0, 0.0, Heading::try_from(h).unwrap())
    }

    #[test]
    fn steering_rules() {
        assert_eq!(plan_turn_toward(pose(0), (3.0, 0.0)), Action::Forward);
        assert_eq!(plan_turn_toward(pose(0), (0.0, 3.0)), Action::TurnLeft);
        assert_eq!(plan_turn_toward(pose(0), (0.0, -3.0)), Action::TurnRight);
        assert_eq!(plan_turn_toward(pose(90), (-3.0, 0.0)), Action::TurnLeft);
        assert_eq!(plan_turn_toward(pose(0), (-3.0, 0.001)), Action::TurnLeft);
    }

    #[test]
    fn steering_boundary_goes_forward() {
        // tan(15 deg) = 0.2679491924...
        assert_eq!(plan_turn_toward(pose(0), (1.0, 0.267_949)), Action::Forward);
        assert_eq!(plan_turn_toward(pose(0), (1.0, 0.268_0)), Action::TurnLeft);
    }

    #[test]
    fn heading_turns_take_short_way() {
        assert_eq!(turn_to_heading(Heading::EAST, Heading::NORTH), Some(Action::TurnLeft));
        assert_eq!(turn_to_heading(Heading::EAST, Heading::SOUTH), Some(Action::TurnRight));
        assert_eq!(turn_to_heading(Heading::EAST, Heading::EAST), None);
    }
}
