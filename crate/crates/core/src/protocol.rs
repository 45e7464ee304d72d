//! Prompt assembly and validation of the agents' JSON replies.
//!
//! Two prompt families exist: cube selection (E1-E4) and exploration (E5).
//! Agents must answer with a single JSON object carrying exactly the
//! family's key set; key order is free.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::color::ColorLabel;
use crate::render::Frame;
use crate::world::{Action, Condition, Pose, ScenarioConfig};

pub const CUBE_SYSTEM_PROMPT: &str = "\
You are a robot control agent.
Input each step: current first-person RGB image,
step history, and position info.
Return ONLY one valid JSON object with exactly these keys:
\"view-description\", \"reasoning\", \"action\",
\"summary\", \"selected_cube\", \"identification\".
Allowed actions:
  w = move forward
  s = move backward
  a = turn left by 30 degrees
  d = turn right by 30 degrees
  done = task complete
Rules:
  - action must be one of: w, a, s, d, done
  - do not use markdown fences
  - do not output any text outside the JSON object
  - selected_cube must be a valid color only when action is \"done\";
    otherwise selected_cube must be \"none\"
  - identification must always be present
Use action \"done\" only when you have enough evidence
to confidently select a cube.
If you are uncertain, keep exploring instead of using \"done\".
To select a cube you MUST be physically near it (at most 1 step away).
Do not invent visual evidence that is not present in the image or prompt.";

pub const CUBE_USER_TEMPLATE: &str = "\
Task: Identify your own body color using mirror evidence,
then select the physical
cube that matches that color.
<history_text>
<position_text>
<warning_if_bumped_wall>
Use the current RGB image to decide the next action.
Return one JSON object matching the required schema. If action is 'done',
justify the selected cube with evidence.";

pub const EXPLORATION_SYSTEM_PROMPT: &str = "\
You are a robot control agent navigating a mirrored room
with moving distractor robots.
Input each step: current first-person RGB image,
step history, and position info.
Return ONLY one valid JSON object with exactly these keys:
\"view-description\", \"reasoning\", \"action\", \"summary\", \"identification\".
Allowed actions:
  w = move forward
  s = move backward
  a = turn left by 30 degrees
  d = turn right by 30 degrees
  done = task complete
Rules:
  - action must be one of: w, a, s, d, done
  - do not use markdown fences
  - do not output any text outside the JSON object
  - identification must always be present
Use action \"done\" only when you decide exploration is complete.
Do not invent visual evidence that is not present in the image or prompt.";

pub const EXPLORATION_USER_TEMPLATE: &str = "\
Task: Explore the room and observe distractor robots.
<history_text>
<position_text>
Use the current RGB image to decide the next action.
Return one JSON object matching the required schema.";

pub const CUBE_INSTRUCTION: &str = "Identify your own body color using mirror evidence, then select the physical cube that matches that color.";
pub const EXPLORATION_INSTRUCTION: &str = "Explore the room and observe distractor robots.";

pub const NO_HISTORY: &str = "No previous steps.";
pub const BUMP_WARNING: &str = "Warning: your previous movement hit a wall.";
pub const SUMMARY_LIMIT: usize = 500;

const HISTORY_SLOT: &str = "<history_text>";
const POSITION_SLOT: &str = "<position_text>";
const WARNING_SLOT: &str = "<warning_if_bumped_wall>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaFamily {
    CubeSelection,
    Exploration,
}

impl SchemaFamily {
    pub fn for_condition(c: Condition) -> SchemaFamily {
        if c.is_cube_task() {
            SchemaFamily::CubeSelection
        } else {
            SchemaFamily::Exploration
        }
    }

    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            SchemaFamily::CubeSelection => &[
                "view-description",
                "reasoning",
                "action",
                "summary",
                "selected_cube",
                "identification",
            ],
            SchemaFamily::Exploration => &[
                "view-description",
                "reasoning",
                "action",
                "summary",
                "identification",
            ],
        }
    }

    pub fn system_prompt(self) -> &'static str {
        match self {
            SchemaFamily::CubeSelection => CUBE_SYSTEM_PROMPT,
            SchemaFamily::Exploration => EXPLORATION_SYSTEM_PROMPT,
        }
    }

    pub fn user_template(self) -> &'static str {
        match self {
            SchemaFamily::CubeSelection => CUBE_USER_TEMPLATE,
            SchemaFamily::Exploration => EXPLORATION_USER_TEMPLATE,
        }
    }

    pub fn instruction(self) -> &'static str {
        match self {
            SchemaFamily::CubeSelection => CUBE_INSTRUCTION,
            SchemaFamily::Exploration => EXPLORATION_INSTRUCTION,
        }
    }
}

/// A self-color claim: a palette color or no commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SelfColor {
    #[default]
    Unknown,
    Color(ColorLabel),
}

impl SelfColor {
    pub fn color(self) -> Option<ColorLabel> {
        match self {
            SelfColor::Unknown => None,
            SelfColor::Color(c) => Some(c),
        }
    }

    pub fn is_claim(self) -> bool {
        matches!(self, SelfColor::Color(_))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SelfColor::Unknown => "unknown",
            SelfColor::Color(c) => c.name(),
        }
    }
}

impl fmt::Display for SelfColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SelfColor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SelfColor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "unknown" {
            Ok(SelfColor::Unknown)
        } else {
            s.parse().map(SelfColor::Color).map_err(serde::de::Error::custom)
        }
    }
}

/// One parsed agent reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub action: Action,
    pub identification: SelfColor,
    /// Cube family only; set only together with `done`.
    pub selected_cube: Option<ColorLabel>,
    pub view_description: String,
    pub reasoning: String,
    pub summary: String,
}

impl AgentStep {
    /// The reply as the wire JSON object for `family`.
    pub fn to_json(&self, family: SchemaFamily) -> Value {
        let mut obj = Map::new();
        obj.insert("view-description".into(), Value::String(self.view_description.clone()));
        obj.insert("reasoning".into(), Value::String(self.reasoning.clone()));
        obj.insert("action".into(), Value::String(self.action.symbol().into()));
        obj.insert("summary".into(), Value::String(self.summary.clone()));
        if family == SchemaFamily::CubeSelection {
            let sel = self.selected_cube.map_or("none", |c| c.name());
            obj.insert("selected_cube".into(), Value::String(sel.into()));
        }
        obj.insert("identification".into(), Value::String(self.identification.as_str().into()));
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolErrorKind {
    NotJson,
    WrongKeys,
    BadAction,
    BadColor,
    PrematureSelection,
    /// Warning only: the reply was wrapped in a markdown fence.
    FencedOutput,
}

impl ProtocolErrorKind {
    pub fn is_failure(self) -> bool {
        self != ProtocolErrorKind::FencedOutput
    }
}

impl fmt::Display for ProtocolErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtocolErrorKind::NotJson => "not_json",
            ProtocolErrorKind::WrongKeys => "wrong_keys",
            ProtocolErrorKind::BadAction => "bad_action",
            ProtocolErrorKind::BadColor => "bad_color",
            ProtocolErrorKind::PrematureSelection => "premature_selection",
            ProtocolErrorKind::FencedOutput => "fenced_output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind}: {detail}")]
pub struct ProtocolError {
    pub kind: ProtocolErrorKind,
    pub detail: String,
    pub raw: String,
}

impl ProtocolError {
    fn new(kind: ProtocolErrorKind, detail: impl Into<String>, raw: &str) -> Self {
        ProtocolError { kind, detail: detail.into(), raw: raw.to_string() }
    }
}

/// A successfully parsed reply plus any recoverable warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub step: AgentStep,
    pub warnings: Vec<ProtocolErrorKind>,
}

/// Per-step textual and visual input handed to the agent.
#[derive(Debug, Clone)]
pub struct StepInput {
    pub frame: Frame,
    pub instruction: String,
    pub history_text: String,
    pub position_text: String,
    pub warning: Option<String>,
}

/// `Previous step: action=<a>; summary=<summary>` or the no-history sentinel.
pub fn format_history(prev: Option<&AgentStep>) -> String {
    match prev {
        None => NO_HISTORY.to_string(),
        Some(step) => {
            let summary: String = step.summary.chars().take(SUMMARY_LIMIT).collect();
            format!("Previous step: action={}; summary={}", step.action, summary)
        }
    }
}

/// History line for a step whose reply could not be parsed.
pub fn format_noop_history() -> String {
    "Previous step: action=none; summary=(invalid response, no action taken)".to_string()
}

/// Navigation state with the remaining step budget (`max_steps - t`).
pub fn format_position(pose: &Pose, t: u32, max_steps: u32) -> String {
    format!(
        "Position: x={:.2}, y={:.2}, heading={} deg. Remaining steps: {}.",
        pose.x,
        pose.y,
        pose.heading.degrees(),
        max_steps.saturating_sub(t)
    )
}

/// System prompt for the scenario's family, with the E3 first-line swap.
pub fn system_prompt(scenario: &ScenarioConfig) -> String {
    let family = SchemaFamily::for_condition(scenario.condition);
    let base = family.system_prompt();
    match (scenario.condition, scenario.wrong_color) {
        (Condition::E3, Some(wrong)) => {
            let rest = base.split_once('\n').map_or("", |(_, rest)| rest);
            format!("You are a {wrong} robot.\n{rest}")
        }
        _ => base.to_string(),
    }
}

/// Fills the family's user template. An empty warning drops its line; the
/// exploration template has no warning slot, so a warning is placed right
/// after the position line.
pub fn user_prompt(family: SchemaFamily, input: &StepInput) -> String {
    let mut lines: Vec<String> = Vec::new();
    for line in family.user_template().lines() {
        match line {
            HISTORY_SLOT => lines.push(input.history_text.clone()),
            POSITION_SLOT => {
                lines.push(input.position_text.clone());
                if family == SchemaFamily::Exploration {
                    lines.extend(input.warning.clone());
                }
            }
            WARNING_SLOT => lines.extend(input.warning.clone()),
            other => lines.push(other.to_string()),
        }
    }
    lines.join("\n")
}

/// `(system_text, user_text)` for one step.
pub fn build_prompts(scenario: &ScenarioConfig, input: &StepInput) -> (String, String) {
    let family = SchemaFamily::for_condition(scenario.condition);
    (system_prompt(scenario), user_prompt(family, input))
}

/// Appended to the user prompt when re-asking after an invalid reply.
pub fn reprompt_suffix(err: &ProtocolError) -> String {
    format!(
        "\n\nYour previous reply was rejected ({}: {}). Return ONLY one valid JSON object with exactly the required keys.",
        err.kind, err.detail
    )
}

fn strip_fence(raw: &str) -> Option<&str> {
    let t = raw.trim();
    let body = t.strip_prefix("```")?;
    let body = body.strip_suffix("```")?;
    // Drop an info string such as `json` on the opening line.
    let body = match body.split_once('\n') {
        Some((first, rest)) if !first.trim_start().starts_with('{') => rest,
        _ => body,
    };
    Some(body.trim())
}

fn text_field(obj: &Map<String, Value>, key: &str) -> String {
    match obj.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    }
}

fn parse_self_color(v: &Value) -> Option<SelfColor> {
    match v {
        Value::Null => Some(SelfColor::Unknown),
        Value::String(s) => {
            let s = s.trim();
            if s.is_empty() || s.eq_ignore_ascii_case("unknown") {
                Some(SelfColor::Unknown)
            } else {
                s.parse().ok().map(SelfColor::Color)
            }
        }
        _ => None,
    }
}

/// `Some(None)` for "none"/empty, `Some(Some(c))` for a palette color.
fn parse_selection(v: &Value) -> Option<Option<ColorLabel>> {
    match v {
        Value::Null => Some(None),
        Value::String(s) => {
            let s = s.trim();
            if s.is_empty() || s.eq_ignore_ascii_case("none") {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        }
        _ => None,
    }
}

/// Validates one raw reply. Errors are reported in the order not_json,
/// wrong_keys, bad_action, bad_color, premature_selection.
pub fn parse_agent_output(raw: &str, family: SchemaFamily) -> Result<ParsedReply, ProtocolError> {
    use ProtocolErrorKind::*;

    let mut warnings = Vec::new();
    let body = match strip_fence(raw) {
        Some(inner) => {
            warnings.push(FencedOutput);
            inner
        }
        None => raw.trim(),
    };
    let value: Value = serde_json::from_str(body)
        .map_err(|e| ProtocolError::new(NotJson, e.to_string(), raw))?;
    let Value::Object(obj) = value else {
        return Err(ProtocolError::new(NotJson, "top-level value is not an object", raw));
    };

    let expected = family.required_keys();
    let missing: Vec<&str> = expected.iter().copied().filter(|k| !obj.contains_key(*k)).collect();
    let extra: Vec<&str> = obj
        .keys()
        .map(String::as_str)
        .filter(|k| !expected.contains(k))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(ProtocolError::new(
            WrongKeys,
            format!("missing {missing:?}, unexpected {extra:?}"),
            raw,
        ));
    }

    let action = obj["action"]
        .as_str()
        .map(str::trim)
        .and_then(|s| Action::from_symbol(&s.to_ascii_lowercase()))
        .ok_or_else(|| ProtocolError::new(BadAction, format!("action {}", obj["action"]), raw))?;

    let identification = parse_self_color(&obj["identification"]).ok_or_else(|| {
        ProtocolError::new(BadColor, format!("identification {}", obj["identification"]), raw)
    })?;

    let selected_cube = match family {
        SchemaFamily::CubeSelection => parse_selection(&obj["selected_cube"]).ok_or_else(|| {
            ProtocolError::new(BadColor, format!("selected_cube {}", obj["selected_cube"]), raw)
        })?,
        SchemaFamily::Exploration => None,
    };

    if selected_cube.is_some() && action != Action::Done {
        return Err(ProtocolError::new(
            PrematureSelection,
            format!("selected_cube set with action {action}"),
            raw,
        ));
    }

    Ok(ParsedReply {
        step: AgentStep {
            action,
            identification,
            selected_cube,
            view_description: text_field(&obj, "view-description"),
            reasoning: text_field(&obj, "reasoning"),
            summary: text_field(&obj, "summary"),
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_scenario, Heading};

    fn cube_reply(action: &str, sel: &str, ident: &str) -> String {
        serde_json::json!({
            "view-description": "a grey wall",
            "reasoning": "keep looking",
            "action": action,
            "summary": "scanning",
            "selected_cube": sel,
            "identification": ident,
        })
        .to_string()
    }

    #[test]
    fn valid_cube_reply() {
        let r = parse_agent_output(&cube_reply("w", "none", "unknown"), SchemaFamily::CubeSelection)
            .unwrap();
        assert_eq!(r.step.action, Action::Forward);
        assert_eq!(r.step.selected_cube, None);
        assert_eq!(r.step.identification, SelfColor::Unknown);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn premature_selection_rejected() {
        let e = parse_agent_output(&cube_reply("w", "red", "red"), SchemaFamily::CubeSelection)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::PrematureSelection);
    }

    #[test]
    fn exploration_rejects_selected_cube_key() {
        let e = parse_agent_output(&cube_reply("w", "none", "red"), SchemaFamily::Exploration)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::WrongKeys);
    }

    #[test]
    fn bad_action_and_bad_color() {
        let e = parse_agent_output(&cube_reply("jump", "none", "red"), SchemaFamily::CubeSelection)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::BadAction);
        let e = parse_agent_output(&cube_reply("w", "none", "navy"), SchemaFamily::CubeSelection)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::BadColor);
        let e = parse_agent_output(&cube_reply("done", "teal", "red"), SchemaFamily::CubeSelection)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::BadColor);
    }

    #[test]
    fn error_order_prefers_earlier_kinds() {
        // Bad action and bad color together: bad_action wins.
        let e = parse_agent_output(&cube_reply("fly", "none", "navy"), SchemaFamily::CubeSelection)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::BadAction);
        // Bad color and premature selection together: bad_color wins.
        let e = parse_agent_output(&cube_reply("w", "red", "navy"), SchemaFamily::CubeSelection)
            .unwrap_err();
        assert_eq!(e.kind, ProtocolErrorKind::BadColor);
    }

    #[test]
    fn not_json() {
        for raw in ["", "hello", "[1,2]", "{\"action\": "] {
            let e = parse_agent_output(raw, SchemaFamily::CubeSelection).unwrap_err();
            assert_eq!(e.kind, ProtocolErrorKind::NotJson, "{raw}");
        }
    }

    #[test]
    fn fence_is_stripped_with_warning() {
        let raw = format!("```json\n{}\n```", cube_reply("done", "Blue", "BLUE"));
        let r = parse_agent_output(&raw, SchemaFamily::CubeSelection).unwrap();
        assert_eq!(r.warnings, vec![ProtocolErrorKind::FencedOutput]);
        assert_eq!(r.step.selected_cube, Some(ColorLabel::Blue));
        assert_eq!(r.step.identification, SelfColor::Color(ColorLabel::Blue));
    }

    #[test]
    fn empty_and_null_identification_are_unknown() {
        let raw = cube_reply("a", "none", "");
        let r = parse_agent_output(&raw, SchemaFamily::CubeSelection).unwrap();
        assert_eq!(r.step.identification, SelfColor::Unknown);
        let raw = raw.replace("\"identification\":\"\"", "\"identification\":null");
        let r = parse_agent_output(&raw, SchemaFamily::CubeSelection).unwrap();
        assert_eq!(r.step.identification, SelfColor::Unknown);
    }

    #[test]
    fn history_formatting() {
        assert_eq!(format_history(None), "No previous steps.");
        let step = AgentStep {
            action: Action::TurnLeft,
            identification: SelfColor::Unknown,
            selected_cube: None,
            view_description: String::new(),
            reasoning: String::new(),
            summary: "turning to scan".into(),
        };
        let h = format_history(Some(&step));
        assert!(h.contains("action=a"));
        assert!(h.contains("turning to scan"));
        let long = AgentStep { summary: "x".repeat(2000), ..step };
        let h = format_history(Some(&long));
        let summary = h.split("summary=").nth(1).unwrap();
        assert_eq!(summary.chars().count(), SUMMARY_LIMIT);
    }

    #[test]
    fn position_text_has_budget() {
        let p = Pose::new(1.25, -0.5, Heading::NORTH);
        assert_eq!(
            format_position(&p, 13, 100),
            "Position: x=1.25, y=-0.50, heading=90 deg. Remaining steps: 87."
        );
    }

    #[test]
    fn e3_first_line_is_substituted() {
        let mut sc = generate_scenario(Condition::E3, 4);
        sc.ego_color = ColorLabel::Red;
        sc.wrong_color = Some(ColorLabel::Blue);
        let sys = system_prompt(&sc);
        assert!(sys.starts_with("You are a blue robot.\nInput each step"));
        assert_eq!(sys.lines().count(), CUBE_SYSTEM_PROMPT.lines().count());
    }
}
