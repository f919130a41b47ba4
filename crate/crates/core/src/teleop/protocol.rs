use serde::{Deserialize, Serialize};

use super::TeleopError;
use crate::magnetics::MAX_ROTATION_FREQUENCY;

/// Operator command, tagged by `cmd` on the wire:
/// `{"seq":3,"cmd":"set_frequency","hz":3.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandKind {
    SetFrequency { hz: f64 },
    SetHeading { rad: f64 },
    StartRotation,
    StopRotation,
    TriggerFus { duration_s: f64 },
    Reset,
    LoadScene { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: CommandKind,
}

impl Command {
    pub fn new(seq: u64, kind: CommandKind) -> Self {
        Self { seq, kind }
    }

    /// Range checks that do not depend on session state.
    pub fn validate(&self) -> Result<(), TeleopError> {
        match &self.kind {
            CommandKind::SetFrequency { hz } if !(0.0..=MAX_ROTATION_FREQUENCY).contains(hz) => Err(
                TeleopError::MalformedCommand(format!("frequency {hz} Hz outside [0, {MAX_ROTATION_FREQUENCY}]")),
            ),
            CommandKind::SetHeading { rad } if !rad.is_finite() => {
                Err(TeleopError::MalformedCommand("heading must be finite".into()))
            }
            CommandKind::TriggerFus { duration_s } if !(duration_s.is_finite() && *duration_s > 0.0) => {
                Err(TeleopError::MalformedCommand("FUS duration must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("commands serialize")
    }
}

/// Parses one wire message. The inner `flatten` would accept unknown keys,
/// so the message is checked against its own re-serialization.
pub fn parse_command(text: &str) -> Result<Command, TeleopError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| TeleopError::MalformedCommand(format!("not JSON: {e}")))?;
    let cmd: Command = serde_json::from_value(value.clone())
        .map_err(|e| TeleopError::MalformedCommand(format!("unrecognised command: {e}")))?;
    let keys = |v: &serde_json::Value| -> Vec<String> {
        v.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default()
    };
    let reserialized = serde_json::to_value(&cmd).expect("commands serialize");
    if let Some(extra) = keys(&value).into_iter().find(|k| !keys(&reserialized).contains(k)) {
        return Err(TeleopError::MalformedCommand(format!("unknown field '{extra}'")));
    }
    cmd.validate()?;
    Ok(cmd)
}

/// Fixed-rate state report sent to every observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub pos: [f64; 3],
    pub phase: f64,
    pub sync: bool,
    pub arc: f64,
    pub temp_c: f64,
    pub released: f64,
    pub freq: f64,
    pub heading: f64,
    pub rotating: bool,
    pub fus_active: bool,
    /// Sequence number of the last applied command.
    pub ack: Option<u64>,
    /// Snapshots this observer missed since the previous one it received.
    pub dropped: u64,
    pub scene: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshots serialize")
    }
}

/// Reply to a rejected command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandError {
    pub seq: Option<u64>,
    pub error: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let c = parse_command(r#"{"seq":1,"cmd":"set_frequency","hz":3.0}"#).unwrap();
        assert_eq!(c, Command::new(1, CommandKind::SetFrequency { hz: 3.0 }));
        assert_eq!(parse_command(&c.to_json()).unwrap(), c);
        let r = parse_command(r#"{"seq":2,"cmd":"reset"}"#).unwrap();
        assert_eq!(r.kind, CommandKind::Reset);
        let l = parse_command(r#"{"seq":3,"cmd":"load_scene","name":"flat_dry"}"#).unwrap();
        assert_eq!(l.kind, CommandKind::LoadScene { name: "flat_dry".into() });
    }

    #[test]
    fn malformed_messages() {
        for bad in [
            "",
            "{",
            r#"{"seq":1,"cmd":"warp"}"#,
            r#"{"cmd":"reset"}"#,
            r#"{"seq":1,"cmd":"set_frequency","hz":7}"#,
            r#"{"seq":1,"cmd":"set_frequency","hz":3,"extra":1}"#,
            r#"{"seq":-1,"cmd":"reset"}"#,
            r#"{"seq":1,"cmd":"trigger_fus","duration_s":0}"#,
        ] {
            assert!(matches!(parse_command(bad), Err(TeleopError::MalformedCommand(_))), "{bad}");
        }
    }
}
