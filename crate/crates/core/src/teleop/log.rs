use serde::{Deserialize, Serialize};

use super::protocol::{Command, Snapshot};
use super::session::{Session, SessionConfig};
use super::TeleopError;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub config: SessionConfig,
}

impl LogHeader {
    pub fn new(config: &SessionConfig) -> Self {
        Self {
            version: LOG_VERSION,
            config: config.clone(),
        }
    }
}

/// One line of a JSON-lines session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEntry {
    Header(LogHeader),
    /// Command applied at the start of `tick`.
    Command { tick: u64, command: Command },
    Snapshot { tick: u64, snapshot: Snapshot },
    End { ticks: u64 },
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log entries serialize")
    }
}

/// Outcome of a successful replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub ticks: u64,
    pub commands: usize,
    pub snapshots: usize,
    pub final_snapshot: Snapshot,
}

fn replay_error(line: usize, message: impl Into<String>) -> TeleopError {
    TeleopError::Replay {
        line,
        message: message.into(),
    }
}

/// Parses a log into `(line number, entry)` pairs, skipping blank lines.
pub fn parse_log(text: &str) -> Result<Vec<(usize, LogEntry)>, TeleopError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(line).map_err(|e| replay_error(i + 1, e.to_string()))?;
        entries.push((i + 1, entry));
    }
    Ok(entries)
}

fn advance(
    session: &mut Session,
    to: u64,
    line: usize,
    produced: &mut Vec<(u64, Snapshot)>,
) -> Result<(), TeleopError> {
    if session.tick_count() > to {
        return Err(replay_error(line, format!("tick {to} is in the past")));
    }
    while session.tick_count() < to {
        let tick = session.tick_count() + 1;
        if let Some(s) = session.tick().map_err(|e| replay_error(line, e.to_string()))? {
            produced.push((tick, s));
        }
    }
    Ok(())
}

/// Re-runs a recorded session and checks every recorded snapshot bit for bit.
pub fn replay(text: &str) -> Result<ReplayReport, TeleopError> {
    let entries = parse_log(text)?;
    let (first_line, header) = match entries.first() {
        Some((n, LogEntry::Header(h))) => (*n, h.clone()),
        Some((n, _)) => return Err(replay_error(*n, "log does not start with a header")),
        None => return Err(replay_error(1, "empty log")),
    };
    if header.version != LOG_VERSION {
        return Err(replay_error(first_line, format!("unsupported log version {}", header.version)));
    }
    let mut session = Session::new(header.config).map_err(|e| replay_error(first_line, e.to_string()))?;
    let mut produced: Vec<(u64, Snapshot)> = Vec::new();
    let mut checked = 0;
    let mut commands = 0;
    let mut end = None;
    for (line, entry) in entries.into_iter().skip(1) {
        if end.is_some() {
            return Err(replay_error(line, "entry after end marker"));
        }
        match entry {
            LogEntry::Header(_) => return Err(replay_error(line, "duplicate header")),
            LogEntry::Command { tick, command } => {
                if tick == 0 {
                    return Err(replay_error(line, "commands apply from tick 1"));
                }
                advance(&mut session, tick - 1, line, &mut produced)?;
                session
                    .submit(command)
                    .map_err(|e| replay_error(line, format!("command rejected: {e}")))?;
                commands += 1;
            }
            LogEntry::Snapshot { tick, snapshot } => {
                advance(&mut session, tick, line, &mut produced)?;
                match produced.get(checked) {
                    Some((t, s)) if *t == tick && *s == snapshot => checked += 1,
                    Some((t, s)) if *t == tick => {
                        return Err(replay_error(
                            line,
                            format!("snapshot at tick {tick} differs: replayed {}", s.to_json()),
                        ))
                    }
                    _ => return Err(replay_error(line, format!("no snapshot is due at tick {tick}"))),
                }
            }
            LogEntry::End { ticks } => {
                advance(&mut session, ticks, line, &mut produced)?;
                end = Some(line);
            }
        }
    }
    if produced.len() != checked {
        let line = end.unwrap_or(0);
        return Err(replay_error(
            line,
            format!("{} replayed snapshots were never recorded", produced.len() - checked),
        ));
    }
    Ok(ReplayReport {
        ticks: session.tick_count(),
        commands,
        snapshots: checked,
        final_snapshot: session.snapshot(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teleop::protocol::CommandKind;

    fn recorded(seconds: f64) -> (String, Snapshot) {
        let mut s = Session::new(SessionConfig::default()).unwrap();
        s.record_in_memory().unwrap();
        s.submit(Command::new(1, CommandKind::SetFrequency { hz: 4.0 })).unwrap();
        s.submit(Command::new(2, CommandKind::StartRotation)).unwrap();
        s.run_for(seconds / 2.0).unwrap();
        s.submit(Command::new(3, CommandKind::SetHeading { rad: 0.1 })).unwrap();
        s.submit(Command::new(4, CommandKind::TriggerFus { duration_s: 30.0 })).unwrap();
        s.run_for(seconds / 2.0).unwrap();
        s.finish_recording().unwrap();
        (s.recorded_log().unwrap(), s.snapshot())
    }

    #[test]
    fn header_only_log_replays() {
        let mut s = Session::new(SessionConfig::default()).unwrap();
        s.record_in_memory().unwrap();
        let log = s.recorded_log().unwrap();
        assert_eq!(log.lines().count(), 1);
        let r = replay(&log).unwrap();
        assert_eq!((r.ticks, r.snapshots, r.commands), (0, 0, 0));
    }

    #[test]
    fn ten_second_run_replays_bit_exactly() {
        let (log, last) = recorded(10.0);
        let r = replay(&log).unwrap();
        assert_eq!(r.final_snapshot, last);
        assert_eq!(r.final_snapshot.pos.map(f64::to_bits), last.pos.map(f64::to_bits));
        assert_eq!(r.snapshots, 300);
        assert_eq!(r.commands, 4);
    }

    #[test]
    fn corrupted_line_is_named() {
        let (log, _) = recorded(1.0);
        let mut lines: Vec<String> = log.lines().map(String::from).collect();
        lines[7] = lines[7].replacen('{', "{{", 1);
        match replay(&lines.join("\n")) {
            Err(TeleopError::Replay { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tampered_snapshot_is_detected() {
        let (log, _) = recorded(1.0);
        let idx = log.lines().position(|l| l.contains("\"snapshot\"")).unwrap();
        let mut lines: Vec<String> = log.lines().map(String::from).collect();
        let mut entry: LogEntry = serde_json::from_str(&lines[idx]).unwrap();
        if let LogEntry::Snapshot { snapshot, .. } = &mut entry {
            snapshot.pos[0] += 1e-12;
        }
        lines[idx] = entry.to_line();
        match replay(&lines.join("\n")) {
            Err(TeleopError::Replay { line, message }) => {
                assert_eq!(line, idx + 1);
                assert!(message.contains("differs"));
            }
            other => panic!("{other:?}"),
        }
    }
}
