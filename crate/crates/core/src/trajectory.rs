//! Interaction logs and mode schedules.
//!
//! One record per round: participant id, round index, mode, robot action and
//! the human response. JSONL is canonical; CSV uses the header
//! `pid,round,mode,action,obs`. Any other keys or columns are carried through
//! untouched as per-event extras.
//!
//! Study schedules are written as strings of *help-opportunity* letters: `H`
//! means the human gets the chance to help, i.e. the robot is trapped and the
//! mode is [`InteractionMode::RNeedsHelp`]. [`mode_for_opportunity`] is the
//! one place that inverts the letters.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{InteractionEvent, InteractionMode, Observation, RobotAction};

pub type Extras = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Participant or session id.
    pub id: String,
    pub events: Vec<InteractionEvent>,
    /// Unrecognized fields of each event record, parallel to `events`.
    pub extras: Vec<Extras>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, events: Vec<InteractionEvent>) -> Trajectory {
        let extras = vec![Extras::new(); events.len()];
        Trajectory {
            id: id.into(),
            events,
            extras,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Extra fields whose value is the same on every event, e.g. a condition
    /// label.
    pub fn metadata(&self) -> Extras {
        let Some(first) = self.extras.first() else {
            return Extras::new();
        };
        first
            .iter()
            .filter(|(k, v)| self.extras.iter().all(|e| e.get(*k) == Some(*v)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.extras.len() != self.events.len() {
            return Err(Error::Legality {
                trajectory: self.id.clone(),
                round: 0,
                message: "extras do not match the number of events".into(),
            });
        }
        let mut last: Option<usize> = None;
        for e in &self.events {
            e.check().map_err(|err| Error::Legality {
                trajectory: self.id.clone(),
                round: e.round_index,
                message: legality_message(&err),
            })?;
            if let Some(prev) = last {
                if e.round_index <= prev {
                    return Err(Error::Legality {
                        trajectory: self.id.clone(),
                        round: e.round_index,
                        message: format!("round index {} does not follow {}", e.round_index, prev),
                    });
                }
            }
            last = Some(e.round_index);
        }
        Ok(())
    }
}

fn legality_message(err: &Error) -> String {
    match err {
        Error::IllegalAction { mode, action } => format!(
            "action {action} is not available in mode {mode}: help/no-help only when the human needs help, signal/no-signal only when the robot does"
        ),
        Error::IllegalObservation { mode, obs } => format!(
            "observation {obs} in mode {mode}: human responses are observed only when the robot needs help, otherwise the observation is none"
        ),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<TrajectorySet> {
        let set = TrajectorySet { trajectories };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for t in &self.trajectories {
            if t.is_empty() {
                return Err(Error::Legality {
                    trajectory: t.id.clone(),
                    round: 0,
                    message: "trajectory has no events".into(),
                });
            }
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Legality {
                    trajectory: t.id.clone(),
                    round: 0,
                    message: "duplicate trajectory id".into(),
                });
            }
            t.check()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

/// Column names for CSV input whose header differs from the default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvColumns {
    pub pid: String,
    pub round: String,
    pub mode: String,
    pub action: String,
    pub obs: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            pid: "pid".into(),
            round: "round".into(),
            mode: "mode".into(),
            action: "action".into(),
            obs: "obs".into(),
        }
    }
}

const CORE_KEYS: [&str; 5] = ["pid", "round", "mode", "action", "obs"];

/// Collects events into trajectories keyed by id, in order of first
/// appearance.
#[derive(Default)]
struct Grouper {
    index: BTreeMap<String, usize>,
    trajectories: Vec<Trajectory>,
}

impl Grouper {
    fn push(&mut self, pid: String, event: InteractionEvent, extras: Extras) -> Result<()> {
        let slot = match self.index.get(&pid) {
            Some(&i) => i,
            None => {
                self.index.insert(pid.clone(), self.trajectories.len());
                self.trajectories.push(Trajectory::new(pid.clone(), Vec::new()));
                self.trajectories.len() - 1
            }
        };
        let t = &mut self.trajectories[slot];
        if let Some(prev) = t.events.last() {
            if event.round_index <= prev.round_index {
                return Err(Error::Legality {
                    trajectory: pid,
                    round: event.round_index,
                    message: format!("round index {} does not follow {}", event.round_index, prev.round_index),
                });
            }
        }
        t.events.push(event);
        t.extras.push(extras);
        Ok(())
    }

    fn finish(self) -> TrajectorySet {
        TrajectorySet {
            trajectories: self.trajectories,
        }
    }
}

fn parse_event(
    pid: &str,
    line: usize,
    round: usize,
    mode: &str,
    action: &str,
    obs: &str,
) -> Result<InteractionEvent> {
    let mode = InteractionMode::parse(mode).ok_or_else(|| Error::Parse {
        line,
        message: format!("unknown mode {mode:?} (expected \"H\" or \"R\")"),
    })?;
    let action = RobotAction::parse(action).ok_or_else(|| Error::Parse {
        line,
        message: format!("unknown action {action:?}"),
    })?;
    let obs = Observation::parse(obs).ok_or_else(|| Error::Parse {
        line,
        message: format!("unknown observation {obs:?}"),
    })?;
    InteractionEvent::new(round, mode, action, obs).map_err(|err| Error::Legality {
        trajectory: pid.to_string(),
        round,
        message: legality_message(&err),
    })
}

pub fn load_trajectories<R: Read>(source: R, format: Format) -> Result<TrajectorySet> {
    match format {
        Format::Jsonl => load_jsonl(source),
        Format::Csv => load_csv(source, &CsvColumns::default()),
    }
}

fn json_str(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Null => Some(String::new()),
        _ => None,
    }
}

pub fn load_jsonl<R: Read>(source: R) -> Result<TrajectorySet> {
    let reader = std::io::BufReader::new(source);
    let mut grouper = Grouper::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: Map<String, Value> = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let field = |record: &Map<String, Value>, key: &str| -> Result<String> {
            json_str(record.get(key)).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("missing or non-scalar field {key:?}"),
            })
        };
        let pid = field(&record, "pid")?;
        let round = record
            .get("round")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "field \"round\" must be a non-negative integer".into(),
            })? as usize;
        let mode = field(&record, "mode")?;
        let action = field(&record, "action")?;
        let obs = json_str(record.get("obs")).unwrap_or_else(|| "none".into());
        let event = parse_event(&pid, line_no, round, &mode, &action, &obs)?;
        for k in CORE_KEYS {
            record.remove(k);
        }
        grouper.push(pid, event, record.into_iter().collect())?;
    }
    Ok(grouper.finish())
}

/// Reads CSV with a configurable column mapping. Columns outside the mapping
/// become string-valued extras; empty cells are dropped.
pub fn load_csv<R: Read>(source: R, columns: &CsvColumns) -> Result<TrajectorySet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let idx = [
        find(&columns.pid)?,
        find(&columns.round)?,
        find(&columns.mode)?,
        find(&columns.action)?,
        find(&columns.obs)?,
    ];
    let mut grouper = Grouper::default();
    for (i, row) in reader.records().enumerate() {
        let line_no = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let cell = |j: usize| row.get(j).unwrap_or("");
        let pid = cell(idx[0]).to_string();
        let round: usize = cell(idx[1]).parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("round {:?} is not a non-negative integer", cell(idx[1])),
        })?;
        let event = parse_event(&pid, line_no, round, cell(idx[2]), cell(idx[3]), cell(idx[4]))?;
        let extras = headers
            .iter()
            .enumerate()
            .filter(|(j, _)| !idx.contains(j))
            .filter(|(j, _)| !cell(*j).is_empty())
            .map(|(j, h)| (h.to_string(), Value::String(cell(j).to_string())))
            .collect();
        grouper.push(pid, event, extras)?;
    }
    Ok(grouper.finish())
}

pub fn write_trajectories(set: &TrajectorySet, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Jsonl => Ok(write_jsonl(set)),
        Format::Csv => write_csv(set),
    }
}

/// One JSON object for an event, as written to a JSONL log.
pub fn event_record(pid: &str, event: &InteractionEvent, extras: &Extras) -> Map<String, Value> {
    let mut record = Map::new();
    record.insert("pid".into(), Value::String(pid.to_string()));
    record.insert("round".into(), Value::from(event.round_index));
    record.insert("mode".into(), Value::String(event.mode.as_str().into()));
    record.insert("action".into(), Value::String(event.action.as_str().into()));
    record.insert("obs".into(), Value::String(event.observation.as_str().into()));
    for (k, v) in extras {
        if !CORE_KEYS.contains(&k.as_str()) {
            record.insert(k.clone(), v.clone());
        }
    }
    record
}

fn write_jsonl(set: &TrajectorySet) -> Vec<u8> {
    let mut out = Vec::new();
    for t in &set.trajectories {
        for (e, x) in t.events.iter().zip(&t.extras) {
            serde_json::to_writer(&mut out, &event_record(&t.id, e, x)).expect("in-memory write");
            out.push(b'\n');
        }
    }
    out
}

fn write_csv(set: &TrajectorySet) -> Result<Vec<u8>> {
    let extra_cols: BTreeSet<&str> = set
        .trajectories
        .iter()
        .flat_map(|t| t.extras.iter().flat_map(|x| x.keys().map(String::as_str)))
        .filter(|k| !CORE_KEYS.contains(k))
        .collect();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CORE_KEYS.to_vec();
    header.extend(extra_cols.iter().copied());
    writer.write_record(&header)?;
    for t in &set.trajectories {
        for (e, x) in t.events.iter().zip(&t.extras) {
            let mut row = vec![
                t.id.clone(),
                e.round_index.to_string(),
                e.mode.as_str().to_string(),
                e.action.as_str().to_string(),
                e.observation.as_str().to_string(),
            ];
            for col in &extra_cols {
                row.push(match x.get(*col) {
                    Some(Value::String(s)) => s.clone(),
                    Some(other) => other.to_string(),
                    None => String::new(),
                });
            }
            writer.write_record(&row)?;
        }
    }
    writer
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// A named schedule of interaction modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSequence {
    pub name: String,
    pub modes: Vec<InteractionMode>,
}

/// Maps a help-opportunity letter to the interaction mode. `H` (the human
/// can help) means the robot is trapped, and vice versa.
pub fn mode_for_opportunity(letter: char) -> Result<InteractionMode> {
    match letter.to_ascii_uppercase() {
        'H' => Ok(InteractionMode::RNeedsHelp),
        'R' => Ok(InteractionMode::HNeedsHelp),
        other => Err(Error::InvalidConfig(format!("unknown help-opportunity letter {other:?}"))),
    }
}

impl ModeSequence {
    pub fn new(name: impl Into<String>, modes: Vec<InteractionMode>) -> Result<ModeSequence> {
        if modes.is_empty() {
            return Err(Error::InvalidConfig("mode sequence is empty".into()));
        }
        Ok(ModeSequence {
            name: name.into(),
            modes,
        })
    }

    /// Parses a string of help-opportunity letters such as `"HRHRH"`.
    pub fn from_opportunities(letters: &str) -> Result<ModeSequence> {
        let modes = letters.chars().map(mode_for_opportunity).collect::<Result<Vec<_>>>()?;
        ModeSequence::new(letters, modes)
    }

    /// Parses mode letters as written in logs (`H` = human needs help), e.g.
    /// `"H,R"` or `"HR"`.
    pub fn from_modes(text: &str) -> Result<ModeSequence> {
        let modes = text
            .chars()
            .filter(|c| !matches!(c, ',' | ' '))
            .map(|c| {
                InteractionMode::parse(&c.to_string())
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown mode letter {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ModeSequence::new(format!("modes:{text}"), modes)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// The five-round study schedules.
pub const STUDY_SEQUENCES: [&str; 6] = ["RRHHH", "HRRHH", "HHRRH", "RHRHH", "HRHRH", "RHHRH"];
/// The nine-round alternating evaluation schedule.
pub const EVALUATION_SEQUENCE: &str = "HRHRHRHRH";

/// The six study schedules followed by the evaluation schedule.
pub fn builtin_sequences() -> Vec<ModeSequence> {
    STUDY_SEQUENCES
        .iter()
        .chain(std::iter::once(&EVALUATION_SEQUENCE))
        .map(|s| ModeSequence::from_opportunities(s).expect("built-in sequences parse"))
        .collect()
}

pub fn builtin_sequence(name: &str) -> Option<ModeSequence> {
    builtin_sequences().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use InteractionMode::{HNeedsHelp as H, RNeedsHelp as R};

    #[test]
    fn single_jsonl_line() {
        let text = r#"{"pid":"p1","round":0,"mode":"R","action":"signal","obs":"help"}"#;
        let set = load_trajectories(text.as_bytes(), Format::Jsonl).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.trajectories[0].events.len(), 1);
        let e = set.trajectories[0].events[0];
        assert_eq!(e.mode, R);
        assert_eq!(e.action, RobotAction::Signal);
        assert_eq!(e.observation, Observation::HumanHelped);
    }

    #[test]
    fn observation_in_h_mode_rejected() {
        let text = r#"{"pid":"p1","round":0,"mode":"H","action":"help","obs":"help"}"#;
        let err = load_trajectories(text.as_bytes(), Format::Jsonl).unwrap_err();
        match err {
            Error::Legality { trajectory, round, message } => {
                assert_eq!(trajectory, "p1");
                assert_eq!(round, 0);
                assert!(message.contains("observed only when the robot needs help"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"pid\":\"p1\",\"round\":0,\"mode\":\"H\",\"action\":\"help\",\"obs\":\"none\"}\n{oops";
        assert!(matches!(
            load_trajectories(text.as_bytes(), Format::Jsonl),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn non_increasing_rounds_rejected() {
        let text = "pid,round,mode,action,obs\np,1,H,help,none\np,1,R,signal,help\n";
        assert!(matches!(
            load_trajectories(text.as_bytes(), Format::Csv),
            Err(Error::Legality { round: 1, .. })
        ));
    }

    #[test]
    fn sequence_file_follows_inverted_letters() {
        let seq = ModeSequence::from_opportunities("HRRHH").unwrap();
        let mut lines = String::new();
        for (k, m) in seq.modes.iter().enumerate() {
            let (action, obs) = match m {
                H => ("no-help", "none"),
                R => ("signal", "no-help"),
            };
            lines.push_str(&format!(
                "{{\"pid\":\"p\",\"round\":{k},\"mode\":\"{m}\",\"action\":\"{action}\",\"obs\":\"{obs}\"}}\n"
            ));
        }
        let set = load_trajectories(lines.as_bytes(), Format::Jsonl).unwrap();
        let modes: Vec<_> = set.trajectories[0].events.iter().map(|e| e.mode).collect();
        assert_eq!(modes, vec![R, H, H, R, R]);
    }

    #[test]
    fn builtins() {
        let all = builtin_sequences();
        assert_eq!(all.len(), 7);
        assert_eq!(builtin_sequence("HRHRHRHRH").unwrap().modes, vec![R, H, R, H, R, H, R, H, R]);
        assert_eq!(builtin_sequence("RRHHH").unwrap().modes, vec![H, H, R, R, R]);
        assert!(all.iter().take(6).all(|s| s.len() == 5));
    }

    #[test]
    fn mode_strings() {
        assert_eq!(ModeSequence::from_modes("H,R").unwrap().modes, vec![H, R]);
        assert!(ModeSequence::from_modes("").is_err());
        assert!(ModeSequence::from_opportunities("HX").is_err());
    }

    #[test]
    fn empty_set_payloads() {
        let empty = TrajectorySet::default();
        assert!(write_trajectories(&empty, Format::Jsonl).unwrap().is_empty());
        let csv = String::from_utf8(write_trajectories(&empty, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "pid,round,mode,action,obs\n");
    }

    #[test]
    fn one_event_one_record() {
        let e = InteractionEvent::new(0, H, RobotAction::Help, Observation::None).unwrap();
        let set = TrajectorySet::new(vec![Trajectory::new("a", vec![e])]).unwrap();
        let jsonl = String::from_utf8(write_trajectories(&set, Format::Jsonl).unwrap()).unwrap();
        assert_eq!(jsonl.lines().count(), 1);
        let csv = String::from_utf8(write_trajectories(&set, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn extras_preserved_and_metadata_derived() {
        let text = concat!(
            "{\"pid\":\"p\",\"round\":0,\"mode\":\"H\",\"action\":\"help\",\"obs\":\"none\",\"condition\":\"HS\",\"t\":3.5}\n",
            "{\"pid\":\"p\",\"round\":1,\"mode\":\"R\",\"action\":\"signal\",\"obs\":\"help\",\"condition\":\"HS\",\"t\":8}\n",
        );
        let set = load_trajectories(text.as_bytes(), Format::Jsonl).unwrap();
        let t = &set.trajectories[0];
        assert_eq!(t.extras[0]["t"], serde_json::json!(3.5));
        let meta = t.metadata();
        assert_eq!(meta.len(), 1);
        assert_eq!(meta["condition"], serde_json::json!("HS"));
        let again = load_trajectories(&write_trajectories(&set, Format::Jsonl).unwrap()[..], Format::Jsonl).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn csv_column_mapping() {
        let text = "participant,step,who,act,response,cond\nx,0,R,no-signal,no-help,A\n";
        let cols = CsvColumns {
            pid: "participant".into(),
            round: "step".into(),
            mode: "who".into(),
            action: "act".into(),
            obs: "response".into(),
        };
        let set = load_csv(text.as_bytes(), &cols).unwrap();
        assert_eq!(set.trajectories[0].id, "x");
        assert_eq!(set.trajectories[0].extras[0]["cond"], serde_json::json!("A"));
        assert!(load_trajectories(text.as_bytes(), Format::Csv).is_err());
    }
}
