use proptest::prelude::*;
use prosocial_core::trajectory::*;
use prosocial_core::{InteractionEvent, InteractionMode, Observation, RobotAction};
use serde_json::Value;

fn arb_event(round: usize) -> impl Strategy<Value = InteractionEvent> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(move |(r_mode, costly, helped)| {
        let mode = if r_mode { InteractionMode::RNeedsHelp } else { InteractionMode::HNeedsHelp };
        let [c, f] = mode.actions();
        let action = if costly { c } else { f };
        let obs = match mode {
            InteractionMode::HNeedsHelp => Observation::None,
            InteractionMode::RNeedsHelp if helped => Observation::HumanHelped,
            InteractionMode::RNeedsHelp => Observation::HumanDidNotHelp,
        };
        InteractionEvent::new(round, mode, action, obs).unwrap()
    })
}

// Empty CSV cells read back as absent keys, so notes are never empty.
fn arb_trajectory(id: usize, with_extras: bool) -> impl Strategy<Value = Trajectory> {
    (1usize..10, 0usize..3)
        .prop_flat_map(|(len, gap)| {
            let events: Vec<_> = (0..len).map(|k| arb_event(k * (gap + 1))).collect();
            (events, prop::collection::vec("[a-z]{1,6}", len))
        })
        .prop_map(move |(events, notes)| {
            let mut t = Trajectory::new(format!("participant-{id}"), events);
            if with_extras {
                for (x, note) in t.extras.iter_mut().zip(notes) {
                    x.insert("note".into(), Value::String(note));
                    x.insert("condition".into(), Value::String("lab".into()));
                }
            }
            t
        })
}

fn arb_set(with_extras: bool) -> impl Strategy<Value = TrajectorySet> {
    (1usize..6)
        .prop_flat_map(move |n| (0..n).map(|i| arb_trajectory(i, with_extras)).collect::<Vec<_>>())
        .prop_map(|ts| TrajectorySet::new(ts).unwrap())
}

proptest! {
    #[test]
    fn jsonl_roundtrip(set in arb_set(true)) {
        let bytes = write_trajectories(&set, Format::Jsonl).unwrap();
        let back = load_trajectories(bytes.as_slice(), Format::Jsonl).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn csv_roundtrip(set in arb_set(true)) {
        let bytes = write_trajectories(&set, Format::Csv).unwrap();
        let back = load_trajectories(bytes.as_slice(), Format::Csv).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn csv_and_jsonl_agree_on_events(set in arb_set(false)) {
        let a = load_trajectories(write_trajectories(&set, Format::Csv).unwrap().as_slice(), Format::Csv).unwrap();
        let b = load_trajectories(write_trajectories(&set, Format::Jsonl).unwrap().as_slice(), Format::Jsonl).unwrap();
        for (x, y) in a.trajectories.iter().zip(&b.trajectories) {
            prop_assert_eq!(&x.events, &y.events);
        }
    }
}

#[test]
fn metadata_is_constant_keys_only() {
    let text = concat!(
        r#"{"pid":"a","round":0,"mode":"H","action":"help","obs":"none","cond":"x","t":1}"#, "\n",
        r#"{"pid":"a","round":1,"mode":"R","action":"signal","obs":"help","cond":"x","t":2}"#, "\n",
    );
    let set = load_jsonl(text.as_bytes()).unwrap();
    let meta = set.trajectories[0].metadata();
    assert_eq!(meta.get("cond"), Some(&Value::String("x".into())));
    assert!(!meta.contains_key("t"));
}

#[test]
fn illegal_rows_name_the_trajectory_and_round() {
    let text = "pid,round,mode,action,obs\np7,0,H,help,none\np7,1,H,signal,none\n";
    let err = load_csv(text.as_bytes(), &CsvColumns::default()).unwrap_err().to_string();
    assert!(err.contains("p7"), "{err}");
    assert!(err.contains("round 1"), "{err}");
    let text = "pid,round,mode,action,obs\np7,0,R,signal,none\n";
    assert!(load_csv(text.as_bytes(), &CsvColumns::default()).is_err());
    let text = "pid,round,mode,action,obs\np7,0,H,no-help,help\n";
    assert!(load_csv(text.as_bytes(), &CsvColumns::default()).is_err());
}

#[test]
fn custom_column_mapping() {
    let text = "participant,step,m,a,o\nq,0,R,no-signal,no-help\n";
    let cols = CsvColumns {
        pid: "participant".into(),
        round: "step".into(),
        mode: "m".into(),
        action: "a".into(),
        obs: "o".into(),
    };
    let set = load_csv(text.as_bytes(), &cols).unwrap();
    assert_eq!(set.trajectories[0].events[0].action, RobotAction::NoSignal);
    assert_eq!(set.trajectories[0].events[0].observation, Observation::HumanDidNotHelp);
}

#[test]
fn builtin_schedules() {
    let all = builtin_sequences();
    assert_eq!(all.len(), 7);
    for s in &all[..6] {
        assert_eq!(s.len(), 5);
        let r = s.modes.iter().filter(|m| **m == InteractionMode::RNeedsHelp).count();
        assert_eq!(r, 3, "{}", s.name);
    }
    let eval = builtin_sequence(EVALUATION_SEQUENCE).unwrap();
    assert_eq!(eval.modes, ModeSequence::from_modes("R,H,R,H,R,H,R,H,R").unwrap().modes);
}
