mod support;

use ipd_core::game::{Action, Counterpart, GameTranscript, PayoffMatrix, SetupKind};
use ipd_core::gateway::{parse_decision, render_decision};
use ipd_core::metrics;
use ipd_core::steering::Condition;
use ipd_core::tournament::{self, Runtime};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use support::{oracle, synth};

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![Just(Action::Cooperate), Just(Action::Defect)]
}

/// The same game with the players' roles exchanged.
fn swapped(g: &GameTranscript) -> GameTranscript {
    let a: Vec<Action> = g.rounds.iter().map(|r| r.b_action).collect();
    let b: Vec<Action> = g.rounds.iter().map(|r| r.a_action).collect();
    synth::transcript(
        SetupKind::Setup1,
        Condition::Baseline,
        Counterpart::Rule { spec: "AC".parse().unwrap() },
        &a,
        &b,
        None,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn years_always_come_from_the_table(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = synth::random_transcript(&mut rng, 12);
        g.check_invariants(&PayoffMatrix::default()).unwrap();
        for r in &g.rounds {
            prop_assert_eq!((r.years_a, r.years_b), oracle::table_years(r.a_action, r.b_action));
        }
    }

    #[test]
    fn ten_round_scores_are_bounded(a in prop::collection::vec(action(), 10), b in prop::collection::vec(action(), 10)) {
        let g = synth::transcript(
            SetupKind::Setup1,
            Condition::Baseline,
            Counterpart::Rule { spec: "RD0.5".parse().unwrap() },
            &a,
            &b,
            None,
        );
        let total = metrics::total_score(&g).unwrap();
        prop_assert!((20..=60).contains(&total));
        let personal = metrics::personal_score(&g).unwrap();
        prop_assert!((-50..=50).contains(&personal));
        let s = swapped(&g);
        prop_assert_eq!(metrics::personal_score(&s).unwrap(), -personal);
        prop_assert_eq!(metrics::total_score(&s).unwrap(), total);
    }

    #[test]
    fn transcript_json_roundtrip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = synth::random_transcript(&mut rng, 12);
        let text = serde_json::to_string(&g).unwrap();
        let back: GameTranscript = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn render_then_parse_is_identity(
        reasoning in "[A-Za-z0-9 ,.'\n]{0,80}",
        message in prop::option::of(action()),
        act in action(),
    ) {
        let lowered = reasoning.to_ascii_lowercase();
        prop_assume!(!["message", "action", "decision"].iter().any(|w| lowered.contains(w)));
        let reasoning = reasoning.trim_end().to_string();
        let raw = render_decision(&reasoning, message, act);
        let p = parse_decision(&raw, message.is_some()).unwrap();
        prop_assert_eq!((p.action, p.message), (act, message));
        prop_assert_eq!(p.reasoning, reasoning);
    }

    #[test]
    fn replay_is_identical(seed in any::<u64>(), setup in 0usize..3) {
        let setup = [SetupKind::Setup1, SetupKind::Setup2, SetupKind::Setup3][setup];
        let mut plan = tournament::ExperimentPlan::standard(
            setup,
            seed,
            tournament::PlayerConfig::scripted("TFT".parse().unwrap()),
        );
        plan.iterations_per_cell = 1;
        let cells = plan.cells();
        let cell = &cells[(seed % cells.len() as u64) as usize];
        let first = tournament::play_game(&plan, cell, 0, &Runtime::offline()).unwrap();
        let second = tournament::play_game(&plan, cell, 0, &Runtime::offline()).unwrap();
        prop_assert_eq!(&first, &second);
        first.check_invariants(&plan.payoff).unwrap();
    }
}

#[test]
fn mutual_cooperation_and_defection_fixtures() {
    let make = |x: Action| {
        synth::transcript(
            SetupKind::Setup1,
            Condition::Baseline,
            Counterpart::Rule { spec: "AC".parse().unwrap() },
            &[x; 10],
            &[x; 10],
            None,
        )
    };
    assert_eq!(metrics::total_score(&make(Action::Cooperate)).unwrap(), 20);
    assert_eq!(metrics::total_score(&make(Action::Defect)).unwrap(), 60);
    assert_eq!(metrics::personal_score(&make(Action::Defect)).unwrap(), 0);
}
