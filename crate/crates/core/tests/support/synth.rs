//! Random transcripts built through the game engine.

use ipd_core::game::{
    Action, Counterpart, Decision, DecisionSource, GameState, GameStatus, GameTranscript, PayoffMatrix, SetupKind,
};
use ipd_core::steering::Condition;
use ipd_core::strategies::OpponentSpec;
use rand::seq::SliceRandom;
use rand::Rng;

fn any_action(rng: &mut impl Rng) -> Action {
    if rng.gen() {
        Action::Cooperate
    } else {
        Action::Defect
    }
}

fn decision(action: Action, message: Option<Action>) -> Decision {
    Decision {
        action,
        message,
        reasoning: String::new(),
        source: DecisionSource::Script { policy: "synth".into() },
    }
}

/// Builds a valid, complete transcript from explicit moves.
pub fn transcript(
    setup: SetupKind,
    condition_a: Condition,
    counterpart: Counterpart,
    a: &[Action],
    b: &[Action],
    a_messages: Option<&[Action]>,
) -> GameTranscript {
    assert_eq!(a.len(), b.len());
    let mut st = GameState::new(setup, PayoffMatrix::default(), a.len() as u32);
    for t in 0..a.len() {
        let msg = a_messages.map(|m| m[t]);
        let (b_msg, intent) = match setup {
            SetupKind::Setup1 => (None, None),
            SetupKind::Setup2 => (None, Some(b[t])),
            SetupKind::Setup3 => (Some(b[t]), None),
        };
        st.play_round(decision(a[t], msg), decision(b[t], b_msg), intent).unwrap();
    }
    GameTranscript {
        game_id: "synth".into(),
        setup_kind: setup,
        condition_a,
        condition_b: counterpart,
        cell_index: 0,
        iteration: 0,
        seed: 0,
        rounds_per_game: a.len() as u32,
        status: GameStatus::Valid,
        rounds: st.into_rounds(),
    }
}

/// Setup, opponent and every move drawn at random; B's moves are independent
/// of its label so the conditional rates see every pattern.
pub fn random_transcript(rng: &mut impl Rng, max_rounds: usize) -> GameTranscript {
    let setup = *[SetupKind::Setup1, SetupKind::Setup2, SetupKind::Setup3].choose(rng).unwrap();
    let n = rng.gen_range(1..=max_rounds);
    let grid = Condition::standard_grid();
    let counterpart = match setup {
        SetupKind::Setup1 => {
            let opps = OpponentSpec::setup1_defaults();
            Counterpart::Rule { spec: opps.choose(rng).unwrap().clone() }
        }
        SetupKind::Setup2 => Counterpart::Rule {
            spec: OpponentSpec::setup2_defaults().choose(rng).unwrap().clone(),
        },
        SetupKind::Setup3 => Counterpart::Agent {
            condition: grid.choose(rng).unwrap().clone(),
        },
    };
    let a: Vec<Action> = (0..n).map(|_| any_action(rng)).collect();
    let b: Vec<Action> = (0..n).map(|_| any_action(rng)).collect();
    let messages: Vec<Action> = (0..n).map(|_| any_action(rng)).collect();
    let a_messages = setup.has_communication().then_some(messages.as_slice());
    let mut t = transcript(setup, grid.choose(rng).unwrap().clone(), counterpart, &a, &b, a_messages);
    t.seed = rng.gen();
    t
}
