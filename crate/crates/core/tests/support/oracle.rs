//! Brute-force restatement of the rate definitions, 1-based like the
//! definitions themselves, sharing no code with the metrics module.

use ipd_core::game::{Action, GameTranscript};
use ipd_core::metrics::{ForgivenessMode, MetricKind};
use num_rational::Ratio;

use Action::{Cooperate as C, Defect as D};

/// (events, opportunities)
pub fn scan(kind: MetricKind, game: &GameTranscript, mode: ForgivenessMode) -> (u32, u32) {
    let n = game.rounds.len();
    let a = |t: usize| game.rounds[t - 1].a_action;
    let b = |t: usize| game.rounds[t - 1].b_action;
    let mut events = 0;
    let mut opportunities = 0;
    if kind == MetricKind::Lying {
        for t in 1..=n {
            opportunities += 1;
            if game.rounds[t - 1].a_message != Some(a(t)) {
                events += 1;
            }
        }
        return (events, opportunities);
    }
    for t in 2..=n {
        let (is_opportunity, event) = match kind {
            MetricKind::Troublemaking => (b(t - 1) == C, D),
            MetricKind::Exploitability => (b(t - 1) == D, C),
            MetricKind::Retaliatory => (b(t - 1) == D, D),
            MetricKind::Forgiveness => {
                let apology = match mode {
                    ForgivenessMode::Strict => t >= 3 && b(t - 2) == D && b(t - 1) == C,
                    ForgivenessMode::Loose => b(t - 1) == C && (1..t - 1).any(|s| b(s) == D),
                };
                (apology, C)
            }
            MetricKind::Lying => unreachable!(),
        };
        if is_opportunity {
            opportunities += 1;
            if a(t) == event {
                events += 1;
            }
        }
    }
    (events, opportunities)
}

pub fn scan_ratio(kind: MetricKind, game: &GameTranscript, mode: ForgivenessMode) -> Option<Ratio<i64>> {
    let (e, o) = scan(kind, game, mode);
    (o > 0).then(|| Ratio::new(e.into(), o.into()))
}

/// Median by sorting and averaging the middle pair.
pub fn median(mut v: Vec<Ratio<i64>>) -> Option<Ratio<i64>> {
    if v.is_empty() {
        return None;
    }
    v.sort();
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2
    })
}

/// Years from the fixed table, (A, B).
pub fn table_years(a: Action, b: Action) -> (u32, u32) {
    match (a, b) {
        (C, C) => (1, 1),
        (C, D) => (5, 0),
        (D, C) => (0, 5),
        (D, D) => (3, 3),
    }
}
