//! Points for proposals. The scheme lives here alone so it can be replaced.

use std::collections::HashSet;

use loopinv_core::engine::Characterization;

pub const INDUCTIVE_POINTS: i64 = 3;
pub const POTENTIAL_POINTS: i64 = 2;
pub const SOLVED_BONUS: i64 = 10;

/// Points for a single characterization.
pub fn score_update(kind: Characterization) -> i64 {
    match kind {
        Characterization::Inductive => INDUCTIVE_POINTS,
        Characterization::Potential => POTENTIAL_POINTS,
        _ => 0,
    }
}

/// Score of one level: scored proposals, with potential invariants that were
/// later promoted counted as inductive, plus the bonus once solved.
pub fn level_score<'a>(
    proposals: impl IntoIterator<Item = (&'a str, Characterization)>,
    promoted: &HashSet<String>,
    solved: bool,
) -> i64 {
    let points: i64 = proposals
        .into_iter()
        .map(|(expr, kind)| match kind {
            Characterization::Potential if promoted.contains(expr) => INDUCTIVE_POINTS,
            k => score_update(k),
        })
        .sum();
    points + if solved { SOLVED_BONUS } else { 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Characterization::*;

    #[test]
    fn constants() {
        assert_eq!(score_update(Inductive), 3);
        assert_eq!(score_update(Potential), 2);
        for k in [TypeTautology, Displaced, DisplacedPot, NonInv, Unknown] {
            assert_eq!(score_update(k), 0);
        }
    }

    #[test]
    fn promotion_upgrades_and_solving_adds_bonus() {
        let none = HashSet::new();
        let promoted: HashSet<String> = ["p".to_string()].into();
        let hist = [("p", Potential), ("i", Inductive), ("d", Displaced)];
        assert_eq!(level_score(hist, &none, false), 5);
        assert_eq!(level_score(hist, &promoted, false), 6);
        assert_eq!(level_score(hist, &promoted, true), 16);
    }
}
