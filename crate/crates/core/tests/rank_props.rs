use molgrammar_core::rank::{
    fit_bradley_terry, judge, log_likelihood, ranking, tournament, AbilityVector, DesignStory, Judge, MatchRecord,
    RankError, StrengthJudge,
};
use proptest::prelude::*;

fn story(pass: usize) -> DesignStory {
    DesignStory { molecule: "m".into(), pass, steps: Vec::new() }
}

/// Coarse-to-fine grid search over log-abilities with `log a2 = -(x0 + x1)`.
fn grid_mle(matches: &[MatchRecord]) -> [f64; 3] {
    let abilities = |x: f64, y: f64| [x.exp(), y.exp(), (-x - y).exp()];
    let (mut cx, mut cy, mut step) = (0.0, 0.0, 0.5);
    let mut span = 16;
    while step > 1e-8 {
        let mut best = (f64::NEG_INFINITY, cx, cy);
        for i in -span..=span {
            for j in -span..=span {
                let (x, y) = (cx + i as f64 * step, cy + j as f64 * step);
                let ll = log_likelihood(&abilities(x, y), matches);
                if ll > best.0 {
                    best = (ll, x, y);
                }
            }
        }
        (cx, cy) = (best.1, best.2);
        step /= 4.0;
        span = 8;
    }
    abilities(cx, cy)
}

fn three_player_matches() -> impl Strategy<Value = Vec<MatchRecord>> {
    let weight = prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0];
    let extra = prop::collection::vec((0usize..3, 0usize..3, weight.clone()), 0..6);
    (weight.clone(), weight, extra).prop_map(|(w01, w12, extra)| {
        let mut m = vec![
            MatchRecord { pass_a: 0, pass_b: 1, weight_a: w01, round: 0 },
            MatchRecord { pass_a: 1, pass_b: 2, weight_a: w12, round: 0 },
        ];
        for (a, b, w) in extra {
            if a != b {
                m.push(MatchRecord { pass_a: a, pass_b: b, weight_a: w, round: 1 });
            }
        }
        m
    })
}

struct Table(Vec<Vec<f64>>);

impl Judge for Table {
    fn p_first(&self, _: &str, first: &DesignStory, second: &DesignStory) -> Result<f64, RankError> {
        Ok(self.0[first.pass][second.pass])
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn three_players_match_grid_search(matches in three_player_matches()) {
        let fit = fit_bradley_terry(3, &matches);
        let grid = grid_mle(&matches);
        for i in 0..3 {
            prop_assert!((fit.abilities[i] - grid[i]).abs() <= 1e-4 * grid[i].max(1.0),
                "{:?} vs {:?}", fit.abilities, grid);
        }
    }

    #[test]
    fn ranking_survives_rescaling(matches in three_player_matches(), c in 0.01f64..100.0) {
        let fit = fit_bradley_terry(3, &matches);
        let scores = vec![0.0; 3];
        let scaled = AbilityVector { abilities: fit.abilities.iter().map(|a| a * c).collect(), ..fit.clone() };
        prop_assert_eq!(ranking(&fit, &scores), ranking(&scaled, &scores));
    }

    #[test]
    fn debiased_weight_is_antisymmetric(table in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 2), 2)) {
        let j = Table(table);
        let ab = judge(&j, &story(0), &story(1), 0).unwrap();
        let ba = judge(&j, &story(1), &story(0), 0).unwrap();
        prop_assert!((ab.weight_a - (1.0 - ba.weight_a)).abs() < 1e-12);
    }
}

#[test]
fn two_player_closed_form() {
    for w in [0.1, 0.25, 0.5, 0.6, 0.9] {
        for n in 1..4 {
            let matches = vec![MatchRecord { pass_a: 0, pass_b: 1, weight_a: w, round: 0 }; n];
            let fit = fit_bradley_terry(2, &matches);
            let p = fit.abilities[0] / (fit.abilities[0] + fit.abilities[1]);
            assert!((p - w).abs() < 1e-6);
            assert!((fit.abilities[0] * fit.abilities[1] - 1.0).abs() < 1e-9);
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Every assignment of strengths 1..=K to seats, K ≤ 8, four rounds.
#[test]
fn swiss_recovers_transitive_order() {
    for k in 2..=8 {
        let stories: Vec<DesignStory> = (0..k).map(story).collect();
        for perm in permutations(k) {
            let strengths: Vec<f64> = perm.iter().map(|&s| (s + 1) as f64).collect();
            let mut truth: Vec<usize> = (0..k).collect();
            truth.sort_by(|&a, &b| strengths[b].partial_cmp(&strengths[a]).unwrap());
            let report = tournament(&stories, &StrengthJudge { strengths }, 4).unwrap();
            assert_eq!(report.ranking, truth, "k={k} perm={perm:?}");
        }
    }
}
