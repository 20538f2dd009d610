use proptest::prelude::*;

use bfs3_core::domains::PaintPolish;
use bfs3_core::priors::SuffStats;
use bfs3_core::TabularMdp;

fn arb_mdp() -> impl Strategy<Value = TabularMdp> {
    (1usize..6, 1usize..4).prop_flat_map(|(s, a)| {
        let row = prop::collection::vec((0..s, 0.01f64..1.0), 1..=s.min(3));
        (
            prop::collection::vec(row, s * a),
            prop::collection::vec(-5.0f64..5.0, s * a),
            0.0f64..1.0,
            prop::collection::vec(any::<bool>(), s),
        )
            .prop_map(move |(rows, rewards, gamma, terminal)| {
                let rows = rows
                    .into_iter()
                    .map(|row| {
                        let mut merged: Vec<(usize, f64)> = Vec::new();
                        for (t, w) in row {
                            match merged.iter_mut().find(|(u, _)| *u == t) {
                                Some(e) => e.1 += w,
                                None => merged.push((t, w)),
                            }
                        }
                        let total: f64 = merged.iter().map(|e| e.1).sum();
                        merged.into_iter().map(|(t, w)| (t, w / total)).collect()
                    })
                    .collect();
                let terminal: Vec<usize> = terminal.iter().enumerate().filter(|e| *e.1).map(|e| e.0).collect();
                TabularMdp::new(s, a, rows, rewards, gamma, &terminal, (-5.0, 5.0)).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn mdp_text_round_trips(mdp in arb_mdp()) {
        let text = mdp.to_text();
        let back = TabularMdp::from_text(&text).unwrap();
        prop_assert_eq!(&back, &mdp);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn stats_text_round_trips(
        cap in 1u32..6,
        steps in prop::collection::vec((0usize..4, 0usize..3, 0usize..4, prop::sample::select(vec![-1.0, 0.0, 0.5])), 0..60),
    ) {
        let mut stats = SuffStats::new(4, 3, cap);
        for (s, a, n, r) in steps {
            stats = stats.update(s, a, n, r);
        }
        let back = SuffStats::from_text(&stats.to_text()).unwrap();
        prop_assert_eq!(back.discoveries(), stats.discoveries());
        prop_assert_eq!(back.to_text(), stats.to_text());
        prop_assert!(back == stats);
    }
}

#[test]
fn paint_polish_keeps_its_return_cap_in_text() {
    let mdp = PaintPolish::new(1).unwrap().to_mdp().unwrap();
    assert_eq!(mdp.return_cap(), Some(9.0));
    let back = TabularMdp::from_text(&mdp.to_text()).unwrap();
    assert_eq!(back, mdp);
}

#[test]
fn malformed_text_reports_the_line() {
    let err = TabularMdp::from_text("2 1 0.9 0 1\n0 0 0.5 1 1.0\n1 0 x 0 1.0\n").unwrap_err().to_string();
    assert!(err.contains('3'), "{err}");
    assert!(TabularMdp::from_text("2 1 0.9 0 1\n0 0 0.5 1 1.0\n").is_err());
    assert!(SuffStats::from_text("not a header").is_err());
}
