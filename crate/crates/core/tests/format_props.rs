use std::path::Path;

use aprior::approx::{SemimeasureApprox, TableApprox};
use aprior::format::{
    parse_approx, parse_machine_file, parse_sigmas, parse_table_measure, parse_weights, render_machine,
    render_table_approx, render_table_measure, render_weights,
};
use aprior::machine::Staged;
use aprior::mixture::Tail;
use aprior::{q, BitString, Measure, Pair, PairSet, Rational, Weights};
use proptest::prelude::*;

fn bit_string(lo: usize, hi: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(0u8..2, lo..=hi).prop_map(BitString::from_bits)
}

fn frac() -> impl Strategy<Value = Rational> {
    (0i64..=12, 1i64..=12).prop_map(|(n, d)| q(n.min(d), d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn machine_round_trip(v in prop::collection::vec((bit_string(0, 5), bit_string(0, 4), 0usize..3, 0usize..3), 0..8)) {
        let mut stage = 0;
        let entries: Vec<Staged> = v
            .into_iter()
            .map(|(d, o, pad, step)| {
                stage += step;
                Staged { pair: Pair::block(d, pad, o), stage }
            })
            .collect();
        let pairs = PairSet::from_staged(entries, true);
        let parsed = parse_machine_file(&render_machine(&pairs)).unwrap();
        prop_assert_eq!(parsed.pairs, pairs);
    }

    #[test]
    fn weights_round_trip(head in prop::collection::vec(0i64..=8, 0..6), tail in prop::option::of((0u32..4, 1i64..=4))) {
        let head: Vec<Rational> = head.into_iter().map(|k| q(k, 64)).collect();
        let tail = match tail {
            Some((c, s)) => Tail::Geometric { c: c + 1, scale: q(s, 8) },
            None => Tail::Finite,
        };
        let w = Weights::new(head, tail).unwrap();
        let back: Weights = parse_weights(&render_weights(&w)).unwrap();
        prop_assert!(back.same_as(&w));
        prop_assert_eq!(back.total(), w.total());
    }

    #[test]
    fn table_approx_round_trip(rows in prop::collection::vec((bit_string(0, 3), frac(), 0usize..4, any::<bool>()), 0..6)) {
        let t = rows.into_iter().fold(TableApprox::new(), |t, (s, v, from, ramp)| {
            if ramp { t.ramp(s, v) } else { t.step(s, from, v) }
        });
        let back = parse_approx::<Rational>(&render_table_approx(&t), Path::new(".")).unwrap();
        for sigma in BitString::all_up_to(3) {
            prop_assert_eq!(back.limit(&sigma), t.limit(&sigma));
            for step in 0..5 {
                prop_assert_eq!(back.value(&sigma, step), t.value(&sigma, step));
            }
        }
    }

    #[test]
    fn table_measure_round_trip(p in 1i64..8, depth in 0usize..5) {
        let mu = Measure::bernoulli(q(p, 8)).unwrap();
        let table = parse_table_measure::<Rational>(&render_table_measure(&mu, depth)).unwrap();
        let back = Measure::table(table);
        for sigma in BitString::all_up_to(depth) {
            prop_assert_eq!(back.cylinder(&sigma), mu.cylinder(&sigma));
        }
    }

    #[test]
    fn sigma_lists_parse(v in prop::collection::vec(bit_string(0, 4), 1..5)) {
        let text = v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        prop_assert_eq!(parse_sigmas(&text).unwrap(), v);
    }
}
