use aprior::machine::check_consistency;
use aprior::mixture::decompose_universal;
use aprior::transform::transform_at_stage;
use aprior::universal::{assemble_universal, Encoding, MachineEnumeration};
use aprior::{q, BitString, Measure, MonotoneMachine, Pair};
use proptest::prelude::*;

fn bit_string(lo: usize, hi: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(0u8..2, lo..=hi).prop_map(BitString::from_bits)
}

fn machine() -> impl Strategy<Value = MonotoneMachine> {
    prop::collection::vec((bit_string(0, 3), bit_string(0, 3)), 0..4).prop_map(|v| {
        let mut kept: Vec<Pair> = Vec::new();
        for (d, o) in v {
            kept.push(Pair::new(d, o));
            let m = MonotoneMachine::from_pairs(kept.clone());
            if check_consistency(m.pairs().all()).is_err() {
                kept.pop();
            }
        }
        MonotoneMachine::from_pairs(kept)
    })
}

fn measure() -> impl Strategy<Value = Measure> {
    prop_oneof![
        Just(Measure::uniform()),
        (1i64..8).prop_map(|n| Measure::bernoulli(q(n, 8)).unwrap()),
    ]
}

fn encoding() -> impl Strategy<Value = Encoding> {
    prop_oneof![
        Just(Encoding::Unary),
        Just(Encoding::explicit(vec![BitString::from_bits([0, 0]), BitString::from_bits([0, 1]), BitString::from_bits([1])]).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn universal_membership(enc in encoding(), ms in prop::collection::vec(machine(), 1..4), s in 0usize..6) {
        let u = assemble_universal(enc.clone(), MachineEnumeration::canonical(ms)).unwrap();
        let pairs = u.staged_pairs(s);
        prop_assert!(check_consistency(&pairs).is_ok());
        for st in &pairs {
            let (e, rest) = enc.decode(&st.pair.desc).unwrap();
            prop_assert_eq!(st.pair.desc.len(), rest.len() + u.code(e).len());
            let component = u.machines().get(e).unwrap().at_stage(s);
            prop_assert!(component.iter().any(|c| c.pair.desc == rest && c.pair.out == st.pair.out));
        }
        for e in 0..u.machines().len().min(s + 1) {
            for c in u.machines().get(e).unwrap().at_stage(s) {
                let lifted = c.pair.with_prefix(&u.code(e));
                prop_assert!(pairs.iter().any(|p| p.pair == lifted));
            }
        }
    }

    #[test]
    fn decomposition_converges_to_transform(
        mu in measure(),
        enc in encoding(),
        ms in prop::collection::vec(machine(), 1..4),
        sigma in bit_string(0, 2),
    ) {
        let u = assemble_universal(enc, MachineEnumeration::canonical(ms)).unwrap();
        let n = u.machines().len();
        let mut prev = q(0, 1);
        for e_max in 0..=n {
            let d = decompose_universal(&mu, &u, &sigma, e_max, 8).unwrap();
            prop_assert!(prev <= d.partial_sum);
            prev = d.partial_sum;
        }
        let mut prev = q(0, 1);
        for s in 0..=8 {
            let d = decompose_universal(&mu, &u, &sigma, n, s).unwrap();
            prop_assert!(prev <= d.partial_sum);
            prev = d.partial_sum.clone();
            let direct = transform_at_stage(&mu, &u.to_machine(s), &sigma, s).unwrap().value;
            prop_assert_eq!(d.partial_sum, direct);
        }
    }
}
