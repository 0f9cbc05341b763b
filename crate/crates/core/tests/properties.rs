use proptest::collection::vec;
use proptest::prelude::*;

use coxcheck_core::cox::axioms::{verify_additivity, verify_complement};
use coxcheck_core::cox::closure::product_law_violation;
use coxcheck_core::cox::{find_witnesses, PairTable};
use coxcheck_core::domain::delta::{check_order_preservation, perturb, select_delta_for_shift};
use coxcheck_core::domain::file::{parse_structure, serialize_structure};
use coxcheck_core::harness::{digest, replay_witness, run_pipeline, PipelineOptions};
use coxcheck_core::rescaling::{build_system, forced_classes, forced_classes_pairwise, solve, Elimination, Verdict};
use coxcheck_core::{BeliefStructure, EventSet, Rational, Scalar, SmallRational, ValueIndex, ValueKind};

fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("w{i}")).collect()
}

fn probability<S: Scalar>(w: &[i64]) -> BeliefStructure<S> {
    BeliefStructure::probability(labels(w.len()), w.iter().map(|&x| S::from_int(x)).collect()).unwrap()
}

/// Moves weight from the second-to-last world to the last inside the
/// trigger made of the last three worlds.
fn perturbed<S: Scalar>(w: &[i64]) -> Option<BeliefStructure<S>> {
    let n = w.len();
    let base: Vec<S> = w.iter().map(|&x| S::from_int(x)).collect();
    let trigger = EventSet::from_indices(n - 3..n);
    let mut shift = vec![S::zero(); n];
    shift[n - 2] = S::from_int(-1);
    shift[n - 1] = S::from_int(1);
    let choice = select_delta_for_shift(&base, &shift, trigger).ok()?;
    perturb(labels(n), base, &shift, trigger, choice.delta).ok()
}

fn weights() -> impl Strategy<Value = Vec<i64>> {
    vec(1i64..=30, 3..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn probability_satisfies_every_law(w in weights()) {
        let s = probability::<Rational>(&w);
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        prop_assert!(verify_complement(&idx).holds);
        prop_assert!(verify_additivity(&idx).holds);
        let table = PairTable::build(&idx, s.trigger()).expect("well defined");
        prop_assert!(product_law_violation(&idx, &table).is_none());
        prop_assert!(find_witnesses(&table, idx.len()).is_empty());
        let r = solve(&idx, &build_system(&idx), &[], 1);
        prop_assert!(
            matches!(r.verdict, Verdict::Feasible { identity: true, .. }),
            "identity rescaling expected"
        );
    }

    #[test]
    fn value_ids_follow_value_order(w in weights()) {
        let Some(s) = perturbed::<Rational>(&w) else { return Ok(()) };
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        for i in 1..idx.len() as u32 {
            prop_assert!(idx.value(i - 1) < idx.value(i));
        }
        let full = s.full();
        for u in full.subsets().filter(|u| !u.is_empty()) {
            for v in full.subsets() {
                prop_assert_eq!(idx.eval(v, u), &s.bel_eval(v, u).unwrap());
            }
        }
    }

    #[test]
    fn selected_delta_preserves_order(w in weights()) {
        let Some(s) = perturbed::<Rational>(&w) else { return Ok(()) };
        let bel = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let pr = ValueIndex::build(&s, ValueKind::Probability).unwrap();
        prop_assert!(check_order_preservation(&pr, &bel).holds);
    }

    #[test]
    fn findings_replay(w in weights()) {
        let Some(s) = perturbed::<Rational>(&w) else { return Ok(()) };
        let bel = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        if let Ok(table) = PairTable::build(&bel, s.trigger()) {
            for x in find_witnesses(&table, bel.len()) {
                prop_assert!(replay_witness(&s, &bel, &x));
            }
        }
        let system = build_system(&bel);
        let r = solve(&bel, &system, &[], 1);
        if let Verdict::Infeasible { certificate, .. } = &r.verdict {
            prop_assert!(certificate.replays());
        }
        let el = Elimination::new(&system);
        prop_assert_eq!(forced_classes(&el, 1), forced_classes_pairwise(&el));
    }

    #[test]
    fn files_round_trip(w in weights()) {
        let Some(s) = perturbed::<Rational>(&w) else { return Ok(()) };
        let text = serialize_structure(&s);
        let back = parse_structure::<Rational>(&text).unwrap();
        prop_assert_eq!(serialize_structure(&back), text);
        prop_assert_eq!(digest(&back), digest(&s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scalar_choice_does_not_change_reports(w in weights()) {
        let (Some(big), Some(small)) = (perturbed::<Rational>(&w), perturbed::<SmallRational>(&w)) else {
            return Ok(());
        };
        let opts = PipelineOptions::default();
        let a = serde_json::to_value(run_pipeline(&big, &opts).unwrap()).unwrap();
        let b = serde_json::to_value(run_pipeline(&small, &opts).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn pipeline_reports_are_reproducible() {
    let s = perturbed::<Rational>(&[3, 2, 6, 5, 6, 8]).unwrap();
    let opts = PipelineOptions { exhaustive: true, ..PipelineOptions::default() };
    let a = run_pipeline(&s, &opts).unwrap();
    let b = run_pipeline(&s, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
