//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria run one after another in a single process because the
//! twelve-world pair table alone needs over a gigabyte. The two 5^12 sweeps
//! (criterion 5 and the first half of 6) take about two minutes together;
//! `COXCHECK_ACCEPTANCE_QUICK=1` skips them.
//!
//! Some criteria are expected to fail: their claims do not hold for the
//! exact structures and the failures are reported, not hidden. The binary
//! exits non-zero only when an outcome differs from the recorded one.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coxcheck_core::appendix::{trichotomy_naive, verify_appendix, verify_trichotomy};
use coxcheck_core::cox::assoc::find_witnesses_unreduced;
use coxcheck_core::cox::closure::{keyed, product_law_violation};
use coxcheck_core::cox::monotone::check_clause_naive;
use coxcheck_core::cox::{check_closure, check_monotone, find_witnesses, sweep_constrained, PairTable};
use coxcheck_core::domain::constructions::{build_fine13, build_halpern, halpern_probability};
use coxcheck_core::domain::delta::check_order_preservation;
use coxcheck_core::fine::{verify_fine, CLASSES};
use coxcheck_core::functional_eq::verify_eq7;
use coxcheck_core::harness::{generate, replay_witness, SearchConfig};
use coxcheck_core::rescaling::{build_system, forced_classes, forced_classes_pairwise, solve, Elimination, Verdict};
use coxcheck_core::{Rational, Scalar, Structure, ValueIndex, ValueKind};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: u8,
    outcome: Outcome,
    expected: Outcome,
    elapsed: Duration,
    limit: Duration,
    detail: String,
}

fn q(s: &str) -> Rational {
    Rational::parse_exact(s).expect("literal")
}

/// For a criterion with a known gap: it is expected to fail through the
/// gap alone, so any other broken part (or the gap closing) is a surprise.
fn gap_expected(rest_ok: bool) -> Outcome {
    if rest_ok {
        Outcome::Fail
    } else {
        Outcome::Pass
    }
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn criterion_1() -> (bool, String) {
    let pr = halpern_probability::<Rational>();
    let bel = build_halpern();
    let expected = ["3/5", "5/11", "11/19", "5/19", "3/11"].map(q);
    let mut ok = true;
    let mut bel_values = Vec::new();
    for (class, want) in CLASSES.iter().zip(&expected) {
        let mut pair = Vec::new();
        for (v, u) in class {
            let (v, u) = (pr.event(v), pr.event(u));
            ok &= pr.cond_prob(v, u).unwrap() == *want;
            pair.push(bel.bel_eval(v, u).unwrap());
        }
        ok &= pair[0] == pair[1];
        bel_values.push(pair[0].to_string());
    }
    (ok, format!("Pr classes exact; Bel classes {}", bel_values.join(", ")))
}

/// Criteria 2 to 5 share the twelve-world table.
fn criteria_2_to_5(exhaustive: bool, lines: &mut Vec<Line>) {
    let s = build_halpern();
    let t = Instant::now();
    let bel = ValueIndex::build(&s, ValueKind::Belief).unwrap();
    let table = PairTable::build(&bel, s.trigger()).expect("well defined");
    let id = |v: &Rational| bel.find(v).expect("value present");
    let delta = s.delta().clone();
    let three_minus = (q("3") - delta.clone()) / q("19");
    let wanted = [
        ("5/11", "11/19", q("5/19")),
        ("3/5", "5/11", q("3/11")),
        ("3/5", "5/19", three_minus.clone()),
        ("3/11", "11/19", q("3/19")),
    ];
    let mut entries_ok = true;
    for (x, y, w) in &wanted {
        entries_ok &= table.get(id(&q(x)), id(&q(y))) == Some(id(w));
    }
    let witnesses = find_witnesses(&table, bel.len());
    let triple = (id(&q("3/5")), id(&q("5/11")), id(&q("11/19")));
    let reported = witnesses.iter().any(|w| (w.x, w.y, w.z) == triple);
    let replay = witnesses.iter().all(|w| replay_witness(&s, &bel, w));
    lines.push(Line {
        id: 2,
        outcome: outcome(entries_ok && reported && replay),
        expected: Outcome::Pass,
        elapsed: t.elapsed(),
        limit: Duration::from_secs(120),
        detail: format!(
            "4 table entries {}, delta {delta}, {} witness(es), (3/5,5/11,11/19) {}",
            if entries_ok { "exact" } else { "WRONG" },
            witnesses.len(),
            if reported { "reported" } else { "missing" }
        ),
    });

    let t = Instant::now();
    let clauses = check_monotone(&table, bel.len());
    let closure = check_closure(&bel, &table);
    let mono = clauses.iter().all(|c| c.holds);
    let ok = mono && closure.unit_claim && closure.product_claim;
    lines.push(Line {
        id: 3,
        outcome: outcome(ok),
        // The unit claim fails on the exact structure (54 symmetric pairs).
        expected: gap_expected(mono && closure.product_claim),
        elapsed: t.elapsed(),
        limit: Duration::from_secs(120),
        detail: format!(
            "0 conflicts over {} chains, monotone (a)(b)(c) {}, product claim {}, unit claim {} (counterexample ids {:?})",
            table.chain_count(),
            mono,
            closure.product_claim,
            closure.unit_claim,
            closure.unit_violation
        ),
    });

    let t = Instant::now();
    let system = build_system(&bel);
    let preferred: Vec<(u32, u32)> = witnesses.iter().map(|w| (w.lhs, w.rhs)).collect();
    let r = solve(&bel, &system, &preferred, 1);
    let forced = match &r.verdict {
        Verdict::Infeasible { certificate, .. } => {
            let mut pair = [bel.value(certificate.v).clone(), bel.value(certificate.w).clone()];
            pair.sort();
            let mut want = [q("3/19"), three_minus];
            want.sort();
            certificate.replays() && pair == want
        }
        Verdict::Feasible { .. } => false,
    };
    drop(system);
    let pr_s = halpern_probability::<Rational>();
    let pr = ValueIndex::build(&pr_s, ValueKind::Belief).unwrap();
    let pr_r = solve(&pr, &build_system(&pr), &[], 1);
    let identity = matches!(pr_r.verdict, Verdict::Feasible { identity: true, .. });
    drop(pr);
    lines.push(Line {
        id: 4,
        outcome: outcome(forced && identity),
        expected: Outcome::Pass,
        elapsed: t.elapsed(),
        limit: Duration::from_secs(60),
        detail: format!(
            "Bel0 infeasible with replayed certificate g(3/19) = g((3-delta)/19): {forced}; Pr feasible by identity: {identity}"
        ),
    });

    if !exhaustive {
        lines.push(skipped(5, "5^12 sweep skipped (COXCHECK_ACCEPTANCE_QUICK=1)"));
        return;
    }
    let t = Instant::now();
    let sweep = sweep_constrained(&bel, &table, &[triple]);
    let unconstrained = sweep.queries.iter().all(|(_, c)| c.is_none());
    lines.push(Line {
        id: 5,
        outcome: outcome(sweep.holds && unconstrained),
        expected: Outcome::Pass,
        elapsed: t.elapsed(),
        limit: Duration::from_secs(900),
        detail: format!(
            "{} chains, associative on every constrained triple: {}, (3/5,5/11,11/19) constrained: {}",
            sweep.chains, sweep.holds, !unconstrained
        ),
    });

    let t = Instant::now();
    let eq7 = verify_eq7(&bel, &table);
    lines.push(Line {
        id: 6,
        outcome: outcome(eq7.holds),
        expected: Outcome::Pass,
        elapsed: t.elapsed(),
        limit: Duration::from_secs(900),
        detail: format!("twelve-world: {} states, {} lookups, holds {}", eq7.states, eq7.lookups, eq7.holds),
    });
}

fn skipped(id: u8, why: &str) -> Line {
    Line {
        id,
        outcome: Outcome::Skip,
        expected: Outcome::Skip,
        elapsed: Duration::ZERO,
        limit: Duration::ZERO,
        detail: why.into(),
    }
}

fn random_structures(trials: u64, seed: u64, perturb: bool) -> Vec<Structure> {
    let mut config = SearchConfig::new(6, trials, seed);
    config.perturb = perturb;
    (0..trials).map(|t| generate::<Rational>(&config, t).expect("generator output is valid")).collect()
}

fn criterion_6_probability() -> (bool, String) {
    let mut ok = true;
    let mut lookups = 0;
    for s in random_structures(20, 6, false) {
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let table = PairTable::build(&idx, s.trigger()).expect("probability tables are well defined");
        let r = verify_eq7(&idx, &table);
        lookups += r.lookups;
        ok &= r.holds && product_law_violation(&idx, &table).is_none();
    }
    (ok, format!("20 six-world probability structures: product law and equation hold ({lookups} lookups)"))
}

fn criterion_7() -> (Outcome, Outcome, String) {
    let s = build_halpern();
    let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
    let r12 = verify_fine(&s, &idx, None, 1, false).unwrap();
    let twelve = r12.confirmed();
    drop((r12, idx));
    let s = build_fine13();
    let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
    let r13 = verify_fine(&s, &idx, Some("w0"), 1, false).unwrap();
    let thirteen = r13.confirmed();
    let classes = r13.obstruction.classes.iter().filter(|c| c.equal).count();
    let detail = format!(
        "12 worlds: QCC1/2/7 and obstruction {}; 13 worlds anchored at w0: order axioms {}, {classes}/5 classes equal, obstruction {}",
        if twelve { "certified" } else { "NOT certified" },
        r13.qcc1.holds && r13.qcc2.holds && r13.qcc7.iter().all(|c| c.holds),
        if r13.obstruction.holds() { "certified" } else { "not certified" },
    );
    // The anchored variant does not keep the classes equal.
    (outcome(twelve && thirteen), gap_expected(twelve), detail)
}

fn criterion_8() -> (bool, Outcome, String) {
    let r = verify_appendix(&build_halpern()).unwrap();
    let c = &r.closeness;
    let close = c.holds && c.worst < q("2/1000");
    let ids = &r.identities;
    let detail = format!(
        "closeness {} (worst {} over {} pairs); not-good characterization {} ({} of {} chains non-good, {} shapes expected); trichotomy {} ({} groups); master identity {}, split {} over {} pairs ({} range exceptions)",
        close,
        c.worst,
        c.pairs,
        r.not_good.holds,
        r.not_good.non_good,
        r.not_good.chains,
        r.not_good.expected_shapes.len(),
        r.trichotomy.holds,
        r.trichotomy.groups,
        ids.master,
        ids.split,
        ids.pairs,
        ids.range_failures
    );
    let rest = close && r.trichotomy.holds && ids.master && ids.split;
    // The not-good characterization misses the {w10,w11} shape.
    (rest && r.not_good.holds, gap_expected(rest), detail)
}

fn criterion_9() -> (bool, String) {
    let perturbed = random_structures(100, 9, true);
    let mut ok = true;
    let mut findings = 0;
    let mut conflicts = 0;
    let mut replayed = 0;
    for s in &perturbed {
        let p = s.unperturbed();
        let idx = ValueIndex::build(&p, ValueKind::Belief).unwrap();
        let table = PairTable::build(&idx, p.trigger()).expect("probability tables are well defined");
        ok &= product_law_violation(&idx, &table).is_none();
        ok &= find_witnesses(&table, idx.len()).is_empty();
        ok &= solve(&idx, &build_system(&idx), &[], 1).feasible();

        let bel = ValueIndex::build(s, ValueKind::Belief).unwrap();
        let pr = ValueIndex::build(s, ValueKind::Probability).unwrap();
        ok &= check_order_preservation(&pr, &bel).holds;
        ok &= trichotomy_naive(&bel, &pr) == verify_trichotomy(&bel, &pr, s.trigger()).1.holds;
        let system = build_system(&bel);
        let el = Elimination::new(&system);
        ok &= forced_classes(&el, 1) == forced_classes_pairwise(&el);
        match PairTable::build(&bel, s.trigger()) {
            Err(_) => conflicts += 1,
            Ok(table) => {
                let keys = keyed(&table);
                for c in check_monotone(&table, bel.len()) {
                    ok &= c.holds == check_clause_naive(&keys, c.clause).holds;
                }
                let w = find_witnesses(&table, bel.len());
                ok &= w.len() == find_witnesses_unreduced(&table, bel.len()).len();
                findings += w.len();
                for x in &w {
                    ok &= replay_witness(s, &bel, x);
                    replayed += 1;
                }
            }
        }
    }
    let detail = format!(
        "100 six-world structures: probability side clean; perturbed side delta order-preserving, {conflicts} ill-defined tables, {findings} witnesses ({replayed} replayed), fast and naive detectors agree"
    );
    (ok, detail)
}

fn main() -> ExitCode {
    let exhaustive = !std::env::var("COXCHECK_ACCEPTANCE_QUICK").is_ok_and(|v| v == "1");
    let mut lines = Vec::new();

    let ((ok, detail), elapsed) = timed(criterion_1);
    emit(&mut lines, Line { id: 1, outcome: outcome(ok), expected: Outcome::Pass, elapsed, limit: Duration::from_secs(1), detail });

    let mut shared = Vec::new();
    criteria_2_to_5(exhaustive, &mut shared);
    let mut six = None;
    for line in shared {
        if line.id == 6 {
            six = Some(line);
        } else {
            emit(&mut lines, line);
        }
    }

    let ((ok, detail), elapsed) = timed(criterion_6_probability);
    let line = match six {
        Some(mut l) => {
            l.outcome = outcome(l.outcome == Outcome::Pass && ok);
            l.elapsed += elapsed;
            l.limit += Duration::from_secs(10);
            l.detail = format!("{}; {detail}", l.detail);
            l
        }
        None => Line {
            id: 6,
            outcome: outcome(ok),
            expected: Outcome::Pass,
            elapsed,
            limit: Duration::from_secs(10),
            detail: format!("{detail}; 5^12 sweep skipped (COXCHECK_ACCEPTANCE_QUICK=1)"),
        },
    };
    emit(&mut lines, line);

    let ((got, expected, detail), elapsed) = timed(criterion_7);
    emit(&mut lines, Line { id: 7, outcome: got, expected, elapsed, limit: Duration::from_secs(300), detail });

    let ((ok, expected, detail), elapsed) = timed(criterion_8);
    emit(&mut lines, Line { id: 8, outcome: outcome(ok), expected, elapsed, limit: Duration::from_secs(600), detail });

    let ((ok, detail), elapsed) = timed(criterion_9);
    emit(&mut lines, Line { id: 9, outcome: outcome(ok), expected: Outcome::Pass, elapsed, limit: Duration::from_secs(300), detail });

    let surprises: Vec<u8> = lines.iter().filter(|l| l.outcome != l.expected).map(|l| l.id).collect();
    let pass = lines.iter().filter(|l| l.outcome == Outcome::Pass).count();
    let fail = lines.iter().filter(|l| l.outcome == Outcome::Fail).count();
    println!("acceptance: {pass} pass, {fail} fail, {} skipped", lines.len() - pass - fail);
    if surprises.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {surprises:?}");
        ExitCode::FAILURE
    }
}

fn emit(lines: &mut Vec<Line>, line: Line) {
    print_line(&line);
    lines.push(line);
}

fn print_line(l: &Line) {
    let tag = match l.outcome {
        Outcome::Pass => "PASS",
        Outcome::Fail => "FAIL",
        Outcome::Skip => "SKIP",
    };
    let budget = if l.limit.is_zero() {
        String::new()
    } else if l.elapsed > l.limit {
        format!(" [{:.1}s, OVER the {}s budget]", l.elapsed.as_secs_f64(), l.limit.as_secs())
    } else {
        format!(" [{:.1}s of {}s]", l.elapsed.as_secs_f64(), l.limit.as_secs())
    };
    println!("criterion {} {tag}{budget}: {}", l.id, l.detail);
}
