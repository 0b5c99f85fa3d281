//! Acceptance suite: every release-gating property, one pass/fail line per
//! criterion. Run with `cargo test -p ofuc-harness --test acceptance`
//! (or `-- --nocapture` to watch progress).

use std::time::Instant;

use ofuc_harness::suites::{run_suite, SuiteCfg, SuiteReport};

struct Criterion {
    id: usize,
    title: &'static str,
    suite: &'static str,
    cfg: SuiteCfg,
    /// Wall-clock budget in seconds, when the criterion pins one.
    budget: Option<f64>,
}

fn criteria() -> Vec<Criterion> {
    let base = SuiteCfg::default();
    vec![
        Criterion {
            id: 1,
            title: "splitter exhaustive: at most one winner, solo wins, late caller loses",
            suite: "splitter",
            cfg: SuiteCfg { ..base.clone() },
            budget: Some(5.0),
        },
        Criterion {
            id: 2,
            title: "grafarius validity/coherence/solo-convergence/continuation, 2-3 procs",
            suite: "grafarius",
            cfg: SuiteCfg { ..base.clone() },
            budget: Some(60.0),
        },
        Criterion {
            id: 3,
            title: "racing wait-freedom, ordering linearizability, solo lap sequence",
            suite: "racing",
            cfg: SuiteCfg { seeds: 1000, ..base.clone() },
            budget: Some(60.0),
        },
        Criterion {
            id: 4,
            title: "consensus agreement/validity; solo steps == C_solo with splitter == 4",
            suite: "consensus",
            cfg: SuiteCfg { seeds: 5000, ..base.clone() },
            budget: Some(120.0),
        },
        Criterion {
            id: 5,
            title: "unbounded construction: cas/counter linearizable; trivial ops allocate nothing",
            suite: "runiv",
            cfg: SuiteCfg { seeds: 2000, ..base.clone() },
            budget: Some(300.0),
        },
        Criterion {
            id: 6,
            title: "bounded construction: pool <= k+1 on 1000 seeds (k=1..3), P1 + rounds, linearizable",
            suite: "buniv",
            cfg: SuiteCfg { seeds: 1000, ..base.clone() },
            budget: Some(600.0),
        },
        Criterion {
            id: 7,
            title: "complexity: invoke steps affine in k (R^2 >= 0.99); registers <= 16k^2",
            suite: "complexity",
            cfg: base.clone(),
            budget: None,
        },
        Criterion {
            id: 8,
            title: "netsim/ABD: 10000 seeded schedules (n in {3,5}) linearizable and live; stack over netsim",
            suite: "abd",
            cfg: SuiteCfg { seeds: 5000, ..base.clone() },
            budget: Some(600.0),
        },
        Criterion {
            id: 9,
            title: "checkers agree with brute-force oracles on 10000 random histories",
            suite: "checkers",
            cfg: SuiteCfg { seeds: 10000, ..base.clone() },
            budget: None,
        },
        Criterion {
            id: 10,
            title: "convoy model: latency slope matches lambda_s*rho within 25% for M in {10,20,40}",
            suite: "convoy",
            cfg: base,
            budget: None,
        },
    ]
}

fn run_criterion(c: &Criterion) -> (SuiteReport, f64) {
    let t0 = Instant::now();
    let report = run_suite(c.suite, &c.cfg).expect("known suite");
    (report, t0.elapsed().as_secs_f64())
}

#[test]
fn acceptance() {
    let mut failures = Vec::new();
    for c in criteria() {
        let (report, secs) = run_criterion(&c);
        let ok = report.pass() && c.budget.is_none_or(|b| secs < b);
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2}: {verdict} ({secs:.1}s{}) — {}",
            c.id,
            c.budget.map_or(String::new(), |b| format!(" / {b:.0}s budget")),
            c.title
        );
        if !ok {
            print!("{}", report.render());
            if let Some(b) = c.budget {
                if secs >= b {
                    println!("criterion {} exceeded its {b:.0}s budget: {secs:.1}s", c.id);
                }
            }
            failures.push(c.id);
        }
    }
    assert!(failures.is_empty(), "criteria failed: {failures:?}");
}
