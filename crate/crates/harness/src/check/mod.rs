//! History checkers: linearizability, racing order, round decomposition,
//! and the P1 recycling invariant.

pub mod autom;
pub mod lin;
pub mod p1;
pub mod rounds;

use ofuc_core::{History, OpRec};

/// Outcome of the racing proposition check: for clients that enter a new
/// lap only after their last lap is decided, every lap below a newly
/// entered one is decided by then.
#[derive(Debug, Clone, PartialEq)]
pub enum PropRacing {
    Holds,
    /// Some client entered while its last lap was undecided; the
    /// proposition's premise does not apply to this history.
    PremiseUnmet(String),
    Violated(String),
}

/// Check the proposition over one racing's enters. `lap_obj_of` maps a lap
/// index to the history object name of its lap object; a lap is decided at
/// the earliest response of an operation that wrote its decision register.
pub fn check_prop_racing(
    history: &History,
    racing_obj: &str,
    lap_obj_of: impl Fn(u64) -> String,
) -> PropRacing {
    let ops = history.ops();
    let enters: Vec<&OpRec> = ops
        .iter()
        .filter(|o| o.obj == racing_obj && o.op == "enter" && o.resp_seq.is_some())
        .collect();
    let mut laps: Vec<u64> = enters.iter().filter_map(|o| o.res.as_ref()?.nat()).collect();
    laps.sort_unstable();
    laps.dedup();
    let decided_at = |lap: u64| -> Option<u64> {
        let name = lap_obj_of(lap);
        ops.iter()
            .filter(|o| o.obj == name && o.meta.wrote_decision)
            .filter_map(|o| o.resp_seq)
            .min()
    };
    // Premise: per process, consecutive enters only after the previous lap
    // decided.
    let mut procs: Vec<u32> = enters.iter().map(|o| o.proc).collect();
    procs.sort_unstable();
    procs.dedup();
    for p in procs {
        let mine: Vec<&&OpRec> = enters.iter().filter(|o| o.proc == p).collect();
        for pair in mine.windows(2) {
            let prev_lap = pair[0].res.as_ref().and_then(|v| v.nat()).unwrap_or(0);
            let next_inv = pair[1].inv_seq;
            match decided_at(prev_lap) {
                Some(w) if w < next_inv => {}
                _ => {
                    return PropRacing::PremiseUnmet(format!(
                        "process {p} re-entered before lap {prev_lap} was decided"
                    ));
                }
            }
        }
    }
    for e in &enters {
        let lap = e.res.as_ref().and_then(|v| v.nat()).unwrap_or(0);
        let at = e.resp_seq.expect("complete enter");
        for &l2 in laps.iter().filter(|&&l2| l2 < lap) {
            // Only laps already entered by that moment are ordered below.
            let entered_by_then = enters
                .iter()
                .any(|o| o.res.as_ref().and_then(|v| v.nat()) == Some(l2) && o.resp_seq.unwrap() <= at);
            if !entered_by_then {
                continue;
            }
            match decided_at(l2) {
                Some(w) if w < at => {}
                _ => {
                    return PropRacing::Violated(format!(
                        "lap {l2} undecided when process {} entered lap {lap}",
                        e.proc
                    ));
                }
            }
        }
    }
    PropRacing::Holds
}
