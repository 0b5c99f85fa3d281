//! Scenario files: a JSON description of servers, seed, crash schedule, and
//! a timed register workload, replayed deterministically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ofuc_core::registers::{read_op, write_op, RegisterId};
use ofuc_core::value::V;
use ofuc_core::History;

use crate::client_fn;
use crate::sim::{ClientFn, NetConfig, Netsim, SimReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum WorkOp {
    Read { reg: String },
    Write { reg: String, value: V },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub n_servers: usize,
    pub seed: u64,
    #[serde(default)]
    pub mean_delay: Option<u64>,
    /// Crash schedule: (time, server index).
    #[serde(default)]
    pub crashes: Vec<(u64, usize)>,
    /// Workload: (time, process, operation).
    pub workload: Vec<(u64, u32, WorkOp)>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("crash schedule names server {0} but only {1} exist")]
    BadServer(usize, usize),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let sc: Scenario = serde_json::from_str(text)?;
        for &(_, s) in &sc.crashes {
            if s >= sc.n_servers {
                return Err(ScenarioError::BadServer(s, sc.n_servers));
            }
        }
        Ok(sc)
    }
}

/// Run a scenario to quiescence; returns the recorded history and report.
pub fn run_scenario(sc: &Scenario) -> (History, SimReport) {
    let n_clients = sc.workload.iter().map(|&(_, p, _)| p as usize + 1).max().unwrap_or(0);
    let mut per_client: Vec<Vec<(u64, WorkOp)>> = vec![Vec::new(); n_clients];
    for (t, p, op) in &sc.workload {
        per_client[*p as usize].push((*t, op.clone()));
    }
    for ops in &mut per_client {
        ops.sort_by_key(|&(t, _)| t);
    }
    let clients: Vec<ClientFn> = per_client
        .into_iter()
        .map(|ops| {
            client_fn!(move |shm: crate::sim::NetShm| {
                let ops = ops.clone();
                async move {
                    for (t, op) in ops {
                        shm.sleep_until(t).await;
                        match op {
                            WorkOp::Read { reg } => {
                                let _ = read_op(&shm, &RegisterId(reg), &V::Nat(0)).await;
                            }
                            WorkOp::Write { reg, value } => {
                                write_op(&shm, &RegisterId(reg), &value).await;
                            }
                        }
                    }
                }
            })
        })
        .collect();
    let mut cfg = NetConfig::new(sc.n_servers, sc.seed);
    if let Some(d) = sc.mean_delay {
        cfg.mean_delay = d;
    }
    let mut sim = Netsim::new(cfg, &clients, &sc.crashes);
    let report = sim.run();
    (sim.history(), report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_run_round_trip() {
        let text = r#"{
            "n_servers": 3,
            "seed": 12,
            "crashes": [[5000000, 2]],
            "workload": [
                [0, 0, {"op": "write", "reg": "r", "value": 7}],
                [10000000, 1, {"op": "read", "reg": "r"}]
            ]
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        let (hist, report) = run_scenario(&sc);
        assert!(report.all_complete());
        let ops = hist.ops();
        assert_eq!(ops.len(), 2);
        let read = ops.iter().find(|o| o.op == "read").unwrap();
        assert_eq!(read.res, Some(V::Nat(7)));
    }

    #[test]
    fn bad_server_index_rejected() {
        let text = r#"{"n_servers": 3, "seed": 1, "crashes": [[0, 9]], "workload": []}"#;
        assert!(Scenario::from_json(text).is_err());
    }
}
