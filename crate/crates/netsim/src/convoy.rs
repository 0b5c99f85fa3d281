//! Desk-scale queueing model of the convoy effect on compare-and-swap.
//!
//! Closed-loop clients issue operations that succeed with ratio `1/m`.
//! Failed operations are read-only and run in parallel; successful ones
//! serialize behind a single FIFO resource, so their latency picks up the
//! queueing term that grows with the client count.

use ofuc_core::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct ConvoyCfg {
    pub clients: usize,
    /// Success ratio is `1/m` (arguments drawn from an interval of size m).
    pub m: u64,
    /// Mean service time of a successful operation.
    pub lambda_s: f64,
    /// Mean service time of a failed operation.
    pub lambda_f: f64,
    pub ops_per_client: usize,
    pub seed: u64,
}

impl ConvoyCfg {
    pub fn rho(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// The reference approximation: `lambda_f (1 - rho) + lambda_s rho n`.
    pub fn approx(&self) -> f64 {
        let rho = self.rho();
        self.lambda_f * (1.0 - rho) + self.lambda_s * rho * self.clients as f64
    }
}

/// Simulated mean operation latency for one configuration.
pub fn convoy_mean_latency(cfg: &ConvoyCfg) -> f64 {
    let mut rng = SplitMix64::new(cfg.seed ^ (cfg.clients as u64) << 32 ^ cfg.m);
    // (next arrival time, ops done) per client, processed in arrival order.
    let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<(u64, usize)>> =
        (0..cfg.clients).map(|c| std::cmp::Reverse((0u64, c))).collect();
    let mut done = vec![0usize; cfg.clients];
    let mut resource_free = 0f64;
    let warmup = cfg.ops_per_client / 5;
    let mut total = 0f64;
    let mut counted = 0u64;
    const SCALE: f64 = 1e6; // heap keys in integer microunits for determinism

    while let Some(std::cmp::Reverse((at_fixed, c))) = heap.pop() {
        let at = at_fixed as f64 / SCALE;
        let success = rng.below(cfg.m) == 0;
        let base = if success { cfg.lambda_s } else { cfg.lambda_f };
        let dur = base * (0.5 + rng.unit_f64());
        let finish = if success {
            let start = resource_free.max(at);
            resource_free = start + dur;
            start + dur
        } else {
            at + dur
        };
        if done[c] >= warmup {
            total += finish - at;
            counted += 1;
        }
        done[c] += 1;
        if done[c] < cfg.ops_per_client {
            heap.push(std::cmp::Reverse(((finish * SCALE) as u64, c)));
        }
    }
    total / counted.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(clients: usize, m: u64) -> ConvoyCfg {
        ConvoyCfg { clients, m, lambda_s: 40.0, lambda_f: 1.0, ops_per_client: 3000, seed: 1 }
    }

    #[test]
    fn single_client_matches_formula() {
        for m in [10, 20, 40] {
            let c = cfg(1, m);
            let sim = convoy_mean_latency(&c);
            let expect = c.approx();
            let rel = (sim - expect).abs() / expect;
            assert!(rel < 0.15, "m={m}: sim {sim:.2} vs {expect:.2}");
        }
    }

    #[test]
    fn latency_grows_with_clients() {
        let lo = convoy_mean_latency(&cfg(2, 10));
        let hi = convoy_mean_latency(&cfg(16, 10));
        assert!(hi > lo * 2.0, "expected convoy growth: {lo:.2} -> {hi:.2}");
    }

    #[test]
    fn deterministic_in_seed() {
        let a = convoy_mean_latency(&cfg(8, 20));
        let b = convoy_mean_latency(&cfg(8, 20));
        assert_eq!(a, b);
    }
}
