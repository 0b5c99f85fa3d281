//! Exploration throughput: sequential depth-first walk vs the rayon
//! fan-out over schedule prefixes, plus a seeded netsim sweep.

use criterion::{criterion_group, criterion_main, Criterion};

use ofuc_core::primitives::{adopt_commit, GrafariusId};
use ofuc_core::record::level;
use ofuc_core::value::V;
use ofuc_harness::explore::{explore, explore_par, par_map, Bounds};
use ofuc_harness::proc_fn;
use ofuc_harness::world::{HarnessShm, Program};

fn grafarius_program(n: usize) -> Program {
    let procs = (0..n)
        .map(|i| {
            proc_fn!(move |shm: HarnessShm| async move {
                let v = V::Nat(i as u64);
                let _ = adopt_commit(&shm, &GrafariusId("g".into()), &v).await;
            })
        })
        .collect();
    Program::new(level::GRAFARIUS, procs)
}

fn bench_explore(c: &mut Criterion) {
    let mut g = c.benchmark_group("explore-grafarius-2proc");
    g.sample_size(20);
    g.bench_function("sequential", |b| {
        b.iter(|| {
            let prog = grafarius_program(2);
            explore(&prog, &Bounds::steps(24), |_, _| {})
        })
    });
    g.bench_function("parallel", |b| {
        b.iter(|| {
            let prog = grafarius_program(2);
            explore_par(&prog, &Bounds::steps(24), |_, _| {})
        })
    });
    g.finish();
}

fn bench_netsim_sweep(c: &mut Criterion) {
    use ofuc_core::registers::{read_op, write_op, RegisterId};
    use ofuc_netsim::client_fn;
    use ofuc_netsim::sim::{NetConfig, Netsim};

    let run_seed = |seed: u64| {
        let clients = vec![
            client_fn!(|shm: ofuc_netsim::NetShm| async move {
                write_op(&shm, &RegisterId::from("r"), &V::Nat(1)).await;
                let _ = read_op(&shm, &RegisterId::from("r"), &V::Nat(0)).await;
            }),
            client_fn!(|shm: ofuc_netsim::NetShm| async move {
                write_op(&shm, &RegisterId::from("r"), &V::Nat(2)).await;
            }),
        ];
        let mut sim = Netsim::new(NetConfig::new(3, seed), &clients, &[]);
        sim.run().messages_delivered
    };
    let mut g = c.benchmark_group("netsim-seed-sweep");
    g.sample_size(20);
    g.bench_function("sequential-200", |b| {
        b.iter(|| (0..200u64).map(run_seed).sum::<u64>())
    });
    g.bench_function("par_map-200", |b| {
        b.iter(|| par_map((0..200u64).collect::<Vec<_>>(), run_seed).into_iter().sum::<u64>())
    });
    g.finish();
}

criterion_group!(benches, bench_explore, bench_netsim_sweep);
criterion_main!(benches);
