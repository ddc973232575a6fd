//! Monte Carlo fan-out: the chunked rayon map against a sequential loop over
//! the same chunks, on ERBM paths in a one-slit domain.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use erbm::brownian::RngStream;
use erbm::erbm::{ErbmState, Sampler};
use erbm::geometry::{Domain, Slit};
use erbm::parallel::{chunk_ranges, map_items};
use erbm::C64;

fn mean_exit(sampler: &Sampler, stream: RngStream, n: u64, parallel: bool) -> f64 {
    let start = ErbmState::interior(C64::new(0.4, 1.8));
    let chunk = |r: &std::ops::Range<u64>| -> f64 {
        r.clone().map(|p| sampler.run(start, &mut stream.path(p).rng(), None, None).expect("path").0.re).sum()
    };
    let ranges = chunk_ranges(n);
    let total: f64 =
        if parallel { map_items(&ranges, chunk).into_iter().sum() } else { ranges.iter().map(chunk).sum() };
    total / n as f64
}

fn bench_fan_out(c: &mut Criterion) {
    let domain = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).expect("slit")]).expect("domain");
    let sampler = Sampler::for_domain(&domain).expect("sampler");
    let mut group = c.benchmark_group("erbm_exit_mean");
    group.sample_size(10);
    for n in [4_096u64, 16_384] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| mean_exit(&sampler, RngStream::new(1, 0), n, true))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| mean_exit(&sampler, RngStream::new(1, 0), n, false))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fan_out);
criterion_main!(benches);
