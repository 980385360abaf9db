use criterion::{criterion_group, criterion_main};

criterion_group!(
    benches,
    fbst_bench::sampling,
    fbst_bench::condensation,
    fbst_bench::convolution,
    fbst_bench::optimization,
    fbst_bench::logic_harness,
    fbst_bench::selection
);
criterion_main!(benches);
