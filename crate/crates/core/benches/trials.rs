use criterion::{criterion_group, criterion_main, Criterion};

use privamp::harness::exact::toeplitz_distance;
use privamp::harness::{monte_carlo, ExperimentConfig};
use privamp::par::Exec;
use privamp::entropy::DistributionTable;

fn config(exec: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        r#"
[experiment]
protocol = "nauth"
trials = 200
seed = 1
strategies = ["passive", "swap:0,1@guess=random"]
exec = "{exec}"

[params]
n = 4096
k = 4096.0
t = 4
ell = 16
enforce_precondition = false
"#
    ))
    .expect("bench config")
}

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for exec in ["parallel", "sequential"] {
        let cfg = config(exec);
        g.bench_function(exec, |b| b.iter(|| monte_carlo(&cfg).expect("runs")));
    }
    g.finish();

    let mut g = c.benchmark_group("toeplitz_exact");
    g.sample_size(10);
    let w = DistributionTable::uniform(10).expect("table");
    for (name, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
        g.bench_function(name, |b| b.iter(|| toeplitz_distance(&w, 2, exec).expect("distance")));
    }
    g.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
