//! Full pipeline against the mean-only ablation on the default synthetic
//! spec, for a handful of seeds.

use std::time::Instant;

use logdp::evaluation::{generate_synthetic, mean_only_baseline, run_pipeline, SyntheticSpec};
use logdp::pipeline::TrainOptions;

fn main() -> logdp::Result<()> {
    let seeds: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let seeds = if seeds.is_empty() { vec![1, 2, 3, 4, 5] } else { seeds };
    for seed in seeds {
        let started = Instant::now();
        let ds = generate_synthetic(&SyntheticSpec::default().with_seed(seed))?;
        let opts = TrainOptions {
            seed,
            ..TrainOptions::default()
        };
        let (bundle, _, full) = run_pipeline::<f64>(&ds.train, &ds.val, &ds.test, &opts)?;
        let (_, base) = mean_only_baseline::<f64>(&ds.train, &ds.val, &ds.test, &opts)?;
        let blankets: Vec<String> = bundle
            .blankets
            .blankets()
            .iter()
            .map(|(e, s)| format!("{}:{:?}", e.0, s.iter().map(|x| x.0).collect::<Vec<_>>()))
            .collect();
        println!(
            "seed {seed}: f1 {:.4} (p {:.3} r {:.3}) mean-only f1 {:.4}  deps {}  {:.2}s",
            full.f1,
            full.precision,
            full.recall,
            base.f1,
            bundle.dependency_count(),
            started.elapsed().as_secs_f64()
        );
        println!("  blankets {}", blankets.join(" "));
        println!(
            "  thresholds {:?}",
            bundle.thresholds.values.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
