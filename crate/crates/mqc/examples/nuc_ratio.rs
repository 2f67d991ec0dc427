//! Nuclear-norm ratio of optimized compilation against the disjoint Cartan baseline.
//!
//! Usage: `cargo run --release -p mqc --example nuc_ratio -- N SEEDS [GRID] [SWEEPS]`

use mqc::circuit_ir::generate_qv_circuit;
use mqc::optimizer::{compile, CompileMode, CompileOptions};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n = args.first().copied().unwrap_or(10);
    let seeds = args.get(1).copied().unwrap_or(3);
    let mut opts = CompileOptions::with_mode(CompileMode::FusedOptimized);
    if let Some(&g) = args.get(2) {
        opts.ry_grid_points = g;
    }
    if let Some(&s) = args.get(3) {
        opts.sweeps = s;
    }
    let mut ratios = Vec::new();
    for seed in 0..seeds as u64 {
        let c = generate_qv_circuit(n, seed).expect("valid size");
        let (_, fused) = compile(&c, &CompileOptions::with_mode(CompileMode::Fused)).expect("compiles");
        let (_, rep) = compile(&c, &opts).expect("compiles");
        println!(
            "seed {seed}: fused {:.4} optimized {:.4} fallback {} time {:.1}s",
            fused.ratio, rep.ratio, rep.fallback_to_fused, rep.wall_time_s
        );
        ratios.push(rep.ratio);
    }
    let m = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let sd = (ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (ratios.len().max(2) - 1) as f64).sqrt();
    println!("N={n} mean ratio {m:.4} sd {sd:.4}");
}
