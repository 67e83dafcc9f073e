//! Runs one Monte Carlo cell family and prints the bias/RMSE table.
//!
//! ```text
//! cargo run --release --example monte_carlo -- VAR1 AO 50 0.1 500 200 0,1
//! ```
//! Arguments: model (VAR1, VMA1, VARMA11), kind (CLEAN, AO, IO), zeta,
//! alpha, T, replications, comma-separated kappa list.

use varma_patch::montecarlo::{emit_table, run_experiment, Contamination, ExperimentConfig, ModelKind, SubsetMode, TableFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let model_kind: ModelKind = serde_json::from_value(serde_json::Value::String(get(0, "VAR1")))?;
    let kind: Contamination = serde_json::from_value(serde_json::Value::String(get(1, "AO")))?;
    let config = ExperimentConfig {
        model_kind,
        kind,
        zeta: get(2, "50").parse()?,
        alpha: get(3, "0.1").parse()?,
        t: get(4, "500").parse()?,
        m: get(5, "50").parse()?,
        kappa_list: get(6, "0,1").split(',').map(str::parse).collect::<Result<_, _>>()?,
        base_seed: 20240101,
        subset_mode: SubsetMode::Oracle,
        burn_in: 500,
    };
    let start = std::time::Instant::now();
    let results = run_experiment(&config)?;
    for r in &results {
        println!(
            "kappa={:<2} bias={:.4} rmse={:.4} m_effective={}/{}",
            r.kappa, r.bias, r.rmse, r.m_effective, r.m
        );
    }
    println!("\n{}", emit_table(&results, TableFormat::Markdown)?);
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
