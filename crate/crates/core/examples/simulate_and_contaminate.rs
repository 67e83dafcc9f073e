//! Simulates the bivariate VAR(1) design, injects 10% additive outliers of
//! size 50 and writes clean, contaminated and indicator CSVs to a directory
//! (default `target/example_out`).

use std::fs::{self, File};
use std::path::PathBuf;

use varma_patch::contaminate::{apply, make_indicator};
use varma_patch::montecarlo::ModelKind;
use varma_patch::process::simulate;
use varma_patch::{ContaminationSpec, OutlierKind};

fn main() -> varma_patch::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example_out".into()));
    fs::create_dir_all(&dir)?;
    let truth = ModelKind::Var1.true_model();
    let (clean, _) = simulate(&truth, 500, 500, 11)?;
    let delta = make_indicator(500, 0.1, 11, 0)?;
    let spec = ContaminationSpec::constant(OutlierKind::Additive, 2, delta, 50.0)?;
    let observed = apply(&clean, &spec, &truth)?;

    clean.write_csv(File::create(dir.join("clean.csv"))?)?;
    observed.write_csv(File::create(dir.join("observed.csv"))?)?;
    spec.write_csv(File::create(dir.join("contamination.csv"))?)?;
    println!("{} outliers at {:?}...", spec.outlier_times().len(), &spec.outlier_times()[..5]);
    println!("wrote clean.csv, observed.csv, contamination.csv to {}", dir.display());
    Ok(())
}
