//! AIC-based order selection on a contaminated VAR(2) sample, comparing the
//! patch-removed and full-subset criteria.

use nalgebra::DMatrix;
use varma_patch::contaminate::{apply, make_indicator};
use varma_patch::estimate::{best_row, select_model, write_selection_csv, Centering, FitOptions};
use varma_patch::process::simulate;
use varma_patch::{ContaminationSpec, OutlierKind, VarmaModel};

fn main() -> varma_patch::Result<()> {
    let truth = VarmaModel::new(
        vec![
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]),
            DMatrix::from_row_slice(2, 2, &[-0.3, 0.0, 0.1, -0.25]),
        ],
        vec![],
        DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
    )?;
    let (clean, _) = simulate(&truth, 1096, 500, 21)?;
    let delta = make_indicator(1096, 0.03, 21, 0)?;
    let spec = ContaminationSpec::constant(OutlierKind::Additive, 2, delta, 8.0)?;
    let observed = apply(&clean, &spec, &truth)?;

    let grid = [(1, 0), (2, 0), (3, 0), (0, 1), (1, 1)];
    let opts = FitOptions::white_noise_start(2, 0, 0).with_centering(Centering::SubsetMean);
    let rows = select_model(&observed, &grid, 0.1, 2, &opts)?;
    write_selection_csv(&rows, std::io::stdout())?;
    if let Some(i) = best_row(&rows) {
        println!("selected ({}, {})", rows[i].p, rows[i].q);
    }
    Ok(())
}
