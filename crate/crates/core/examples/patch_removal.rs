//! Oracle subsample with and without patch removal on AO-contaminated
//! VAR(1) data. With `kappa = 1` the residual patch of every outlier is
//! dropped and the estimate coincides with the clean-data fit.

use varma_patch::contaminate::{apply, make_indicator};
use varma_patch::estimate::{fit, patch_estimator, FitOptions};
use varma_patch::montecarlo::ModelKind;
use varma_patch::process::simulate;
use varma_patch::subsample::oracle_select;
use varma_patch::{ContaminationSpec, OutlierKind};

fn main() -> varma_patch::Result<()> {
    let truth = ModelKind::Var1.true_model();
    let (clean, _) = simulate(&truth, 1000, 500, 3)?;
    let delta = make_indicator(1000, 0.1, 3, 0)?;
    let spec = ContaminationSpec::constant(OutlierKind::Additive, 2, delta.clone(), 50.0)?;
    let observed = apply(&clean, &spec, &truth)?;
    let h = oracle_select(&delta);
    let opts = FitOptions::new(truth.clone());

    println!("truth           {:?}", truth.dynamic_params());
    let plain = fit(&observed, (1, 0), &h, &opts)?;
    println!("oracle, kappa=0 {:.4?}", plain.params.dynamic_params());
    for kappa in [1, 2] {
        let f = patch_estimator(&observed, (1, 0), &h, kappa, &opts)?;
        let c = patch_estimator(&clean, (1, 0), &h, kappa, &opts)?;
        println!(
            "oracle, kappa={kappa} {:.4?} (clean data {:.4?}, retained {})",
            f.params.dynamic_params(),
            c.params.dynamic_params(),
            f.h_used.len()
        );
    }
    Ok(())
}
