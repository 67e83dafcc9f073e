//! Feasible iterative patch removal on a contaminated VARMA(1,1) series,
//! starting from white noise, with the outer-iteration trace printed.

use varma_patch::contaminate::{apply, make_indicator};
use varma_patch::estimate::{iterate_patch_removal, FitOptions, DEFAULT_MAX_OUTER};
use varma_patch::montecarlo::ModelKind;
use varma_patch::process::simulate;
use varma_patch::{ContaminationSpec, OutlierKind};

fn main() -> varma_patch::Result<()> {
    let truth = ModelKind::Varma11.true_model();
    let (clean, _) = simulate(&truth, 800, 500, 5)?;
    let delta = make_indicator(800, 0.02, 5, 0)?;
    let spec = ContaminationSpec::constant(OutlierKind::Additive, 2, delta.clone(), 20.0)?;
    let observed = apply(&clean, &spec, &truth)?;

    let opts = FitOptions::white_noise_start(2, 1, 1);
    let (res, trace) = iterate_patch_removal(&observed, (1, 1), 0.05, 5, &opts, DEFAULT_MAX_OUTER)?;
    for step in &trace.steps {
        let flagged = step.retained.complement();
        let hits = flagged.iter().filter(|&t| delta[t - 1]).count();
        println!(
            "iter {:>2}: retained {:>3}, flagged outliers {hits}/{}, params {:.3?}",
            step.iteration,
            step.retained.len(),
            spec.outlier_times().len(),
            step.params.dynamic_params()
        );
    }
    println!("terminated by {:?}, converged {}", trace.terminated_by, res.converged);
    println!("truth {:?}", truth.dynamic_params());
    Ok(())
}
