//! Choosing the patch length from the decay of `pi(L)`: the smallest
//! `kappa` whose worst-case leaked contamination stays below a tolerance,
//! for a few tolerances.

use varma_patch::lagpoly::{expand_pi, fit_decay_bound, suggest_kappa, DecayBound};
use varma_patch::montecarlo::ModelKind;

fn main() -> varma_patch::Result<()> {
    let (alpha, len, zeta_max) = (0.02, 500, 10.0);
    for kind in [ModelKind::Var1, ModelKind::Vma1, ModelKind::Varma11] {
        let model = kind.true_model();
        let (bound, finite) = if kind == ModelKind::Var1 {
            (DecayBound { m: 1.0, r: 0.0 }, Some(model.p()))
        } else {
            (fit_decay_bound(&expand_pi(&model, 60)?)?, None)
        };
        match finite {
            Some(p) => println!("{}: finite memory, pi_j = 0 for j > {p}", kind.label()),
            None => println!("{}: |pi_j| <= {:.3} * {:.3}^j", kind.label(), bound.m, bound.r),
        }
        for tol in [1.0, 1e-1, 1e-2] {
            let s = suggest_kappa(&bound, alpha, len, zeta_max, tol, finite)?;
            println!(
                "  tol {tol:<5}: kappa = {:>2}, feasible = {}, retained >= {:.0}",
                s.kappa, s.feasible, s.min_retained
            );
        }
    }
    Ok(())
}
