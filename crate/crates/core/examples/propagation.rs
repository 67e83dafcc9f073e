//! Residual propagation of a single outlier through `pi(L)`.
//!
//! Prints the `pi` weights of AR(1), MA(1) and ARMA(1,1), the fitted
//! geometric decay bound, and the norm of the residual footprint of an AO
//! versus an IO at `tau = 10`.

use varma_patch::contaminate::residual_footprint;
use varma_patch::lagpoly::{expand_pi, fit_decay_bound};
use varma_patch::{ContaminationSpec, OutlierKind, VarmaModel};

fn main() -> varma_patch::Result<()> {
    let models = [
        ("AR(1)  phi=0.7", VarmaModel::scalar(&[0.7], &[], 1.0)?),
        ("MA(1)  theta=0.5", VarmaModel::scalar(&[], &[0.5], 1.0)?),
        ("ARMA(1,1)", VarmaModel::scalar(&[0.7], &[0.5], 1.0)?),
    ];
    let len = 25;
    let tau = 10;
    let mut delta = vec![false; len];
    delta[tau - 1] = true;
    for (name, m) in &models {
        let pi = expand_pi(m, 8)?;
        let weights: Vec<String> = pi.coeffs().iter().map(|c| format!("{:+.4}", c[(0, 0)])).collect();
        println!("{name}\n  pi_0..8: {}", weights.join(" "));
        if m.q() == 0 {
            println!("  finite memory: pi_j = 0 for j > {}", m.p());
        } else {
            let b = fit_decay_bound(&expand_pi(m, 40)?)?;
            println!("  decay bound: |pi_j| <= {:.3} * {:.3}^j", b.m, b.r);
        }
        for kind in [OutlierKind::Additive, OutlierKind::Innovative] {
            let spec = ContaminationSpec::constant(kind, 1, delta.clone(), 1.0)?;
            let fp = residual_footprint(&spec, m, m, None)?;
            let trail: Vec<String> = (tau..tau + 6).map(|t| format!("{:+.3}", fp.at(t)[0])).collect();
            println!("  {kind:?} footprint at tau..tau+5: {}", trail.join(" "));
        }
    }
    Ok(())
}
