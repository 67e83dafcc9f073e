//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Tolerances are fixed below. The process exits 0 even when a criterion
//! fails so that the workspace test run stays usable; set
//! `VARMA_PATCH_ACCEPTANCE_STRICT=1` to turn any failure into a non-zero exit.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varma_patch::contaminate::{apply, make_indicator, residual_footprint};
use varma_patch::estimate::{criterion_at, fit, patch_estimator, FitOptions};
use varma_patch::lagpoly::{expand_pi, expand_psi, suggest_kappa, DecayBound};
use varma_patch::montecarlo::{
    bias_rmse, draw_replication, replication_seed, run_experiment, AggregateResult, ConfigDocument, Contamination,
    ExperimentConfig, ModelKind,
};
use varma_patch::process::{residuals, simulate};
use varma_patch::subsample::{huber_skip_select, oracle_select, patch_remove};
use varma_patch::{ContaminationSpec, IndexSet, OutlierKind, VarmaModel};

const EXACT_IDENTITY_TOL: f64 = 1e-10;
const EXACT_IDENTITY_BUDGET: Duration = Duration::from_secs(5);
const VAR_ELIMINATION_TOL: f64 = 1e-12;
const VAR_ELIMINATION_BUDGET: Duration = Duration::from_secs(30);
const TABLE2_AO_K0: (f64, f64) = (0.85, 1.05);
const TABLE2_AO_K1_MAX: f64 = 0.03;
const TABLE2_CLEAN_MAX: f64 = 0.03;
const TABLE2_BUDGET: Duration = Duration::from_secs(600);
const TABLE3_K0: (f64, f64) = (0.75, 1.05);
const TABLE3_K9_MAX: f64 = 0.30;
const VARMA_RATIO_MIN: f64 = 3.0;
const INVARIANCE_T: [usize; 4] = [250, 500, 1000, 2000];
const INVARIANCE_MAX_AT_2000: f64 = 0.02;
const CONVOLUTION_TOL: f64 = 1e-12;
const SELECTION_T: usize = 1096;
const SELECTION_MIN_HITS: usize = 80;
const SELECTION_SEEDS: usize = 100;

const DESK_SEED: u64 = 20240101;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, start: Instant, outcome: Outcome) -> bool {
    let status = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{status} [{id}] {name}: {} ({:.1?})", outcome.detail, start.elapsed());
    outcome.pass
}

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn desk_cells(file: &str, t: usize, kinds: &[Contamination]) -> Vec<ExperimentConfig> {
    let doc: ConfigDocument = serde_json::from_str(&fs::read_to_string(config_path(file)).unwrap()).unwrap();
    doc.experiments()
        .unwrap()
        .into_iter()
        .filter(|c| c.t == t && (c.alpha - 0.1).abs() < 1e-12 && kinds.contains(&c.kind))
        .filter(|c| c.kind == Contamination::Clean || (c.zeta - 50.0).abs() < 1e-12)
        .collect()
}

fn bias_at(results: &[AggregateResult], kappa: usize) -> &AggregateResult {
    results.iter().find(|r| r.kappa == kappa).expect("kappa present")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn bump(m: &VarmaModel, f: impl Fn(usize) -> f64) -> VarmaModel {
    let p: Vec<f64> = m.dynamic_params().iter().enumerate().map(|(i, v)| v + f(i)).collect();
    m.with_dynamic_params(&p).unwrap()
}

fn exact_identity() -> Outcome {
    let mat = |v: &[f64]| DMatrix::from_row_slice(2, 2, v);
    let models = [
        ("AR(1)", VarmaModel::scalar(&[0.7], &[], 1.0).unwrap()),
        ("MA(1)", VarmaModel::scalar(&[], &[0.5], 1.0).unwrap()),
        ("ARMA(1,1)", VarmaModel::scalar(&[0.7], &[0.5], 1.0).unwrap()),
        (
            "VARMA(1,1)",
            VarmaModel::new(
                vec![mat(&[0.5, 0.1, 0.0, 0.4])],
                vec![mat(&[0.3, 0.0, 0.2, 0.4])],
                mat(&[1.0, 0.2, 0.2, 1.0]),
            )
            .unwrap(),
        ),
    ];
    let mut worst = 0.0_f64;
    let mut combos = 0;
    for (mi, (_, truth)) in models.iter().enumerate() {
        let n = truth.n_dynamic_params();
        let candidates = [
            truth.clone(),
            bump(truth, |_| 0.1),
            bump(truth, |_| -0.1),
            bump(truth, |i| if i == 0 { 0.1 } else { 0.0 }),
            bump(truth, |i| if i == n - 1 { -0.1 } else { 0.0 }),
        ];
        let seed = 500 + mi as u64;
        let (x, _) = simulate(truth, 300, 200, seed).unwrap();
        let delta = make_indicator(300, 0.1, seed, 0).unwrap();
        for kind in [OutlierKind::Additive, OutlierKind::Innovative] {
            combos += 1;
            let spec = ContaminationSpec::constant(kind, truth.dim(), delta.clone(), 5.0).unwrap();
            let y = apply(&x, &spec, truth).unwrap();
            for cand in &candidates {
                let ry = residuals(&y, cand).unwrap();
                let rx = residuals(&x, cand).unwrap();
                let fp = residual_footprint(&spec, cand, truth, None).unwrap();
                for ((a, b), c) in ry.values().iter().zip(rx.values()).zip(fp.values()) {
                    worst = worst.max((a - b - c).abs());
                }
            }
        }
    }
    Outcome {
        pass: combos == 8 && worst <= EXACT_IDENTITY_TOL,
        detail: format!("{} model/kind combinations x 5 candidates, max deviation {worst:.2e} (tol {EXACT_IDENTITY_TOL:e})", combos),
    }
}

fn var_elimination() -> Outcome {
    let cfg = ExperimentConfig {
        model_kind: ModelKind::Var1,
        t: 500,
        alpha: 0.1,
        zeta: 50.0,
        kind: Contamination::Ao,
        kappa_list: vec![1],
        m: 1,
        base_seed: DESK_SEED,
        subset_mode: Default::default(),
        burn_in: 500,
    };
    let rep = draw_replication(&cfg, 0).unwrap();
    let h = patch_remove(&oracle_select(&rep.delta), 1);
    let truth = ModelKind::Var1.true_model();
    let mut worst = 0.0_f64;
    for i in 0..10 {
        for j in 0..10 {
            let a11 = 0.5 + 0.04 * i as f64;
            let a21 = 0.1 + 0.04 * j as f64;
            let cand = truth.with_dynamic_params(&[a11, a21, 0.0, 0.7]).unwrap();
            let cy = criterion_at(&rep.observed, &cand, &h).unwrap();
            let cx = criterion_at(&rep.clean, &cand, &h).unwrap();
            worst = worst.max((cy - cx).abs());
        }
    }
    let opts = FitOptions::new(truth);
    let fy = fit(&rep.observed, (1, 0), &h, &opts).unwrap();
    let fx = fit(&rep.clean, (1, 0), &h, &opts).unwrap();
    let bitwise = fy
        .params
        .dynamic_params()
        .iter()
        .zip(fx.params.dynamic_params())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && fy.criterion_value.to_bits() == fx.criterion_value.to_bits();
    Outcome {
        pass: worst <= VAR_ELIMINATION_TOL && bitwise,
        detail: format!("100-point grid max |dC| {worst:.2e} (tol {VAR_ELIMINATION_TOL:e}), fits bitwise identical: {bitwise}"),
    }
}

fn var1_desk() -> Outcome {
    let cells = desk_cells("table2_desk.json", 500, &[Contamination::Ao, Contamination::Clean]);
    let mut ok = cells.len() == 2;
    let mut parts = Vec::new();
    for cell in &cells {
        let res = run_experiment(cell).unwrap();
        let (b0, b1) = (bias_at(&res, 0).bias, bias_at(&res, 1).bias);
        match cell.kind {
            Contamination::Ao => {
                ok &= (TABLE2_AO_K0.0..=TABLE2_AO_K0.1).contains(&b0) && b1 <= TABLE2_AO_K1_MAX;
                parts.push(format!("AO bias k=0 {b0:.4} in [{}, {}], k=1 {b1:.4} <= {TABLE2_AO_K1_MAX}", TABLE2_AO_K0.0, TABLE2_AO_K0.1));
            }
            _ => {
                ok &= b0 <= TABLE2_CLEAN_MAX && b1 <= TABLE2_CLEAN_MAX;
                parts.push(format!("clean bias k=0 {b0:.4}, k=1 {b1:.4} <= {TABLE2_CLEAN_MAX}"));
            }
        }
        parts.push(format!("m={}", cell.m));
    }
    Outcome { pass: ok, detail: parts.join("; ") }
}

fn vma1_desk() -> Outcome {
    let cells = desk_cells("table3_desk.json", 500, &[Contamination::Ao, Contamination::Io]);
    let ao_cfg = cells.iter().find(|c| c.kind == Contamination::Ao).unwrap();
    let io_cfg = cells.iter().find(|c| c.kind == Contamination::Io).unwrap();
    let ao = run_experiment(ao_cfg).unwrap();
    let io = run_experiment(io_cfg).unwrap();
    let biases: Vec<f64> = [0, 2, 5, 9].iter().map(|&k| bias_at(&ao, k).bias).collect();
    let decreasing = biases.windows(2).all(|w| w[1] < w[0]);
    let bitwise = ao.len() == io.len()
        && ao.iter().zip(&io).all(|(a, b)| {
            a.bias.to_bits() == b.bias.to_bits() && a.rmse.to_bits() == b.rmse.to_bits() && a.m_effective == b.m_effective
        });
    let k0 = (TABLE3_K0.0..=TABLE3_K0.1).contains(&biases[0]);
    let k9 = biases[3] <= TABLE3_K9_MAX;
    Outcome {
        pass: decreasing && bitwise && k0 && k9,
        detail: format!(
            "AO bias over k=0,2,5,9: {:.4} {:.4} {:.4} {:.4} (strictly decreasing: {decreasing}); k=0 in [{}, {}]: {k0}; k=9 <= {TABLE3_K9_MAX}: {k9}; AO == IO bitwise: {bitwise}; m_effective {}/{}",
            biases[0], biases[1], biases[2], biases[3], TABLE3_K0.0, TABLE3_K0.1, ao[0].m_effective, ao[0].m
        ),
    }
}

fn varma11_desk() -> Outcome {
    let cells = desk_cells("table4_desk.json", 500, &[Contamination::Ao]);
    let cell = ExperimentConfig { kappa_list: vec![0, 9], ..cells[0].clone() };
    let res = run_experiment(&cell).unwrap();
    let (r0, r9) = (bias_at(&res, 0), bias_at(&res, 9));
    let ratio = r0.bias / r9.bias;
    Outcome {
        pass: ratio >= VARMA_RATIO_MIN,
        detail: format!(
            "bias k=0 {:.4} / k=9 {:.4} = {ratio:.2} (min {VARMA_RATIO_MIN}); rmse k=0 {:.4}, k=9 {:.4}; m_effective k=0 {}/{}, k=9 {}/{}",
            r0.bias, r9.bias, r0.rmse, r9.rmse, r0.m_effective, r0.m, r9.m_effective, r9.m
        ),
    }
}

fn clean_invariance() -> Outcome {
    let truth = ModelKind::Var1.true_model();
    let opts = FitOptions::new(truth.clone());
    let mut medians = Vec::new();
    for &t in &INVARIANCE_T {
        let mut d: Vec<f64> = (0..100)
            .map(|i| {
                let (x, _) = simulate(&truth, t, 500, replication_seed(77, i)).unwrap();
                let h = huber_skip_select(&residuals(&x, &truth).unwrap(), 0.1, 1).unwrap();
                let a = patch_estimator(&x, (1, 0), &h, 1, &opts).unwrap();
                let b = fit(&x, (1, 0), &h, &opts).unwrap();
                dist(&a.params.dynamic_params(), &b.params.dynamic_params())
            })
            .collect();
        d.sort_by(f64::total_cmp);
        medians.push((d[49] + d[50]) / 2.0);
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let last = *medians.last().unwrap();
    Outcome {
        pass: decreasing && last <= INVARIANCE_MAX_AT_2000,
        detail: format!(
            "median distance for T={:?}: {} (decreasing: {decreasing}; T=2000 <= {INVARIANCE_MAX_AT_2000})",
            INVARIANCE_T,
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> VarmaModel {
    let d = rng.random_range(1..=2);
    let p = rng.random_range(0..=2);
    let q = rng.random_range(0..=2);
    let mut draw = |n: usize| -> Vec<DMatrix<f64>> {
        (0..n).map(|_| DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.3..0.3))).collect()
    };
    let ar = draw(p);
    let ma = draw(q);
    VarmaModel::new(ar, ma, DMatrix::identity(d, d)).unwrap()
}

fn unit_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();

    let ma = VarmaModel::scalar(&[], &[0.5], 1.0).unwrap();
    let pi: Vec<f64> = expand_pi(&ma, 3).unwrap().coeffs().iter().map(|m| m[(0, 0)]).collect();
    if pi != [1.0, -0.5, 0.25, -0.125] {
        failures.push("MA(1) pi expansion".to_string());
    }
    let ar = VarmaModel::scalar(&[0.5], &[], 1.0).unwrap();
    let psi: Vec<f64> = expand_psi(&ar, 3).unwrap().coeffs().iter().map(|m| m[(0, 0)]).collect();
    if psi != [1.0, 0.5, 0.25, 0.125] {
        failures.push("AR(1) psi expansion".to_string());
    }
    let kappa = suggest_kappa(&DecayBound { m: 1.0, r: 0.5 }, 0.1, 500, 50.0, 1e-3, None).unwrap().kappa;
    if kappa != 22 {
        failures.push(format!("kappa suggestion {kappa} != 22"));
    }
    let h = IndexSet::new(10, vec![1, 2, 3, 5, 6, 7, 8, 9]).unwrap();
    if patch_remove(&h, 2).members() != [1, 2, 3, 7, 8, 9] {
        failures.push("S^2 example".to_string());
    }

    let mut worst_conv = 0.0_f64;
    for _ in 0..200 {
        let m = random_model(&mut rng);
        let (pi, psi) = (expand_pi(&m, 30).unwrap(), expand_psi(&m, 30).unwrap());
        let id = pi.mul(&psi);
        for (j, c) in id.coeffs().iter().enumerate() {
            let target = if j == 0 { DMatrix::identity(m.dim(), m.dim()) } else { DMatrix::zeros(m.dim(), m.dim()) };
            worst_conv = worst_conv.max((c - target).amax());
        }
    }
    if worst_conv > CONVOLUTION_TOL {
        failures.push(format!("pi * psi deviates by {worst_conv:.2e}"));
    }

    let mut order_violations = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..60);
        let mask: Vec<bool> = (0..len).map(|_| rng.random_bool(0.8)).collect();
        let h = IndexSet::from_mask(&mask);
        let sub = IndexSet::from_mask(&mask.iter().map(|&b| b && rng.random_bool(0.8)).collect::<Vec<_>>());
        let k = rng.random_range(0..6);
        let k2 = k + rng.random_range(0..4);
        let monotone = patch_remove(&sub, k).is_subset_of(&patch_remove(&h, k));
        let antitone = patch_remove(&h, k2).is_subset_of(&patch_remove(&h, k));
        if !monotone || !antitone {
            order_violations += 1;
        }
    }
    if order_violations > 0 {
        failures.push(format!("{order_violations} S^k order violations"));
    }

    let mut jensen_violations = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..30);
        let dim = rng.random_range(1..6);
        let ests: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let truth: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (b, r) = bias_rmse(&ests, &truth).unwrap();
        if b > r * (1.0 + 1e-12) {
            jensen_violations += 1;
        }
    }
    if jensen_violations > 0 {
        failures.push(format!("{jensen_violations} bias > rmse cases"));
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "worked examples exact; pi*psi identity max {worst_conv:.2e} over 200 models; 1000 S^k cases; 1000 aggregates; full suites in tests/oracles.rs, tests/properties.rs, tests/contamination.rs, tests/estimation.rs"
            )
        } else {
            failures.join("; ")
        },
    }
}

fn var2_model() -> VarmaModel {
    VarmaModel::new(
        vec![
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]),
            DMatrix::from_row_slice(2, 2, &[-0.3, 0.0, 0.1, -0.25]),
        ],
        vec![],
        DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
    )
    .unwrap()
}

fn selection() -> Outcome {
    let truth = var2_model();
    let dir = tempfile::tempdir().unwrap();
    let mut hits = 0;
    let mut full_hits = 0;
    let mut header_ok = true;
    for i in 0..SELECTION_SEEDS {
        let (x, _) = simulate(&truth, SELECTION_T, 500, replication_seed(8, i)).unwrap();
        let data = dir.path().join(format!("x{i}.csv"));
        x.write_csv(fs::File::create(&data).unwrap()).unwrap();
        let out = dir.path().join(format!("sel{i}"));
        let args = ["varma-patch", "--out", out.to_str().unwrap(), "select", data.to_str().unwrap(), "--grid", "1:0,2:0,3:0", "--kappa", "2"];
        if varma_patch::cli::run(args) != 0 {
            continue;
        }
        let mut rdr = csv::Reader::from_path(out.join("selection.csv")).unwrap();
        header_ok &= rdr.headers().unwrap().iter().collect::<Vec<_>>() == ["p", "q", "n_eff", "aic_avg_patch", "aic_avg_full"];
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        header_ok &= rows.iter().all(|r| r.len() == 5);
        let argmin = |col: usize| {
            rows.iter()
                .filter_map(|r| r[col].parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| (v, (&r[0]).to_string(), (&r[1]).to_string())))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, p, q)| (p, q))
        };
        let two_zero = Some(("2".to_string(), "0".to_string()));
        hits += usize::from(argmin(3) == two_zero);
        full_hits += usize::from(argmin(4) == two_zero);
    }
    Outcome {
        pass: hits >= SELECTION_MIN_HITS && header_ok,
        detail: format!(
            "(2,0) selected by aic_avg_patch in {hits}/{SELECTION_SEEDS} (min {SELECTION_MIN_HITS}); by aic_avg_full in {full_hits}/{SELECTION_SEEDS}; five columns: {header_ok}"
        ),
    }
}

fn main() {
    let mut all = true;

    let s = Instant::now();
    let mut o = exact_identity();
    if s.elapsed() > EXACT_IDENTITY_BUDGET {
        o.pass = false;
        o.detail.push_str("; over time budget");
    }
    all &= report(1, "exact residual identity", s, o);

    let s = Instant::now();
    let mut o = var_elimination();
    if s.elapsed() > VAR_ELIMINATION_BUDGET {
        o.pass = false;
        o.detail.push_str("; over time budget");
    }
    all &= report(2, "VAR AO exact elimination", s, o);

    let s = Instant::now();
    let mut o = var1_desk();
    if s.elapsed() > TABLE2_BUDGET {
        o.pass = false;
        o.detail.push_str("; over time budget");
    }
    all &= report(3, "VAR(1) desk table", s, o);

    let s = Instant::now();
    all &= report(4, "VMA(1) monotone bias", s, vma1_desk());

    let s = Instant::now();
    all &= report(5, "VARMA(1,1) bias contrast", s, varma11_desk());

    let s = Instant::now();
    all &= report(6, "clean-data invariance", s, clean_invariance());

    let s = Instant::now();
    all &= report(7, "unit and property suites", s, unit_suites());

    let s = Instant::now();
    all &= report(8, "VAR(2) order selection", s, selection());

    println!("acceptance: {}", if all { "all criteria passed" } else { "some criteria FAILED" });
    if !all && std::env::var("VARMA_PATCH_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
