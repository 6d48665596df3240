//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria combine worked spot values with oracle and property checks:
//! brute-force grid minimization against the closed-form allocation, dense
//! root scans against the production crossover scanner, and
//! generate-and-recover studies for every fit family.

mod common;

use scalelaws::allocate::{
    allocation_exponents, crossover, generalized_allocation_exponents, min_data_for_tolerance,
    optimal_allocation, overfit_extent,
};
use scalelaws::fit::{fit_joint, fit_marginal, reduce_best_per_scale, FitConfig, ResidualSpace};
use scalelaws::model::{reduction_ratio, Axis, JointLaw, MarginalLaw};
use scalelaws::pipeline::{ingest_csv, run_pipeline, LossToLossOptions, Profile, RunManifest};
use scalelaws::synth::{
    brute_force_allocation, dense_scan_roots, generate_observations, log_grid, standard_normal,
    NoiseModel, ObservationTags,
};
use scalelaws::transfer::{fit_loss_to_loss, fit_transfer, LossPair, TransferPoint};

fn verdict(name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {name} failed: {detail}");
}

#[test]
fn criterion_01_tenfold_reduction_ratios() {
    let steep = reduction_ratio(0.3, 10.0).unwrap();
    let shallow = reduction_ratio(0.1, 10.0).unwrap();
    verdict(
        "01 tenfold reduction ratios",
        (0.500..=0.502).contains(&steep) && (0.793..=0.795).contains(&shallow),
        &format!("10^-0.3 = {steep}, 10^-0.1 = {shallow}"),
    );
}

#[test]
fn criterion_02_allocation_exponent_worked_example() {
    let (exp_n, exp_d, gamma) = allocation_exponents(0.4, 0.1).unwrap();
    let ok = (exp_n - 0.2).abs() <= 1e-12
        && (exp_d - 0.8).abs() <= 1e-12
        && (gamma - 0.08).abs() <= 1e-12;
    verdict(
        "02 allocation exponents (0.4, 0.1)",
        ok,
        &format!("got ({exp_n}, {exp_d}, {gamma}), want (0.2, 0.8, 0.08)"),
    );
}

#[test]
fn criterion_03_generalized_exponents_reduce_at_unit_constraint() {
    let mut state = 1u64;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let alpha = common::log_uniform(&mut state, 0.01, 2.0);
        let beta = common::log_uniform(&mut state, 0.01, 2.0);
        let (en, ed, _) = allocation_exponents(alpha, beta).unwrap();
        let (gn, gd) = generalized_allocation_exponents(alpha, beta, 1.0, 1.0).unwrap();
        worst = worst.max((gn - en).abs()).max((gd - ed).abs());
    }
    verdict(
        "03 generalized exponents reduce at a=b=1",
        worst <= 1e-12,
        &format!("worst deviation {worst:.3e} over 100 random (alpha, beta)"),
    );
}

#[test]
fn criterion_04_joint_fit_recovery() {
    let truth = JointLaw::new(0.05, 3.0, 0.35, 8.0, 0.12).unwrap();
    let n_grid = log_grid(10_000, 100_000_000, 6).unwrap();
    let d_grid = log_grid(1_000, 1_000_000, 6).unwrap();
    let tags = ObservationTags::default();

    // Noiseless: every parameter within 1e-4 relative, near-perfect R^2.
    let clean =
        generate_observations(&truth, &n_grid, &d_grid, &NoiseModel::none(), &tags).unwrap();
    let points: Vec<(f64, f64, f64)> = clean
        .iter()
        .map(|o| (o.n_params as f64, o.n_samples as f64, o.loss))
        .collect();
    let report = fit_joint(&points, &FitConfig::default()).unwrap();
    let p = report.params;
    let mut worst_rel = 0.0f64;
    for (got, want) in [
        (p.e, truth.e),
        (p.a, truth.a),
        (p.alpha, truth.alpha),
        (p.b, truth.b),
        (p.beta, truth.beta),
    ] {
        worst_rel = worst_rel.max((got - want).abs() / want);
    }
    let noiseless_ok = worst_rel <= 1e-4 && report.r_squared >= 1.0 - 1e-8;

    // 2% multiplicative noise, 50 seeds: median relative exponent error at
    // or below 10%. The Monte-Carlo design is 36x36: on the 6x6 grid the
    // model-size term (at most 0.12 of losses near 2) is provably not
    // identifiable to 10% at this noise level -- the Cramer-Rao bound puts
    // the relative std of any unbiased alpha estimate at 0.56 there. Log
    // residuals match the multiplicative noise.
    let n_grid_mc = log_grid(10_000, 100_000_000, 36).unwrap();
    let d_grid_mc = log_grid(1_000, 1_000_000, 36).unwrap();
    let mc_config = FitConfig {
        residual_space: ResidualSpace::Log,
        n_starts: 16,
        ..FitConfig::default()
    };
    let mut alpha_errs = Vec::new();
    let mut beta_errs = Vec::new();
    for seed in 0..50 {
        let noisy = generate_observations(
            &truth,
            &n_grid_mc,
            &d_grid_mc,
            &NoiseModel::log_normal(0.02, seed),
            &tags,
        )
        .unwrap();
        let points: Vec<(f64, f64, f64)> = noisy
            .iter()
            .map(|o| (o.n_params as f64, o.n_samples as f64, o.loss))
            .collect();
        let report = fit_joint(&points, &mc_config).unwrap();
        alpha_errs.push((report.params.alpha - truth.alpha).abs() / truth.alpha);
        beta_errs.push((report.params.beta - truth.beta).abs() / truth.beta);
    }
    let med_alpha = common::median(alpha_errs);
    let med_beta = common::median(beta_errs);
    let noisy_ok = med_alpha <= 0.10 && med_beta <= 0.10;

    verdict(
        "04 joint-fit recovery",
        noiseless_ok && noisy_ok,
        &format!(
            "noiseless worst rel err {worst_rel:.2e}, R^2 = {}, \
             noisy medians alpha {med_alpha:.3}, beta {med_beta:.3}",
            report.r_squared
        ),
    );
}

#[test]
fn criterion_05_closed_form_matches_brute_force() {
    let cells_per_decade = 2000usize;
    let cell = 1.0 / cells_per_decade as f64;
    let mut state = 5u64;
    let mut worst_gap = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let law = JointLaw::new(
            common::uniform(&mut state, 0.0, 0.3),
            common::log_uniform(&mut state, 0.2, 10.0),
            common::log_uniform(&mut state, 0.05, 1.2),
            common::log_uniform(&mut state, 0.2, 10.0),
            common::log_uniform(&mut state, 0.05, 1.2),
        )
        .unwrap();
        let budget = common::log_uniform(&mut state, 1e12, 1e19);
        let kappa = common::log_uniform(&mut state, 1e2, 1e6);
        let closed = optimal_allocation(&law, budget, kappa).unwrap();
        let (n_grid, _, loss_grid) =
            brute_force_allocation(&law, budget, kappa, cells_per_decade).unwrap();
        let gap = (closed.n_star.log10() - n_grid.log10()).abs();
        worst_gap = worst_gap.max(gap);
        ok &= gap <= cell && closed.loss_at_opt <= loss_grid + 1e-9;
    }
    verdict(
        "05 allocation vs brute-force oracle",
        ok,
        &format!("worst gap {worst_gap:.2e} decades vs one cell {cell:.2e}, 20 random laws"),
    );
}

#[test]
fn criterion_06_loss_to_loss_recovery_and_floor() {
    let make_pairs = |k: f64, kappa: f64| -> Vec<LossPair> {
        common::geomspace(0.01, 2.0, 12)
            .into_iter()
            .enumerate()
            .map(|(i, dx)| LossPair {
                l_id: dx,
                l_ood: k * dx.powf(kappa),
                n_params: 1000 + i as u64,
                n_samples: 1,
            })
            .collect()
    };

    let steep = fit_loss_to_loss(&make_pairs(0.486, 0.174), 0.0, 0.0, None).unwrap();
    let mean_row = fit_loss_to_loss(&make_pairs(0.073, 0.466), 0.0, 0.0, None).unwrap();
    let recovery_ok = (steep.params.k - 0.486).abs() <= 1e-10
        && (steep.params.kappa - 0.174).abs() <= 1e-10
        && (mean_row.params.k - 0.073).abs() <= 1e-10
        && (mean_row.params.kappa - 0.466).abs() <= 1e-10;

    // kappa_true below the floor comes back as exactly the floor.
    let shallow = fit_loss_to_loss(&make_pairs(0.3, 0.02), 0.0, 0.0, Some(0.05)).unwrap();
    let floor_ok = shallow.params.kappa == 0.05 && shallow.n_free_params == 1;

    verdict(
        "06 loss-to-loss recovery",
        recovery_ok && floor_ok,
        &format!(
            "(K, kappa) = ({}, {}), ({}, {}); floored kappa = {}",
            steep.params.k,
            steep.params.kappa,
            mean_row.params.k,
            mean_row.params.kappa,
            shallow.params.kappa
        ),
    );
}

#[test]
fn criterion_07_transfer_law_recovery() {
    let dfs = [500u64, 2_000, 8_000, 32_000];
    let ns = [100_000u64, 1_000_000, 10_000_000];

    let exact_points: Vec<TransferPoint> = dfs
        .iter()
        .flat_map(|&d_f| {
            ns.iter().map(move |&n| TransferPoint {
                d_f,
                n_params: n,
                d_t: 2.0 * (d_f as f64).powf(1.78) * (n as f64).powf(-0.3),
            })
        })
        .collect();
    let report = fit_transfer(&exact_points).unwrap();
    let exact_ok = (report.params.k - 2.0).abs() <= 1e-10 * 2.0
        && (report.params.gamma1 - 1.78).abs() <= 1e-10
        && (report.params.gamma2 + 0.3).abs() <= 1e-10;

    // Shallow exponent under 1% noise: median error at or below 5%.
    let mut errs = Vec::new();
    for seed in 0..50u64 {
        let points: Vec<TransferPoint> = dfs
            .iter()
            .enumerate()
            .flat_map(|(i, &d_f)| {
                ns.iter().enumerate().map(move |(j, &n)| {
                    let z = standard_normal(seed, i as u64, j as u64);
                    TransferPoint {
                        d_f,
                        n_params: n,
                        d_t: 5.0
                            * (d_f as f64).powf(0.42)
                            * (n as f64).powf(-0.15)
                            * (0.01 * z).exp(),
                    }
                })
            })
            .collect();
        let report = fit_transfer(&points).unwrap();
        errs.push((report.params.gamma1 - 0.42).abs() / 0.42);
    }
    let med = common::median(errs);
    verdict(
        "07 transfer-law recovery",
        exact_ok && med <= 0.05,
        &format!(
            "exact (k, g1, g2) = ({}, {}, {}); noisy median rel err {med:.4}",
            report.params.k, report.params.gamma1, report.params.gamma2
        ),
    );
}

#[test]
fn criterion_08_overfitting_collapse() {
    let mut state = 8u64;
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let law = JointLaw::new(
            common::uniform(&mut state, 0.0, 0.4),
            common::log_uniform(&mut state, 0.2, 8.0),
            common::log_uniform(&mut state, 0.05, 1.2),
            common::log_uniform(&mut state, 0.2, 8.0),
            common::log_uniform(&mut state, 0.05, 1.2),
        )
        .unwrap();

        // Equal collapse variable X = d * floor(n)^(1/beta) forces equal
        // overfitting extent regardless of the (n, d) pair behind it.
        let n1 = common::log_uniform(&mut state, 1e4, 1e8);
        let n2 = common::log_uniform(&mut state, 1e4, 1e8);
        let d1 = common::log_uniform(&mut state, 1e3, 1e7);
        let floor1 = law.e + law.a * n1.powf(-law.alpha);
        let floor2 = law.e + law.a * n2.powf(-law.alpha);
        let x = d1 * floor1.powf(1.0 / law.beta);
        let d2 = x / floor2.powf(1.0 / law.beta);
        let o1 = overfit_extent(&law, n1, d1).unwrap();
        let o2 = overfit_extent(&law, n2, d2).unwrap();
        let rel = (o1 - o2).abs() / o1;
        worst = worst.max(rel);
        ok &= rel <= 1e-12;

        // The minimum-data bound inverts the extent exactly.
        for eps in [0.01, 0.1, 0.5] {
            let d_min = min_data_for_tolerance(&law, n1, eps).unwrap();
            let o = overfit_extent(&law, n1, d_min).unwrap();
            let rel = (o - eps).abs() / eps;
            worst = worst.max(rel);
            ok &= rel <= 1e-12;
        }
    }
    verdict(
        "08 overfitting collapse",
        ok,
        &format!("worst relative deviation {worst:.2e} over 20 random laws"),
    );
}

#[test]
fn criterion_09_crossover_matches_dense_oracle() {
    // Constructions with known root counts 0, 1, and 2.
    let no_cross_a = MarginalLaw::new(0.3, 5.0, 0.4, Axis::Data).unwrap();
    let no_cross_b = MarginalLaw::new(0.05, 0.1, 0.2, Axis::Data).unwrap();

    let one_a = MarginalLaw::new(0.2, 10.0, 0.3, Axis::Params).unwrap();
    let c2 = (one_a.eval(1e5).unwrap() - 0.25) * 1e5f64.powf(0.5);
    let one_b = MarginalLaw::new(0.25, c2, 0.5, Axis::Params).unwrap();

    let cases: [(&MarginalLaw, &MarginalLaw, (f64, f64), usize); 3] = [
        (&no_cross_a, &no_cross_b, (1e3, 1e8), 0),
        (&one_a, &one_b, (1e4, 1e6), 1),
        // The same curve pair crosses again at large x when the scan widens.
        (&one_a, &one_b, (1e3, 1e8), 2),
    ];

    let mut ok = true;
    let mut detail = String::new();
    for (a, b, range, expect) in cases {
        let scan = crossover(a, b, range).unwrap();
        let oracle = dense_scan_roots(
            |x| a.eval(x).unwrap() - b.eval(x).unwrap(),
            range,
            1_000_000,
        )
        .unwrap();
        ok &= scan.roots.len() == expect && oracle.len() == expect;
        for (r, o) in scan.roots.iter().zip(&oracle) {
            ok &= (r - o).abs() <= 1e-6 * o;
        }
        detail.push_str(&format!(
            "[{} roots: scan {}, oracle {}] ",
            expect,
            scan.roots.len(),
            oracle.len()
        ));
    }
    verdict("09 crossover vs dense oracle", ok, detail.trim());
}

#[test]
fn criterion_10_binned_parameter_scaling_smoke_fit() {
    let ingest = ingest_csv(&common::fixture("cpsc2018_param_bins.csv")).unwrap();
    assert!(ingest.row_errors.is_empty());
    let reduced = reduce_best_per_scale(&ingest.observations);
    let points: Vec<(f64, f64)> = reduced
        .iter()
        .map(|o| (o.n_params as f64, o.loss))
        .collect();
    let report = fit_marginal(&points, Axis::Params, &FitConfig::default()).unwrap();

    // A positive-coefficient power decay is non-increasing by construction;
    // verify numerically over the fitted range anyway.
    let law = report.params;
    let xs = common::geomspace(points[0].0, points[4].0, 64);
    let monotone = xs
        .windows(2)
        .all(|w| law.eval(w[1]).unwrap() <= law.eval(w[0]).unwrap() + 1e-12);

    verdict(
        "10 binned parameter-scaling smoke fit",
        monotone && report.r_squared >= 0.8,
        &format!(
            "R^2 = {:.4}, exponent {:.3}, floor {:.4}",
            report.r_squared, law.exponent, law.e
        ),
    );
}

#[test]
fn criterion_11_pipeline_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: std::path::PathBuf| {
        let manifest = RunManifest {
            input_paths: vec![
                common::fixture("recovery_id.csv"),
                common::fixture("recovery_ood.csv"),
                common::fixture("cpsc2018_param_bins.csv"),
                common::fixture("degenerate_two_points.csv"),
            ],
            fit_config: FitConfig::default(),
            compute_model: Some(scalelaws::model::ComputeModel::new(1e3, 128, 50.0).unwrap()),
            profile: Profile::Default,
            loss_to_loss: LossToLossOptions::default(),
            output_dir: out,
            contour_resolution: (24, 24),
            curve_points: 25,
        };
        run_pipeline(&manifest).unwrap()
    };
    let first = run(dir.path().join("a"));
    let second = run(dir.path().join("b"));
    assert_eq!(first.n_ok, second.n_ok);

    let list = |p: &std::path::Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(p)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    let names_a = list(&dir.path().join("a"));
    let names_b = list(&dir.path().join("b"));
    let mut ok = names_a == names_b && !names_a.is_empty();
    let mut mismatch = String::new();
    if ok {
        for name in &names_a {
            let bytes_a = std::fs::read(dir.path().join("a").join(name)).unwrap();
            let bytes_b = std::fs::read(dir.path().join("b").join(name)).unwrap();
            if bytes_a != bytes_b {
                ok = false;
                mismatch = name.clone();
                break;
            }
        }
    }
    verdict(
        "11 pipeline determinism",
        ok,
        &if mismatch.is_empty() {
            format!("{} files byte-identical across two runs", names_a.len())
        } else {
            format!("file {mismatch} differs between runs")
        },
    );
}
