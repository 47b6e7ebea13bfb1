//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured numbers. Criteria drive the experiment runner through
//! config text (the same path the CLI takes); library-level sub-checks call
//! the crates directly.

use heatlab_cli::config::ExperimentConfig;
use heatlab_cli::report::{ReportFormat, ResultBundle};
use heatlab_cli::run_experiment;
use std::time::Instant;

fn run(cfg: &str) -> ResultBundle {
    let config = ExperimentConfig::parse(cfg).expect("config parses");
    run_experiment(&config).expect("experiment runs")
}

fn assertion<'a>(bundle: &'a ResultBundle, name: &str) -> &'a heatlab_cli::report::Assertion {
    bundle
        .assertions
        .iter()
        .find(|a| a.name == name)
        .unwrap_or_else(|| panic!("assertion `{name}` missing from bundle"))
}

fn table_cell(bundle: &ResultBundle, table: &str, column: &str, row: usize) -> f64 {
    let t = bundle
        .tables
        .iter()
        .find(|t| t.name == table)
        .unwrap_or_else(|| panic!("table `{table}` missing"));
    let col = t
        .header
        .iter()
        .position(|h| h == column)
        .unwrap_or_else(|| panic!("column `{column}` missing"));
    match &t.rows[row][col] {
        heatlab_cli::report::Cell::Num(x) => *x,
        other => panic!("cell {table}.{column}[{row}] is not numeric: {other:?}"),
    }
}

const CIRCLE_256: &str = "kind = circle\nn = 256\ncircumference = 6.283185307179586\n";
const INTERVAL_400: &str = "kind = interval\nn = 400\nlength = 1.0\n";

#[test]
fn criterion_01_kernel_validity_structural() {
    let start = Instant::now();
    let bundle = run(&format!(
        "experiment = kernel_validate\n{CIRCLE_256}ck_s = 0.1\nck_t = 0.2\nseed = 1\n"
    ));
    let mass = assertion(&bundle, "row_mass_defect");
    let asym = assertion(&bundle, "asymmetry");
    let ck = assertion(&bundle, "chapman_kolmogorov_defect");
    let elapsed = start.elapsed();
    let pass = mass.pass && asym.pass && ck.pass && elapsed.as_secs_f64() < 10.0;
    println!(
        "criterion 1 (kernel validity: mass/symmetry/Chapman-Kolmogorov): {} — mass {:.2e} (<=1e-10), asym {:.2e} (<=1e-10), CK {:.2e} (<=1e-8), runtime {:.2?} (<10 s)",
        if pass { "PASS" } else { "FAIL" },
        mass.measured,
        asym.measured,
        ck.measured,
        elapsed
    );
    assert!(mass.pass, "row mass defect {:.3e} > 1e-10", mass.measured);
    assert!(asym.pass, "asymmetry {:.3e} > 1e-10", asym.measured);
    assert!(ck.pass, "CK defect {:.3e} > 1e-8", ck.measured);
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "runtime {elapsed:.2?} >= 10 s"
    );
}

/// Criterion 1's fourth sub-check pins the spectral kernel to the continuum
/// theta-series oracle at relative error 1e-6 on the n=256 circle. A
/// second-difference stencil deviates from the continuum at O(h^2):
/// measured 4.8e-2 (t=1e-3), 3.8e-3 (1e-2), 3.8e-4 (1e-1), 3.8e-5 (t=1),
/// confirmed to scale as h^-2 (n=512 gives 9.5e-6 at t=1). Meeting 1e-6
/// would need n ~ 25,000 even at t=1, far beyond the n <= 2048 spectral
/// cap, and t=1e-3 sits below the declared resolution floor 10*mesh^2 =
/// 6.0e-3. The tolerance is asserted as stated and this test is expected
/// to fail until the tolerance is recalibrated.
#[test]
fn criterion_01_kernel_vs_theta_oracle() {
    let bundle = run(&format!(
        "experiment = kernel_validate\n{CIRCLE_256}ck_s = 0.1\nck_t = 0.2\noracle_times = 1e-3, 1e-2, 1e-1, 1\nseed = 1\n"
    ));
    let oracle_assertions: Vec<_> = bundle
        .assertions
        .iter()
        .filter(|a| a.name.starts_with("oracle_rel_err"))
        .collect();
    assert_eq!(oracle_assertions.len(), 4);
    let pass = oracle_assertions.iter().all(|a| a.pass);
    println!(
        "criterion 1 (spectral kernel vs theta-series oracle at rel. 1e-6): {} — measured {}",
        if pass { "PASS" } else { "FAIL" },
        oracle_assertions
            .iter()
            .map(|a| format!("{}={:.3e}", a.name, a.measured))
            .collect::<Vec<_>>()
            .join(", ")
    );
    assert!(
        pass,
        "the O(h^2) lattice-vs-continuum gap of the mandated second-difference stencil exceeds \
         the 1e-6 tolerance at n=256 by 38x (t=1) to 48,000x (t=1e-3); measured: {}. The gap \
         scales as h^2 (9.5e-6 at n=512, 2.4e-6 at n=1024, t=1), so n ~ 25,000 would be needed \
         at t=1 alone. Tolerance asserted as stated; see the validity table for the passing \
         structural checks.",
        oracle_assertions
            .iter()
            .map(|a| format!("{}={:.3e}", a.name, a.measured))
            .collect::<Vec<_>>()
            .join(", ")
    );
}

#[test]
fn criterion_02_vanishing_viscosity() {
    let start = Instant::now();
    let bundle = run(&format!(
        "experiment = hj_sweep\n{CIRCLE_256}phi = sin\nt = 1.0\neps_list = 0.4, 0.2, 0.1, 0.05, 0.025\nseed = 2\n"
    ));
    let decreasing = assertion(&bundle, "sup_err_strictly_decreasing");
    let final_err = assertion(&bundle, "final_error");
    let elapsed = start.elapsed();
    let pass = decreasing.pass && final_err.pass && elapsed.as_secs_f64() < 30.0;
    println!(
        "criterion 2 (vanishing viscosity): {} — errors strictly decreasing: {}, final {:.4} <= max(2*floor, 0.02*osc) = {:.4}, runtime {:.2?} (<30 s)",
        if pass { "PASS" } else { "FAIL" },
        decreasing.pass,
        final_err.measured,
        final_err.tolerance,
        elapsed
    );
    assert!(decreasing.pass, "sup errors not strictly decreasing");
    assert!(
        final_err.pass,
        "final error {:.5} > {:.5}",
        final_err.measured, final_err.tolerance
    );
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "runtime {elapsed:.2?} >= 30 s"
    );
}

#[test]
fn criterion_03_contraction_estimates() {
    let bundle = run(&format!(
        "experiment = contraction\n{CIRCLE_256}phi = sin\nt_grid = 4, 1, 0.25\neps_list = 0.4, 0.1, 0.025\nseed = 3\n"
    ));
    let fails: Vec<_> = bundle.assertions.iter().filter(|a| !a.pass).collect();
    println!(
        "criterion 3 (contraction estimates on the flat circle): {} — {} checks over (t, eps) in {{0.25,1,4}}x{{0.4,0.1,0.025}}, {} failed",
        if fails.is_empty() { "PASS" } else { "FAIL" },
        bundle.assertions.len(),
        fails.len()
    );
    assert!(
        fails.is_empty(),
        "failed contraction checks: {:?}",
        fails
            .iter()
            .map(|a| format!(
                "{} measured {:.8e} vs {:.8e}",
                a.name, a.measured, a.tolerance
            ))
            .collect::<Vec<_>>()
    );
}

#[test]
fn criterion_04_varadhan_pointwise() {
    let start = Instant::now();
    let bundle = run(&format!(
        "experiment = varadhan\n{INTERVAL_400}x = 0.2\ny = 0.8\n\
         t_grid = 2e-2, 1.54e-2, 1.19e-2, 9.15e-3, 7.04e-3, 5.42e-3, 4.17e-3, 3.2e-3, 2.5e-3\nseed = 4\n"
    ));
    let fitted = table_cell(&bundle, "fit", "fitted_limit", 0);
    let rel_to_spec = (fitted - (-0.09)).abs() / 0.09;
    let elapsed = start.elapsed();
    let pass = rel_to_spec <= 0.05 && elapsed.as_secs_f64() < 60.0;
    println!(
        "criterion 4 (Varadhan pointwise limit): {} — fitted {:.6} vs -0.09, rel {:.2}% (<=5%), runtime {:.2?} (<60 s)",
        if pass { "PASS" } else { "FAIL" },
        fitted,
        100.0 * rel_to_spec,
        elapsed
    );
    assert!(
        rel_to_spec <= 0.05,
        "fitted {fitted:.6} deviates {:.2}% from -0.09",
        100.0 * rel_to_spec
    );
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "runtime {elapsed:.2?} >= 60 s"
    );
}

#[test]
fn criterion_05_set_ldp() {
    let bundle = run(&format!(
        "experiment = set_ldp\n{INTERVAL_400}x = 0.2\nset_lo = 0.7\nset_hi = 1.0\n\
         t_grid = 2e-2, 1.54e-2, 1.19e-2, 9.15e-3, 7.04e-3, 5.42e-3, 4.17e-3, 3.2e-3, 2.5e-3, 2.0e-3\nseed = 5\n"
    ));
    let fitted = table_cell(&bundle, "fit", "fitted_limit", 0);
    let rel_to_spec = (fitted - (-0.0625)).abs() / 0.0625;

    let inside = run(&format!(
        "experiment = set_ldp\n{INTERVAL_400}x = 0.8\nset_lo = 0.7\nset_hi = 1.0\n\
         t_grid = 2e-2, 1.54e-2, 1.19e-2, 9.15e-3, 7.04e-3, 5.42e-3, 4.17e-3, 3.2e-3, 2.5e-3, 2.0e-3\nseed = 5\n"
    ));
    let inside_limit = table_cell(&inside, "fit", "fitted_limit", 0);
    let labels = assertion(&bundle, "open_closed_labels_agree");

    let pass = rel_to_spec <= 0.10 && inside_limit.abs() <= 0.005 && labels.pass;
    println!(
        "criterion 5 (set-level LDP): {} — fitted {:.6} vs -0.0625, rel {:.2}% (<=10%); base inside the set gives {:.5} (|.| <= 0.005)",
        if pass { "PASS" } else { "FAIL" },
        fitted,
        100.0 * rel_to_spec,
        inside_limit
    );
    assert!(labels.pass, "open/closed targets diverged on a clopen set");
    assert!(
        rel_to_spec <= 0.10,
        "fitted {fitted:.6} deviates {:.2}% from -0.0625",
        100.0 * rel_to_spec
    );
    assert!(
        inside_limit.abs() <= 0.005,
        "limit with base point inside the set: {inside_limit:.5}"
    );
}

#[test]
fn criterion_06_varadhan_lemma() {
    let bundle = run(&format!(
        "experiment = varadhan_lemma\n{CIRCLE_256}x = 0.0\nphi = sin\n\
         t_grid = 0.16, 0.123, 0.0945, 0.0727, 0.0559, 0.043, 0.0338, 0.026, 0.02\nseed = 6\n"
    ));
    let rel = assertion(&bundle, "fitted_limit_rel_err");

    let constant = run(&format!(
        "experiment = varadhan_lemma\n{CIRCLE_256}x = 0.0\nphi = constant:0.8\n\
         t_grid = 0.16, 0.08, 0.04, 0.02\nseed = 6\n"
    ));
    let exactness = assertion(&constant, "constant_phi_exactness");

    let pass = rel.pass && exactness.pass;
    println!(
        "criterion 6 (Varadhan lemma form): {} — rel err {:.2}% (<=5%) vs exhaustive grid max; constant-phi exactness {:.2e} (<=1e-12)",
        if pass { "PASS" } else { "FAIL" },
        100.0 * rel.measured,
        exactness.measured
    );
    assert!(rel.pass, "rel err {:.3}% > 5%", 100.0 * rel.measured);
    assert!(
        exactness.pass,
        "constant phi deviates {:.2e} > 1e-12",
        exactness.measured
    );
}

#[test]
fn criterion_07_gamma_at_dirac() {
    let bundle = run(&format!(
        "experiment = gamma_dirac\n{INTERVAL_400}x = 0.2\nz = 0.8\n\
         t_grid = 2e-2, 1.54e-2, 1.19e-2, 9.15e-3, 7.04e-3, 5.42e-3, 4.17e-3, 3.9e-3, 3e-3\nseed = 7\n"
    ));
    let fitted = table_cell(&bundle, "fit", "fitted_limit", 0);
    let rel_to_spec = (fitted - 0.09).abs() / 0.09;
    let entropy = assertion(&bundle, "conditioned_entropy_identity");
    let pass = rel_to_spec <= 0.10 && entropy.pass;
    println!(
        "criterion 7 (Gamma-limsup at a Dirac): {} — fitted {:.6} vs 0.09, rel {:.2}% (<=10%); conditioned-entropy identity defect {:.2e} (<=1e-12)",
        if pass { "PASS" } else { "FAIL" },
        fitted,
        100.0 * rel_to_spec,
        entropy.measured
    );
    assert!(
        rel_to_spec <= 0.10,
        "fitted {fitted:.6} deviates {:.2}% from 0.09",
        100.0 * rel_to_spec
    );
    assert!(
        entropy.pass,
        "H(nu|_A/nu(A) | nu) defect {:.3e} > 1e-12",
        entropy.measured
    );
}

#[test]
fn criterion_08_brownian_tube() {
    use heatlab::brownian::{kinetic_rate, Partition, PartitionPath, SlowedBrownian};
    use heatlab::heat::Generator;
    use heatlab::heat::HeatOperator;
    use heatlab::DiscreteSpace;
    use std::sync::Arc;

    // tube window on the n=401 grid (0.2, 0.35, ..., 0.8 are exact points)
    let bundle = run(
        "experiment = tube_ldp\nkind = interval\nn = 401\nlength = 1.0\nx = 0.2\n\
         partition = 0, 0.25, 0.5, 0.75, 1\npath = 0.2, 0.35, 0.5, 0.65, 0.8\n\
         t_grid = 5e-2, 3.5e-2, 2.4e-2, 1.7e-2, 1.2e-2, 8e-3\nseed = 8\n",
    );
    let in_window = assertion(&bundle, "fit_in_window");
    let sampling = assertion(&bundle, "sampling_consistency_3sigma");
    let fitted = table_cell(&bundle, "fit", "fitted_limit", 0);
    let window_lo = table_cell(&bundle, "fit", "window_lo", 0);
    let window_hi = table_cell(&bundle, "fit", "window_hi", 0);
    let ell = table_cell(&bundle, "fit", "ell", 0);

    // exact kinetic rate on a grid whose quarter points are representable
    let s5 = DiscreteSpace::interval(5, 1.0).unwrap();
    let unit_speed = PartitionPath::new(Partition::uniform(4), vec![0, 1, 2, 3, 4]).unwrap();
    let rate = kinetic_rate(&s5, 0, &unit_speed);

    // brute-force tube equality on n=12, m=3
    let s12 = Arc::new(DiscreteSpace::interval(12, 1.0).unwrap());
    let op12 = Arc::new(HeatOperator::new(Generator::assemble(s12.clone()).unwrap()).unwrap());
    let bm = SlowedBrownian::new(op12.clone(), 2, 0.4).unwrap();
    let partition = Partition::new(vec![0.0, 0.3, 0.7, 1.0]).unwrap();
    let ref_path = PartitionPath::new(partition.clone(), vec![2, 4, 6, 8]).unwrap();
    let r = 2.2 * s12.mesh();
    let recursion = bm.tube_log_probability(&ref_path, r).unwrap().exp();
    let mut brute = 0.0;
    for x1 in 0..12 {
        for x2 in 0..12 {
            for x3 in 0..12 {
                if s12.dist(x1, 4) <= r && s12.dist(x2, 6) <= r && s12.dist(x3, 8) <= r {
                    let path = PartitionPath::new(partition.clone(), vec![2, x1, x2, x3]).unwrap();
                    brute += bm.marginal_log_density(&path).unwrap().exp()
                        * s12.weight(x1)
                        * s12.weight(x2)
                        * s12.weight(x3);
                }
            }
        }
    }
    let brute_defect = (recursion - brute).abs();

    let pass = in_window.pass && sampling.pass && rate == 0.25 && brute_defect <= 1e-10;
    println!(
        "criterion 8 (Brownian tube LDP): {} — fit {:.5} in [{:.5}, {:.5}] (ell = {:.5}); kinetic rate = {:?} (exactly 0.25); brute-force tube defect {:.2e} (<=1e-10); sampling z-band ok: {}",
        if pass { "PASS" } else { "FAIL" },
        fitted,
        window_lo,
        window_hi,
        ell,
        rate,
        brute_defect,
        sampling.pass
    );
    assert!(
        in_window.pass,
        "tube fit {fitted:.5} outside [{window_lo:.5}, {window_hi:.5}]"
    );
    assert!(rate == 0.25, "kinetic rate {rate} != 0.25 exactly");
    assert!(
        brute_defect <= 1e-10,
        "brute-force defect {brute_defect:.3e}"
    );
    assert!(sampling.pass, "sampled tube frequency outside 3 sigma");
}

#[test]
fn criterion_09_schrodinger_gamma_convergence() {
    use heatlab::simplex::transport_simplex;
    use ndarray::Array2;

    let start = Instant::now();
    let bundle = run(
        "experiment = schrodinger_sweep\nkind = interval\nn = 64\nlength = 1.0\n\
         bump0 = 0.12, 0.05, 0.005\nbump1 = 0.78, 0.14, 0.005\n\
         eps_list = 0.5, 0.2, 0.1, 0.05\ntol = 1e-9\nseed = 9\n",
    );
    let decreasing = assertion(&bundle, "gap_strictly_decreasing");
    let final_gap = assertion(&bundle, "final_gap_rel");
    let defect = assertion(&bundle, "marginal_defect");
    let quantile = assertion(&bundle, "simplex_vs_quantile_oracle");

    // n=6 brute-force oracle: equal weights, permutation search
    let points = [0.0, 0.13, 0.29, 0.55, 0.83, 1.0];
    let mut cost = Array2::zeros((6, 6));
    for i in 0..6 {
        for j in 0..6 {
            let d: f64 = points[i] - points[j];
            cost[[i, j]] = d * d;
        }
    }
    let marginal = [1.0 / 6.0; 6];
    let (_, lp) = transport_simplex(&cost, &marginal, &marginal).unwrap();
    let mut best = f64::INFINITY;
    let mut perm = [0usize, 1, 2, 3, 4, 5];
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = (0..6).map(|i| cost[[i, p[i]]] / 6.0).sum();
        if c < best {
            best = c;
        }
    });
    let brute_defect = (lp - best).abs();

    let elapsed = start.elapsed();
    let pass = decreasing.pass
        && final_gap.pass
        && defect.pass
        && quantile.pass
        && brute_defect <= 1e-9
        && elapsed.as_secs_f64() < 60.0;
    println!(
        "criterion 9 (Schrodinger Gamma-convergence): {} — gaps decreasing: {}, final gap {:.2}% of half W2^2 (<=10%), sinkhorn defect {:.2e} (<=1e-9), simplex-vs-quantile {:.2e} (<=1e-9), simplex-vs-permutations {:.2e} (<=1e-9), runtime {:.2?} (<60 s)",
        if pass { "PASS" } else { "FAIL" },
        decreasing.pass,
        100.0 * final_gap.measured,
        defect.measured,
        quantile.measured,
        brute_defect,
        elapsed
    );
    assert!(decreasing.pass, "gap not strictly decreasing");
    assert!(
        final_gap.pass,
        "final gap {:.3}% > 10%",
        100.0 * final_gap.measured
    );
    assert!(defect.pass, "marginal defect {:.3e}", defect.measured);
    assert!(
        quantile.pass,
        "quantile oracle defect {:.3e}",
        quantile.measured
    );
    assert!(
        brute_defect <= 1e-9,
        "brute force defect {brute_defect:.3e}"
    );
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "runtime {elapsed:.2?} >= 60 s"
    );
}

fn permute(p: &mut [usize; 6], k: usize, visit: &mut impl FnMut(&[usize; 6])) {
    if k == 6 {
        visit(p);
        return;
    }
    for i in k..6 {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

#[test]
fn criterion_10_determinism() {
    let configs = [
        format!("experiment = kernel_validate\n{CIRCLE_256}ck_s = 0.1\nck_t = 0.2\nseed = 10\n"),
        format!(
            "experiment = hj_sweep\n{CIRCLE_256}phi = sin\nt = 1.0\neps_list = 0.4, 0.1, 0.025\nseed = 10\n"
        ),
        format!(
            "experiment = varadhan\n{INTERVAL_400}x = 0.2\ny = 0.8\nt_grid = 2e-2, 1e-2, 5e-3, 2.5e-3\nseed = 10\n"
        ),
        "experiment = tube_ldp\nkind = interval\nn = 201\nlength = 1.0\nx = 0.2\n\
         partition = 0, 0.25, 0.5, 0.75, 1\npath = 0.2, 0.35, 0.5, 0.65, 0.8\n\
         t_grid = 5e-2, 3e-2, 1.8e-2, 1.1e-2\nseed = 10\n"
            .to_string(),
        "experiment = schrodinger_sweep\nkind = interval\nn = 64\nlength = 1.0\n\
         bump0 = 0.12, 0.05, 0.005\nbump1 = 0.78, 0.14, 0.005\neps_list = 0.5, 0.1\ntol = 1e-9\nseed = 10\n"
            .to_string(),
    ];
    let mut checked_files = 0usize;
    for cfg in &configs {
        let parsed = ExperimentConfig::parse(cfg).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for (dir, fmt) in [(&dir_a, ReportFormat::Json), (&dir_b, ReportFormat::Json)] {
            let bundle = run_experiment(&parsed).unwrap();
            bundle.emit(dir.path(), fmt).unwrap();
        }
        let mut names: Vec<_> = std::fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "bundle file {name:?} differs between identical runs");
            checked_files += 1;
        }
    }
    println!(
        "criterion 10 (determinism): PASS — {} bundle files byte-identical across repeated seeded runs of {} experiments",
        checked_files,
        configs.len()
    );
}
