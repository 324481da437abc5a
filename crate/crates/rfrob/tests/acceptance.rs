//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured value and its pinned tolerance. Run with
//! `cargo test --test acceptance -- --nocapture` to see the table.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfrob::catalog;
use rfrob::chart;
use rfrob::config::ExperimentConfig;
use rfrob::flow::{self, pt, AnalyticVF, Pt};
use rfrob::grid::{random_band_limited, GridSpec};
use rfrob::involutivity::{self, lie_bracket};
use rfrob::modulus::{self, Modulus};
use rfrob::runner::{run_in_memory, Check};
use rfrob::VecField;

fn report(criterion: &str, checks: &[Check], elapsed_s: f64, limit_s: Option<f64>) {
    let pass = checks.iter().all(|c| c.pass) && limit_s.map_or(true, |l| elapsed_s < l);
    let worst = checks
        .iter()
        .min_by(|a, b| {
            let ma = margin(a);
            let mb = margin(b);
            ma.partial_cmp(&mb).unwrap()
        })
        .unwrap();
    println!(
        "criterion {criterion}: {} ({} = {:.3e} vs {:.3e}; {:.1}s{})",
        if pass { "PASS" } else { "FAIL" },
        worst.name,
        worst.value,
        worst.threshold,
        elapsed_s,
        limit_s.map_or(String::new(), |l| format!(" < {l}s")),
    );
    for c in checks {
        assert!(c.pass, "{}: {} = {:.6e} vs {:.6e}", criterion, c.name, c.value, c.threshold);
    }
    if let Some(l) = limit_s {
        assert!(elapsed_s < l, "{criterion}: runtime {elapsed_s:.1}s exceeds {l}s");
    }
}

fn margin(c: &Check) -> f64 {
    match c.cmp {
        rfrob::runner::Cmp::Le => c.threshold - c.value,
        rfrob::runner::Cmp::Ge => c.value - c.threshold,
    }
}

fn run(experiment: &str, tweaks: &[(&str, &str)]) -> Vec<Check> {
    let mut cfg = ExperimentConfig::default_for(experiment).unwrap();
    let ov: Vec<String> = tweaks.iter().map(|(k, v)| format!("{k}={v}")).collect();
    cfg.apply_overrides(&ov).unwrap();
    run_in_memory(&cfg).unwrap().1
}

#[test]
fn criterion_01_block_partition_and_reconstruction() {
    let t = Instant::now();
    let checks = run("lp-check", &[("grid_n", "4096"), ("trials", "20")]);
    report("01 block-partition", &checks, t.elapsed().as_secs_f64(), Some(10.0));
}

#[test]
fn criterion_02_product_decomposition_identity() {
    let t = Instant::now();
    let checks = run("para-identity", &[("grid_n", "4096"), ("trials", "20")]);
    report("02 product-decomposition", &checks, t.elapsed().as_secs_f64(), Some(30.0));
}

#[test]
fn criterion_03_vanished_product_decay() {
    let t = Instant::now();
    let checks = run(
        "vanished-decay",
        &[("grid_n", "16384"), ("alpha", "0.75"), ("nu_lo", "4"), ("nu_hi", "9")],
    );
    report("03 vanished-product-decay", &checks, t.elapsed().as_secs_f64(), Some(60.0));
}

#[test]
fn criterion_04_flow_closed_form() {
    let t = Instant::now();
    let field = AnalyticVF::neg_x_log_x();
    let mut worst: f64 = 0.0;
    for &time in &[0.2, 0.7] {
        for k in 0..7 {
            let x0 = 10f64.powf(-4.0 + 3.0 * k as f64 / 6.0);
            let cert = flow::integrate_flow(&field, time, &[pt(&[x0])], None).unwrap();
            let want = x0.powf((-time).exp());
            worst = worst.max((cert.endpoints[0][0] - want).abs() / want);
        }
    }
    let checks = vec![rfrob::runner::check_le("closed-form-rel-error", worst, 1e-5)];
    report("04 flow-closed-form", &checks, t.elapsed().as_secs_f64(), Some(10.0));
}

#[test]
fn criterion_05_flow_modulus_solver() {
    let t = Instant::now();
    let log = Modulus::log_lipschitz();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let tt = 0.05 + 0.95 * i as f64 / 9.0;
        for j in 0..10 {
            let r = 10f64.powf(-8.0 + 6.0 * j as f64 / 9.0);
            let got = modulus::flow_modulus(&log, tt, r).unwrap();
            let want = r.powf((-tt).exp());
            worst = worst.max((got - want).abs() / want);
        }
    }
    let scaling = modulus::flow_modulus_scaling_check(&log, 2.0, 0.3, 0.01)
        .unwrap()
        .max(modulus::flow_modulus_scaling_check(&Modulus::lipschitz(1.0), 3.0, 0.2, 0.5).unwrap());
    let semigroup = modulus::flow_modulus_semigroup_check(&log, 0.2, 0.2, 0.01)
        .unwrap()
        .max(modulus::flow_modulus_semigroup_check(&Modulus::lipschitz(2.0), 0.1, 0.3, 1.0).unwrap());
    let checks = vec![
        rfrob::runner::check_le("closed-form-grid", worst, 1e-6),
        rfrob::runner::check_le("scaling-residual", scaling, 1e-6),
        rfrob::runner::check_le("semigroup-residual", semigroup, 1e-6),
    ];
    report("05 flow-modulus-solver", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_06_flow_regularity_certificates() {
    let t = Instant::now();
    // 1000 pairs across the catalog (250 per field) plus the endpoint-map
    // exponent of the contraction at t = 0.7.
    let checks = run("flow-cert", &[("pairs", "250")]);
    report("06 flow-certificates", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_07_smoothing_growth_and_decay() {
    let t = Instant::now();
    let all = run("commute-defect", &[("nu_lo", "5"), ("nu_hi", "9"), ("gamma", "0.5"), ("t0", "0.05")]);
    let wanted = ["c1-linear-growth-r2", "bracket-decay-slope", "weighted-quantity-decreasing", "c0-uniformly-bounded"];
    let checks: Vec<Check> =
        all.into_iter().filter(|c| wanted.contains(&c.name.as_str())).collect();
    assert_eq!(checks.len(), 4);
    report("07 smoothing-growth-decay", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_08_commutator_defect() {
    let t = Instant::now();
    let all = run("commute-defect", &[("nu", "6"), ("t", "0.1"), ("s", "0.1")]);
    let wanted = ["smoothed-defect-ratio", "exact-shear-defect"];
    let checks: Vec<Check> =
        all.into_iter().filter(|c| wanted.contains(&c.name.as_str())).collect();
    assert_eq!(checks.len(), 2);
    report("08 commutator-defect", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_09_chart_contracts() {
    let t = Instant::now();
    let checks = run("build-chart", &[("extent", "0.7")]);
    report("09 chart-contracts", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_10_sharpness_table() {
    let t = Instant::now();
    let checks = run("sharpness", &[("extents", "[0.1,0.4,0.7]")]);
    report("10 sharpness", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_11_characteristics_solver() {
    let t = Instant::now();
    let checks = run(
        "pde-solve",
        &[("extent", "0.7"), ("boundary", "\"x\""), ("beta", "1.0")],
    );
    report("11 characteristics", &checks, t.elapsed().as_secs_f64(), None);
}

#[test]
fn criterion_12_property_suites() {
    let t = Instant::now();
    let mut checks = Vec::new();

    // Modulus monotonicity and comparison on a sampled grid.
    let log = Modulus::log_lipschitz();
    let small = Modulus::lipschitz(1.0);
    let big = Modulus::identity_plus(Modulus::log_lipschitz());
    let mut mono_viol: f64 = 0.0;
    let mut comp_viol: f64 = 0.0;
    let ts = [0.05, 0.1, 0.2, 0.4, 0.8];
    let rs = [1e-8, 1e-6, 1e-4, 1e-2];
    for (i, &tt) in ts.iter().enumerate() {
        for (j, &r) in rs.iter().enumerate() {
            let v = modulus::flow_modulus(&log, tt, r).unwrap();
            if i + 1 < ts.len() {
                let v2 = modulus::flow_modulus(&log, ts[i + 1], r).unwrap();
                mono_viol = mono_viol.max(v - v2);
            }
            if j + 1 < rs.len() {
                let v2 = modulus::flow_modulus(&log, tt, rs[j + 1]).unwrap();
                mono_viol = mono_viol.max(v - v2);
            }
            let a = modulus::flow_modulus(&small, tt, r).unwrap();
            let b = modulus::flow_modulus(&big, tt, r).unwrap();
            comp_viol = comp_viol.max(a - b);
        }
    }
    checks.push(rfrob::runner::check_le("flow-modulus-monotone", mono_viol, 0.0));
    checks.push(rfrob::runner::check_le("flow-modulus-comparison", comp_viol, 1e-8));

    // Bracket antisymmetry and Jacobi identity on random resolved fields.
    let grid = GridSpec::new(2, 128, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mk = |rng: &mut ChaCha8Rng| {
        VecField::new(vec![
            random_band_limited(grid, 8, rng),
            random_band_limited(grid, 8, rng),
        ])
        .unwrap()
    };
    let x = mk(&mut rng);
    let y = mk(&mut rng);
    let z = mk(&mut rng);
    let anti = lie_bracket(&x, &y)
        .unwrap()
        .axpy(1.0, &lie_bracket(&y, &x).unwrap())
        .unwrap()
        .sup_norm();
    checks.push(rfrob::runner::check_le("bracket-antisymmetry", anti, 1e-10));
    let jacobi = lie_bracket(&x, &lie_bracket(&y, &z).unwrap())
        .unwrap()
        .axpy(1.0, &lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap())
        .unwrap()
        .axpy(1.0, &lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap())
        .unwrap()
        .sup_norm();
    checks.push(rfrob::runner::check_le("bracket-jacobi", jacobi, 1e-8));

    // Determinism of the experiment outputs: identical config and seed give
    // byte-identical CSV data.
    let mut cfg = ExperimentConfig::default_for("vanished-decay").unwrap();
    cfg.apply_overrides(&["grid_n=4096".into(), "nu_lo=3".into(), "nu_hi=7".into()]).unwrap();
    let (csv1, _) = run_in_memory(&cfg).unwrap();
    let (csv2, _) = run_in_memory(&cfg).unwrap();
    checks.push(rfrob::runner::check_le(
        "csv-determinism",
        if csv1 == csv2 { 0.0 } else { 1.0 },
        0.0,
    ));
    let mut cfg2 = ExperimentConfig::default_for("lp-check").unwrap();
    cfg2.apply_overrides(&["grid_n=1024".into(), "trials=3".into()]).unwrap();
    let (csv3, _) = run_in_memory(&cfg2).unwrap();
    let (csv4, _) = run_in_memory(&cfg2).unwrap();
    checks.push(rfrob::runner::check_le(
        "csv-determinism-2",
        if csv3 == csv4 { 0.0 } else { 1.0 },
        0.0,
    ));

    report("12 property-suites", &checks, t.elapsed().as_secs_f64(), None);
}

/// The CLI binary end to end: runs, prints pass lines, writes artifacts,
/// exits 0.
#[test]
fn cli_binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_rfrob"))
        .args([
            "lp-check",
            "--set",
            "grid_n=1024",
            "--set",
            "trials=3",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "stdout: {stdout}");
    let runs: Vec<_> = std::fs::read_dir(dir.path().join("lp-check")).unwrap().collect();
    assert_eq!(runs.len(), 1);

    // Unknown experiment id exits with code 2.
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_rfrob"))
        .args(["not-an-experiment"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

/// Chart exponents never exceed the flow-certificate bound exponents beyond
/// fit tolerance: the measured inverse exponent at extent 0.7 stays
/// consistent with the separation data of the underlying flow.
#[test]
fn cross_module_exponent_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let field = AnalyticVF::neg_x_log_x();
    let pairs: Vec<(Pt, Pt)> = (4..=12).map(|k| (pt(&[0.0]), pt(&[2f64.powi(-k)]))).collect();
    let cert = flow::certify_flow_regularity(&field, 0.7, &pairs, Some(1e-4), &mut rng).unwrap();
    // Fit measured distances: the flow's endpoint exponent.
    let xs: Vec<f64> = cert.modulus_rows.iter().map(|r| r.separation.ln()).collect();
    let ys: Vec<f64> = cert.modulus_rows.iter().map(|r| r.measured.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
    let flow_exponent = sxy / sxx;
    let rows = chart::sharpness_experiment(&[0.7], 5e-5).unwrap();
    assert!(
        rows[0].inverse_exponent <= flow_exponent + 0.05,
        "chart {} vs flow {}",
        rows[0].inverse_exponent,
        flow_exponent
    );
}

/// Leaf extraction along the canonical pair: the leaf tangents stay in the
/// span of the basis.
#[test]
fn leaf_span_defect_for_canonical_pair() {
    let (x1, x2) = catalog::canon3_pair();
    let spec = chart::ChartSpec::uniform(2, 1, 0.2, 0.08, 9, 9, 1e-4);
    let built = chart::build_chart(&[x1, x2], &[0.0, 0.0, 0.5], spec).unwrap();
    let leaf = involutivity_leaf_defect(&built);
    assert!(leaf <= 1e-6, "leaf tangent defect {leaf}");
}

fn involutivity_leaf_defect(built: &chart::Chart) -> f64 {
    let leaf = chart::extract_leaf(built, &[0.04]).unwrap();
    leaf.tangent_defect
}

/// Certificates hold on random interior pairs for every catalog field with
/// a claimed modulus (spot check mirroring the certificate tables).
#[test]
fn catalog_claims_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for field in [
        AnalyticVF::neg_x_log_x(),
        AnalyticVF::sharp2d(),
        catalog::parse_field("shear:a").unwrap(),
        catalog::parse_field("shear:b").unwrap(),
        catalog::canon3_pair().0,
        catalog::canon3_pair().1,
    ] {
        field.check_claimed(1_000, &mut rng).unwrap();
    }
}

/// Span defect of the smoothed canonical brackets against the basis stays
/// at discretization level.
#[test]
fn span_defect_of_smoothed_canonical_bracket() {
    let grid = GridSpec::new(3, 32, 1.0).unwrap();
    let c = |y: f64| 0.2 * (std::f64::consts::TAU * y).sin();
    let x1 = VecField::from_fn(grid, 3, |p, out| {
        out[0] = 1.0;
        out[1] = 0.0;
        out[2] = c(p[2]);
    });
    let x2 = VecField::from_fn(grid, 3, |p, out| {
        out[0] = 0.0;
        out[1] = 1.0;
        out[2] = 2.0 * c(p[2]);
    });
    let br = lie_bracket(&x1, &x2).unwrap();
    let defect = involutivity::span_defect(&br, &[x1, x2]).unwrap();
    // The bracket itself vanishes identically here, so the residual does too.
    assert!(defect.residual.sup_norm() <= 1e-6 * (1.0 + br.sup_norm()));
    assert!(defect.min_singular_value > 0.5);
}

/// Seeds produce different data but identical verdicts (reproducibility
/// without accidental constant outputs).
#[test]
fn seeded_reruns_vary_data_only() {
    let mut a = ExperimentConfig::default_for("flow-cert").unwrap();
    a.apply_overrides(&["pairs=20".into()]).unwrap();
    let mut b = a.clone();
    b.seed = 3;
    let (csv_a, checks_a) = run_in_memory(&a).unwrap();
    let (csv_b, checks_b) = run_in_memory(&b).unwrap();
    assert_ne!(csv_a, csv_b);
    assert!(checks_a.iter().all(|c| c.pass));
    assert!(checks_b.iter().all(|c| c.pass));
}

/// Random-query round trips through the planar chart at mixed extents.
#[test]
fn chart_roundtrip_random_queries() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = chart::ChartSpec::uniform(1, 1, 0.5, 0.3, 17, 17, 5e-5);
    let built = chart::build_chart(&[AnalyticVF::sharp2d()], &[0.0, 0.0], spec).unwrap();
    let mut queries = Vec::new();
    for _ in 0..100 {
        let x: f64 = rng.gen_range(0.0..0.5);
        let ymax = 0.25f64.powf(x.exp());
        queries.push(pt(&[x, rng.gen_range(-ymax..ymax)]));
    }
    let inv = chart::invert_chart(&built, &queries).unwrap();
    let worst = inv.iter().map(|r| r.roundtrip_error).fold(0.0, f64::max);
    assert!(worst <= 10.0 * built.richardson.max(1e-11), "roundtrip {worst}");
}

/// Box escape surfaces as the named error, mirrored through the chart path.
#[test]
fn chart_escape_reports_query_outside_image() {
    let spec = chart::ChartSpec::uniform(1, 1, 0.3, 0.3, 9, 9, 1e-4);
    let built = chart::build_chart(&[AnalyticVF::sharp2d()], &[0.0, 0.0], spec).unwrap();
    // A query far outside the field's working box cannot be reversed.
    let err = chart::invert_chart(&built, &[pt(&[3.9, 0.98])]);
    assert!(err.is_err());
}
