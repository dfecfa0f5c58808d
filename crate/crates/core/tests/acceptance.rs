//! Acceptance checks. Run with
//! `cargo test -p rephase --release --test acceptance -- --nocapture --test-threads=1`
//! to see one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

use rephase::fit::{
    atom_number_model, fit_atom_number, fit_exponential_decay, fit_fringe, fringe_model,
    RevivalDetector,
};
use rephase::ramsey::{fringe_scan, RamseyConfig};
use rephase::rates::{exchange_rate, lateral_collision_rate};
use rephase::two_class::{integrate, TwoClassState};
use rephase::units::{hz, to_hz, BOHR_RADIUS, RB87_MASS};
use rephase::{
    analytic_contrast, AtomicParams, ContrastCurve, DensityScaling, EnergyGrid, Error, GridScheme,
    KernelSpec, KineticModel, RateSet, SpinField, SpinVector,
};

const DENSITIES: [f64; 5] = [0.2, 0.8, 1.1, 1.9, 2.6];

fn line(id: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    println!(
        "criterion {id}: {} ({})",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn clock_rates(nbar: f64) -> RateSet {
    DensityScaling::trapped_clock().rates(nbar).unwrap()
}

fn coherent_curve(rates: &RateSet, t_final: f64, dt: f64) -> ContrastCurve {
    let grid = EnergyGrid::default();
    let model = KineticModel::new(&grid, rates, &KernelSpec::InfiniteRange).unwrap();
    model
        .evolve(&SpinField::coherent(grid.len()), t_final, dt, 1)
        .unwrap()
        .curve
}

/// Deterministic spread of unit spins, one per node.
fn tilted_field(n: usize) -> SpinField {
    SpinField {
        spins: (0..n)
            .map(|k| {
                let theta = 0.3 + 2.5 * ((k as f64 * 0.618_034).fract());
                let phi = 2.0 * PI * ((k as f64 * 0.414_214).fract());
                SpinVector::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                )
            })
            .collect(),
        time: 0.0,
    }
}

#[test]
fn criterion_1_closed_form() {
    let rates = RateSet::new(hz(2.0), 0.0, 0.0).unwrap();
    let (curve, elapsed) = timed(|| coherent_curve(&rates, 0.5, 1e-3));
    let err = curve
        .times()
        .iter()
        .zip(curve.contrast_total())
        .map(|(&t, &c)| (c - analytic_contrast(hz(2.0), t)).abs())
        .fold(0.0, f64::max);
    let ok = line(
        "1",
        err < 1e-4 && elapsed < Duration::from_secs(1),
        format!("max error {err:.3e}, {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_conservation() {
    let start = Instant::now();
    let grid = EnergyGrid::default();

    // (a) per-node norm, γc = 0, default step
    let mut rates = clock_rates(2.6);
    rates.gamma_c = 0.0;
    let model = KineticModel::new(&grid, &rates, &KernelSpec::InfiniteRange).unwrap();
    let dt = model.suggested_step().unwrap();
    let init = tilted_field(grid.len());
    let end = model
        .evolve(&init, 2.0, dt, usize::MAX)
        .unwrap()
        .final_state;
    let drift_a = end
        .spins
        .iter()
        .zip(&init.spins)
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    let a = line(
        "2a",
        drift_a < 1e-7,
        format!("norm drift {drift_a:.3e} at dt {dt:.2e}"),
    );

    // (b) |S̄| with Δ₀ = γc = 0
    let rates = RateSet::new(0.0, hz(11.7), 0.0).unwrap();
    let model = KineticModel::new(&grid, &rates, &KernelSpec::InfiniteRange).unwrap();
    let traj = model.evolve(&init, 2.0, 1e-3, 1).unwrap();
    let m0 = traj.curve.contrast_total()[0];
    let drift_b = traj
        .curve
        .contrast_total()
        .iter()
        .map(|m| (m - m0).abs())
        .fold(0.0, f64::max);
    let b = line("2b", drift_b < 1e-9, format!("|S̄| drift {drift_b:.3e}"));

    // (c) S̄∥ for random rate sets
    let config = Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(
        config.clone(),
        TestRng::deterministic_rng(config.rng_algorithm),
    );
    let strategy = (
        0.0f64..hz(5.0),
        -hz(20.0)..hz(20.0),
        0.0f64..10.0,
        0.3f64..=1.0,
        -40.0f64..40.0,
    );
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&strategy, |(d0, w, g, renorm, det)| {
        let rates = RateSet::new(d0, w, g)
            .unwrap()
            .with_renorm(renorm)
            .with_detuning(det);
        let model = KineticModel::new(&grid, &rates, &KernelSpec::InfiniteRange).unwrap();
        let dt = 1e-3f64.min(0.5 * model.stability_limit());
        let c = model.evolve(&init, 1.0, dt, 1).unwrap().curve;
        let p0 = c.sbar()[0].par;
        let drift = c
            .sbar()
            .iter()
            .map(|s| (s.par - p0).abs())
            .fold(0.0, f64::max);
        worst.set(worst.get().max(drift));
        prop_assert!(drift < 1e-8);
        Ok(())
    });
    let c = line(
        "2c",
        result.is_ok(),
        format!("worst S̄∥ drift {:.3e} over 64 rate sets", worst.get()),
    );

    let elapsed = start.elapsed();
    let ok = line(
        "2",
        a && b && c && elapsed < Duration::from_secs(10),
        format!("{elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_rate_formulas() {
    let p = AtomicParams::new(RB87_MASS, 98.1 * BOHR_RADIUS, 1e18, 175e-9).unwrap();
    let w = to_hz(exchange_rate(&p));
    let g = lateral_collision_rate(&p);
    let ok = line(
        "3",
        (7.2..=8.0).contains(&w) && (2.0..=2.2).contains(&g),
        format!("ω_ex/2π = {w:.3} Hz, γc = {g:.3} 1/s"),
    );
    assert!(ok);
}

#[test]
fn criterion_4_density_phenomenology() {
    let start = Instant::now();
    let detector = RevivalDetector::default();
    let curves: Vec<ContrastCurve> = DENSITIES
        .iter()
        .map(|&n| coherent_curve(&clock_rates(n), 0.5, 1e-3))
        .collect();

    // (a) lowest density
    let low = &curves[0];
    let at_250 = low.contrast_near(0.25).unwrap();
    let first_below = low
        .times()
        .iter()
        .zip(low.contrast())
        .find(|(_, &c)| c < 0.05)
        .map(|(&t, _)| t);
    let after_max = match first_below {
        Some(t0) => low
            .times()
            .iter()
            .zip(low.contrast())
            .filter(|(&t, _)| t >= t0)
            .map(|(_, &c)| c)
            .fold(0.0, f64::max),
        None => f64::INFINITY,
    };
    let revival = detector.detect(low);
    let revival_ok = match &revival {
        Err(Error::NoRevival) => true,
        Ok(r) => r.contrast <= 0.1,
        Err(_) => false,
    };
    let a = line(
        "4a",
        at_250 < 0.05 && first_below.is_some_and(|t| t <= 0.25) && after_max <= 0.1 && revival_ok,
        format!(
            "C(0.25 s) = {at_250:.4}, below 0.05 from {:?} s, later max {after_max:.4}, revival {:?}",
            first_below,
            revival.map(|r| r.time)
        ),
    );

    // (b) revival times
    let mut b = true;
    for (&n, curve) in DENSITIES.iter().zip(&curves).skip(2) {
        let rates = clock_rates(n);
        let exchange = 2.0 * PI / rates.effective_exchange();
        let empirical = -0.02 + 0.3 / n;
        let within = |t: f64, r: f64| t / r <= 2.0 && r / t <= 2.0;
        let (pass, detail) = match detector.detect(curve) {
            Ok(r) => (
                within(r.time, exchange) && within(r.time, empirical),
                format!(
                    "n̄ = {n}: revival {:.4} s, 2π/ω_ex = {exchange:.4} s, fit formula {empirical:.4} s",
                    r.time
                ),
            ),
            Err(e) => (false, format!("n̄ = {n}: {e}")),
        };
        b &= line("4b", pass, detail);
    }

    // (c) contrast at 0.2 s
    let at_200: Vec<f64> = curves
        .iter()
        .map(|c| c.contrast_near(0.2).unwrap())
        .collect();
    let c = line(
        "4c",
        at_200.windows(2).all(|w| w[1] >= w[0]),
        format!("C(0.2 s) = {at_200:.4?}"),
    );

    let elapsed = start.elapsed();
    let ok = line(
        "4",
        a && b && c && elapsed < Duration::from_secs(60),
        format!("{elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_counterfactuals() {
    let start = Instant::now();

    // (a) exchange off: strictly decreasing contrast, no revival
    let mut rates = clock_rates(2.6);
    rates.omega_ex = 0.0;
    let curve = coherent_curve(&rates, 0.5, 1e-3);
    let c = curve.contrast();
    let rise = c.windows(2).position(|w| w[1] >= w[0]);
    let no_revival = matches!(
        RevivalDetector::default().detect(&curve),
        Err(Error::NoRevival)
    );
    let a = line(
        "5a",
        rise.is_none() && no_revival,
        match rise {
            None => format!("strictly decreasing, no revival: {no_revival}"),
            Some(i) => {
                let (imin, cmin) =
                    c.iter().enumerate().fold(
                        (0, f64::INFINITY),
                        |m, (i, &x)| if x < m.1 { (i, x) } else { m },
                    );
                let peak = c[imin..].iter().cloned().fold(0.0, f64::max);
                format!(
                    "first rise at t = {:.3} s (C = {:.3e}); minimum {cmin:.3e} at {:.3} s, \
                     later peak {peak:.3e}; revival detected: {}",
                    curve.times()[i],
                    c[i],
                    curve.times()[imin],
                    !no_revival
                )
            }
        },
    );

    // (b) collisions off: contrast keeps oscillating about a constant
    let mut rates = clock_rates(2.6);
    rates.gamma_c = 0.0;
    let curve = coherent_curve(&rates, 2.0, 1e-3);
    let late = curve.mean_contrast(1.0, 2.0).unwrap();
    let mid = curve.mean_contrast(0.5, 1.0).unwrap();
    let b = line(
        "5b",
        ((late - mid) / mid).abs() <= 0.1,
        format!("mean C on [1, 2] s = {late:.4}, on [0.5, 1] s = {mid:.4}"),
    );

    let elapsed = start.elapsed();
    let ok = line(
        "5",
        a && b && elapsed < Duration::from_secs(30),
        format!("{elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_two_class_embedding() {
    let mut worst = 0.0f64;
    for &(delta, omega, gamma) in &[
        (hz(3.0), hz(5.0), 0.0),
        (hz(2.0), hz(11.7), 5.46),
        (hz(8.0), hz(1.0), 1.0),
    ] {
        let (tc, _) = integrate(&TwoClassState::coherent(delta, omega, gamma), 1.0, 1e-4).unwrap();
        let grid =
            EnergyGrid::from_parts(vec![0.0, 1.0], vec![0.5, 0.5], GridScheme::UniformTruncated)
                .unwrap();
        let rates = RateSet::new(0.0, omega, gamma).unwrap();
        let model = KineticModel::with_node_offsets(
            &grid,
            &[-0.5 * delta, 0.5 * delta],
            &rates,
            &KernelSpec::InfiniteRange,
        )
        .unwrap();
        let full = model
            .evolve(&SpinField::coherent(2), 1.0, 1e-4, 1)
            .unwrap()
            .curve;
        assert_eq!(full.len(), tc.len());
        let diff = full
            .contrast()
            .iter()
            .zip(tc.contrast())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    let ok = line(
        "6",
        worst < 1e-9,
        format!("max contrast difference {worst:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7_fit_round_trips() {
    let t: Vec<f64> = (0..=5).map(f64::from).collect();
    let y: Vec<f64> = t.iter().map(|t| (-t / 58.0).exp()).collect();
    let decay = fit_exponential_decay(&t, &y).unwrap();
    let decay_err = (decay.tau / 58.0 - 1.0).abs();

    let t: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&t| atom_number_model(24.8e3, 8.7, t))
        .collect();
    let atoms = fit_atom_number(&t, &y).unwrap();
    let n_err = (atoms.n_total / 24.8e3 - 1.0).abs();
    let tau_err = (atoms.tau / 8.7 - 1.0).abs();

    let tr = 0.1;
    let d = RamseyConfig::new(tr).detunings();
    let p: Vec<f64> = d.iter().map(|&x| fringe_model(0.8, 0.0, tr, x)).collect();
    let fringe = fit_fringe(&d, &p, tr).unwrap();
    let c_err = (fringe.contrast - 0.8).abs();
    let phi_err = fringe.phase.abs();

    let ok = line(
        "7",
        decay_err < 1e-6 && n_err < 1e-6 && tau_err < 1e-6 && c_err < 1e-12 && phi_err < 1e-12,
        format!(
            "τ err {decay_err:.1e}; N_T err {n_err:.1e}, τ err {tau_err:.1e}; C err {c_err:.1e}, φ err {phi_err:.1e}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_fringe_equals_coherence() {
    let grid = EnergyGrid::default();
    let trs = [0.015, 0.05, 0.1, 0.2, 0.35, 0.5];
    let mut worst = 0.0f64;
    for n in [1.1, 1.9, 2.6] {
        let rates = clock_rates(n);
        let direct = coherent_curve(&rates, 0.5, 1e-3);
        for &tr in &trs {
            let scan = fringe_scan(
                &grid,
                &rates,
                &KernelSpec::InfiniteRange,
                &RamseyConfig::new(tr),
            )
            .unwrap();
            let d = direct.contrast_near(tr).unwrap();
            worst = worst.max((scan.fitted_contrast - d).abs());
        }
    }
    let ok = line(
        "8",
        worst < 1e-3,
        format!("max |fringe − |S̄⊥|| = {worst:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_9_determinism() {
    let grid = EnergyGrid::default();
    let rates = clock_rates(2.6);
    let a = coherent_curve(&rates, 0.5, 1e-3).to_csv_string();
    let b = coherent_curve(&rates, 0.5, 1e-3).to_csv_string();
    let cfg = RamseyConfig::new(0.1);
    let s1 = fringe_scan(&grid, &rates, &KernelSpec::InfiniteRange, &cfg).unwrap();
    let s2 = fringe_scan(&grid, &rates, &KernelSpec::InfiniteRange, &cfg).unwrap();
    let same_scan = serde_json::to_string(&s1).unwrap() == serde_json::to_string(&s2).unwrap();
    let ok = line(
        "9",
        a == b && same_scan,
        format!(
            "curve CSV identical: {}, fringe scan identical: {same_scan}",
            a == b
        ),
    );
    assert!(ok);
}
