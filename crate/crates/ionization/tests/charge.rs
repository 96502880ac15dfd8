use ionization::charge::{
    convolve, cq_weights, kernel_weights, picard_majorant, solve_charge, solve_charge_cq, solve_charge_with,
    solve_picard, ChargeGrid, ChargeMethod, OnlineConvolution, MAX_STEP,
};
use ionization::model::{forcing_f, spectral_constants, Coupling, PhysicalParams};
use ionization::specfun::{nu_table, volterra_mu};
use ionization::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn stationary_error(cg: &ChargeGrid) -> f64 {
    let sc = cg.sc;
    cg.q.iter()
        .enumerate()
        .map(|(j, q)| (q - sc.c_alpha * Complex64::from_polar(1.0, -sc.lambda_alpha * cg.time(j))).norm())
        .fold(0.0, f64::max)
}

#[test]
fn stationary_product_integration() {
    let params = PhysicalParams::new(0.0, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    let coarse = stationary_error(&solve_charge(&params, &sc, 5.0, 4e-3).unwrap());
    let fine = stationary_error(&solve_charge(&params, &sc, 5.0, 2e-3).unwrap());
    assert!(fine < 1e-4, "error {fine}");
    assert!(coarse / fine >= 3.0, "ratio {}", coarse / fine);
}

#[test]
fn charge_starts_at_c_alpha() {
    let params = PhysicalParams::new(0.3, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    let cg = solve_charge(&params, &sc, 1.0, 0.01).unwrap();
    assert!((cg.q[0] - sc.c_alpha).norm() < 1e-6);
    assert_eq!(cg.method, ChargeMethod::ProductIntegration);
    assert_eq!(cg.len(), 101);
    let cq = solve_charge_cq(params.into(), &sc, 1.0, 0.01).unwrap();
    assert!((cq.q[0] - sc.c_alpha).norm() < 1e-12);
}

#[test]
fn step_and_horizon_guards() {
    let params = PhysicalParams::new(0.1, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    assert!(matches!(solve_charge(&params, &sc, 1.0, 0.05), Err(Error::StepTooLarge { .. })));
    assert!(solve_charge(&params, &sc, 1.0, 0.0).is_err());
    assert!(solve_charge(&params, &sc, -1.0, 0.01).is_err());
    assert!(MAX_STEP > 0.0);
    // Roundoff grows like eps e^T; past T ~ 22 the product solver refuses.
    let nu = nu_table(0.02, 1500).unwrap();
    let err = solve_charge_with(params.into(), &sc, 30.0, &nu).unwrap_err();
    assert!(matches!(err, Error::Accuracy(_)), "{err}");
    let short = nu_table(0.01, 10).unwrap();
    assert!(matches!(solve_charge_with(params.into(), &sc, 1.0, &short), Err(Error::TableCoverage { .. })));
}

#[test]
fn horizon_snaps_to_grid() {
    let params = PhysicalParams::new(0.1, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    let cg = solve_charge(&params, &sc, 0.105, 0.01).unwrap();
    assert_eq!(cg.len(), 11);
    assert!(cg.snapped());
    assert!((cg.t_end() - 0.1).abs() < 1e-14);
    assert_eq!(cg.index_of(0.05), Some(5));
    assert_eq!(cg.index_of(0.055), None);
    let half = cg.decimate(2);
    assert_eq!(half.len(), 6);
    assert_eq!(half.q[3], cg.q[6]);
}

#[test]
fn picard_matches_marching() {
    let params = PhysicalParams::new(0.5, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    let h = 1e-3;
    let picard = solve_picard(&params, &sc, 0.25, h, 200).unwrap();
    let march = solve_charge(&params, &sc, 0.25, h).unwrap();
    let diff = picard.q.iter().zip(&march.q).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "max difference {diff}");
    assert!(matches!(picard.method, ChargeMethod::Picard { .. }));
}

#[test]
fn picard_zero_iterations_is_forcing() {
    let params = PhysicalParams::new(0.5, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    let h = 0.01;
    let cg = solve_picard(&params, &sc, 0.5, h, 0).unwrap();
    let nu = nu_table(h, 50).unwrap();
    assert_eq!(cg.q, forcing_f(h, 50, &sc, &nu).unwrap());
}

#[test]
fn picard_majorant_windows() {
    let sc = spectral_constants(0.0);
    let quiet = PhysicalParams::new(0.0, 2.0).unwrap();
    assert!(picard_majorant(&quiet, 1.0).is_ok());
    let strong = PhysicalParams::new(0.5, 2.0).unwrap();
    assert!(picard_majorant(&strong, 0.25).is_ok());
    assert!(matches!(picard_majorant(&strong, 1.0), Err(Error::ContractionViolated { .. })));
    assert!(matches!(solve_picard(&strong, &sc, 1.0, 0.01, 50), Err(Error::ContractionViolated { .. })));
    assert!(solve_picard(&strong, &sc, 3.0, 0.01, 50).is_err());
}

#[test]
fn convolution_quadrature_stationary() {
    let sc = spectral_constants(0.0);
    let coupling = Coupling::from(PhysicalParams::new(0.0, 2.0).unwrap());
    let coarse = stationary_error(&solve_charge_cq(coupling.clone(), &sc, 10.0, 2e-3).unwrap());
    let fine = stationary_error(&solve_charge_cq(coupling, &sc, 10.0, 1e-3).unwrap());
    assert!(fine < 1e-3, "error {fine}");
    assert!(coarse / fine > 3.0, "ratio {}", coarse / fine);
}

#[test]
fn convolution_quadrature_agrees_with_product() {
    let params = PhysicalParams::new(0.1, 2.0).unwrap();
    let sc = spectral_constants(0.0);
    let product = solve_charge(&params, &sc, 5.0, 1e-3).unwrap();
    let cq = solve_charge_cq(params.into(), &sc, 5.0, 1e-4).unwrap();
    let diff = (0..product.len())
        .step_by(100)
        .map(|j| (product.q[j] - cq.q[10 * j]).norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-3, "max difference {diff}");
}

#[test]
fn general_coupling_reproduces_stationary_state() {
    let sc = spectral_constants(0.0);
    let coupling = Coupling::general(|_| 0.0, 0.0).unwrap();
    let nu = nu_table(2e-3, 1000).unwrap();
    let cg = solve_charge_with(coupling, &sc, 2.0, &nu).unwrap();
    assert!(cg.params().is_none());
    assert!(stationary_error(&cg) < 1e-4);
}

#[test]
fn kernel_weights_integrate_constants() {
    let h = 0.01;
    let n = 200;
    let nu = nu_table(h, n).unwrap();
    let kw = kernel_weights(h, n, &nu).unwrap();
    assert_eq!(kw.len(), n);
    let total: f64 = kw.w0.iter().sum();
    assert!((total - nu.values[n]).abs() < 1e-12 * nu.values[n]);
    // Piecewise-linear g = 1 and g = s are integrated exactly.
    let ones = vec![1.0; n + 1];
    let ramp: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
    for k in [1, 37, n] {
        let t = k as f64 * h;
        assert!((kw.apply(k, &ones) - nu.values[k]).abs() < 1e-12 * nu.values[k]);
        let want = volterra_mu(t, 0.0, 1.0).unwrap();
        assert!((kw.apply(k, &ramp) - want).abs() < 1e-11 * want);
    }
    let combined = kw.combined();
    assert_eq!(combined.len(), n + 1);
    assert!((combined.iter().sum::<f64>() - nu.values[n]).abs() < 1e-12 * nu.values[n]);
}

#[test]
fn cq_weights_generating_function() {
    // sum_j w_j z^j = log((1 - z)(3 - z)/(2h)).
    let h = 0.01;
    let w = cq_weights(h, 200);
    let z = 0.5f64;
    let series: f64 = w.iter().enumerate().map(|(j, c)| c.re * z.powi(j as i32)).sum();
    let exact = ((1.0 - z) * (3.0 - z) / (2.0 * h)).ln();
    assert!((series - exact).abs() < 1e-12);
    assert!(cq_weights(h, 0).is_empty());
}

#[test]
fn online_convolution_matches_direct() {
    let n = 300;
    let w: Vec<Complex64> = (0..n).map(|j| Complex64::new(1.0 / (1.0 + j as f64), 0.3 * (j as f64).sin())).collect();
    let x: Vec<Complex64> = (0..n).map(|j| Complex64::new((0.1 * j as f64).cos(), 0.01 * j as f64)).collect();
    let mut hist = Vec::new();
    let out = OnlineConvolution::new(&w)
        .run(n, |m, history| {
            hist.push(history);
            Ok::<_, ()>(x[m])
        })
        .unwrap();
    assert_eq!(out, x);
    for m in [0, 1, 2, 17, 128, 299] {
        let direct: Complex64 = (1..=m).map(|j| w[j] * x[m - j]).sum();
        assert!((hist[m] - direct).norm() < 1e-11 * (1.0 + direct.norm()), "m = {m}");
    }
}

#[test]
fn long_convolution_matches_geometric_closed_form() {
    // Long enough for the blocked path; sum_j r^j s^{k-j} = (r^{k+1} - s^{k+1}) / (r - s).
    let n = 3_000_000;
    let r = Complex64::from_polar(1.0 - 1e-7, 1e-3);
    let s = Complex64::from_polar(1.0 - 3e-7, -2e-3);
    let powers = |z: Complex64| -> Vec<Complex64> { (0..n).map(|j| z.powu(j as u32)).collect() };
    let out = convolve(&powers(r), &powers(s), n);
    assert_eq!(out.len(), n);
    for k in [0, 1, 1_048_575, 2_097_151, 2_097_152, 2_999_999] {
        let kk = k as u32 + 1;
        let want = (r.powu(kk) - s.powu(kk)) / (r - s);
        assert!((out[k] - want).norm() < 1e-9 * want.norm().max(1.0), "k = {k}: {} vs {want}", out[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_convolution_is_exact(
        a in prop::collection::vec(-10.0f64..10.0, 1..64),
        b in prop::collection::vec(-10.0f64..10.0, 1..64),
    ) {
        let ac: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, -0.5 * v)).collect();
        let bc: Vec<Complex64> = b.iter().map(|&v| Complex64::new(0.25 * v, v)).collect();
        let len = a.len() + b.len() - 1;
        let fast = convolve(&ac, &bc, len);
        for k in 0..len {
            let direct: Complex64 = (0..=k)
                .filter(|&i| i < ac.len() && k - i < bc.len())
                .map(|i| ac[i] * bc[k - i])
                .sum();
            prop_assert!((fast[k] - direct).norm() < 1e-9);
        }
    }

    #[test]
    fn charge_bounded_on_short_windows(alpha0 in -0.3f64..0.3, omega in 0.5f64..5.0) {
        let params = PhysicalParams::new(alpha0, omega).unwrap();
        let sc = spectral_constants(0.0);
        let cg = solve_charge(&params, &sc, 1.0, 0.01).unwrap();
        prop_assert!(cg.q.iter().all(|q| q.norm().is_finite() && q.norm() < 100.0));
        prop_assert!((cg.q[0] - sc.c_alpha).norm() < 1e-6);
    }
}
