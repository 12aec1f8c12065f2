//! Simulated chains against exact finite-state values.

use std::sync::Arc;

use pmavg::estimate::{batch_means_default, ess_and_cost, mean, sample_variance, CostModel};
use pmavg::exact::{
    build_embedded_matrix, build_pm_matrix, mean_acceptance_exact, EmbeddedKind, Fundamental,
    DEFAULT_STATE_CAP,
};
use pmavg::experiments::counterexamples::PHI;
use pmavg::experiments::{generate_instance, indep_model};
use pmavg::kernels::{poisson_run, KernelParams, KernelRegistry, PseudoMarginal};
use pmavg::model::PMState;
use pmavg::rng::stream;

#[test]
fn acceptance_rates_match_exact_means() {
    let pm = KernelRegistry::global().get("pm").unwrap();
    let n = 200_000;
    for i in 0..8 {
        let inst = generate_instance(31, i).unwrap();
        for r in [inst.s, inst.m] {
            let exact = mean_acceptance_exact(&inst.model, r).unwrap();
            let mut rng = stream(31, &[1, i as u64, r as u64]);
            let traj = pm
                .simulate(
                    &inst.model,
                    &KernelParams::averaged(r),
                    n,
                    &inst.phis[..1],
                    &mut rng,
                )
                .unwrap();
            let acc: Vec<f64> = traj
                .accepted
                .iter()
                .map(|a| f64::from(u8::from(*a)))
                .collect();
            let bm = batch_means_default(&acc).unwrap();
            let se = (bm.var / n as f64).sqrt();
            let rate = traj.acceptance_rate();
            assert!(
                (rate - exact).abs() < 4.0 * se + 1e-12,
                "instance {i} r = {r}: {rate} vs {exact}"
            );
            // The recorded α averages to the same value with less noise.
            assert!((mean(&traj.alpha) - exact).abs() < 4.0 * se + 1e-12);
        }
    }
}

#[test]
fn ess_fraction_of_the_one_weight_counterexample() {
    // Var_π = 1/2 and var(φ, P₁) = 5/6, so ESS/n tends to 3/5.
    let model = Arc::new(indep_model().unwrap());
    let pm = KernelRegistry::global().get("pm").unwrap();
    let n = 1_000_000;
    let mut rng = stream(5, &[]);
    let traj = pm
        .simulate(
            &model,
            &KernelParams::averaged(1),
            n,
            &[PHI.to_vec()],
            &mut rng,
        )
        .unwrap();
    let rec = ess_and_cost(&traj, 0, "phi", Some(0.5), CostModel::default(), 1).unwrap();
    let frac = rec.ess / n as f64;
    assert!((frac - 0.6).abs() < 0.03, "ESS/n = {frac}");
    assert!(rec.ci_lo < 0.6 && 0.6 < rec.ci_hi + 0.01);
}

#[test]
fn embedded_simulations_match_their_exact_variances() {
    let inst = generate_instance(31, 3).unwrap();
    let n = 400_000;
    for (name, which) in [
        ("embedded-s", EmbeddedKind::S),
        ("embedded-m", EmbeddedKind::M),
    ] {
        let k =
            build_embedded_matrix(&inst.model, inst.s, inst.m, which, DEFAULT_STATE_CAP).unwrap();
        let pi = k.pi().unwrap();
        let exact = Fundamental::new(&k, &pi)
            .unwrap()
            .asym_var(&k.lift(&inst.phis[0]))
            .unwrap();
        let strategy = KernelRegistry::global().get(name).unwrap();
        let mut rng = stream(31, &[2, u64::from(name == "embedded-m")]);
        let traj = strategy
            .simulate(
                &inst.model,
                &KernelParams::embedded(inst.s, inst.m),
                n,
                &inst.phis[..1],
                &mut rng,
            )
            .unwrap();
        let bm = batch_means_default(&traj.phi[0]).unwrap();
        assert!(
            (bm.var - exact).abs() < 5.0 * bm.se,
            "{name}: {} vs {exact} (se {})",
            bm.var,
            bm.se
        );
        assert_eq!(traj.cost_units[0], inst.m);
    }
}

#[test]
fn poisson_clock_event_counts() {
    let model = Arc::new(indep_model().unwrap());
    let kernel = PseudoMarginal::new(model, 1).unwrap();
    let horizon = 500.0;
    let counts: Vec<f64> = (0..400)
        .map(|rep| {
            let mut rng = stream(8, &[rep]);
            let path = poisson_run(&kernel, PMState::new(0, 1.0, 1), horizon, &mut rng);
            assert!(path.times.windows(2).all(|w| w[0] < w[1]));
            path.events() as f64
        })
        .collect();
    let m = mean(&counts);
    let v = sample_variance(&counts);
    let se = (horizon / counts.len() as f64).sqrt();
    assert!((m - horizon).abs() < 4.0 * se, "mean count {m}");
    assert!((v / horizon - 1.0).abs() < 0.3, "count variance {v}");
}

#[test]
fn registry_kernels_share_exact_matrices_with_builders() {
    let inst = generate_instance(31, 0).unwrap();
    let reg = KernelRegistry::global();
    assert_eq!(reg.names(), vec!["embedded-m", "embedded-s", "mh", "pm"]);
    let direct = build_pm_matrix(&inst.model, inst.m, DEFAULT_STATE_CAP).unwrap();
    let via = reg
        .get("pm")
        .unwrap()
        .exact_matrix(
            &inst.model,
            &KernelParams::averaged(inst.m),
            DEFAULT_STATE_CAP,
        )
        .unwrap();
    assert_eq!(direct.p(), via.p());
    assert!(reg.get("delayed-acceptance").is_err());
}

#[test]
fn trajectory_dump_has_the_documented_header() {
    let model = Arc::new(indep_model().unwrap());
    let pm = KernelRegistry::global().get("pm").unwrap();
    let mut rng = stream(3, &[]);
    let traj = pm
        .simulate(
            &model,
            &KernelParams::averaged(2),
            10,
            &[PHI.to_vec(), vec![1.0, 2.0]],
            &mut rng,
        )
        .unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, 3).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iter,accepted,alpha,cost_units,phi_1,phi_2");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("3,"));
    assert!(lines
        .iter()
        .skip(1)
        .all(|l| l.split(',').nth(3) == Some("2")));
}
