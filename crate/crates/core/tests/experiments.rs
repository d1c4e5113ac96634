//! Trend checks on the synthetic experiments at reduced trial counts.

use treeloss::harness::{
    check_bounds, run_experiment, run_norms, Experiment, ExperimentSpec, LossKind, Sweep, SweepParam,
};
use treeloss::optimizer::{initialize_params, sgd_train, InitScheme, SgdConfig};
use treeloss::synthetic::{sample_dataset, sample_test_dataset, sample_true_params, SynthConfig};
use treeloss::tree_loss::frobenius_norm;

fn spec(experiment: Experiment, sweep: Sweep, trials: usize, test_size: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(experiment);
    s.sweep = sweep;
    s.trials = trials;
    s.test_size = test_size;
    s
}

fn mean_acc(out: &treeloss::harness::ExperimentOutput, v: f64, loss: LossKind) -> f64 {
    out.row(v, loss).unwrap().accuracy.mean
}

#[test]
fn accuracy_grows_with_n() {
    let ns = [10.0, 100.0, 1000.0];
    let out = run_experiment(&spec(Experiment::I, Sweep::new(SweepParam::N, ns.to_vec()), 10, 2000)).unwrap();
    for loss in [LossKind::Tree, LossKind::Xent] {
        let acc: Vec<f64> = ns.iter().map(|&n| mean_acc(&out, n, loss)).collect();
        assert!(acc.windows(2).all(|w| w[1] >= w[0]), "{loss}: {acc:?}");
    }
}

#[test]
fn noise_hurts_and_dimension_helps() {
    let sig = run_experiment(&spec(Experiment::I, Sweep::new(SweepParam::Sigma, vec![1.0, 3.0, 6.0]), 10, 2000)).unwrap();
    let dim = run_experiment(&spec(Experiment::I, Sweep::new(SweepParam::D, vec![2.0, 8.0, 32.0]), 10, 2000)).unwrap();
    for loss in [LossKind::Tree, LossKind::Xent] {
        let a: Vec<f64> = [1.0, 3.0, 6.0].iter().map(|&v| mean_acc(&sig, v, loss)).collect();
        assert!(a.windows(2).all(|w| w[1] <= w[0]), "{loss} sigma: {a:?}");
        let b: Vec<f64> = [2.0, 8.0, 32.0].iter().map(|&v| mean_acc(&dim, v, loss)).collect();
        assert!(b.windows(2).all(|w| w[1] >= w[0]), "{loss} d: {b:?}");
    }
}

#[test]
fn base_sweep_keeps_flat_baseline_and_shrinks_height() {
    let bases = vec![1.1, 1.3, 2.0, 4.0];
    let mut s = spec(Experiment::III, Sweep::new(SweepParam::Base, bases.clone()), 3, 500);
    s.settings.n = 200;
    let out = run_experiment(&s).unwrap();
    let flat: Vec<f64> = bases.iter().map(|&b| mean_acc(&out, b, LossKind::Xent)).collect();
    assert!(flat.iter().all(|&a| a == flat[0]), "{flat:?}");
    for seed in 0..3u64 {
        let heights: Vec<usize> = bases
            .iter()
            .map(|&b| {
                out.trials
                    .iter()
                    .find(|r| r.value == b && r.seed == seed && r.loss == LossKind::Tree)
                    .unwrap()
                    .tree_height
            })
            .collect();
        assert!(heights.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {heights:?}");
    }
}

#[test]
fn single_class_norms_match() {
    let out = run_experiment(&spec(Experiment::II, Sweep::new(SweepParam::K, vec![1.0]), 3, 100)).unwrap();
    let t = out.row(1.0, LossKind::Tree).unwrap();
    let x = out.row(1.0, LossKind::Xent).unwrap();
    assert_eq!(t.param_norm, x.param_norm);
    assert_eq!(t.accuracy.mean, 1.0);
}

#[test]
fn metric_corruption_does_not_help() {
    let eps = [0.0, 0.5, 1.0];
    let mut s = spec(Experiment::IV, Sweep::new(SweepParam::Epsilon, eps.to_vec()), 10, 2000);
    s.settings.d = 4;
    let out = run_experiment(&s).unwrap();
    let tree: Vec<f64> = eps.iter().map(|&e| mean_acc(&out, e, LossKind::Tree)).collect();
    // Seed noise allowance of one standard error at the clean end.
    let se = out.row(0.0, LossKind::Tree).unwrap().accuracy.stderr;
    assert!(tree.iter().all(|&a| a <= tree[0] + se), "{tree:?}");
}

#[test]
fn optimal_norm_ordering() {
    // Minimum-norm V never exceeds the leaf-only solution, which has norm ‖W*‖.
    for rec in run_norms(&[10, 60], 10, 5, 0, 2.0).unwrap() {
        assert!(rec.v_norm <= rec.w_norm * (1.0 + 1e-12), "{rec:?}");
    }
}

#[test]
fn bound_report_for_gaussian_instances() {
    for seed in 0..10 {
        let cfg = SynthConfig { n: 1, d: 10, k: 50, sigma: 1.0, seed };
        let w = sample_true_params(&cfg).unwrap();
        let r = check_bounds(w.view(), 2.0, 1.0).unwrap();
        assert!(r.lemma2_satisfied && r.w_bound_satisfied, "{r:?}");
        assert!(r.c_estimate > 0.0 && r.bound_lemma3 > 0.0);
        assert_eq!(r.w_norm, frobenius_norm(w.view()));
    }
}

#[test]
fn longer_runs_do_not_raise_test_loss() {
    // Held-out loss at 4 T0 against T0, averaged over 20 seeds.
    let (mut short, mut long) = (0.0, 0.0);
    for seed in 0..20 {
        let cfg = SynthConfig { n: 2000, d: 5, k: 5, sigma: 1.0, seed };
        let w = sample_true_params(&cfg).unwrap();
        let train = sample_dataset(&w, &cfg).unwrap();
        let test = sample_test_dataset(&w, &cfg, 2000).unwrap();
        let init = initialize_params(5, None, 5, InitScheme::Zeros, seed).unwrap();
        let b = frobenius_norm(w.view());
        for (t, acc) in [(500, &mut short), (2000, &mut long)] {
            let p = sgd_train(&init, &train, &SgdConfig::theory(t, b, train.rho(), seed)).unwrap().params;
            *acc += p.evaluate(&test, None).unwrap().mean_loss / 20.0;
        }
    }
    assert!(long <= short, "T0 {short}, 4 T0 {long}");
}
