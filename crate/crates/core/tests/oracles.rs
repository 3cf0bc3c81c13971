//! Worked examples checked against values computed outside the library.

mod common;

use advbound::adversaries::{contractivity, fit_monge_adversary, iterate, mixup_lambda_for_budget, MongeFitConfig, MongeObjective};
use advbound::data::{discretize_density, recombine, split_marginals, unconditional_mean, EmpiricalMarginal, Label, LabeledDataset, Prior};
use advbound::distortion::{
    beta, defeat_certificate, gamma_finite, ipm, joint_defeat_certificate, weighted_mmd, CertificateMethod, HypothesisClass, Scorer,
};
use advbound::harness::{self, toy_marginals, AdversarySpec, ExperimentConfig, ExperimentKind};
use advbound::learner::{expected_loss, train, LinearModel, TrainConfig};
use advbound::losses::{composite_loss, fenchel_identity_check, properness_check, sigmoid};
use advbound::transport::{
    all_ordered_pairs, cost_matrix, feature_distance, lipschitz_estimate, monge_budget, monge_cost, optimal_coupling, w1_phi,
    w1_quantile_1d, wasserstein1, BudgetMode, Cost, CostMatrix,
};
use advbound::{Adversary, Kernel, Link, ProperLoss};
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN2: f64 = std::f64::consts::LN_2;

fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

fn half() -> Prior {
    Prior::new(0.5).unwrap()
}

#[test]
fn partial_losses_match_closed_forms() {
    let sq = ProperLoss::square();
    assert_abs_diff_eq!(sq.partial_loss(Label::Pos, 0.25).unwrap(), 0.5625, epsilon = 1e-12);
    assert_abs_diff_eq!(ProperLoss::log().partial_loss(Label::Pos, 0.5).unwrap(), LN2, epsilon = 1e-12);
}

#[test]
fn square_link_is_minus_risk_derivative() {
    let link = ProperLoss::square().canonical_link().unwrap();
    let h = 1e-6;
    for k in 1..20 {
        let c = k as f64 / 20.0;
        let risk = |u: f64| u * (1.0 - u);
        let fd = -(risk(c + h) - risk(c - h)) / (2.0 * h);
        assert_abs_diff_eq!(link.forward(c), fd, epsilon = 1e-8);
    }
}

#[test]
fn square_loss_through_logit() {
    let sq = ProperLoss::square();
    let logit = Link::logit();
    // g(v) = ψ_sq(σ(v)) = 2σ(v) − 1 and σ(log 3) = 3/4.
    let v = 3f64.ln();
    assert_abs_diff_eq!(2.0 * sigmoid(v) - 1.0, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(advbound::losses::g_map(&sq, &logit, v).unwrap(), 0.5, epsilon = 1e-12);
    // The composite loss is the square partial loss at σ(v).
    let c: f64 = 0.75;
    assert_abs_diff_eq!(composite_loss(&sq, &logit, Label::Pos, v).unwrap(), (1.0 - c).powi(2), epsilon = 1e-12);
}

#[test]
fn log_canonical_loss_direct_evaluation() {
    let log = ProperLoss::log();
    assert_abs_diff_eq!(log.canonical_loss(Label::Pos, 1.0), common::log_loss(1.0, 1.0), epsilon = 1e-12);
    assert_abs_diff_eq!(log.canonical_loss(Label::Pos, 1.0), 0.313262, epsilon = 1e-6);
    for v in [-30.0, -2.0, 0.0, 0.7, 25.0] {
        assert_abs_diff_eq!(log.canonical_loss(Label::Neg, v), common::log_loss(-1.0, v), epsilon = 1e-12);
    }
}

#[test]
fn fenchel_examples() {
    assert!(fenchel_identity_check(&ProperLoss::square(), Label::Neg, 0.4, 1e-9).unwrap());
    assert!(fenchel_identity_check(&ProperLoss::log(), Label::Neg, -2.5, 1e-9).unwrap());
    // Square conjugate by hand: ψ⁻¹(v) = (1+v)/2, so (−L̄)*(v) = v(1+v)/2 + (1−v²)/4.
    let v: f64 = 0.4;
    let conj = v * (1.0 + v) / 2.0 + (1.0 - v * v) / 4.0;
    assert_abs_diff_eq!(ProperLoss::square().conjugate(v), conj, epsilon = 1e-12);
}

#[test]
fn properness_examples() {
    assert!(properness_check(&ProperLoss::log(), 101).unwrap().is_proper());
    assert!(properness_check(&ProperLoss::square(), 101).unwrap().is_proper());
    let bumped = ProperLoss::from_fns("bumped", |p| p * p - p + 0.5, |p| 2.0 * p - 1.0);
    assert!(!properness_check(&bumped, 101).unwrap().is_proper());
}

#[test]
fn discretized_gaussian_mean_matches_quadrature() {
    let f = |x: f64| (-((x - 0.6) / 0.2).powi(2)).exp();
    let m = discretize_density(f, 0.0, 1.0, 200).unwrap();
    let z = common::simpson(f, 0.0, 1.0, 2000);
    let mean = common::simpson(|x| x * f(x), 0.0, 1.0, 2000) / z;
    assert_abs_diff_eq!(m.mean()[0], mean, epsilon = 1e-4);
    assert_abs_diff_eq!(m.mean()[0], 0.6, epsilon = 0.01);
}

#[test]
fn toy_unconditional_mean_matches_quadrature() {
    let (p, n) = toy_marginals(200).unwrap();
    let m = unconditional_mean(&p, &n, half()).unwrap()[0];
    let fp = |x: f64| (-((x - 0.2) / 0.1).powi(2)).exp();
    let fn_ = |x: f64| (-((x - 0.6) / 0.2).powi(2)).exp();
    let mean = |f: &dyn Fn(f64) -> f64| common::simpson(|x| x * f(x), 0.0, 1.0, 2000) / common::simpson(f, 0.0, 1.0, 2000);
    let oracle = 0.5 * mean(&fp) + 0.5 * mean(&fn_);
    assert_abs_diff_eq!(m, oracle, epsilon = 1e-4);
    assert_abs_diff_eq!(m, 0.4, epsilon = 0.02);
}

#[test]
fn gamma_finite_two_point_brute_force() {
    let p = EmpiricalMarginal::new(pts(&[-1.0, 0.5]), vec![0.3, 0.7]).unwrap();
    let n = EmpiricalMarginal::new(pts(&[0.0, 2.0]), vec![0.6, 0.4]).unwrap();
    let params = [(1.0, 0.0), (-2.0, 0.5), (0.5, -1.0)];
    let members: Vec<Scorer> = params.iter().map(|&(w, b)| Scorer::linear(vec![w], b)).collect();
    let a = Adversary::mixup_to_point(0.5, vec![1.0]).unwrap();
    let pi = Prior::new(0.4).unwrap();
    let g = |v: f64| -> advbound::Result<f64> { Ok(v.tanh()) };
    let (b, c) = (0.2, -0.1);
    let (got, idx) = gamma_finite(&members, &g, &a, &p, &n, pi, b, c).unwrap();

    let map = |x: f64| 0.5 * x + 0.5;
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, &(w, bias)) in params.iter().enumerate() {
        let h = |x: f64| (w * map(x) + bias).tanh();
        let ep = 0.3 * h(-1.0) + 0.7 * h(0.5);
        let en = 0.6 * h(0.0) + 0.4 * h(2.0);
        let val = 0.4 * ep - 0.6 * en + 0.4 * b + 0.6 * c;
        if val > best.0 {
            best = (val, k);
        }
    }
    assert_abs_diff_eq!(got, best.0, epsilon = 1e-12);
    assert_eq!(idx, best.1);
}

#[test]
fn linear_rkhs_closed_form_is_sampled_upper_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = EmpiricalMarginal::new(common::random_points(&mut rng, 3, 2, 1.0), common::random_mass(&mut rng, 3)).unwrap();
    let n = EmpiricalMarginal::new(common::random_points(&mut rng, 2, 2, 1.0), common::random_mass(&mut rng, 2)).unwrap();
    let pi = 0.45;
    let loss = ProperLoss::log();
    let link = loss.canonical_link().unwrap();
    let a = Adversary::identity();
    let closed = beta(&loss, &link, &HypothesisClass::rkhs_unit_ball(Kernel::linear()), &a, &p, &n, Prior::new(pi).unwrap()).unwrap();

    // Unit vectors w drawn directly; the linear RKHS ball is {x ↦ w·x : ‖w‖ ≤ 1}.
    let offset = 2.0 * loss.delta(pi).unwrap();
    let mut sampled = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        let w = [t.cos(), t.sin()];
        let h = |x: &[f64]| w[0] * x[0] + w[1] * x[1];
        sampled = sampled.max(offset + pi * p.expect(h) - (1.0 - pi) * n.expect(h));
    }
    assert!(sampled <= closed + 1e-12, "sampled {sampled} above closed form {closed}");
    assert!(sampled >= closed - 0.02 * closed.abs(), "sampled {sampled} more than 2% below {closed}");
}

#[test]
fn affine_mmd_point_masses() {
    let p = EmpiricalMarginal::dirac(vec![0.0]);
    let n = EmpiricalMarginal::dirac(vec![1.0]);
    let a = Adversary::identity();
    let mmd = weighted_mmd(&Kernel::affine(), &a, &p, &n, half()).unwrap();
    assert_abs_diff_eq!(mmd, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(common::mmd_affine(&pts(&[0.0]), &[1.0], &pts(&[1.0]), &[1.0], 0.5), 0.5, epsilon = 1e-12);

    let sq = ProperLoss::square();
    let link = sq.canonical_link().unwrap();
    // Features Φ(x) = (x, 1): ½Φ(0) − ½Φ(1) = (−½, 0), so the best unit-ball
    // scorer is x ↦ −x and γ = ½·0 − ½·(−1) = ½ with Δ = 0.
    let b = beta(&sq, &link, &HypothesisClass::rkhs_unit_ball(Kernel::affine()), &a, &p, &n, half()).unwrap();
    assert_abs_diff_eq!(b, 0.5, epsilon = 1e-12);
}

#[test]
fn certificate_threshold_arithmetic() {
    let log = ProperLoss::log();
    let link = log.canonical_link().unwrap();
    let cert = defeat_certificate(&log, &link, 0.2, 0.1, "id", CertificateMethod::ClosedFormMmd).unwrap();
    assert!(!cert.verdict);
    assert_abs_diff_eq!(2.0 * 0.1 * LN2, 0.13863, epsilon = 1e-5);
    let cert = defeat_certificate(&log, &link, 0.13, 0.1, "id", CertificateMethod::ClosedFormMmd).unwrap();
    assert!(cert.verdict);
}

#[test]
fn ipm_is_twice_gamma_on_small_instance() {
    let p = EmpiricalMarginal::new(pts(&[0.0, 1.0, 3.0]), vec![0.2, 0.5, 0.3]).unwrap();
    let n = EmpiricalMarginal::new(pts(&[-1.0, 2.0]), vec![0.5, 0.5]).unwrap();
    let params = [(1.0, 0.0), (0.3, -0.2), (-0.7, 1.0)];
    let class = HypothesisClass::finite_symmetric(params.iter().map(|&(w, b)| Scorer::linear(vec![w], b)).collect());
    let log = ProperLoss::log();
    let link = log.canonical_link().unwrap();
    let a = Adversary::mixup_to_point(0.8, vec![0.5]).unwrap();
    let rep = ipm(&log, &link, &class, &a, &p, &n, half()).unwrap();

    let map = |x: f64| 0.8 * x + 0.1;
    let mut brute = f64::NEG_INFINITY;
    for &(w, b) in &params {
        for s in [1.0, -1.0] {
            let h = |x: f64| s * (w * map(x) + b);
            let gap = 0.2 * h(0.0) + 0.5 * h(1.0) + 0.3 * h(3.0) - 0.5 * h(-1.0) - 0.5 * h(2.0);
            brute = brute.max(gap);
        }
    }
    assert_abs_diff_eq!(rep.value, brute, epsilon = 1e-12);
    assert_abs_diff_eq!(rep.value, rep.twice_gamma.unwrap(), epsilon = 1e-9);
}

#[test]
fn joint_threshold_uses_smallest_blunt_loss() {
    let losses = [ProperLoss::log(), ProperLoss::square(), ProperLoss::matsushita()];
    let blunts: Vec<f64> = losses.iter().map(|l| l.blunt()).collect();
    assert_abs_diff_eq!(blunts[0], LN2, epsilon = 1e-12);
    assert_abs_diff_eq!(blunts[1], 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(blunts[2], 0.5, epsilon = 1e-12);
    let r = joint_defeat_certificate(&losses, 0.02, 0.1).unwrap();
    assert_abs_diff_eq!(r.threshold, 0.25 * 0.1, epsilon = 1e-12);
    assert!(r.verdict);
    assert!(!joint_defeat_certificate(&losses, 0.03, 0.1).unwrap().verdict);
}

#[test]
fn cost_matrix_hand_values() {
    let p = EmpiricalMarginal::uniform(vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let n = EmpiricalMarginal::uniform(vec![vec![0.0, 4.0], vec![1.0, 1.0]]).unwrap();
    let cm = cost_matrix(&Cost::Euclidean, &Adversary::identity(), &p, &n).unwrap();
    let want = [[4.0, 2f64.sqrt()], [5.0, 5f64.sqrt()], [3.0, 1.0]];
    for (i, row) in want.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            assert_abs_diff_eq!(cm.get(i, j), w, epsilon = 1e-12);
        }
    }
}

#[test]
fn random_6x7_matches_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    for _ in 0..10 {
        let cost: Vec<Vec<f64>> = (0..6).map(|_| (0..7).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
        let p = common::random_mass(&mut rng, 6);
        let n = common::random_mass(&mut rng, 7);
        let cm = CostMatrix::new(6, 7, cost.iter().flatten().copied().collect()).unwrap();
        let (plan, value) = optimal_coupling(&cm, &p, &n).unwrap();
        assert_abs_diff_eq!(value, common::lp_transport(&cost, &p, &n), epsilon = 1e-9);
        assert_abs_diff_eq!(plan.cost(&cm), value, epsilon = 1e-12);
    }
}

#[test]
fn toy_gaussians_quantile_vs_simplex_vs_cdf() {
    let (p, n) = toy_marginals(200).unwrap();
    let q = w1_quantile_1d(&p, &n).unwrap();
    let cm = cost_matrix(&Cost::Euclidean, &Adversary::identity(), &p, &n).unwrap();
    let (_, lp) = optimal_coupling(&cm, p.mass(), n.mass()).unwrap();
    let xs: Vec<f64> = p.support().iter().map(|x| x[0]).collect();
    let ys: Vec<f64> = n.support().iter().map(|x| x[0]).collect();
    let cdf = common::w1_cdf(&xs, p.mass(), &ys, n.mass());
    assert_abs_diff_eq!(q, lp, epsilon = 1e-8);
    assert_abs_diff_eq!(q, cdf, epsilon = 1e-8);
}

#[test]
fn feature_distances() {
    assert_abs_diff_eq!(feature_distance(&Kernel::linear(), &[0.0], &[3.0]).unwrap(), 3.0, epsilon = 1e-12);
    let rbf = Kernel::rbf(0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = common::random_points(&mut rng, 2, 3, 5.0);
        let d = feature_distance(&rbf, &x[0], &x[1]).unwrap();
        assert!(d <= 2f64.sqrt() + 1e-15);
        assert_abs_diff_eq!(d, (2.0 - 2.0 * common::rbf(0.7)(&x[0], &x[1])).sqrt(), epsilon = 1e-12);
    }
}

#[test]
fn linear_feature_w1_is_euclidean_w1() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let p = common::random_marginal(&mut rng, 6, 3, 2.0);
        let n = common::random_marginal(&mut rng, 6, 3, 2.0);
        let a = w1_phi(&Kernel::linear(), &p, &n).unwrap();
        let b = wasserstein1(&p, &n, &Cost::Euclidean).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
}

#[test]
fn lipschitz_estimate_respects_cauchy_schwarz() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bound = 1.7;
    let class: Vec<Scorer> = (0..8)
        .map(|_| {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = rng.gen_range(0.0..bound);
            Scorer::linear(w.iter().map(|v| v * r / norm).collect(), 0.0)
        })
        .collect();
    let probes = common::random_points(&mut rng, 12, 3, 2.0);
    let id = |v: f64| v;
    let rep = lipschitz_estimate(&class, common::euclid, ("id", &id), ("id", &id), &all_ordered_pairs(&probes));
    assert!(rep.k_hat <= bound + 1e-12);
    assert!(rep.violations.is_empty());
}

#[test]
fn canonical_budget_arithmetic() {
    let b = monge_budget(&ProperLoss::log(), BudgetMode::Canonical2K, 0.5, 0.5, 1.0, None).unwrap();
    assert_abs_diff_eq!(b.delta, 4.0 * 0.5 * LN2, epsilon = 1e-12);
    assert_abs_diff_eq!(b.delta, 1.3863, epsilon = 1e-4);
}

#[test]
fn budgeted_mixup_spends_exactly_its_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let p = common::random_marginal(&mut rng, 6, 2, 2.0);
        let n = common::random_marginal(&mut rng, 6, 2, 2.0);
        let w1 = wasserstein1(&p, &n, &Cost::Euclidean).unwrap();
        let delta = rng.gen_range(0.0..1.5) * w1;
        let (lambda, _) = mixup_lambda_for_budget(delta, w1).unwrap();
        let a = Adversary::mixup_to_point(lambda, unconditional_mean(&p, &n, half()).unwrap()).unwrap();
        let c = monge_cost(&a, &p, &n, &Cost::Euclidean).unwrap();
        assert_abs_diff_eq!(c, lambda * w1, epsilon = 1e-8);
        assert!(c <= delta + 1e-8);
    }
}

#[test]
fn monge_fit_closes_two_point_gap() {
    let p = EmpiricalMarginal::dirac(vec![0.0]);
    let n = EmpiricalMarginal::dirac(vec![1.0]);
    for objective in [MongeObjective::W2Squared, MongeObjective::W1] {
        let mut cfg = MongeFitConfig::new(objective, 4);
        cfg.evaluations = 500;
        let fit = fit_monge_adversary(&p, &n, 1.0, &cfg, None).unwrap();
        assert!(fit.objective <= 1e-6, "{objective:?}: objective {}", fit.objective);
    }
}

#[test]
fn exact_contraction_is_measured_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let probes = common::random_points(&mut rng, 10, 2, 3.0);
    for eta in [0.1, 0.3, 0.5] {
        let a = Adversary::mixup_to_point(1.0 - eta, vec![0.4, -0.1]).unwrap();
        let est = contractivity(&a, &Kernel::linear(), &all_ordered_pairs(&probes)).unwrap();
        assert_abs_diff_eq!(est.eta_hat, eta, epsilon = 1e-12);
    }
}

#[test]
fn iterated_mixup_is_mixup_with_power() {
    let t = vec![0.3, -2.0];
    let a = Adversary::mixup_to_point(0.7, t.clone()).unwrap();
    let direct = Adversary::mixup_to_point(0.7f64.powi(5), t).unwrap();
    let it = iterate(&a, 5).unwrap();
    for x in [[0.0, 0.0], [1.0, 5.0], [-3.0, 2.5]] {
        for (u, v) in it.apply_point(&x).iter().zip(direct.apply_point(&x)) {
            assert_abs_diff_eq!(*u, v, epsilon = 1e-12);
        }
    }
}

#[test]
fn half_mixup_halves_distance_to_mean() {
    let (p, n) = toy_marginals(200).unwrap();
    let m = unconditional_mean(&p, &n, half()).unwrap()[0];
    let a = Adversary::mixup_to_point(0.5, vec![m]).unwrap();
    for q in [&p, &n] {
        let moved = a.push_forward(q).unwrap().mean()[0];
        assert_abs_diff_eq!(moved - m, 0.5 * (q.mean()[0] - m), epsilon = 1e-12);
    }
}

#[test]
fn separated_log_training_drives_loss_down() {
    let ds = LabeledDataset::new(pts(&[0.0, 1.0]), vec![Label::Neg, Label::Pos], None).unwrap();
    let cfg = TrainConfig {
        max_iter: 20_000,
        ..TrainConfig::for_loss("log")
    };
    let (model, _) = train(&ds, &cfg).unwrap();
    let log = ProperLoss::log();
    let l = expected_loss(&model, &log, &log.canonical_link().unwrap(), &ds).unwrap();
    assert!(l < 0.01, "loss {l}");
    assert!(model.weights[0] > 0.0);
}

#[test]
fn square_training_reaches_hand_stationary_point() {
    // Scores v0 = b and v1 = w + b; zero gradient forces v0 = −1 and v1 = 1.
    let ds = LabeledDataset::new(pts(&[0.0, 1.0]), vec![Label::Neg, Label::Pos], None).unwrap();
    let (model, report) = train(&ds, &TrainConfig::for_loss("square")).unwrap();
    assert!(report.converged);
    assert_abs_diff_eq!(model.weights[0], 2.0, epsilon = 1e-5);
    assert_abs_diff_eq!(model.bias, -1.0, epsilon = 1e-5);
    let zero = LinearModel { weights: vec![2.0], bias: -1.0 };
    let sq = ProperLoss::square();
    assert_abs_diff_eq!(expected_loss(&zero, &sq, &sq.canonical_link().unwrap(), &ds).unwrap(), 0.0, epsilon = 1e-15);
}

#[test]
fn toy_sweep_delta_column_and_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        grid: vec![0.0, 0.5, 0.99],
        output: Some(dir.path().to_path_buf()),
        ..ExperimentConfig::new(ExperimentKind::Toy1d)
    };
    let report = harness::run_toy1d(&cfg).unwrap();
    let (p, n) = toy_marginals(cfg.bins).unwrap();
    let xs: Vec<f64> = p.support().iter().map(|x| x[0]).collect();
    let ys: Vec<f64> = n.support().iter().map(|x| x[0]).collect();
    let w1 = common::w1_cdf(&xs, p.mass(), &ys, n.mass());
    for r in &report.records {
        assert_abs_diff_eq!(r.delta, (1.0 - r.alpha) * w1, epsilon = 1e-8);
    }
    let last = report.records.last().unwrap();
    assert!(last.loss_aa >= LN2 - 0.01);
    let mid = &report.records[1];
    let worst = mid.loss_cc.max(mid.loss_ac).max(mid.loss_aa);
    assert!(mid.loss_ca > worst, "c/a {} not the worst cell", mid.loss_ca);
    assert!(dir.path().join("toy1d.csv").exists());
}

#[test]
fn separated_identity_is_not_defeated() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut points = common::random_points(&mut rng, 20, 2, 0.3);
    for x in points.iter_mut().take(10) {
        x[0] += 3.0;
    }
    let labels: Vec<Label> = (0..20).map(|i| if i < 10 { Label::Pos } else { Label::Neg }).collect();
    let ds = LabeledDataset::new(points, labels, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sep.csv");
    ds.to_csv(&data).unwrap();
    let cfg = ExperimentConfig {
        dataset: Some(data),
        adversary: Some(AdversarySpec::Identity),
        epsilon: 0.05,
        seed: Some(1),
        output: Some(dir.path().join("out")),
        ..ExperimentConfig::new(ExperimentKind::Certify)
    };
    let report = harness::run_certify(&cfg).unwrap();
    let cert = &report.certificates[0];
    assert!(!cert.verdict);
    let (p, n, pi) = split_marginals(&ds).unwrap();
    let clean = recombine(&p, &n, pi).unwrap();
    assert_eq!(clean.len(), 20);
    let checks = &report.sampled_checks;
    assert!(!checks.is_empty() && checks.iter().all(|c| c.sampled <= c.closed_form + 1e-9));
}
