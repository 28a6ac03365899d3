use adapprox::bench::{
    bench_config, default_schedule, finite_diff_check, run_training, Curvature, Logreg, LogregSpec, Mlp, MlpSpec,
    Offset, Problem, ProblemKind, ProblemSpec, Quadratic, QuadraticSpec, TrainRun,
};
use adapprox::densela::{gaussian_matrix, RngStream};
use adapprox::lowrank::{approx_error_rate, FactorPair};
use adapprox::optim::{AdapproxConfig, Optimizer, OptimizerKind};
use adapprox::{bench::LrSchedule, Matrix};

fn quadratic(curvature: Curvature) -> Quadratic {
    Quadratic::new(&QuadraticSpec {
        rows: 64,
        cols: 48,
        curvature,
        offset: Offset::Uniform(1.0),
        target_scale: 0.0,
        seed: 3,
    })
    .unwrap()
}

fn adaptation_ranks(run: &TrainRun, cfg: &AdapproxConfig) -> Vec<usize> {
    run.records
        .iter()
        .filter(|r| cfg.rank_policy.is_adaptation_step(r.step))
        .map(|r| r.params[0].rank.unwrap())
        .collect()
}

#[test]
fn five_dominant_curvature_keeps_rank_five() {
    let cfg = bench_config();
    let q = quadratic(Curvature::Blocks { count: 5, floor: 0.01 });
    let run = run_training(&q, OptimizerKind::Adapprox, &cfg, &LrSchedule::constant(1e-3, 40).unwrap(), 40, 0)
        .unwrap()
        .into_result()
        .unwrap();
    let ranks = adaptation_ranks(&run, &cfg);
    assert_eq!(ranks.len(), 4);
    assert!(ranks.iter().all(|&k| k >= 5), "{ranks:?}");
}

#[test]
fn rank_one_curvature_stays_rank_one() {
    let cfg = bench_config();
    let q = quadratic(Curvature::RankOne);
    let run = run_training(&q, OptimizerKind::Adapprox, &cfg, &LrSchedule::constant(1e-3, 40).unwrap(), 40, 0)
        .unwrap();
    let ranks = adaptation_ranks(&run, &cfg);
    assert_eq!(ranks, vec![1; 4]);
    for r in run.records.iter().filter(|r| r.params[0].xi.is_some()) {
        assert!(r.params[0].xi.unwrap() < cfg.rank_policy.xi_thresh);
    }
}

/// The row/column estimate of the baseline is measured against the exact
/// running average, which it tracks through linear statistics.
#[test]
fn baseline_misses_a_second_dominant_direction() {
    let cfg = bench_config();
    let q = quadratic(Curvature::Blocks { count: 2, floor: 0.01 });
    let mut params = q.init();
    let mut twin = params.clone();
    let shapes = q.shapes();
    let mut ours: Optimizer<f64> = Optimizer::new(OptimizerKind::Adapprox, cfg, &shapes, 0).unwrap();
    let mut base: Optimizer<f64> = Optimizer::new(OptimizerKind::Adafactor, cfg, &shapes, 0).unwrap();
    let mut exact = Matrix::zeros(64, 48).unwrap();
    for t in 1..=31u64 {
        let (_, g) = q.loss_grad(&params, None).unwrap();
        let reports = ours.step(&mut params, &g, 1e-3).unwrap();
        let (_, h) = q.loss_grad(&twin, None).unwrap();
        exact.scale_inplace(cfg.beta2);
        exact.add_scaled_inplace(1.0 - cfg.beta2, &h[0].square()).unwrap();
        base.step(&mut twin, &h, 1e-3).unwrap();
        if cfg.rank_policy.is_adaptation_step(t) {
            let estimate = base.states()[0].second_moment_estimate();
            let base_xi = exact.sub(&estimate).unwrap().frobenius_norm() / exact.frobenius_norm();
            let our_xi = reports[0].xi.unwrap();
            assert!(base_xi > our_xi, "step {t}: {base_xi} vs {our_xi}");
        }
    }
}

#[test]
fn full_batch_adamw_separates_the_mixture() {
    let spec = LogregSpec::new(4096, 64, 16, 0);
    let p = Logreg::new(&spec).unwrap();
    let cfg = AdapproxConfig::default();
    let run = run_training(&p, OptimizerKind::AdamW, &cfg, &default_schedule(0.01, 2000).unwrap(), 2000, 0)
        .unwrap()
        .into_result()
        .unwrap();
    let acc = p.accuracy(&run.params).unwrap();
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn gradients_away_from_the_start() {
    let mut rng = RngStream::new(11);
    let problems: Vec<(Box<dyn Problem>, f64, f64)> = vec![
        (Box::new(Logreg::new(&LogregSpec::new(256, 12, 5, 1)).unwrap()), 1e-5, 1e-5),
        (Box::new(Mlp::new(&MlpSpec::new(8, 32, 4, 64, 2)).unwrap()), 1e-5, 1e-4),
        (ProblemSpec::default_for(ProblemKind::Quadratic).build().unwrap(), 1e-3, 1e-5),
    ];
    for (p, h, tol) in problems {
        let point: Vec<Matrix> = p
            .init()
            .iter()
            .map(|m| {
                let noise: Matrix = gaussian_matrix(m.rows(), m.cols(), &mut rng).unwrap();
                let mut x = m.clone();
                x.add_scaled_inplace(0.3, &noise).unwrap();
                x
            })
            .collect();
        let e = finite_diff_check(p.as_ref(), &point, h, 300, &mut rng).unwrap();
        assert!(e < tol, "{}: {e}", p.name());
    }
}

#[test]
fn error_rate_of_exact_factors_is_zero() {
    let mut rng = RngStream::new(4);
    let q: Matrix = gaussian_matrix(20, 3, &mut rng).unwrap();
    let ut: Matrix = gaussian_matrix(15, 3, &mut rng).unwrap();
    let f = FactorPair::new(q, ut).unwrap();
    let a = f.reconstruct();
    assert!(approx_error_rate(&a, &f).unwrap() < 1e-14);
}
