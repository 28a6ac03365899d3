use crate::densela::DenseMatrix;
use crate::error::{invalid, Error, Result};
use crate::lowrank::as_rsi;
use crate::optim::config::{AdapproxConfig, OptimizerKind};
use crate::optim::state::{rowcol_estimate, ParamState, SecondMoment};
use crate::scalar::Real;

/// Telemetry of one parameter update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Rank after the step, for factored states.
    pub rank: Option<usize>,
    /// Second-moment error rate, measured on adaptation steps only.
    pub xi: Option<f64>,
    /// Whether RMS clipping scaled the update down.
    pub clipped: bool,
    /// Largest magnitude removed by clamping the reconstruction at zero.
    pub clamp: f64,
    /// Cosine between the current update and the running average, when
    /// guidance is active.
    pub theta: Option<f64>,
}

/// Root mean square `‖M‖_F / √(mn)`.
pub fn rms<T: Real>(m: &DenseMatrix<T>) -> T {
    m.frobenius_norm() / T::of(m.len() as f64).sqrt()
}

/// Cosine similarity of two matrices; zero if either is zero.
pub fn cosine<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<T> {
    let denom = a.frobenius_norm() * b.frobenius_norm();
    if denom == T::zero() {
        return Ok(T::zero());
    }
    let c = a.inner(b)? / denom;
    Ok(c.max(-T::one()).min(T::one()))
}

/// Guidance factor `1 / (1 − θ + ε)`, optionally kept in `[1/c, c]`, and `θ`.
pub fn guidance_factor<T: Real>(
    m_hat: &DenseMatrix<T>,
    m_avg: &DenseMatrix<T>,
    epsilon: f64,
    clamp: Option<f64>,
) -> Result<(T, T)> {
    let theta = cosine(m_hat, m_avg)?;
    let mut factor = T::one() / (T::one() - theta + T::of(epsilon));
    if let Some(c) = clamp {
        factor = factor.max(T::of(1.0 / c)).min(T::of(c));
    }
    Ok((factor, theta))
}

/// Scales the running average `m_avg` by the guidance factor.
pub fn cosine_guidance<T: Real>(
    m_hat: &DenseMatrix<T>,
    m_avg: &DenseMatrix<T>,
    epsilon: f64,
    clamp: Option<f64>,
) -> Result<DenseMatrix<T>> {
    let (factor, _) = guidance_factor(m_hat, m_avg, epsilon, clamp)?;
    Ok(m_avg.scale(factor))
}

fn check_inputs<T: Real>(state: &ParamState<T>, weights: &DenseMatrix<T>, grad: &DenseMatrix<T>) -> Result<()> {
    if grad.shape() != state.shape || weights.shape() != state.shape {
        return Err(Error::ShapeMismatch {
            op: "optimizer step",
            left: state.shape,
            right: grad.shape(),
        });
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(())
}

/// One AdamW step with bias correction and decoupled weight decay.
pub fn adamw_step<T: Real>(
    state: &mut ParamState<T>,
    weights: &mut DenseMatrix<T>,
    grad: &DenseMatrix<T>,
    lr: f64,
    cfg: &AdapproxConfig,
) -> Result<StepReport> {
    check_inputs(state, weights, grad)?;
    let t = state.step + 1;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let m = state.first_moment.as_mut().ok_or_else(|| invalid("AdamW state lacks a first moment"))?;
    let SecondMoment::Dense(v) = &mut state.second_moment else {
        return Err(invalid("AdamW state needs a dense second moment"));
    };
    let c1 = T::one() - T::of(libm::pow(cfg.beta1, t as f64));
    let c2 = T::one() - T::of(libm::pow(cfg.beta2, t as f64));
    let (eps, alpha, decay) = (T::of(cfg.epsilon), T::of(lr), T::of(cfg.weight_decay));
    let ms = m.as_mut_slice();
    let vs = v.as_mut_slice();
    for (((w, &g), mi), vi) in weights.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(ms).zip(vs) {
        *mi = b1 * *mi + (T::one() - b1) * g;
        *vi = b2 * *vi + (T::one() - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *w -= alpha * (m_hat / (v_hat.sqrt() + eps) + decay * *w);
    }
    state.step = t;
    Ok(StepReport::default())
}

/// One Adapprox step.
///
/// The previous second moment is rebuilt from its factors and clamped at
/// zero, blended with `G²`, and refactored by AS-RSI. The update
/// `G / (√V + ε)` uses the blended `V` before factorisation, is RMS-clipped,
/// averaged into the first moment when `β1 > 0`, and applied with decoupled
/// weight decay. There is no bias correction.
pub fn adapprox_step<T: Real>(
    state: &mut ParamState<T>,
    weights: &mut DenseMatrix<T>,
    grad: &DenseMatrix<T>,
    lr: f64,
    cfg: &AdapproxConfig,
) -> Result<StepReport> {
    check_inputs(state, weights, grad)?;
    let t = state.step + 1;
    let b2 = T::of(cfg.beta2);
    let fresh = grad.square().scale(T::one() - b2);
    let mut report = StepReport::default();

    let v = match &mut state.second_moment {
        SecondMoment::Dense(v) => {
            v.scale_inplace(b2);
            v.add_scaled_inplace(T::one(), &fresh)?;
            v.clone()
        }
        SecondMoment::Factored(factors) => {
            let recon = factors.reconstruct();
            let lowest = recon.as_slice().iter().fold(T::zero(), |acc, &x| acc.min(x));
            report.clamp = (-lowest).as_f64();
            let mut v = recon.clamp_min(T::zero());
            v.scale_inplace(b2);
            v.add_scaled_inplace(T::one(), &fresh)?;
            debug_assert!(v.as_slice().iter().all(|&x| x >= T::zero()));
            let out = as_rsi(&v, factors.rank(), &cfg.rank_policy, t, cfg.sampling, &mut state.rng)?;
            debug_assert!(out.rank <= cfg.rank_policy.k_max(v.rows(), v.cols()));
            report.rank = Some(out.rank);
            report.xi = out.xi.map(Real::as_f64);
            *factors = out.factors;
            v
        }
        SecondMoment::RowCol { .. } => {
            return Err(invalid("Adapprox state holds Adafactor statistics"));
        }
    };
    let update = grad.div_elem(&v.sqrt()?.map(|x| x + T::of(cfg.epsilon)), T::zero())?;
    finish_update(state, weights, update, lr, cfg, &mut report)?;
    state.step = t;
    Ok(report)
}

/// One step of the Adafactor-style baseline: the update divides by the
/// rank-1 estimate built from running row and column sums of `G²`, then
/// follows the same clipping, first-moment and decay rules as Adapprox.
pub fn adafactor_step<T: Real>(
    state: &mut ParamState<T>,
    weights: &mut DenseMatrix<T>,
    grad: &DenseMatrix<T>,
    lr: f64,
    cfg: &AdapproxConfig,
) -> Result<StepReport> {
    check_inputs(state, weights, grad)?;
    let t = state.step + 1;
    let b2 = T::of(cfg.beta2);
    let fresh = grad.square().scale(T::one() - b2);
    let mut report = StepReport::default();
    let shape = state.shape;

    let v_hat = match &mut state.second_moment {
        SecondMoment::Dense(v) => {
            v.scale_inplace(b2);
            v.add_scaled_inplace(T::one(), &fresh)?;
            v.clone()
        }
        SecondMoment::RowCol { rows, cols } => {
            for (r, s) in rows.iter_mut().zip(fresh.row_sums()) {
                *r = b2 * *r + s;
            }
            for (c, s) in cols.iter_mut().zip(fresh.col_sums()) {
                *c = b2 * *c + s;
            }
            report.rank = Some(1);
            rowcol_estimate(rows, cols, shape)
        }
        SecondMoment::Factored(_) => {
            return Err(invalid("Adafactor state holds low-rank factors"));
        }
    };
    let update = grad.div_elem(&v_hat.sqrt()?.map(|x| x + T::of(cfg.epsilon)), T::zero())?;
    finish_update(state, weights, update, lr, cfg, &mut report)?;
    state.step = t;
    Ok(report)
}

/// Clip, average, optionally guide, then apply `W ← W − α (M + λ W)`.
fn finish_update<T: Real>(
    state: &mut ParamState<T>,
    weights: &mut DenseMatrix<T>,
    mut update: DenseMatrix<T>,
    lr: f64,
    cfg: &AdapproxConfig,
    report: &mut StepReport,
) -> Result<()> {
    if let Some(d) = cfg.clip_d {
        let scale = (rms(&update) / T::of(d)).max(T::one());
        if scale > T::one() {
            update.scale_inplace(T::one() / scale);
            report.clipped = true;
        }
        debug_assert!(rms(&update).as_f64() <= d + 1e-12 * d.max(1.0));
    }
    let applied = match state.first_moment.as_mut() {
        Some(m) if cfg.beta1 > 0.0 => {
            let b1 = T::of(cfg.beta1);
            m.scale_inplace(b1);
            m.add_scaled_inplace(T::one() - b1, &update)?;
            if cfg.cosine_guidance {
                let (factor, theta) = guidance_factor(&update, m, cfg.epsilon, cfg.guidance_clamp)?;
                m.scale_inplace(factor);
                report.theta = Some(theta.as_f64());
            }
            m.clone()
        }
        _ => update,
    };
    let alpha = T::of(lr);
    let keep = T::one() - alpha * T::of(cfg.weight_decay);
    for (w, &u) in weights.as_mut_slice().iter_mut().zip(applied.as_slice()) {
        *w = *w * keep - alpha * u;
    }
    Ok(())
}

/// Dispatches to the update rule of `state.kind()`.
pub fn step<T: Real>(
    state: &mut ParamState<T>,
    weights: &mut DenseMatrix<T>,
    grad: &DenseMatrix<T>,
    lr: f64,
    cfg: &AdapproxConfig,
) -> Result<StepReport> {
    match state.kind {
        OptimizerKind::AdamW => adamw_step(state, weights, grad, lr, cfg),
        OptimizerKind::Adafactor => adafactor_step(state, weights, grad, lr, cfg),
        OptimizerKind::Adapprox => adapprox_step(state, weights, grad, lr, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::RngStream;
    use crate::lowrank::RankPolicy;

    type M = DenseMatrix<f64>;

    fn fresh(kind: OptimizerKind, rows: usize, cols: usize, cfg: &AdapproxConfig) -> ParamState<f64> {
        ParamState::new(0, kind, rows, cols, cfg, RngStream::new(3)).unwrap()
    }

    #[test]
    fn rms_examples() {
        assert_eq!(rms(&M::filled(3, 5, 1.0).unwrap()), 1.0);
        assert_eq!(rms(&M::zeros(2, 2).unwrap()), 0.0);
        assert_eq!(rms(&M::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap()), 2.5);
    }

    #[test]
    fn guidance_examples() {
        let a = M::from_rows(&[[1.0, 2.0]]).unwrap();
        let g = cosine_guidance(&a, &a, 1e-8, Some(10.0)).unwrap();
        assert!((g.get(0, 1) - 20.0).abs() < 1e-12);

        let x = M::from_rows(&[[1.0, 0.0]]).unwrap();
        let y = M::from_rows(&[[0.0, 1.0]]).unwrap();
        let (f, theta) = guidance_factor(&x, &y, 1e-8, Some(10.0)).unwrap();
        assert_eq!(theta, 0.0);
        assert!((f - 1.0 / (1.0 + 1e-8)).abs() < 1e-15);

        let (f, theta) = guidance_factor(&a, &a.scale(-1.0), 1e-8, None).unwrap();
        assert!((theta + 1.0).abs() < 1e-15);
        assert!((f - 1.0 / (2.0 + 1e-8)).abs() < 1e-15);

        let (f, _) = guidance_factor(&a, &a, 1e-8, None).unwrap();
        assert!((f / 1e8 - 1.0).abs() < 1e-6);
        let (f, theta) = guidance_factor(&a, &M::zeros(1, 2).unwrap(), 1e-8, Some(10.0)).unwrap();
        assert_eq!((f, theta), (1.0 / (1.0 + 1e-8), 0.0));
    }

    #[test]
    fn adamw_first_step() {
        let cfg = AdapproxConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut s = fresh(OptimizerKind::AdamW, 1, 1, &cfg);
        let mut w = M::zeros(1, 1).unwrap();
        adamw_step(&mut s, &mut w, &M::filled(1, 1, 1.0).unwrap(), 0.1, &cfg).unwrap();
        assert!((w.get(0, 0) + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adamw_constant_gradient_fixed_point() {
        let cfg = AdapproxConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut s = fresh(OptimizerKind::AdamW, 1, 1, &cfg);
        let g = M::filled(1, 1, 0.37).unwrap();
        let mut w = M::zeros(1, 1).unwrap();
        for _ in 0..10_000 {
            let before = w.get(0, 0);
            adamw_step(&mut s, &mut w, &g, 0.01, &cfg).unwrap();
            let delta = before - w.get(0, 0);
            assert!((delta - 0.01 * 0.37 / (0.37 + 1e-8)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_keeps_weights() {
        let cfg = AdapproxConfig {
            weight_decay: 0.0,
            factor_min_dim: 4,
            ..Default::default()
        };
        for kind in OptimizerKind::ALL {
            let mut s = fresh(kind, 8, 6, &cfg);
            let w0 = M::from_fn(8, 6, |i, j| (i * 6 + j) as f64 * 0.1 - 2.0).unwrap();
            let mut w = w0.clone();
            for _ in 0..25 {
                step(&mut s, &mut w, &M::zeros(8, 6).unwrap(), 0.05, &cfg).unwrap();
            }
            assert_eq!(w, w0, "{kind}");
        }
    }

    #[test]
    fn one_step_clips_to_unit_rms() {
        // V1 = 0.001, so each entry of G/(sqrt(V1)+eps) is about 31.62.
        let cfg = AdapproxConfig {
            beta1: 0.0,
            weight_decay: 0.0,
            factor_min_dim: 4,
            ..Default::default()
        };
        let mut s = fresh(OptimizerKind::Adapprox, 8, 8, &cfg);
        let mut w = M::zeros(8, 8).unwrap();
        let r = adapprox_step(&mut s, &mut w, &M::filled(8, 8, 1.0).unwrap(), 0.1, &cfg).unwrap();
        assert!(r.clipped);
        let pre = 1.0 / (0.001f64.sqrt() + 1e-8);
        assert!((pre - 31.6227).abs() < 1e-3);
        for &x in w.as_slice() {
            assert!((x + 0.1).abs() < 1e-12, "{x}");
        }
        assert_eq!(r.rank, Some(1));
        assert!(r.xi.unwrap() < 1e-10);
    }

    #[test]
    fn decoupled_decay_contracts() {
        let cfg = AdapproxConfig {
            weight_decay: 0.1,
            factor_min_dim: 4,
            ..Default::default()
        };
        for kind in OptimizerKind::ALL {
            let mut s = fresh(kind, 5, 5, &cfg);
            let mut w = M::filled(5, 5, 2.0).unwrap();
            let mut expect = 2.0;
            for _ in 0..10 {
                step(&mut s, &mut w, &M::zeros(5, 5).unwrap(), 0.05, &cfg).unwrap();
                expect *= 1.0 - 0.05 * 0.1;
            }
            assert!(w.as_slice().iter().all(|&x| (x - expect).abs() < 1e-14), "{kind}");
        }
    }

    #[test]
    fn dense_path_matches_exact_v_reference() {
        let cfg = AdapproxConfig {
            factor_min_dim: usize::MAX,
            ..Default::default()
        };
        let (m, n) = (6, 5);
        let mut s = fresh(OptimizerKind::Adapprox, m, n, &cfg);
        let mut w = M::zeros(m, n).unwrap();
        let mut w_ref = vec![0.0; m * n];
        let mut v_ref = vec![0.0; m * n];
        let mut m_ref = vec![0.0; m * n];
        let mut rng = RngStream::new(8);
        for _ in 0..30 {
            let g = crate::densela::gaussian_matrix::<f64>(m, n, &mut rng).unwrap();
            adapprox_step(&mut s, &mut w, &g, 0.01, &cfg).unwrap();

            let mut u: Vec<f64> = Vec::with_capacity(m * n);
            for i in 0..m * n {
                let gi = g.as_slice()[i];
                v_ref[i] = 0.999 * v_ref[i] + 0.001 * gi * gi;
                u.push(gi / (v_ref[i].sqrt() + 1e-8));
            }
            let r = (u.iter().map(|x| x * x).sum::<f64>() / (m * n) as f64).sqrt();
            let c = r.max(1.0);
            for i in 0..m * n {
                m_ref[i] = 0.9 * m_ref[i] + 0.1 * u[i] / c;
                w_ref[i] -= 0.01 * (m_ref[i] + 0.1 * w_ref[i]);
            }
            for (a, b) in w.as_slice().iter().zip(&w_ref) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adafactor_matches_adapprox_on_rank_one_history() {
        let cfg = AdapproxConfig {
            factor_min_dim: 4,
            rank_policy: RankPolicy {
                k_max_fraction: 1.0 / 8.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let r: Vec<f64> = (0..8).map(|i| 0.5 + i as f64 * 0.25).collect();
        let c: Vec<f64> = (0..6).map(|j| 1.0 + (j as f64).sin().abs()).collect();
        let base = M::outer(&r, &c).unwrap();
        let mut a = fresh(OptimizerKind::Adapprox, 8, 6, &cfg);
        let mut b = fresh(OptimizerKind::Adafactor, 8, 6, &cfg);
        let mut wa = M::filled(8, 6, 0.3).unwrap();
        let mut wb = wa.clone();
        for t in 0..40 {
            let g = base.scale(if t % 3 == 0 { -1.0 } else { 0.5 + t as f64 * 0.01 });
            let ra = adapprox_step(&mut a, &mut wa, &g, 0.01, &cfg).unwrap();
            adafactor_step(&mut b, &mut wb, &g, 0.01, &cfg).unwrap();
            assert_eq!(ra.rank, Some(1));
            assert!(wa.sub(&wb).unwrap().max_abs() < 1e-6);
        }
    }

    #[test]
    fn guidance_with_orthogonal_average_is_neutral() {
        let on = AdapproxConfig {
            cosine_guidance: true,
            factor_min_dim: usize::MAX,
            weight_decay: 0.0,
            clip_d: None,
            ..Default::default()
        };
        let off = AdapproxConfig {
            cosine_guidance: false,
            ..on
        };
        // The current update is G / (sqrt(0.001 G²) + ε) ≈ 31.62·sign(G).
        let g = M::from_rows(&[[1.0, -1.0, 1.0, 1.0]]).unwrap();
        let u = g.map(|x| x / ((0.001 * x * x).sqrt() + 1e-8));
        let p = M::from_rows(&[[1.0, 1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(u.inner(&p).unwrap(), 0.0);
        let prev = u.scale(-(1.0 - 0.9) / 0.9).add(&p).unwrap();

        let run = |cfg: &AdapproxConfig| {
            let mut s = fresh(OptimizerKind::Adapprox, 1, 4, cfg);
            s.first_moment = Some(prev.clone());
            let mut w = M::zeros(1, 4).unwrap();
            let r = adapprox_step(&mut s, &mut w, &g, 0.1, cfg).unwrap();
            (w, r)
        };
        let (w_on, r_on) = run(&on);
        let (w_off, _) = run(&off);
        assert!(r_on.theta.unwrap().abs() < 1e-12);
        for (a, b) in w_on.as_slice().iter().zip(w_off.as_slice()) {
            if *b == 0.0 {
                assert!(a.abs() < 1e-15);
                continue;
            }
            let ratio = a / b;
            assert!(ratio <= 1.0 && ratio >= 1.0 / (1.0 + 1e-8) - 1e-9, "{ratio}");
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let cfg = AdapproxConfig::default();
        let mut s = fresh(OptimizerKind::Adapprox, 2, 2, &cfg);
        let mut w = M::zeros(2, 2).unwrap();
        assert!(adapprox_step(&mut s, &mut w, &M::zeros(2, 3).unwrap(), 0.1, &cfg).is_err());
        let mut bad = M::zeros(2, 2).unwrap();
        bad.as_mut_slice()[0] = f64::NAN;
        assert!(adapprox_step(&mut s, &mut w, &bad, 0.1, &cfg).is_err());
        assert_eq!(s.step(), 0);
    }
}
