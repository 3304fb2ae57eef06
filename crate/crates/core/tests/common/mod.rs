#![allow(dead_code)]

use qcombo_core::agent_io::OBS_DIM;
use qcombo_core::algorithms::{Algorithm, Batch, Experience, IdentityEncoding, InputEncoder, Learner, LearnerConfig};
use qcombo_core::neural::{Gradients, Matrix, ParamSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// `|a - f| <= rel * max(|a|, |f|) + abs`.
pub fn close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + abs
}

pub fn random_experience<R: Rng>(rng: &mut R, agents: usize, step: u64) -> Experience {
    let obs = |rng: &mut R| -> Vec<[f64; OBS_DIM]> {
        (0..agents)
            .map(|_| {
                let mut o = [0.0; OBS_DIM];
                for x in o.iter_mut() {
                    *x = rng.random_range(0.0..8.0);
                }
                let ew = rng.random_bool(0.5);
                o[16] = f64::from(u8::from(ew));
                o[17] = f64::from(u8::from(!ew));
                o
            })
            .collect()
    };
    let rewards: Vec<f64> = (0..agents).map(|_| rng.random_range(-3.0..3.0)).collect();
    Experience {
        step,
        obs: obs(rng),
        prev_actions: (0..agents).map(|_| rng.random_range(0..2)).collect(),
        actions: (0..agents).map(|_| rng.random_range(0..2)).collect(),
        global_reward: rewards.iter().sum::<f64>() / agents as f64,
        rewards,
        next_obs: obs(rng),
    }
}

/// Adds uniform noise to every scalar, moving zero-initialized biases off
/// ReLU kinks before a finite-difference check.
pub fn jitter<R: Rng>(params: &mut ParamSet, rng: &mut R, scale: f64) {
    for i in 0..params.num_scalars() {
        let v = params.scalar(i) + rng.random_range(-scale..scale);
        params.set_scalar(i, v);
    }
}

/// Small learner with distinct, jittered online and target parameters.
pub fn micro_learner(algorithm: Algorithm, rnn: bool, rows: usize, cols: usize, seed: u64) -> Learner {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = LearnerConfig {
        algorithm,
        rnn,
        hidden: vec![6, 5],
        actor_hidden: vec![5, 4],
        rnn_hidden: 5,
        mixer_embed: 4,
        lambda: rng.random_range(0.1..2.0),
        gamma: rng.random_range(0.5..0.99),
        ..Default::default()
    };
    let n = rows * cols;
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let encoder = InputEncoder::for_grid(rows, cols, IdentityEncoding::Coordinates);
    let mut learner = Learner::new(config, encoder, &weights, &mut rng).unwrap();
    for g in 0..learner.groups() {
        jitter(learner.params_mut(g), &mut rng, 0.1);
        jitter(learner.target_params_mut(g), &mut rng, 0.1);
    }
    learner
}

pub fn micro_batch(learner: &Learner, samples: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = learner.agents();
    let exps: Vec<Experience> = (0..samples).map(|i| random_experience(&mut rng, n, i as u64 * 5)).collect();
    let refs: Vec<&Experience> = exps.iter().collect();
    let mut batch = learner.encoder().batch(&refs, 1.0).unwrap();
    if let Some(h) = learner.local_net().hidden_dim() {
        batch.h0 = Some(ndarray::Array2::from_shape_fn((n, h), |_| rng.random_range(-0.5..0.5)));
    }
    batch
}

/// Outcome of a finite-difference sweep over every parameter of a learner.
#[derive(Debug, Default)]
pub struct FdReport {
    /// `(group, index, analytic, numeric)` outside tolerance.
    pub violations: Vec<(usize, usize, f64, f64)>,
    /// Coordinates whose left and right differences disagree, so the
    /// objective has a kink (ReLU, argmax, abs) inside the stencil.
    pub kinks: usize,
    pub checked: usize,
}

/// Central differences with step `FD_STEP` against the analytic gradient.
/// The absolute floor grows with the objective, `abs + 1e-9 |f|`, to cover
/// rounding in `f(x+h) - f(x-h)`. Actor advantages are held at their
/// unperturbed values.
pub fn learner_fd_check(learner: &mut Learner, batch: &Batch, rel: f64, abs: f64) -> FdReport {
    let out = learner.compute(batch).unwrap();
    let mut report = FdReport::default();
    for g in 0..learner.groups() {
        let f0 = out.objectives[g];
        let floor = abs + 1e-9 * f0.abs();
        for i in 0..learner.params(g).num_scalars() {
            let orig = learner.params(g).scalar(i);
            learner.params_mut(g).set_scalar(i, orig + FD_STEP);
            let plus = learner.compute_with(batch, out.advantages.as_deref()).unwrap().objectives[g];
            learner.params_mut(g).set_scalar(i, orig - FD_STEP);
            let minus = learner.compute_with(batch, out.advantages.as_deref()).unwrap().objectives[g];
            learner.params_mut(g).set_scalar(i, orig);
            report.checked += 1;
            let (right, left) = ((plus - f0) / FD_STEP, (f0 - minus) / FD_STEP);
            if !close(right, left, 10.0 * rel, 10.0 * floor) {
                report.kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = out.grads[g].scalar(i);
            if !close(analytic, numeric, rel, floor) {
                report.violations.push((g, i, analytic, numeric));
            }
        }
    }
    report
}

pub fn learner_fd_violations(learner: &mut Learner, batch: &Batch, rel: f64, abs: f64) -> Vec<(usize, usize, f64, f64)> {
    learner_fd_check(learner, batch, rel, abs).violations
}

/// Central differences of `f` with respect to every scalar of `params`.
pub fn numeric_grad(params: &mut ParamSet, mut f: impl FnMut(&ParamSet) -> f64) -> Vec<f64> {
    (0..params.num_scalars())
        .map(|i| {
            let orig = params.scalar(i);
            params.set_scalar(i, orig + FD_STEP);
            let plus = f(params);
            params.set_scalar(i, orig - FD_STEP);
            let minus = f(params);
            params.set_scalar(i, orig);
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Learner on a `rows x cols` grid with uniform agent weights.
pub fn build_learner(algorithm: Algorithm, rows: usize, cols: usize, seed: u64, tweak: impl FnOnce(&mut LearnerConfig)) -> Learner {
    let mut config = LearnerConfig { algorithm, ..Default::default() };
    tweak(&mut config);
    let n = rows * cols;
    let encoder = InputEncoder::for_grid(rows, cols, config.identity);
    Learner::new(config, encoder, &vec![1.0 / n as f64; n], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Batch assembled from raw encoded rows. `local_in` and `next_local_in`
/// hold `samples * agents` rows; states are left at zero.
pub fn direct_batch(
    learner: &Learner,
    local_in: Matrix,
    next_local_in: Matrix,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    global_rewards: Vec<f64>,
) -> Batch {
    let samples = global_rewards.len();
    let sd = learner.encoder().state_dim();
    Batch {
        agents: learner.agents(),
        local_in,
        next_local_in,
        actions,
        rewards,
        global_rewards,
        state: Matrix::zeros((samples, sd)),
        next_state: Matrix::zeros((samples, sd)),
        h0: None,
    }
}

/// Plain gradient descent on one parameter group.
pub fn sgd(learner: &mut Learner, group: usize, grads: &Gradients, step: f64) {
    let g = grads.flatten();
    let params = learner.params_mut(group);
    for (i, gi) in g.iter().enumerate() {
        let v = params.scalar(i) - step * gi;
        params.set_scalar(i, v);
    }
}

/// Outcome of a randomized simulator run.
#[derive(Debug)]
pub struct FuzzReport {
    pub ticks: u64,
    /// Smallest bumper-to-bumper gap seen, if two vehicles ever shared a route.
    pub min_gap: f64,
    /// Ticks where inserted != on road + exited.
    pub conservation_breaks: u64,
    /// Largest `|inserted + deferred - rate * t / 3600|` over routes and seconds.
    pub demand_error: f64,
    /// Largest `|inserted - rate * t / 3600|` over routes whose boundary was never blocked.
    pub free_insert_error: f64,
    pub vehicles_inserted: u64,
}

/// `ticks` ticks of `rows x cols` with random per-line rates up to
/// `max_rate` and random light actions at random 1-10 s intervals.
pub fn sim_fuzz(rows: usize, cols: usize, max_rate: u32, ticks: u64, seed: u64) -> FuzzReport {
    use qcombo_core::sim::{Action, FlowProgram, RoadNetwork, World};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = RoadNetwork::build_grid(rows, cols, 400.0).unwrap();
    // The first horizontal road always runs at the peak rate.
    let horizontal: Vec<u32> = (0..rows).map(|r| if r == 0 { max_rate } else { rng.random_range(0..=max_rate) }).collect();
    let vertical: Vec<u32> = (0..cols).map(|_| rng.random_range(0..=max_rate)).collect();
    let program = FlowProgram::constant(ticks / 10 + 1, horizontal, vertical);
    let mut world = World::new(&net);
    let mut next_decision = vec![0u64; net.agent_count()];
    let mut blocked = vec![false; net.routes.len()];
    let mut report = FuzzReport {
        ticks,
        min_gap: f64::INFINITY,
        conservation_breaks: 0,
        demand_error: 0.0,
        free_insert_error: 0.0,
        vehicles_inserted: 0,
    };
    for tick in 0..ticks {
        if tick % 10 == 0 {
            let actions: Vec<Action> = next_decision
                .iter_mut()
                .map(|next| {
                    if tick >= *next {
                        *next = tick + 10 * rng.random_range(1..=10);
                        Action::from_index(rng.random_range(0..2))
                    } else {
                        Action::Keep
                    }
                })
                .collect();
            world.apply_actions(&actions).unwrap();
        }
        world.step(&net, &program).unwrap();
        if let Some(g) = world.min_gap() {
            report.min_gap = report.min_gap.min(g);
        }
        if world.vehicles_inserted() != world.vehicles_on_road() + world.vehicles_exited() {
            report.conservation_breaks += 1;
        }
        if (tick + 1) % 10 == 0 {
            let t = (tick + 1) as f64 / 10.0;
            for route in 0..net.routes.len() {
                let expected = f64::from(program.route_rate(&net, route, 0)) * t / 3600.0;
                let inserted = world.route_inserted(route) as f64;
                let pending = world.route_pending(route);
                blocked[route] |= pending > 0;
                report.demand_error = report.demand_error.max((inserted + pending as f64 - expected).abs());
                if !blocked[route] {
                    report.free_insert_error = report.free_insert_error.max((inserted - expected).abs());
                }
            }
        }
    }
    report.vehicles_inserted = world.vehicles_inserted();
    report
}

/// Largest deviation, over `seeds` random single-transition instances with
/// linear networks, between QCOMBO's objective and gradients and their hand
/// expansion.
pub fn qcombo_linear_max_error(seeds: u64) -> f64 {
    use ndarray::ArrayView1;
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let lambda = rng.random_range(0.0..3.0);
        let gamma = rng.random_range(0.0..0.99);
        let mut learner = build_learner(Algorithm::Qcombo, 1, 2, seed, |c| {
            c.lambda = lambda;
            c.gamma = gamma;
            c.hidden = vec![];
        });
        for g in 0..2 {
            jitter(learner.params_mut(g), &mut rng, 0.3);
            jitter(learner.target_params_mut(g), &mut rng, 0.3);
        }
        let batch = micro_batch(&learner, 1, 100 + seed);
        let out = learner.compute(&batch).unwrap();

        let n = 2;
        let k = learner.weights().to_vec();
        let (w, b) = (learner.params(0).get(0), learner.params(0).get(1));
        let (wt, bt) = (learner.target_params(0).get(0), learner.target_params(0).get(1));
        let q = |w: &Matrix, b: &Matrix, x: ArrayView1<f64>, a: usize| x.dot(&w.column(a)) + b[[0, a]];
        let mut q_sel = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut next_greedy = vec![0; n];
        for a in 0..n {
            let x = batch.local_in.row(a);
            let xn = batch.next_local_in.row(a);
            q_sel[a] = q(w, b, x, batch.actions[a]);
            let (t0, t1) = (q(wt, bt, xn, 0), q(wt, bt, xn, 1));
            next_greedy[a] = usize::from(t1 > t0);
            y[a] = batch.rewards[a] + gamma * t0.max(t1);
        }
        let joint = |state: ArrayView1<f64>, acts: &[usize]| {
            let mut z = state.to_vec();
            for &a in acts {
                z.extend([f64::from(u8::from(a == 0)), f64::from(u8::from(a == 1))]);
            }
            z
        };
        let z = joint(batch.state.row(0), &batch.actions);
        let zn = joint(batch.next_state.row(0), &next_greedy);
        let lin = |p: &ParamSet, z: &[f64]| z.iter().enumerate().map(|(i, zi)| zi * p.get(0)[[i, 0]]).sum::<f64>() + p.get(1)[[0, 0]];
        let qw = lin(learner.params(1), &z);
        let big_y = batch.global_rewards[0] + gamma * lin(learner.target_params(1), &zn);
        let delta = qw - (0..n).map(|a| k[a] * q_sel[a]).sum::<f64>();

        let total = 0.5 * (big_y - qw).powi(2)
            + (0..n).map(|a| 0.5 * (y[a] - q_sel[a]).powi(2)).sum::<f64>() / n as f64
            + lambda * 0.5 * delta * delta;
        worst = worst.max((out.objectives[0] - total).abs());

        // dL/dW[:, a] = Σ_{n: a_n = a} x_n (-(y_n - Q_n)/N - λ k_n Δ)
        let d = learner.encoder().local_dim();
        let mut dw = Matrix::zeros((d, 2));
        let mut db = Matrix::zeros((1, 2));
        for a in 0..n {
            let coef = -(y[a] - q_sel[a]) / n as f64 - lambda * k[a] * delta;
            let act = batch.actions[a];
            for i in 0..d {
                dw[[i, act]] += batch.local_in[[a, i]] * coef;
            }
            db[[0, act]] += coef;
        }
        // dL/dw = z (-(Y - Q_w) + λ Δ)
        let coef_w = -(big_y - qw) + lambda * delta;
        let local = &out.grads[0].0;
        let global = &out.grads[1].0;
        let diffs = local[0]
            .iter()
            .zip(dw.iter())
            .chain(local[1].iter().zip(db.iter()))
            .map(|(x, y)| (x - y).abs())
            .chain(z.iter().enumerate().map(|(i, zi)| (global[0][[i, 0]] - zi * coef_w).abs()))
            .chain([(global[1][[0, 0]] - coef_w).abs()]);
        worst = diffs.fold(worst, f64::max);
    }
    worst
}

/// Whether QCOMBO with λ = 0 produces exactly IDQN's local gradients, loss
/// and updated parameters, feed-forward and recurrent.
pub fn qcombo_lambda_zero_matches_idqn(seeds: u64) -> bool {
    (0..seeds).all(|seed| {
        [false, true].into_iter().all(|rnn| {
            let tweak = |c: &mut LearnerConfig| {
                c.lambda = 0.0;
                c.rnn = rnn;
                c.rnn_hidden = 6;
                c.hidden = vec![7, 6];
            };
            let mut qcombo = build_learner(Algorithm::Qcombo, 1, 2, seed, tweak);
            let mut idqn = build_learner(Algorithm::Idqn, 1, 2, seed, tweak);
            let batch = micro_batch(&qcombo, 6, seed);
            let a = qcombo.compute(&batch).unwrap();
            let b = idqn.compute(&batch).unwrap();
            let same = a.grads[0] == b.grads[0] && a.report.q_loss == b.report.q_loss;
            qcombo.apply(&a.grads).unwrap();
            idqn.apply(&b.grads).unwrap();
            same && qcombo.params(0) == idqn.params(0)
        })
    })
}

/// Additive one-shot payoffs `u1[a1] + u2[a2]` used for VDN.
pub const ADDITIVE_GAMES: [([f64; 2], [f64; 2]); 3] = [([0.0, 1.0], [2.0, 0.5]), ([1.5, -1.0], [0.0, 0.7]), ([0.2, 0.1], [-1.0, -0.5])];

/// Trains VDN on each additive game from uniformly random joint actions
/// and counts games whose greedy joint action is not the exhaustive
/// joint argmax.
pub fn vdn_additive_mismatches() -> usize {
    use qcombo_core::agent_io::OBS_DIM;
    use qcombo_core::algorithms::argmax;
    let mut wrong = 0;
    for (case, (u1, u2)) in ADDITIVE_GAMES.into_iter().enumerate() {
        let mut learner = build_learner(Algorithm::Vdn, 1, 2, case as u64, |c| {
            c.gamma = 0.0;
            c.hidden = vec![16];
            c.lr_q = 0.01;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(case as u64);
        for _ in 0..400 {
            let exps: Vec<Experience> = (0..30)
                .map(|i| {
                    let a = vec![rng.random_range(0..2), rng.random_range(0..2)];
                    let r = u1[a[0]] + u2[a[1]];
                    Experience {
                        step: i,
                        obs: vec![[0.0; OBS_DIM]; 2],
                        prev_actions: vec![0, 0],
                        actions: a,
                        rewards: vec![r; 2],
                        global_reward: r,
                        next_obs: vec![[0.0; OBS_DIM]; 2],
                    }
                })
                .collect();
            let refs: Vec<&Experience> = exps.iter().collect();
            let batch = learner.encoder().batch(&refs, 1.0).unwrap();
            let out = learner.compute(&batch).unwrap();
            learner.apply(&out.grads).unwrap();
            learner.soft_update().unwrap();
        }
        let q = learner.local_outputs(&[[0.0; OBS_DIM]; 2], &[0, 0]).unwrap();
        let greedy = [argmax(q.row(0).as_slice().unwrap()), argmax(q.row(1).as_slice().unwrap())];
        let best = (0..4).max_by(|&x, &y| (u1[x & 1] + u2[x >> 1]).total_cmp(&(u1[y & 1] + u2[y >> 1]))).unwrap();
        wrong += usize::from(greedy != [best & 1, best >> 1]);
    }
    wrong
}

/// Random monotone mixers for which the per-agent greedy actions do not
/// attain the exhaustive maximum of Q_tot.
pub fn qmix_argmax_mismatches(draws: usize) -> usize {
    use qcombo_core::algorithms::{argmax, MixerSpec};
    let spec = MixerSpec::new(3, 2, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    (0..draws)
        .filter(|_| {
            let mut p = spec.init("m", &mut rng);
            jitter(&mut p, &mut rng, 0.5);
            let state: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let q: Vec<[f64; 2]> = (0..2).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let tot = |a0: usize, a1: usize| spec.mix(&p, &state, &[q[0][a0], q[1][a1]]).unwrap();
            let greedy = tot(argmax(&q[0]), argmax(&q[1]));
            let brute = (0..4).map(|j| tot(j & 1, j >> 1)).fold(f64::NEG_INFINITY, f64::max);
            greedy < brute - 1e-12
        })
        .count()
}

/// Largest `|E_π[A]|` of the counterfactual advantage over random
/// policies and critic values.
pub fn coma_max_advantage_expectation(draws: usize) -> f64 {
    use qcombo_core::algorithms::coma::advantage;
    use qcombo_core::neural::softmax;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..draws)
        .map(|_| {
            let pi = softmax(&[rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]);
            let q = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
            (0..2).map(|a| pi[a] * advantage(&pi, &q, a)).sum::<f64>().abs()
        })
        .fold(0.0, f64::max)
}
