//! Central finite differences of plain-loop forward oracles against the
//! tape's reverse-mode gradients. Each suite returns the relative error of
//! every instance; a tape loss disagreeing with its oracle counts as an
//! infinite error.

use cfs_core::gates::{ConcreteSelector, GateVector};
use cfs_core::nn::{Dense, Mlp};
use cfs_core::selectors::objectives::{background_objective, concrete_objective, contrastive_objective};
use cfs_core::tape::{Tape, Var};
use cfs_core::{Matrix, Rng};

type TapeFn<'a> = &'a dyn Fn(&[Matrix]) -> (f64, Vec<Matrix>);

const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;
pub const INSTANCES: u64 = 25;
/// Instances with a kink (ReLU at 0, clamp at 0 or 1) this close to an
/// evaluation point are redrawn.
const KINK_MARGIN: f64 = 1e-3;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖ad − fd‖ / max(‖ad‖, ‖fd‖)` over all parameters at once.
fn relative_error(ad: &[Matrix], fd: &[Matrix]) -> f64 {
    let a: Vec<f64> = ad.iter().flat_map(|m| m.data().to_vec()).collect();
    let n: Vec<f64> = fd.iter().flat_map(|m| m.data().to_vec()).collect();
    let diff: Vec<f64> = a.iter().zip(&n).map(|(x, y)| x - y).collect();
    let scale = norm(&a).max(norm(&n));
    if scale <= 1e-8 {
        // degenerate instance: zero gradient
        return f64::INFINITY;
    }
    norm(&diff) / scale
}

fn finite_difference(params: &[Matrix], f: &dyn Fn(&[Matrix]) -> f64) -> Vec<Matrix> {
    let mut work = params.to_vec();
    let mut grads = Vec::new();
    for p in 0..params.len() {
        let mut g = Matrix::zeros(params[p].rows(), params[p].cols());
        for i in 0..params[p].len() {
            let orig = work[p].data()[i];
            work[p].data_mut()[i] = orig + STEP;
            let up = f(&work);
            work[p].data_mut()[i] = orig - STEP;
            let down = f(&work);
            work[p].data_mut()[i] = orig;
            g.data_mut()[i] = (up - down) / (2.0 * STEP);
        }
        grads.push(g);
    }
    grads
}

/// Checks one instance: the tape's loss must match the oracle and its
/// gradients must match finite differences of the oracle.
fn check(params: &[Matrix], oracle: &dyn Fn(&[Matrix]) -> f64, tape_fn: TapeFn) -> f64 {
    let (value, ad) = tape_fn(params);
    let expect = oracle(params);
    if (value - expect).abs() > 1e-10 * expect.abs().max(1.0) {
        return f64::INFINITY;
    }
    let fd = finite_difference(params, oracle);
    relative_error(&ad, &fd)
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for t in 0..a.cols() {
                s += a.get(i, t) * b.get(t, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

fn dense(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    let mut out = matmul(x, w);
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            out.set(i, j, out.get(i, j) + b.get(0, j));
        }
    }
    out
}

fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// MLP forward with layer parameters `[w0, b0, w1, b1, ...]`; also returns
/// the smallest |pre-activation| seen at a ReLU.
fn mlp(params: &[Matrix], x: &Matrix) -> (Matrix, f64) {
    let mut h = x.clone();
    let mut closest = f64::INFINITY;
    let layers = params.len() / 2;
    for l in 0..layers {
        let z = dense(&h, &params[2 * l], &params[2 * l + 1]);
        if l + 1 < layers {
            closest = z.data().iter().fold(closest, |c, v| c.min(v.abs()));
            h = relu(&z);
        } else {
            h = z;
        }
    }
    (h, closest)
}

fn mlp_from(params: &[Matrix]) -> Mlp {
    let layers = params
        .chunks(2)
        .map(|c| Dense {
            weight: c[0].clone(),
            bias: c[1].clone(),
        })
        .collect();
    Mlp::from_layers(layers).unwrap()
}

fn random_mlp_params(sizes: &[usize], rng: &mut Rng) -> Vec<Matrix> {
    let mut out = Vec::new();
    for w in sizes.windows(2) {
        out.push(rng.normal_matrix(w[0], w[1], 0.7));
        out.push(rng.normal_matrix(1, w[1], 0.3));
    }
    out
}

/// Sum of squared errors over all entries, divided by the row count.
fn sse_per_row(pred: &Matrix, x: &Matrix) -> f64 {
    let s: f64 = pred.data().iter().zip(x.data()).map(|(p, t)| (p - t) * (p - t)).sum();
    s / x.rows() as f64
}

/// Φ by composite Simpson quadrature of the density over [0, t].
fn phi(t: f64) -> f64 {
    let n = 4000;
    let h = t / n as f64;
    let pdf = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(t);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    0.5 + s * h / 3.0
}

fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let max = m.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = m.row(r).iter().map(|v| (v - max).exp()).sum();
        for c in 0..m.cols() {
            out.set(r, c, (m.get(r, c) - max).exp() / z);
        }
    }
    out
}

fn gate_matrix(mu: &Matrix, noise: &Matrix) -> (Matrix, f64) {
    let mut g = noise.clone();
    let mut closest = f64::INFINITY;
    for r in 0..noise.rows() {
        for c in 0..noise.cols() {
            let pre = mu.get(0, c) + noise.get(r, c);
            closest = closest.min(pre.abs()).min((pre - 1.0).abs());
            g.set(r, c, pre.clamp(0.0, 1.0));
        }
    }
    (g, closest)
}

fn grads(tape: &Tape, loss: Var, vars: &[Var]) -> (f64, Vec<Matrix>) {
    let g = tape.backward(loss).unwrap();
    (
        tape.value(loss).item().unwrap(),
        vars.iter().map(|&v| g.wrt(v)).collect(),
    )
}

/// Draws instances from `draw` until one clears the kink margin.
fn kink_free<T>(rng: &mut Rng, draw: impl Fn(&mut Rng) -> (T, f64)) -> T {
    for _ in 0..1000 {
        let (inst, closest) = draw(rng);
        if closest > KINK_MARGIN + STEP {
            return inst;
        }
    }
    panic!("could not draw a kink-free instance");
}

pub fn dense_layer() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(seed);
        let (n, i, o) = (1 + rng.below(5), 1 + rng.below(6), 1 + rng.below(6));
        let x = rng.normal_matrix(n, i, 1.0);
        let w = rng.normal_matrix(i, o, 1.0);
        let b = rng.normal_matrix(1, o, 1.0);
        let r = rng.normal_matrix(n, o, 1.0);
        let oracle = |p: &[Matrix]| dot(&r, &dense(&p[0], &p[1], &p[2]));
        let tape_fn = |p: &[Matrix]| {
            let mut t = Tape::new();
            let xv = t.leaf(p[0].clone());
            let layer = Dense {
                weight: p[1].clone(),
                bias: p[2].clone(),
            };
            let (out, [wv, bv]) = layer.forward(&mut t, xv, true).unwrap();
            let rv = t.constant(r.clone());
            let prod = t.mul(out, rv).unwrap();
            let loss = t.sum(prod).unwrap();
            grads(&t, loss, &[xv, wv, bv])
        };
        errors.push(check(&[x, w, b], &oracle, &tape_fn));
    }
    errors
}

pub fn relu_layer() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(100 + seed);
        let x = kink_free(&mut rng, |rng| {
            let (r, c) = (1 + rng.below(5), 1 + rng.below(6));
            let x = rng.normal_matrix(r, c, 1.0);
            let mut closest = x.data().iter().fold(f64::INFINITY, |c, v| c.min(v.abs()));
            if x.data().iter().all(|&v| v < 0.0) {
                // no active unit means a zero gradient
                closest = 0.0;
            }
            (x, closest)
        });
        let r = rng.normal_matrix(x.rows(), x.cols(), 1.0);
        let oracle = |p: &[Matrix]| dot(&r, &relu(&p[0]));
        let tape_fn = |p: &[Matrix]| {
            let mut t = Tape::new();
            let xv = t.leaf(p[0].clone());
            let y = t.relu(xv).unwrap();
            let rv = t.constant(r.clone());
            let prod = t.mul(y, rv).unwrap();
            let loss = t.sum(prod).unwrap();
            grads(&t, loss, &[xv])
        };
        errors.push(check(&[x], &oracle, &tape_fn));
    }
    errors
}

pub fn gate_sample() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(200 + seed);
        let (mu, noise) = kink_free(&mut rng, |rng| {
            let d = 1 + rng.below(6);
            let mu = rng.uniform_matrix(1, d, 0.1, 0.9);
            let n = 1 + rng.below(4);
            let noise = rng.normal_matrix(n, d, 0.5);
            let (g, mut closest) = gate_matrix(&mu, &noise);
            if g.data().iter().all(|&v| v == 0.0 || v == 1.0) {
                // every gate saturated means a zero gradient
                closest = 0.0;
            }
            ((mu, noise), closest)
        });
        let r = rng.normal_matrix(noise.rows(), noise.cols(), 1.0);
        let oracle = |p: &[Matrix]| dot(&r, &gate_matrix(&p[0], &noise).0);
        let tape_fn = |p: &[Matrix]| {
            let mut t = Tape::new();
            let muv = t.leaf(p[0].clone());
            let nv = t.constant(noise.clone());
            let g = GateVector::sample_on_tape(&mut t, muv, nv).unwrap();
            let rv = t.constant(r.clone());
            let prod = t.mul(g, rv).unwrap();
            let loss = t.sum(prod).unwrap();
            grads(&t, loss, &[muv])
        };
        errors.push(check(&[mu], &oracle, &tape_fn));
    }
    errors
}

pub fn gate_penalty() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(300 + seed);
        let d = 1 + rng.below(8);
        let sigma = rng.uniform_range(0.2, 1.0);
        let lambda = rng.uniform_range(0.01, 5.0);
        let mu = rng.normal_matrix(1, d, 1.0);
        let gates = GateVector::new(mu.data().to_vec(), sigma, lambda).unwrap();
        let oracle = |p: &[Matrix]| lambda * p[0].data().iter().map(|m| phi(m / sigma)).sum::<f64>();
        let tape_fn = |p: &[Matrix]| {
            let mut t = Tape::new();
            let muv = t.leaf(p[0].clone());
            let loss = gates.penalty_on_tape(&mut t, muv).unwrap();
            grads(&t, loss, &[muv])
        };
        errors.push(check(&[mu], &oracle, &tape_fn));
    }
    errors
}

pub fn concrete_sample() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(400 + seed);
        let (k, d) = (1 + rng.below(4), 2 + rng.below(6));
        let log_alpha = rng.normal_matrix(k, d, 1.0);
        let gumbel = rng.gumbel_matrix(k, d);
        let temperature = rng.uniform_range(0.5, 5.0);
        let r = rng.normal_matrix(k, d, 1.0);
        let oracle = |p: &[Matrix]| {
            let logits = p[0].add(&gumbel).unwrap().map(|v| v / temperature);
            dot(&r, &softmax_rows(&logits))
        };
        let tape_fn = |p: &[Matrix]| {
            let mut t = Tape::new();
            let la = t.leaf(p[0].clone());
            let g = t.constant(gumbel.clone());
            let s = ConcreteSelector::sample_on_tape(&mut t, la, g, temperature).unwrap();
            let rv = t.constant(r.clone());
            let prod = t.mul(s, rv).unwrap();
            let loss = t.sum(prod).unwrap();
            grads(&t, loss, &[la])
        };
        errors.push(check(&[log_alpha], &oracle, &tape_fn));
    }
    errors
}

/// Contrastive reconstruction plus gate penalty, differentiated with respect
/// to the gate means, the background code and every reconstructor parameter.
pub fn contrastive_objective_gradients() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(500 + seed);
        let (n, d, l, hidden) = (2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(3), 2 + rng.below(5));
        let sigma = 0.5;
        let lambda = rng.uniform_range(0.01, 1.0);
        let x = rng.normal_matrix(n, d, 1.0);
        let forward = |p: &[Matrix], noise: &Matrix| -> (f64, f64) {
            let (g, gate_closest) = gate_matrix(&p[0], noise);
            let masked = x.hadamard(&g).unwrap();
            let input = p[1].hcat(&masked).unwrap();
            let (pred, relu_closest) = mlp(&p[2..], &input);
            let penalty = lambda * p[0].data().iter().map(|m| phi(m / sigma)).sum::<f64>();
            (sse_per_row(&pred, &x) + penalty, gate_closest.min(relu_closest))
        };
        let (params, noise) = kink_free(&mut rng, |rng| {
            let mut params = vec![rng.uniform_matrix(1, d, 0.1, 0.9), rng.normal_matrix(n, l, 1.0)];
            params.extend(random_mlp_params(&[l + d, hidden, d], rng));
            let noise = rng.normal_matrix(n, d, sigma);
            let closest = forward(&params, &noise).1;
            ((params, noise), closest)
        });
        let oracle = |p: &[Matrix]| forward(p, &noise).0;
        let tape_fn = |p: &[Matrix]| {
            let gates = GateVector::new(p[0].data().to_vec(), sigma, lambda).unwrap();
            let f = mlp_from(&p[2..]);
            let mut t = Tape::new();
            let muv = t.leaf(p[0].clone());
            let bv = t.leaf(p[1].clone());
            let xv = t.constant(x.clone());
            let nv = t.constant(noise.clone());
            let out = contrastive_objective(&mut t, &f, &gates, bv, xv, muv, nv).unwrap();
            let mut vars = vec![muv, bv];
            vars.extend(out.f.iter().copied());
            grads(&t, out.loss, &vars)
        };
        errors.push(check(&params, &oracle, &tape_fn));
    }
    errors
}

/// Background autoencoder reconstruction, differentiated with respect to
/// every encoder and decoder parameter.
pub fn background_objective_gradients() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(600 + seed);
        let (n, d, l, hidden) = (2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(3), 2 + rng.below(4));
        let x = rng.normal_matrix(n, d, 1.0);
        let g_sizes = [d, hidden, l];
        let h_sizes = [l, hidden, d];
        let split = 2 * (g_sizes.len() - 1);
        let forward = |p: &[Matrix]| -> (f64, f64) {
            let (code, c1) = mlp(&p[..split], &x);
            let (recon, c2) = mlp(&p[split..], &code);
            (sse_per_row(&recon, &x), c1.min(c2))
        };
        let params = kink_free(&mut rng, |rng| {
            let mut p = random_mlp_params(&g_sizes, rng);
            p.extend(random_mlp_params(&h_sizes, rng));
            let closest = forward(&p).1;
            (p, closest)
        });
        let oracle = |p: &[Matrix]| forward(p).0;
        let tape_fn = |p: &[Matrix]| {
            let g = mlp_from(&p[..split]);
            let h = mlp_from(&p[split..]);
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let out = background_objective(&mut t, &g, &h, xv, true).unwrap();
            let vars: Vec<Var> = out.g.iter().chain(&out.h).copied().collect();
            grads(&t, out.loss, &vars)
        };
        errors.push(check(&params, &oracle, &tape_fn));
    }
    errors
}

pub fn concrete_objective_gradients() -> Vec<f64> {
    let mut errors = Vec::new();
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(700 + seed);
        let (n, d, k, hidden) = (2 + rng.below(3), 3 + rng.below(4), 1 + rng.below(2), 2 + rng.below(4));
        let x = rng.normal_matrix(n, d, 1.0);
        let temperature = rng.uniform_range(0.5, 3.0);
        let gumbel = rng.gumbel_matrix(k, d);
        let forward = |p: &[Matrix]| -> (f64, f64) {
            let sel = softmax_rows(&p[0].add(&gumbel).unwrap().map(|v| v / temperature));
            let picked = matmul(&x, &sel.transpose());
            let (pred, closest) = mlp(&p[1..], &picked);
            (sse_per_row(&pred, &x), closest)
        };
        let params = kink_free(&mut rng, |rng| {
            let mut p = vec![rng.normal_matrix(k, d, 1.0)];
            p.extend(random_mlp_params(&[k, hidden, d], rng));
            let closest = forward(&p).1;
            (p, closest)
        });
        let oracle = |p: &[Matrix]| forward(p).0;
        let tape_fn = |p: &[Matrix]| {
            let dec = mlp_from(&p[1..]);
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let la = t.leaf(p[0].clone());
            let gv = t.constant(gumbel.clone());
            let out = concrete_objective(&mut t, &dec, xv, la, gv, temperature).unwrap();
            let mut vars = vec![la];
            vars.extend(out.decoder.iter().copied());
            grads(&t, out.loss, &vars)
        };
        errors.push(check(&params, &oracle, &tape_fn));
    }
    errors
}

pub type Suite = (&'static str, fn() -> Vec<f64>);

pub const SUITES: [Suite; 8] = [
    ("dense", dense_layer),
    ("relu", relu_layer),
    ("gate sample", gate_sample),
    ("gate penalty", gate_penalty),
    ("concrete sample", concrete_sample),
    ("contrastive objective", contrastive_objective_gradients),
    ("background objective", background_objective_gradients),
    ("concrete objective", concrete_objective_gradients),
];
