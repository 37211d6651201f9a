//! Training objectives recorded on a [`Tape`].

use crate::error::Result;
use crate::gates::{ConcreteSelector, GateVector};
use crate::matrix::Matrix;
use crate::nn::{Mlp, ParamVars};
use crate::tape::{Tape, Var};

/// Squared error summed over features and averaged over rows.
pub fn reconstruction_error(tape: &mut Tape, pred: Var, x: Var) -> Result<Var> {
    let d = tape.value(x).cols();
    let ms = tape.mean_square(pred, x)?;
    tape.scale(ms, d as f64)
}

pub struct BackgroundVars {
    pub loss: Var,
    pub code: Var,
    pub g: ParamVars,
    pub h: ParamVars,
}

/// `‖h(g(x)) − x‖²` averaged over rows.
pub fn background_objective(tape: &mut Tape, g: &Mlp, h: &Mlp, x: Var, trainable: bool) -> Result<BackgroundVars> {
    let (code, gv) = g.forward(tape, x, trainable)?;
    let (recon, hv) = h.forward(tape, code, trainable)?;
    let loss = reconstruction_error(tape, recon, x)?;
    Ok(BackgroundVars {
        loss,
        code,
        g: gv,
        h: hv,
    })
}

pub struct GatedVars {
    pub loss: Var,
    pub reconstruction: Var,
    pub penalty: Var,
    pub f: ParamVars,
}

/// `‖f([b, x ⊙ G]) − x‖²` averaged over rows plus `λ Σ Φ(μ/σ)`, with
/// `G = clamp(μ + noise, 0, 1)`. Only `gates.sigma()` and `gates.lambda()`
/// are read; the means come from `mu`.
pub fn contrastive_objective(
    tape: &mut Tape,
    f: &Mlp,
    gates: &GateVector,
    b: Var,
    x: Var,
    mu: Var,
    noise: Var,
) -> Result<GatedVars> {
    let gate = GateVector::sample_on_tape(tape, mu, noise)?;
    let masked = tape.mul(x, gate)?;
    let input = tape.concat(b, masked)?;
    let (pred, fv) = f.forward(tape, input, true)?;
    let reconstruction = reconstruction_error(tape, pred, x)?;
    let penalty = gates.penalty_on_tape(tape, mu)?;
    let loss = tape.add(reconstruction, penalty)?;
    Ok(GatedVars {
        loss,
        reconstruction,
        penalty,
        f: fv,
    })
}

pub struct ConcreteVars {
    pub loss: Var,
    pub selection: Var,
    pub decoder: ParamVars,
}

/// Concrete autoencoder loss: `x` is projected on the `k` sampled selector
/// rows and decoded back to `d` features.
pub fn concrete_objective(
    tape: &mut Tape,
    decoder: &Mlp,
    x: Var,
    log_alpha: Var,
    gumbel: Var,
    temperature: f64,
) -> Result<ConcreteVars> {
    let selection = ConcreteSelector::sample_on_tape(tape, log_alpha, gumbel, temperature)?;
    let st = tape.transpose(selection)?;
    let picked = tape.matmul(x, st)?;
    let (pred, dv) = decoder.forward(tape, picked, true)?;
    let loss = reconstruction_error(tape, pred, x)?;
    Ok(ConcreteVars {
        loss,
        selection,
        decoder: dv,
    })
}

pub struct SupervisedVars {
    pub loss: Var,
    pub bce: Var,
    pub classifier: ParamVars,
}

/// Binary cross-entropy of `clf(x ⊙ G)` against 0/1 `labels` plus the gate
/// penalty.
pub fn supervised_gate_objective(
    tape: &mut Tape,
    clf: &Mlp,
    gates: &GateVector,
    x: Var,
    labels: Matrix,
    mu: Var,
    noise: Var,
) -> Result<SupervisedVars> {
    let gate = GateVector::sample_on_tape(tape, mu, noise)?;
    let masked = tape.mul(x, gate)?;
    let (logits, cv) = clf.forward(tape, masked, true)?;
    let bce = tape.bce_with_logits(logits, labels)?;
    let penalty = gates.penalty_on_tape(tape, mu)?;
    let loss = tape.add(bce, penalty)?;
    Ok(SupervisedVars {
        loss,
        bce,
        classifier: cv,
    })
}
