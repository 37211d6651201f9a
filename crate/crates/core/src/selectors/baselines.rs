use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::gates::AnnealSchedule;
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::tape::Tape;

use super::cfs::{Selection, SelectorModel};
use super::config::{Mode, TrainConfig};
use super::objectives::{concrete_objective, supervised_gate_objective};
use super::{batches, check_data, check_finite, EpochMean};

/// Threshold on the mean largest selection probability that ends CAE training.
pub const CAE_CONVERGENCE: f64 = 0.99;

pub struct CaeOutcome {
    pub model: SelectorModel,
    pub losses: Vec<f64>,
    /// Temperature used in each epoch.
    pub temperatures: Vec<f64>,
    pub converged: bool,
}

/// Trains a concrete autoencoder. Over the schedule's `B` epochs the
/// temperature falls geometrically from `T0` in the first epoch to `TB` in
/// the last; if the selector has not hardened past
/// [`CAE_CONVERGENCE`] by the end, training continues at the final
/// temperature for up to the same number of epochs again, then returns the
/// current state with a warning.
pub fn train_cae_baseline(
    mut model: SelectorModel,
    target: &Matrix,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<CaeOutcome> {
    check_data("target", target)?;
    let Selection::Concrete(mut selector) = model.selection.clone() else {
        return Err(Error::Contract("concrete autoencoder needs a concrete selector".into()));
    };
    if target.cols() != selector.d() {
        return Err(Error::Shape {
            op: "train_cae_baseline",
            lhs: (target.rows(), selector.d()),
            rhs: target.shape(),
        });
    }
    let schedule = selector.schedule;
    let anneal = AnnealSchedule {
        epochs: schedule.epochs.saturating_sub(1),
        ..schedule
    };
    let mut log_alpha = selector.log_alpha.clone();
    let mut adam = AdamState::new(cfg.adam(), model.f.params().into_iter().chain([&log_alpha]));
    let mut losses = Vec::new();
    let mut temperatures = Vec::new();
    let mut converged = false;
    for epoch in 0..2 * schedule.epochs.max(1) {
        let temperature = if epoch < schedule.epochs {
            anneal.at(epoch)?
        } else {
            schedule.tb
        };
        let mut mean = EpochMean::default();
        for idx in batches(target.rows(), cfg.batch_size, rng) {
            let gumbel = rng.gumbel_matrix(selector.k(), selector.d());
            let mut tape = Tape::new();
            let x = tape.constant(target.select_rows(&idx));
            let la = tape.leaf(log_alpha.clone());
            let gv = tape.constant(gumbel);
            let vars = concrete_objective(&mut tape, &model.f, x, la, gv, temperature)?;
            let loss = tape.value(vars.loss).item()?;
            check_finite(loss, adam.steps_taken() + 1)?;
            let grads = tape.backward(vars.loss)?;
            let mut gs: Vec<Matrix> = vars.decoder.iter().map(|&v| grads.wrt(v)).collect();
            gs.push(grads.wrt(la));
            let mut params = model.f.params_mut();
            params.push(&mut log_alpha);
            adam.step(&mut params, &gs)?;
            mean.add(loss, idx.len());
        }
        losses.push(mean.mean());
        temperatures.push(temperature);
        selector.log_alpha = log_alpha.clone();
        selector.temperature = temperature;
        if epoch + 1 >= schedule.epochs && selector.mean_max_probability() > CAE_CONVERGENCE {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "concrete selector did not reach mean max probability {CAE_CONVERGENCE} (got {:.4}); returning current state",
            selector.mean_max_probability()
        );
    }
    model.selection = Selection::Concrete(selector);
    Ok(CaeOutcome {
        model,
        losses,
        temperatures,
        converged,
    })
}

pub struct StgSupervisedOutcome {
    pub model: SelectorModel,
    pub losses: Vec<f64>,
}

/// Trains gates and a classifier to tell target rows (label 1) from
/// background rows (label 0).
pub fn train_stg_supervised_baseline(
    mut model: SelectorModel,
    target: &Matrix,
    background: &Matrix,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<StgSupervisedOutcome> {
    if model.mode != Mode::StgSupervised {
        return Err(Error::Contract(format!(
            "expected an stg-supervised model, got {}",
            model.mode
        )));
    }
    check_data("target", target)?;
    check_data("background", background)?;
    let Selection::Gates(mut gates) = model.selection.clone() else {
        return Err(Error::Contract("stg-supervised needs a gate layer".into()));
    };
    let x_all = target.vstack(background)?;
    let labels: Vec<f64> = std::iter::repeat_n(1.0, target.rows())
        .chain(std::iter::repeat_n(0.0, background.rows()))
        .collect();
    let mut mu = gates.mu_row();
    let mut adam = AdamState::new(cfg.adam(), model.f.params().into_iter().chain([&mu]));
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut mean = EpochMean::default();
        for idx in batches(x_all.rows(), cfg.batch_size, rng) {
            let y = Matrix::from_vec(idx.len(), 1, idx.iter().map(|&i| labels[i]).collect())?;
            let noise = gates.noise(idx.len(), rng);
            let mut tape = Tape::new();
            let x = tape.constant(x_all.select_rows(&idx));
            let mu_v = tape.leaf(mu.clone());
            let nz = tape.constant(noise);
            let vars = supervised_gate_objective(&mut tape, &model.f, &gates, x, y, mu_v, nz)?;
            let loss = tape.value(vars.loss).item()?;
            check_finite(loss, adam.steps_taken() + 1)?;
            let grads = tape.backward(vars.loss)?;
            let mut gs: Vec<Matrix> = vars.classifier.iter().map(|&v| grads.wrt(v)).collect();
            gs.push(grads.wrt(mu_v));
            let mut params = model.f.params_mut();
            params.push(&mut mu);
            adam.step(&mut params, &gs)?;
            mean.add(loss, idx.len());
        }
        losses.push(mean.mean());
    }
    gates.set_mu(&mu)?;
    model.selection = Selection::Gates(gates);
    Ok(StgSupervisedOutcome { model, losses })
}

/// Noise-free classifier probabilities `σ(clf(x ⊙ clamp(μ, 0, 1)))`.
pub fn stg_supervised_predict(model: &SelectorModel, x: &Matrix) -> Result<Vec<f64>> {
    let gates = model
        .gates()
        .filter(|_| model.mode == Mode::StgSupervised)
        .ok_or_else(|| Error::Contract("expected an stg-supervised model".into()))?;
    let mask = gates.deterministic();
    let mut masked = x.clone();
    for r in 0..masked.rows() {
        for (v, m) in masked.row_mut(r).iter_mut().zip(&mask) {
            *v *= m;
        }
    }
    let logits = model.f.infer(&masked)?;
    Ok(logits.data().iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect())
}
