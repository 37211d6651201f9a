mod support;

use support::gradients::{self, TOLERANCE};

fn assert_suite(name: &str, suite: fn() -> Vec<f64>) {
    let errors = suite();
    assert!(errors.len() >= 20, "{name}: only {} instances", errors.len());
    for (i, e) in errors.iter().enumerate() {
        assert!(*e < TOLERANCE, "{name} instance {i}: relative error {e:e}");
    }
}

#[test]
fn dense_layer() {
    assert_suite("dense", gradients::dense_layer);
}

#[test]
fn relu_layer() {
    assert_suite("relu", gradients::relu_layer);
}

#[test]
fn gate_sample() {
    assert_suite("gate sample", gradients::gate_sample);
}

#[test]
fn gate_penalty() {
    assert_suite("gate penalty", gradients::gate_penalty);
}

#[test]
fn concrete_sample() {
    assert_suite("concrete sample", gradients::concrete_sample);
}

#[test]
fn contrastive_objective() {
    assert_suite("contrastive objective", gradients::contrastive_objective_gradients);
}

#[test]
fn background_objective() {
    assert_suite("background objective", gradients::background_objective_gradients);
}

#[test]
fn concrete_objective() {
    assert_suite("concrete objective", gradients::concrete_objective_gradients);
}
