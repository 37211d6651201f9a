//! Fully connected ReLU networks on top of the tape.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::tape::{Tape, Var};

/// `x · weight + bias`, with `weight` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    /// Glorot-uniform weights in ±√(6/(fan_in + fan_out)), zero bias.
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: rng.uniform_matrix(fan_in, fan_out, -limit, limit),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, trainable: bool) -> Result<(Var, [Var; 2])> {
        let (w, b) = if trainable {
            (tape.leaf(self.weight.clone()), tape.leaf(self.bias.clone()))
        } else {
            (tape.constant(self.weight.clone()), tape.constant(self.bias.clone()))
        };
        let xw = tape.matmul(x, w)?;
        Ok((tape.add_row(xw, b)?, [w, b]))
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul(&self.weight)?.add_row(&self.bias)
    }
}

/// ReLU between layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Parameter leaves recorded by one forward pass, in `params()` order.
pub type ParamVars = Vec<Var>;

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output widths");
        let layers = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(Error::Shape {
                    op: "mlp layers",
                    lhs: pair[0].weight.shape(),
                    rhs: pair[1].weight.shape(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weight.cols()
    }

    /// Layer widths, `[input, hidden..., output]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weight.cols()));
        s
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, trainable: bool) -> Result<(Var, ParamVars)> {
        let mut h = x;
        let mut vars = Vec::with_capacity(2 * self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (out, pv) = layer.forward(tape, h, trainable)?;
            vars.extend(pv);
            h = if i < last { tape.relu(out)? } else { out };
        }
        Ok((h, vars))
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.infer(&h)?;
            if i < last {
                h = h.map(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Matrix)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("{prefix}.{i}.weight"), &l.weight),
                    (format!("{prefix}.{i}.bias"), &l.bias),
                ]
            })
            .collect()
    }

    /// Rebuilds a network from `{prefix}.{i}.weight` / `{prefix}.{i}.bias`
    /// entries produced by [`Mlp::named_params`].
    pub fn from_named<'a>(prefix: &str, mut lookup: impl FnMut(&str) -> Option<&'a Matrix>) -> Result<Self> {
        let mut layers = Vec::new();
        for i in 0.. {
            let Some(w) = lookup(&format!("{prefix}.{i}.weight")) else {
                break;
            };
            let b = lookup(&format!("{prefix}.{i}.bias"))
                .ok_or_else(|| Error::Contract(format!("missing {prefix}.{i}.bias")))?;
            layers.push(Dense {
                weight: w.clone(),
                bias: b.clone(),
            });
        }
        Self::from_layers(layers)
    }

    pub fn bit_eq(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.bit_eq(&b.weight) && a.bias.bit_eq(&b.bias))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_bounds() {
        let mut rng = Rng::new(1);
        let d = Dense::new(30, 10, &mut rng);
        let limit = (6.0f64 / 40.0).sqrt();
        assert!(d.weight.data().iter().all(|w| w.abs() <= limit));
        assert_eq!(d.bias, Matrix::zeros(1, 10));
    }

    #[test]
    fn tape_forward_matches_infer() {
        let mut rng = Rng::new(2);
        let mlp = Mlp::new(&[5, 7, 3], &mut rng);
        let x = rng.normal_matrix(4, 5, 1.0);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let (y, vars) = mlp.forward(&mut tape, xv, true).unwrap();
        assert_eq!(vars.len(), 4);
        assert!(tape.value(y).bit_eq(&mlp.infer(&x).unwrap()));
        assert_eq!(mlp.sizes(), vec![5, 7, 3]);
    }

    #[test]
    fn named_roundtrip() {
        let mut rng = Rng::new(3);
        let mlp = Mlp::new(&[4, 6, 6, 2], &mut rng);
        let named = mlp.named_params("f");
        let back = Mlp::from_named("f", |k| named.iter().find(|(n, _)| n == k).map(|(_, m)| *m)).unwrap();
        assert!(back.bit_eq(&mlp));
    }
}
