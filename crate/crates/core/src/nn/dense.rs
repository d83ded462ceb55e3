use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Gradient, ParameterStore, SlotId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }

    /// Multiplies `dy` by the derivative, expressed through the output `y`.
    fn backprop(self, y: ArrayView2<'_, f64>, dy: &mut Array2<f64>) {
        if self == Activation::Tanh {
            ndarray::Zip::from(dy).and(y).for_each(|d, &y| *d *= 1.0 - y * y);
        }
    }
}

/// Owned weights of a single dense layer, `out × in` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// `activation(W·x + b)` for one vector.
pub fn dense_forward(
    x: ArrayView1<'_, f64>,
    params: &DenseParams,
    activation: Activation,
) -> Result<Array1<f64>> {
    if x.len() != params.weights.ncols() {
        return Err(Error::Dimension {
            context: "dense input",
            expected: params.weights.ncols(),
            got: x.len(),
        });
    }
    if params.bias.len() != params.weights.nrows() {
        return Err(Error::Dimension {
            context: "dense bias",
            expected: params.weights.nrows(),
            got: params.bias.len(),
        });
    }
    let mut y = (params.weights.dot(&x) + &params.bias).insert_axis(Axis(0));
    activation.apply(&mut y);
    Ok(y.remove_axis(Axis(0)))
}

/// Dense layer whose parameters live in a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    weights: SlotId,
    bias: SlotId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Dense {
        Dense {
            weights: store.add_matrix(&format!("{name}.weight"), out_dim, in_dim, rng),
            bias: store.add_vector(&format!("{name}.bias"), out_dim),
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn params(&self, store: &ParameterStore) -> DenseParams {
        DenseParams {
            weights: store.matrix(self.weights).to_owned(),
            bias: store.vector(self.bias).to_owned(),
        }
    }

    pub fn weight_slot(&self) -> SlotId {
        self.weights
    }

    pub fn bias_slot(&self) -> SlotId {
        self.bias
    }

    /// Applies the layer to every row of `x` (`T × in` → `T × out`).
    pub fn forward(&self, store: &ParameterStore, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim {
            return Err(Error::Dimension {
                context: "dense input",
                expected: self.in_dim,
                got: x.ncols(),
            });
        }
        let mut y = x.dot(&store.matrix(self.weights).t()) + &store.vector(self.bias);
        self.activation.apply(&mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    /// `y` is this layer's forward output for `x`.
    pub fn backward(
        &self,
        store: &ParameterStore,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        mut dy: Array2<f64>,
        grad: &mut Gradient,
    ) -> Array2<f64> {
        self.activation.backprop(y, &mut dy);
        ndarray::linalg::general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut grad.matrix_mut(self.weights));
        grad.vector_mut(self.bias).scaled_add(1.0, &dy.sum_axis(Axis(0)));
        dy.dot(&store.matrix(self.weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_through() {
        let p = DenseParams {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let x = array![0.5, -1.0, 2.0];
        assert_eq!(dense_forward(x.view(), &p, Activation::Identity).unwrap(), x);
    }

    #[test]
    fn hand_multiplied_example() {
        let p = DenseParams {
            weights: array![[1.0, 1.0], [0.0, 1.0]],
            bias: array![0.5, -0.5],
        };
        let y = dense_forward(array![1.0, 2.0].view(), &p, Activation::Identity).unwrap();
        assert_eq!(y, array![3.5, 1.5]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = DenseParams {
            weights: Array2::zeros((2, 3)),
            bias: Array1::zeros(2),
        };
        assert!(matches!(
            dense_forward(array![1.0].view(), &p, Activation::Tanh),
            Err(Error::Dimension { expected: 3, got: 1, .. })
        ));
    }

    #[test]
    fn width_300_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let layer = Dense::new(&mut store, "d", 39, 300, Activation::Tanh, &mut rng);
        let y = layer.forward(&store, Array2::zeros((4, 39)).view()).unwrap();
        assert_eq!(y.dim(), (4, 300));
        assert_eq!(store.len(), 39 * 300 + 300);
    }

    #[test]
    fn single_example_mse_gradient_is_closed_form() {
        // L = (1/n)·||W x + b − y||², so dL/dW = (2/n)(ŷ − y) xᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParameterStore::new();
        let layer = Dense::new(&mut store, "d", 3, 2, Activation::Identity, &mut rng);
        let x = array![[0.3, -0.7, 1.1]];
        let target = array![[0.2, -0.4]];
        let y = layer.forward(&store, x.view()).unwrap();
        let n = 2.0;
        let dy = (&y - &target) * (2.0 / n);
        let mut grad = store.zero_gradient();
        layer.backward(&store, x.view(), y.view(), dy.clone(), &mut grad);
        let expected = dy.t().dot(&x);
        let got = grad.matrix(layer.weight_slot()).to_owned();
        for (a, b) in got.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParameterStore::new();
        let layer = Dense::new(&mut store, "d", 3, 2, Activation::Tanh, &mut rng);
        let x = array![[0.3, -0.7, 1.1], [1.0, 0.0, -1.0]];
        let y = layer.forward(&store, x.view()).unwrap();
        let mut grad = store.zero_gradient();
        let dx = layer.backward(&store, x.view(), y.view(), Array2::zeros((2, 2)), &mut grad);
        assert!(grad.values().iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|&g| g == 0.0));
    }
}
