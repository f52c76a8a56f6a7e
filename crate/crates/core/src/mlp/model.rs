use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{MlpConfig, MlpError, Real};

pub const BCE_EPS: f64 = 1e-7;

/// One affine layer: `y = x W + b` with `W` of shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F: Real> {
    pub weights: Array2<F>,
    pub bias: Array1<F>,
}

/// Fully connected ReLU network with dropout after every hidden layer and a
/// sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<F: Real> {
    config: MlpConfig,
    layers: Vec<Layer<F>>,
}

/// Intermediate values of a forward pass, needed to back-propagate.
#[derive(Debug, Clone)]
pub struct ForwardCache<F: Real> {
    /// Input to each affine layer (after ReLU and dropout for hidden ones).
    inputs: Vec<Array2<F>>,
    /// Hidden pre-activations.
    pre_activations: Vec<Array2<F>>,
    /// Scaled dropout masks (`0` or `1/(1-p)`), one per hidden layer when training.
    masks: Vec<Option<Array2<F>>>,
    pub logits: Array2<F>,
    pub probabilities: Array2<F>,
}

pub type Gradients<F> = Vec<Layer<F>>;

pub fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// He/Kaiming-normal weights (`std = sqrt(2 / fan_in)`) and zero biases.
pub fn kaiming_init<F: Real>(config: &MlpConfig, seed: u64) -> Result<MlpModel<F>, MlpError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = config
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            Layer {
                weights: Array2::from_shape_simple_fn((fan_in, fan_out), || F::of(normal.sample(&mut rng))),
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpModel {
        config: config.clone(),
        layers,
    })
}

/// Mean binary cross-entropy over all entries, with predictions clamped to
/// `[eps, 1 - eps]`.
pub fn bce_loss<F: Real>(y_hat: ArrayView2<'_, F>, y: ArrayView2<'_, F>) -> Result<F, MlpError> {
    if y_hat.dim() != y.dim() {
        return Err(MlpError::Shape(format!(
            "predictions {:?} vs targets {:?}",
            y_hat.dim(),
            y.dim()
        )));
    }
    if y.is_empty() {
        return Err(MlpError::EmptyData("loss of an empty batch".into()));
    }
    let eps = F::of(BCE_EPS);
    let mut total = 0.0f64;
    Zip::from(&y_hat).and(&y).for_each(|&p, &t| {
        let p = p.max(eps).min(F::one() - eps);
        let l = -(t * p.ln() + (F::one() - t) * (F::one() - p).ln());
        total += l.as_f64();
    });
    Ok(F::of(total / y.len() as f64))
}

impl<F: Real> MlpModel<F> {
    pub fn from_layers(config: MlpConfig, layers: Vec<Layer<F>>) -> Result<Self, MlpError> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(MlpError::Shape(format!(
                "config implies {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (i, ((fi, fo), l)) in shapes.iter().zip(&layers).enumerate() {
            if l.weights.dim() != (*fi, *fo) || l.bias.len() != *fo {
                return Err(MlpError::Shape(format!(
                    "layer {i}: expected ({fi}, {fo}), got {:?} with bias {}",
                    l.weights.dim(),
                    l.bias.len()
                )));
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Converts the parameters to another float type.
    pub fn cast<G: Real>(&self) -> MlpModel<G> {
        MlpModel {
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.mapv(|v| G::of(v.as_f64())),
                    bias: l.bias.mapv(|v| G::of(v.as_f64())),
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &ArrayView2<'_, F>) -> Result<(), MlpError> {
        if x.ncols() != self.config.input_dim {
            return Err(MlpError::Shape(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Output probabilities. `training` enables dropout with masks drawn from `seed`.
    pub fn forward(&self, x: ArrayView2<'_, F>, training: bool, seed: u64) -> Result<Array2<F>, MlpError> {
        if training {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(self.forward_cached(x, Some(&mut rng))?.probabilities)
        } else {
            Ok(self.logits(x)?.mapv(sigmoid))
        }
    }

    /// Pre-sigmoid outputs in inference mode. Ranking by them is equivalent to
    /// ranking by probabilities, without the ties introduced by saturation.
    pub fn logits(&self, x: ArrayView2<'_, F>) -> Result<Array2<F>, MlpError> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(F::zero()));
            }
            h = z;
        }
        Ok(h)
    }

    /// Forward pass keeping everything the backward pass needs. Dropout is
    /// applied when `rng` is given.
    pub fn forward_cached<R: Rng>(
        &self,
        x: ArrayView2<'_, F>,
        mut rng: Option<&mut R>,
    ) -> Result<ForwardCache<F>, MlpError> {
        self.check_input(&x)?;
        let p = self.config.dropout;
        let keep_scale = F::of(1.0 / (1.0 - p));
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for layer in &self.layers[..last] {
            let z = h.dot(&layer.weights) + &layer.bias;
            let mut a = z.mapv(|v| v.max(F::zero()));
            let mask = match rng.as_deref_mut() {
                Some(r) if p > 0.0 => {
                    let m = Array2::from_shape_simple_fn(a.dim(), || {
                        if r.random::<f64>() < p { F::zero() } else { keep_scale }
                    });
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(std::mem::replace(&mut h, a));
            pre_activations.push(z);
            masks.push(mask);
        }
        let out = &self.layers[last];
        let logits = h.dot(&out.weights) + &out.bias;
        inputs.push(h);
        let probabilities = logits.mapv(sigmoid);
        Ok(ForwardCache {
            inputs,
            pre_activations,
            masks,
            logits,
            probabilities,
        })
    }

    /// Gradients of `bce_loss + weight_decay / 2 * ||theta||^2` with respect to
    /// every weight and bias.
    pub fn backward(&self, cache: &ForwardCache<F>, y: ArrayView2<'_, F>, weight_decay: F) -> Result<Gradients<F>, MlpError> {
        if cache.probabilities.dim() != y.dim() {
            return Err(MlpError::Shape(format!(
                "outputs {:?} vs targets {:?}",
                cache.probabilities.dim(),
                y.dim()
            )));
        }
        let scale = F::of(1.0 / y.len() as f64);
        let mut dz = (&cache.probabilities - &y) * scale;
        let mut grads: Vec<Layer<F>> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let mut dw = cache.inputs[i].t().dot(&dz);
            let mut db = dz.sum_axis(Axis(0));
            if weight_decay != F::zero() {
                dw.scaled_add(weight_decay, &layer.weights);
                db.scaled_add(weight_decay, &layer.bias);
            }
            if i > 0 {
                let mut dh = dz.dot(&layer.weights.t());
                if let Some(mask) = &cache.masks[i - 1] {
                    dh *= mask;
                }
                Zip::from(&mut dh)
                    .and(&cache.pre_activations[i - 1])
                    .for_each(|g, &z| {
                        if z <= F::zero() {
                            *g = F::zero();
                        }
                    });
                dz = dh;
            }
            grads.push(Layer { weights: dw, bias: db });
        }
        grads.reverse();
        Ok(grads)
    }
}
