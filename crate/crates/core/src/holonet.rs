//! Holomorphic complex-valued multilayer networks.
//!
//! A [`HoloNetwork`] maps a complex scalar to a complex scalar through affine
//! layers with `exp` activations after every layer except the last. Because
//! every building block is complex differentiable the output is an entire
//! function of the input, and the first and second input derivatives are
//! carried forward exactly alongside the value.
//!
//! # Parameter flattening order
//!
//! Real parameter vectors (see [`HoloNetwork::params`] and
//! [`ParameterGradient`]) list layers from input to output. Within a layer the
//! weight matrix comes first in row-major order (output unit `i`, input unit
//! `j`), followed by the bias vector. Every complex entry contributes its real
//! part followed by its imaginary part, so the length is twice the complex
//! parameter count. Checkpoints use this order verbatim.

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{is_finite_c, Scalar, C};

/// Pre-activations with `|Re y|` above this value are rejected.
pub const OVERFLOW_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct Layer<T> {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out x n_in`.
    weights: Vec<C<T>>,
    bias: Vec<C<T>>,
}

impl<T: Scalar> Layer<T> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![C::zero(); n_in * n_out],
            bias: vec![C::zero(); n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn weight(&self, i: usize, j: usize) -> C<T> {
        self.weights[i * self.n_in + j]
    }

    pub fn weights_mut(&mut self) -> &mut [C<T>] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [C<T>] {
        &mut self.bias
    }

    #[inline]
    fn affine_into(&self, x: &[C<T>], out: &mut [C<T>], with_bias: bool) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.weights[i * self.n_in..(i + 1) * self.n_in];
            let mut acc = if with_bias { self.bias[i] } else { C::zero() };
            for (w, xv) in row.iter().zip(x) {
                acc = acc + *w * *xv;
            }
            *o = acc;
        }
    }
}

/// Value and first two input derivatives of a holomorphic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub value: C<T>,
    pub d1: C<T>,
    pub d2: C<T>,
}

/// Sensitivities of a real scalar loss to the three output channels of a
/// network, each given as `dL/dRe + i dL/dIm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetAdjoint<T> {
    pub value: C<T>,
    pub d1: C<T>,
    pub d2: C<T>,
}

impl<T: Scalar> JetAdjoint<T> {
    pub fn zero() -> Self {
        Self {
            value: C::zero(),
            d1: C::zero(),
            d2: C::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero() && self.d1.is_zero() && self.d2.is_zero()
    }
}

/// Gradient of a real loss with respect to the real and imaginary parts of
/// every weight and bias, in the documented flattening order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradient<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> ParameterGradient<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig<T> {
    pub beta: T,
    /// Number of leading layers initialized from probe statistics.
    pub gaussian_prestab_layers: usize,
    pub probe_batch: Vec<C<T>>,
    pub rng_seed: u64,
}

impl<T: Scalar> InitConfig<T> {
    /// `beta = 1` and all hidden layers but the last pre-stabilized.
    pub fn with_defaults(widths: &[usize], probe_batch: Vec<C<T>>, rng_seed: u64) -> Self {
        let hidden = widths.len().saturating_sub(2);
        Self {
            beta: T::one(),
            gaussian_prestab_layers: hidden.saturating_sub(1),
            probe_batch,
            rng_seed,
        }
    }
}

/// Weights (row-major, out x in) and biases of one layer.
pub type RawLayer<T> = (Vec<C<T>>, Vec<C<T>>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct HoloNetwork<T> {
    layers: Vec<Layer<T>>,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2
        || widths[0] != 1
        || widths[widths.len() - 1] != 1
        || widths.contains(&0)
    {
        return Err(Error::InvalidWidths(widths.to_vec()));
    }
    Ok(())
}

/// Layerwise variance parameter for layers past the pre-stabilized block.
pub fn tail_variance<T: Scalar>(beta: T) -> T {
    beta * (-beta).exp()
}

/// Data-dependent complex He initialization.
///
/// Layer `l` (1-based) draws real and imaginary weight parts from
/// `N(0, rho_l / (2 n_in))` with `rho_l = beta / E|x^(l-1)|^2` for
/// `l <= M_e` and `rho_l = beta e^{-beta}` afterwards. The probe batch is
/// propagated through each freshly initialized layer before the next one is
/// drawn. Biases start at zero.
pub fn init_network<T: Scalar>(widths: &[usize], cfg: &InitConfig<T>) -> Result<HoloNetwork<T>> {
    check_widths(widths)?;
    if cfg.probe_batch.is_empty() {
        return Err(Error::EmptyProbeBatch);
    }
    let n_layers = widths.len() - 1;
    if cfg.gaussian_prestab_layers > n_layers {
        return Err(Error::InvalidInput(format!(
            "gaussian_prestab_layers = {} exceeds layer count {}",
            cfg.gaussian_prestab_layers, n_layers
        )));
    }
    if !(cfg.beta > T::zero()) {
        return Err(Error::InvalidInput("beta must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut net = HoloNetwork::zeros(widths)?;
    let mut acts: Vec<Vec<C<T>>> = cfg.probe_batch.iter().map(|&z| vec![z]).collect();

    for l in 0..n_layers {
        let layer_no = l + 1;
        let rho = if layer_no <= cfg.gaussian_prestab_layers {
            let m = second_moment(&acts);
            if !(m > T::zero()) || !m.is_finite() {
                return Err(Error::DegenerateProbe { layer: layer_no });
            }
            cfg.beta / m
        } else {
            tail_variance(cfg.beta)
        };
        let layer = &mut net.layers[l];
        let std = (rho / (T::lit(2.0) * T::from_usize(layer.n_in).unwrap())).sqrt();
        for w in layer.weights.iter_mut() {
            let re = T::standard_normal(&mut rng) * std;
            let im = T::standard_normal(&mut rng) * std;
            *w = C::new(re, im);
        }
        let layer = &net.layers[l];
        if l + 1 < n_layers {
            let mut next = Vec::with_capacity(acts.len());
            for x in &acts {
                let mut y = vec![C::zero(); layer.n_out];
                layer.affine_into(x, &mut y, true);
                for v in y.iter_mut() {
                    check_overflow(*v, layer_no)?;
                    *v = v.exp();
                }
                next.push(y);
            }
            acts = next;
        }
    }
    Ok(net)
}

fn second_moment<T: Scalar>(acts: &[Vec<C<T>>]) -> T {
    let mut acc = T::zero();
    let mut n = 0usize;
    for a in acts {
        for v in a {
            acc = acc + v.norm_sqr();
            n += 1;
        }
    }
    acc / T::from_usize(n.max(1)).unwrap()
}

#[inline]
fn check_overflow<T: Scalar>(y: C<T>, layer: usize) -> Result<()> {
    let limit = T::lit(OVERFLOW_LIMIT);
    if !(y.re.abs() <= limit) || !y.im.is_finite() {
        return Err(Error::Overflow {
            layer,
            magnitude: y.re.abs().to_f64_lossy(),
            limit: OVERFLOW_LIMIT,
        });
    }
    Ok(())
}

/// Scratch buffers for one point: the inputs of every layer in the value,
/// first-derivative and second-derivative channels.
struct Trace<T> {
    x: Vec<Vec<C<T>>>,
    x1: Vec<Vec<C<T>>>,
    x2: Vec<Vec<C<T>>>,
}

impl<T: Scalar> HoloNetwork<T> {
    /// Network with every weight and bias set to zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self { layers })
    }

    /// Build from explicit layers; widths must chain and start/end at 1.
    pub fn from_layers(layers: Vec<RawLayer<T>>, widths: &[usize]) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        if layers.len() != net.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: net.layers.len(),
                got: layers.len(),
            });
        }
        for (dst, (w, b)) in net.layers.iter_mut().zip(layers) {
            if w.len() != dst.weights.len() {
                return Err(Error::ShapeMismatch {
                    expected: dst.weights.len(),
                    got: w.len(),
                });
            }
            if b.len() != dst.bias.len() {
                return Err(Error::ShapeMismatch {
                    expected: dst.bias.len(),
                    got: b.len(),
                });
            }
            dst.weights = w;
            dst.bias = b;
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].n_in];
        w.extend(self.layers.iter().map(|l| l.n_out));
        w
    }

    pub fn num_complex_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn num_real_params(&self) -> usize {
        2 * self.num_complex_params()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&v| is_finite_c(v)))
    }

    /// Flattened real parameters.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_real_params());
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                out.push(v.re);
                out.push(v.im);
            }
        }
        out
    }

    /// Overwrite all parameters from a flattened real vector.
    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_real_params() {
            return Err(Error::ShapeMismatch {
                expected: self.num_real_params(),
                got: flat.len(),
            });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = C::new(flat[k], flat[k + 1]);
                k += 2;
            }
        }
        Ok(())
    }

    fn new_trace(&self) -> Trace<T> {
        let mk = || self.layers.iter().map(|l| vec![C::zero(); l.n_in]).collect();
        Trace {
            x: mk(),
            x1: mk(),
            x2: mk(),
        }
    }

    fn run(&self, z: C<T>, tr: &mut Trace<T>) -> Result<Jet<T>> {
        tr.x[0][0] = z;
        tr.x1[0][0] = C::one();
        tr.x2[0][0] = C::zero();
        let last = self.layers.len() - 1;
        let mut y = Vec::new();
        let mut y1 = Vec::new();
        let mut y2 = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            y.resize(layer.n_out, C::zero());
            y1.resize(layer.n_out, C::zero());
            y2.resize(layer.n_out, C::zero());
            layer.affine_into(&tr.x[l], &mut y, true);
            layer.affine_into(&tr.x1[l], &mut y1, false);
            layer.affine_into(&tr.x2[l], &mut y2, false);
            if l == last {
                return Ok(Jet {
                    value: y[0],
                    d1: y1[0],
                    d2: y2[0],
                });
            }
            let (xs, x1s, x2s) = (&mut tr.x[l + 1], &mut tr.x1[l + 1], &mut tr.x2[l + 1]);
            for i in 0..layer.n_out {
                check_overflow(y[i], l + 1)?;
                let e = y[i].exp();
                xs[i] = e;
                x1s[i] = e * y1[i];
                x2s[i] = e * (y2[i] + y1[i] * y1[i]);
            }
        }
        unreachable!("network has at least one layer")
    }

    /// Value only.
    pub fn forward(&self, z: C<T>) -> Result<C<T>> {
        Ok(self.forward_with_z_derivatives(z)?.value)
    }

    /// `f(z)`, `f'(z)`, `f''(z)` propagated exactly through every layer.
    pub fn forward_with_z_derivatives(&self, z: C<T>) -> Result<Jet<T>> {
        let mut tr = self.new_trace();
        self.run(z, &mut tr)
    }

    pub fn forward_batch(&self, zs: &[C<T>]) -> Result<Vec<Jet<T>>> {
        let mut tr = self.new_trace();
        zs.iter().map(|&z| self.run(z, &mut tr)).collect()
    }

    /// Gradient of a real loss with respect to every real parameter, given
    /// the loss sensitivities to the value and derivative channels at each
    /// input. The result is linear in the adjoints.
    pub fn parameter_gradients(&self, batch: &[(C<T>, JetAdjoint<T>)]) -> Result<ParameterGradient<T>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut grad = vec![T::zero(); self.num_real_params()];
        self.accumulate_gradients(batch, &mut grad)?;
        Ok(ParameterGradient { values: grad })
    }

    /// Adds the parameter gradient for `batch` into `grad`.
    pub fn accumulate_gradients(
        &self,
        batch: &[(C<T>, JetAdjoint<T>)],
        grad: &mut [T],
    ) -> Result<()> {
        if grad.len() != self.num_real_params() {
            return Err(Error::ShapeMismatch {
                expected: self.num_real_params(),
                got: grad.len(),
            });
        }
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0usize, |acc, l| {
                let o = *acc;
                *acc += 2 * (l.weights.len() + l.bias.len());
                Some(o)
            })
            .collect();
        let max_w = self.layers.iter().map(|l| l.n_in.max(l.n_out)).max().unwrap_or(1);
        let mut tr = self.new_trace();
        let mut gy = vec![C::<T>::zero(); max_w];
        let mut gy1 = vec![C::<T>::zero(); max_w];
        let mut gy2 = vec![C::<T>::zero(); max_w];
        let mut gx = vec![C::<T>::zero(); max_w];
        let mut gx1 = vec![C::<T>::zero(); max_w];
        let mut gx2 = vec![C::<T>::zero(); max_w];
        let two = T::lit(2.0);

        for &(z, adj) in batch {
            if adj.is_zero() {
                continue;
            }
            self.run(z, &mut tr)?;
            gy[0] = adj.value;
            gy1[0] = adj.d1;
            gy2[0] = adj.d2;
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let (n_in, n_out) = (layer.n_in, layer.n_out);
                let off = offsets[l];
                let (x, x1, x2) = (&tr.x[l], &tr.x1[l], &tr.x2[l]);
                for i in 0..n_out {
                    let (a, a1, a2) = (gy[i], gy1[i], gy2[i]);
                    let row = off + 2 * i * n_in;
                    for j in 0..n_in {
                        let g = a * x[j].conj() + a1 * x1[j].conj() + a2 * x2[j].conj();
                        grad[row + 2 * j] = grad[row + 2 * j] + g.re;
                        grad[row + 2 * j + 1] = grad[row + 2 * j + 1] + g.im;
                    }
                    let b = off + 2 * layer.weights.len() + 2 * i;
                    grad[b] = grad[b] + a.re;
                    grad[b + 1] = grad[b + 1] + a.im;
                }
                if l == 0 {
                    break;
                }
                for j in 0..n_in {
                    let (mut s, mut s1, mut s2) = (C::zero(), C::zero(), C::zero());
                    for i in 0..n_out {
                        let w = layer.weights[i * n_in + j].conj();
                        s = s + w * gy[i];
                        s1 = s1 + w * gy1[i];
                        s2 = s2 + w * gy2[i];
                    }
                    gx[j] = s;
                    gx1[j] = s1;
                    gx2[j] = s2;
                }
                // back through exp: x = e, x1 = e*y1, x2 = e*(y2 + y1^2)
                for j in 0..n_in {
                    let e = x[j].conj();
                    gy[j] = e * gx[j] + x1[j].conj() * gx1[j] + x2[j].conj() * gx2[j];
                    gy1[j] = e * gx1[j] + (x1[j] * two).conj() * gx2[j];
                    gy2[j] = e * gx2[j];
                }
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("parameter gradient".into()));
        }
        Ok(())
    }

    /// Empirical second moments `E|x^(l)|^2` of the inputs to every layer
    /// (index 0 is the probe batch itself).
    pub fn probe_second_moments(&self, probe: &[C<T>]) -> Result<Vec<T>> {
        if probe.is_empty() {
            return Err(Error::EmptyProbeBatch);
        }
        let mut tr = self.new_trace();
        let mut sums = vec![T::zero(); self.layers.len()];
        for &z in probe {
            self.run(z, &mut tr)?;
            for (l, s) in sums.iter_mut().enumerate() {
                let n = T::from_usize(tr.x[l].len()).unwrap();
                *s = *s + tr.x[l].iter().map(|v| v.norm_sqr()).sum::<T>() / n;
            }
        }
        let n = T::from_usize(probe.len()).unwrap();
        Ok(sums.into_iter().map(|s| s / n).collect())
    }
}
