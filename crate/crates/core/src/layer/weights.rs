//! Weight containers for one mixing layer.

use num_complex::Complex;

use super::config::LayerConfig;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Smooth GELU nonlinearity (tanh form).
pub fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_real(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = T::from_real(0.044_715);
    let half = T::from_real(0.5);
    let inner = c * (x + k * x * x * x);
    half * x * (T::one() + inner.tanh())
}

/// Fully connected layer, `y = x . W + b` with `W` stored `input x output`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(w: Matrix<T>, b: Vec<T>) -> Self {
        assert_eq!(w.cols(), b.len(), "dense bias width mismatch");
        Dense { w, b }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Matrix::zeros(input, output),
            b: vec![T::zero(); output],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.in_dim());
        let mut y = self.b.clone();
        for (i, &xi) in x.iter().enumerate() {
            for (o, &w) in y.iter_mut().zip(self.w.row(i)) {
                *o += xi * w;
            }
        }
        y
    }

    pub fn param_count(&self) -> u64 {
        (self.w.data().len() + self.b.len()) as u64
    }
}

/// Two dense layers with a GELU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub hidden: Dense<T>,
    pub out: Dense<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            hidden: Dense::zeros(input, hidden),
            out: Dense::zeros(hidden, output),
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_with_hidden(x).0
    }

    /// Returns `(output, hidden activation)`; the hidden activation also
    /// feeds the optional memory-gate extension.
    pub fn forward_with_hidden(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let mut h = self.hidden.forward(x);
        for v in &mut h {
            *v = gelu(*v);
        }
        let y = self.out.forward(&h);
        (y, h)
    }

    pub fn param_count(&self) -> u64 {
        self.hidden.param_count() + self.out.param_count()
    }
}

/// LayerNorm gain/bias over a `d`-dim vector, eps = 1e-5. A constant input
/// normalizes to the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<T> {
    pub gain: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LayerNormParams<T> {
    pub fn identity(dim: usize) -> Self {
        LayerNormParams {
            gain: vec![T::one(); dim],
            bias: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gain.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim());
        let n = T::from_real(x.len() as f64);
        let mean = x.iter().copied().sum::<T>() / n;
        let var = x
            .iter()
            .map(|&v| {
                let d = v - mean;
                d * d
            })
            .sum::<T>()
            / n;
        let denom = (var + T::from_real(1e-5)).sqrt();
        x.iter()
            .zip(self.gain.iter().zip(&self.bias))
            .map(|(&v, (&g, &b))| (v - mean) / denom * g + b)
            .collect()
    }

    pub fn apply_rows(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            out.row_mut(r).copy_from_slice(&self.apply(m.row(r)));
        }
        out
    }

    pub fn param_count(&self) -> u64 {
        (self.gain.len() + self.bias.len()) as u64
    }
}

/// All learnable state of a single mixing head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights<T> {
    /// Query projection, `d x d`.
    pub w_q: Matrix<T>,
    /// Value projection, `d x d`.
    pub w_v: Matrix<T>,
    /// LayerNorm applied to the pooled query descriptor.
    pub descriptor_norm: LayerNormParams<T>,
    /// Descriptor -> interleaved re/im gate values, `d -> h -> 2*(n_fft/2+1)`.
    pub gate_mlp: Mlp<T>,
    /// Per-bin modReLU bias, length `n_fft/2 + 1`.
    pub modrelu_bias: Vec<T>,
    /// Spectral Toeplitz kernel, length `2r + 1`.
    pub toeplitz_kernel: Vec<Complex<T>>,
    /// Descriptor -> per-band per-channel refinement gains,
    /// `d -> h -> (J+1)*d`.
    pub wrm_mlp: Mlp<T>,
    /// Bias of the deterministic refinement controller stub.
    pub wrm_controller_logit: T,
    /// Optional extra dense head on the gate MLP's hidden activation that
    /// emits gate values for the persistent-memory bins.
    pub mem_gate_ext: Option<Dense<T>>,
}

impl<T: Scalar> HeadWeights<T> {
    pub fn zeros(cfg: &LayerConfig) -> Self {
        let d = cfg.head_dim;
        HeadWeights {
            w_q: Matrix::zeros(d, d),
            w_v: Matrix::zeros(d, d),
            descriptor_norm: LayerNormParams::identity(d),
            gate_mlp: Mlp::zeros(d, cfg.gate_hidden, 2 * cfg.bins()),
            modrelu_bias: vec![T::zero(); cfg.bins()],
            toeplitz_kernel: vec![Complex::default(); 2 * cfg.toeplitz_radius + 1],
            wrm_mlp: Mlp::zeros(d, cfg.gate_hidden, (cfg.wrm_levels + 1) * d),
            wrm_controller_logit: T::zero(),
            mem_gate_ext: None,
        }
    }

    /// Identity projections with the gate pinned to all-ones, so the head
    /// reduces to pad -> transform -> inverse -> truncate.
    pub fn transparent(cfg: &LayerConfig) -> Self {
        let mut head = Self::zeros(cfg);
        head.w_q = Matrix::identity(cfg.head_dim);
        head.w_v = Matrix::identity(cfg.head_dim);
        for k in 0..cfg.bins() {
            head.gate_mlp.out.b[2 * k] = T::one();
        }
        head
    }

    /// Parameters specific to the spectral mixer: gate MLP, modReLU bias,
    /// Toeplitz kernel, refinement MLP, controller logit and the optional
    /// memory-gate extension. Complex entries count as two reals.
    pub fn spectre_param_count(&self) -> u64 {
        self.gate_mlp.param_count()
            + self.modrelu_bias.len() as u64
            + 2 * self.toeplitz_kernel.len() as u64
            + self.wrm_mlp.param_count()
            + 1
            + self.mem_gate_ext.as_ref().map_or(0, Dense::param_count)
    }

    pub fn param_count(&self) -> u64 {
        (self.w_q.data().len() + self.w_v.data().len()) as u64
            + self.descriptor_norm.param_count()
            + self.spectre_param_count()
    }
}

/// One mixing layer: `H` heads plus the output projection over the concat.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub heads: Vec<HeadWeights<T>>,
    /// Output projection over concatenated heads, `(H*d) x (H*d)`.
    pub w_o: Matrix<T>,
}

impl<T: Scalar> LayerWeights<T> {
    pub fn zeros(cfg: &LayerConfig) -> Self {
        let dm = cfg.heads * cfg.head_dim;
        LayerWeights {
            heads: (0..cfg.heads).map(|_| HeadWeights::zeros(cfg)).collect(),
            w_o: Matrix::zeros(dm, dm),
        }
    }

    pub fn transparent(cfg: &LayerConfig) -> Self {
        let dm = cfg.heads * cfg.head_dim;
        LayerWeights {
            heads: (0..cfg.heads)
                .map(|_| HeadWeights::transparent(cfg))
                .collect(),
            w_o: Matrix::identity(dm),
        }
    }

    pub fn spectre_param_count(&self) -> u64 {
        self.heads
            .iter()
            .map(HeadWeights::spectre_param_count)
            .sum()
    }

    pub fn param_count(&self) -> u64 {
        self.heads.iter().map(HeadWeights::param_count).sum::<u64>() + self.w_o.data().len() as u64
    }
}
