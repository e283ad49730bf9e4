//! Parametric feature maps `Φ_θ : R^d_in → R^d_out` with analytic parameter
//! gradients.
//!
//! Parameters live in one flat vector. Layouts (all matrices row-major):
//!
//! - `linear`: `A (d_out × d_in)`, `b (d_out)`; `Φ(x) = A x + b`
//! - `mlp1`: `A1 (h × d_in)`, `b1 (h)`, `A2 (d_out × h)`, `b2 (d_out)`;
//!   `Φ(x) = A2 relu(A1 x + b1) + b2`
//! - `precomputed`: no parameters; `Φ(x) = x`

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metric::MetricMatrix;

/// Architecture family, without dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum ArchKind {
    Precomputed,
    Linear,
    Mlp1,
}

impl ArchKind {
    pub(crate) fn tag(self) -> u8 {
        match self {
            ArchKind::Precomputed => 0,
            ArchKind::Linear => 1,
            ArchKind::Mlp1 => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ArchKind::Precomputed),
            1 => Some(ArchKind::Linear),
            2 => Some(ArchKind::Mlp1),
            _ => None,
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchKind::Precomputed => "precomputed",
            ArchKind::Linear => "linear",
            ArchKind::Mlp1 => "mlp1",
        })
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precomputed" => Ok(ArchKind::Precomputed),
            "linear" => Ok(ArchKind::Linear),
            "mlp1" => Ok(ArchKind::Mlp1),
            other => Err(Error::Config(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Architecture with its dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Precomputed { dim: usize },
    Linear { d_in: usize, d_out: usize },
    Mlp1 { d_in: usize, d_hidden: usize, d_out: usize },
}

impl Architecture {
    pub fn kind(&self) -> ArchKind {
        match self {
            Architecture::Precomputed { .. } => ArchKind::Precomputed,
            Architecture::Linear { .. } => ArchKind::Linear,
            Architecture::Mlp1 { .. } => ArchKind::Mlp1,
        }
    }

    pub fn d_in(&self) -> usize {
        match *self {
            Architecture::Precomputed { dim } => dim,
            Architecture::Linear { d_in, .. } | Architecture::Mlp1 { d_in, .. } => d_in,
        }
    }

    /// Hidden width for `mlp1`, zero otherwise.
    pub fn d_hidden(&self) -> usize {
        match *self {
            Architecture::Mlp1 { d_hidden, .. } => d_hidden,
            _ => 0,
        }
    }

    pub fn d_out(&self) -> usize {
        match *self {
            Architecture::Precomputed { dim } => dim,
            Architecture::Linear { d_out, .. } | Architecture::Mlp1 { d_out, .. } => d_out,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Precomputed { .. } => 0,
            Architecture::Linear { d_in, d_out } => d_out * d_in + d_out,
            Architecture::Mlp1 {
                d_in,
                d_hidden,
                d_out,
            } => d_hidden * d_in + d_hidden + d_out * d_hidden + d_out,
        }
    }

    /// Rebuilds an architecture from its serialized descriptor.
    pub fn from_parts(kind: ArchKind, d_in: usize, d_hidden: usize, d_out: usize) -> Result<Self> {
        let arch = match kind {
            ArchKind::Precomputed => {
                if d_out != d_in {
                    return Err(Error::Config(format!(
                        "precomputed features need d_out == d_in, got {d_out} and {d_in}"
                    )));
                }
                Architecture::Precomputed { dim: d_in }
            }
            ArchKind::Linear => Architecture::Linear { d_in, d_out },
            ArchKind::Mlp1 => Architecture::Mlp1 {
                d_in,
                d_hidden,
                d_out,
            },
        };
        arch.validate()?;
        Ok(arch)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Architecture::Precomputed { dim } => dim > 0,
            Architecture::Linear { d_in, d_out } => d_in > 0 && d_out > 0,
            Architecture::Mlp1 {
                d_in,
                d_hidden,
                d_out,
            } => d_in > 0 && d_hidden > 0 && d_out > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("all dimensions must be positive: {self:?}")))
        }
    }
}

/// A feature map together with its parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFunction {
    arch: Architecture,
    theta: Vec<f64>,
}

impl FeatureFunction {
    pub fn new(arch: Architecture, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::shape(arch.param_count(), theta.len(), "parameter vector"));
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i} is {}", theta[i])));
        }
        Ok(Self { arch, theta })
    }

    /// Draws weights from a unit normal truncated at ±2, scaled by
    /// `1/sqrt(fan_in)` of their layer. Biases start at zero.
    pub fn init_params(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::with_capacity(arch.param_count());
        let mut push_layer = |rows: usize, cols: usize, theta: &mut Vec<f64>| {
            let scale = 1.0 / (cols as f64).sqrt();
            for _ in 0..rows * cols {
                theta.push(truncated_normal(&mut rng) * scale);
            }
            theta.extend(std::iter::repeat_n(0.0, rows));
        };
        match arch {
            Architecture::Precomputed { .. } => {}
            Architecture::Linear { d_in, d_out } => push_layer(d_out, d_in, &mut theta),
            Architecture::Mlp1 {
                d_in,
                d_hidden,
                d_out,
            } => {
                push_layer(d_hidden, d_in, &mut theta);
                push_layer(d_out, d_hidden, &mut theta);
            }
        }
        Self::new(arch, theta)
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn d_in(&self) -> usize {
        self.arch.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.arch.d_out()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(match self.arch {
            Architecture::Precomputed { .. } => x.to_vec(),
            Architecture::Linear { d_in, d_out } => {
                let (a, b) = self.theta.split_at(d_out * d_in);
                affine(a, b, x)
            }
            Architecture::Mlp1 {
                d_in,
                d_hidden,
                d_out,
            } => {
                let l = Mlp1Layout::new(d_in, d_hidden, d_out);
                let mut h = affine(l.a1(&self.theta), l.b1(&self.theta), x);
                h.iter_mut().for_each(|v| *v = relu(*v));
                affine(l.a2(&self.theta), l.b2(&self.theta), &h)
            }
        })
    }

    /// Applies [`forward`](Self::forward) to every row.
    pub fn forward_batch(&self, points: &Array2<f64>) -> Result<Array2<f64>> {
        let n = points.nrows();
        let mut out = Array2::zeros((n, self.d_out()));
        for (i, row) in points.rows().into_iter().enumerate() {
            let phi = self.forward(&row_slice(row))?;
            out.row_mut(i).iter_mut().zip(phi).for_each(|(o, v)| *o = v);
        }
        Ok(out)
    }

    /// Adds `scale · (∂Φ(x)/∂θ)ᵀ u` into `grad`.
    pub fn accumulate_vjp(&self, x: &[f64], u: &[f64], scale: f64, grad: &mut [f64]) -> Result<()> {
        self.check_input(x)?;
        if u.len() != self.d_out() {
            return Err(Error::shape(self.d_out(), u.len(), "cotangent"));
        }
        if grad.len() != self.theta.len() {
            return Err(Error::shape(self.theta.len(), grad.len(), "gradient buffer"));
        }
        match self.arch {
            Architecture::Precomputed { .. } => {}
            Architecture::Linear { d_in, d_out } => {
                let (ga, gb) = grad.split_at_mut(d_out * d_in);
                outer_accumulate(ga, gb, u, x, scale);
            }
            Architecture::Mlp1 {
                d_in,
                d_hidden,
                d_out,
            } => {
                let l = Mlp1Layout::new(d_in, d_hidden, d_out);
                let z = affine(l.a1(&self.theta), l.b1(&self.theta), x);
                let h: Vec<f64> = z.iter().map(|&v| relu(v)).collect();
                // dL/dh = A2ᵀ u, gated by the relu derivative (0 at z == 0)
                let a2 = l.a2(&self.theta);
                let mut dz = vec![0.0; d_hidden];
                for (r, &ur) in u.iter().enumerate() {
                    let row = &a2[r * d_hidden..(r + 1) * d_hidden];
                    for (k, &w) in row.iter().enumerate() {
                        dz[k] += w * ur;
                    }
                }
                for (d, &zk) in dz.iter_mut().zip(&z) {
                    if zk <= 0.0 {
                        *d = 0.0;
                    }
                }
                let (first, second) = grad.split_at_mut(l.second_offset());
                let (ga1, gb1) = first.split_at_mut(d_hidden * d_in);
                let (ga2, gb2) = second.split_at_mut(d_out * d_hidden);
                outer_accumulate(ga2, gb2, u, &h, scale);
                outer_accumulate(ga1, gb1, &dz, x, scale);
            }
        }
        Ok(())
    }

    /// Gradient of `s_W(x_s, x_t) = Φ(x_s)ᵀ W Φ(x_t)` with respect to θ.
    pub fn param_grad_similarity(&self, w: &MetricMatrix, x_s: &[f64], x_t: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.theta.len()];
        self.accumulate_similarity_grad(w, x_s, x_t, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale · ∂s_W(x_s, x_t)/∂θ` into `grad`.
    pub fn accumulate_similarity_grad(
        &self,
        w: &MetricMatrix,
        x_s: &[f64],
        x_t: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if w.dim() != self.d_out() {
            return Err(Error::shape(self.d_out(), w.dim(), "metric dimension"));
        }
        let phi_s = self.forward(x_s)?;
        let phi_t = self.forward(x_t)?;
        self.accumulate_vjp(x_s, &w.apply(&phi_t), scale, grad)?;
        self.accumulate_vjp(x_t, &w.apply_transpose(&phi_s), scale, grad)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d_in() {
            return Err(Error::shape(self.d_in(), x.len(), "feature input"));
        }
        Ok(())
    }
}

struct Mlp1Layout {
    d_in: usize,
    d_hidden: usize,
    d_out: usize,
}

impl Mlp1Layout {
    fn new(d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        Self { d_in, d_hidden, d_out }
    }

    fn second_offset(&self) -> usize {
        self.d_hidden * self.d_in + self.d_hidden
    }

    fn a1<'a>(&self, t: &'a [f64]) -> &'a [f64] {
        &t[..self.d_hidden * self.d_in]
    }

    fn b1<'a>(&self, t: &'a [f64]) -> &'a [f64] {
        &t[self.d_hidden * self.d_in..self.second_offset()]
    }

    fn a2<'a>(&self, t: &'a [f64]) -> &'a [f64] {
        let s = self.second_offset();
        &t[s..s + self.d_out * self.d_hidden]
    }

    fn b2<'a>(&self, t: &'a [f64]) -> &'a [f64] {
        &t[self.second_offset() + self.d_out * self.d_hidden..]
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// `a x + b` with `a` row-major `(b.len() × x.len())`.
fn affine(a: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &a[r * cols..(r + 1) * cols];
            row.iter().zip(x).fold(bias, |acc, (&w, &xv)| acc + w * xv)
        })
        .collect()
}

/// `ga += scale · u xᵀ`, `gb += scale · u`.
fn outer_accumulate(ga: &mut [f64], gb: &mut [f64], u: &[f64], x: &[f64], scale: f64) {
    let cols = x.len();
    for (r, &ur) in u.iter().enumerate() {
        let su = scale * ur;
        gb[r] += su;
        for (g, &xv) in ga[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *g += su * xv;
        }
    }
}

fn truncated_normal(rng: &mut impl Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z;
        }
    }
}

pub(crate) fn row_slice(row: ArrayView1<'_, f64>) -> Vec<f64> {
    row.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precomputed_is_identity() {
        let f = FeatureFunction::init_params(Architecture::Precomputed { dim: 3 }, 9).unwrap();
        assert!(f.params().is_empty());
        assert_eq!(f.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn linear_identity_params() {
        let f = FeatureFunction::new(
            Architecture::Linear { d_in: 2, d_out: 2 },
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(f.forward(&[2.0, -1.0]).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn mlp1_hand_evaluation() {
        // A1 = I, b1 = [-1, -1], A2 = I, b2 = 0
        let theta = vec![1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let arch = Architecture::Mlp1 {
            d_in: 2,
            d_hidden: 2,
            d_out: 2,
        };
        let f = FeatureFunction::new(arch, theta).unwrap();
        assert_eq!(f.forward(&[2.0, 0.5]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn param_counts() {
        let lin = FeatureFunction::init_params(Architecture::Linear { d_in: 4, d_out: 3 }, 1).unwrap();
        assert_eq!(lin.params().len(), 15);
        let mlp = Architecture::Mlp1 {
            d_in: 4,
            d_hidden: 5,
            d_out: 3,
        };
        assert_eq!(mlp.param_count(), 5 * 4 + 5 + 3 * 5 + 3);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let arch = Architecture::Mlp1 {
            d_in: 4,
            d_hidden: 9,
            d_out: 3,
        };
        let a = FeatureFunction::init_params(arch, 42).unwrap();
        let b = FeatureFunction::init_params(arch, 42).unwrap();
        let c = FeatureFunction::init_params(arch, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // first layer: fan-in 4 → |w| ≤ 2 / 2
        assert!(a.params()[..36].iter().all(|w| w.abs() <= 1.0));
        // first-layer biases are zero
        assert!(a.params()[36..45].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_dims_rejected() {
        let err = FeatureFunction::init_params(Architecture::Linear { d_in: 0, d_out: 3 }, 1);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let f = FeatureFunction::init_params(Architecture::Linear { d_in: 2, d_out: 2 }, 1).unwrap();
        assert!(matches!(f.forward(&[1.0]), Err(Error::Shape(_))));
        let w = MetricMatrix::identity(3);
        assert!(matches!(
            f.param_grad_similarity(&w, &[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn precomputed_gradient_is_empty() {
        let f = FeatureFunction::init_params(Architecture::Precomputed { dim: 2 }, 1).unwrap();
        let w = MetricMatrix::identity(2);
        assert!(f.param_grad_similarity(&w, &[1.0, 2.0], &[3.0, 4.0]).unwrap().is_empty());
    }

    #[test]
    fn forward_is_pure() {
        let arch = Architecture::Mlp1 {
            d_in: 3,
            d_hidden: 4,
            d_out: 2,
        };
        let f = FeatureFunction::init_params(arch, 5).unwrap();
        let x = [0.3, -1.2, 2.5];
        let a = f.forward(&x).unwrap();
        let b = f.forward(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn arch_kind_parses() {
        assert_eq!("mlp1".parse::<ArchKind>().unwrap(), ArchKind::Mlp1);
        assert!("cnn".parse::<ArchKind>().is_err());
        for k in [ArchKind::Precomputed, ArchKind::Linear, ArchKind::Mlp1] {
            assert_eq!(ArchKind::from_tag(k.tag()), Some(k));
            assert_eq!(k.to_string().parse::<ArchKind>().unwrap(), k);
        }
    }
}
