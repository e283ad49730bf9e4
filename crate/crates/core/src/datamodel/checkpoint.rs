//! Binary checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! "TDCK"  u32 version
//! 5 × { u64 byte length, payload }:
//!   config      u64 iteration, u64 seed, u64 batch_size, f64 margin,
//!               f64 lambda, u64 knn_k, f64 learning_rate, u64 max_iters,
//!               u8 arch, u64 d_out, u64 d_hidden, f64 lambda_w,
//!               f64 adagrad_epsilon, u8 flags (1 = propagation, 2 = feature learning)
//!   descriptor  u8 arch, u64 d_in, u64 d_hidden, u64 d_out
//!   theta       f64 × param_count
//!   metric      u64 dim, f64 × dim² (row-major)
//!   optimizer   u64 n, f64 × n (W accumulators), u64 m, f64 × m (θ accumulators)
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::{ArchKind, Architecture, FeatureFunction};
use crate::metric::MetricMatrix;
use crate::trainer::{AdaGradState, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TDCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const SECTION_COUNT: usize = 5;

/// Complete model and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub features: FeatureFunction,
    pub metric: MetricMatrix,
    pub optimizer: AdaGradState,
    /// Completed training iterations.
    pub iteration: u64,
}

impl Checkpoint {
    /// Untrained state: `W = I`, θ from its seeded initializer, zero
    /// accumulators.
    pub fn initial(config: TrainConfig, d_in: usize) -> Result<Self> {
        let arch = config.architecture(d_in)?;
        let features = FeatureFunction::init_params(arch, config.seed)?;
        let d = arch.d_out();
        Ok(Self {
            metric: MetricMatrix::identity(d),
            optimizer: AdaGradState::new(d * d, features.params().len()),
            features,
            config,
            iteration: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.features.d_out();
        if self.metric.dim() != d {
            return Err(Error::Format(format!(
                "metric is {0}x{0} but the feature descriptor outputs {d}",
                self.metric.dim()
            )));
        }
        if self.optimizer.w.len() != d * d {
            return Err(Error::Format(format!(
                "{} metric accumulators for a {d}x{d} metric",
                self.optimizer.w.len()
            )));
        }
        if self.optimizer.theta.len() != self.features.params().len() {
            return Err(Error::Format(format!(
                "{} parameter accumulators for {} parameters",
                self.optimizer.theta.len(),
                self.features.params().len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let cfg = &self.config;
        let mut config = Writer::default();
        config.u64(self.iteration);
        config.u64(cfg.seed);
        config.usize(cfg.batch_size);
        config.f64(cfg.margin);
        config.f64(cfg.lambda);
        config.usize(cfg.knn_k);
        config.f64(cfg.learning_rate);
        config.usize(cfg.max_iters);
        config.u8(cfg.arch.tag());
        config.usize(cfg.d_out);
        config.usize(cfg.d_hidden);
        config.f64(cfg.lambda_w);
        config.f64(cfg.adagrad_epsilon);
        config.u8(u8::from(cfg.label_propagation) | (u8::from(cfg.feature_learning) << 1));

        let arch = self.features.arch();
        let mut descriptor = Writer::default();
        descriptor.u8(arch.kind().tag());
        descriptor.usize(arch.d_in());
        descriptor.usize(arch.d_hidden());
        descriptor.usize(arch.d_out());

        let mut theta = Writer::default();
        theta.f64s(self.features.params());

        let mut metric = Writer::default();
        metric.usize(self.metric.dim());
        metric.f64s(self.metric.entries());

        let mut optimizer = Writer::default();
        optimizer.usize(self.optimizer.w.len());
        optimizer.f64s(&self.optimizer.w);
        optimizer.usize(self.optimizer.theta.len());
        optimizer.f64s(&self.optimizer.theta);

        let mut out = Writer::default();
        out.0.extend_from_slice(CHECKPOINT_MAGIC);
        out.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for section in [config, descriptor, theta, metric, optimizer] {
            out.usize(section.0.len());
            out.0.extend_from_slice(&section.0);
        }
        Ok(out.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let mut outer = Reader::new(&bytes[8..], "checkpoint");
        let mut sections = Vec::with_capacity(SECTION_COUNT);
        for name in ["config", "descriptor", "theta", "metric", "optimizer"] {
            let len = outer.usize()?;
            sections.push(Reader::new(outer.take(len)?, name));
        }
        outer.finish()?;
        let [mut config, mut descriptor, mut theta, mut metric, mut optimizer]: [Reader<'_>; SECTION_COUNT] =
            sections.try_into().expect("five sections");

        let iteration = config.u64()?;
        let seed = config.u64()?;
        let batch_size = config.usize()?;
        let margin = config.f64()?;
        let lambda = config.f64()?;
        let knn_k = config.usize()?;
        let learning_rate = config.f64()?;
        let max_iters = config.usize()?;
        let arch = config.arch()?;
        let d_out = config.usize()?;
        let d_hidden = config.usize()?;
        let lambda_w = config.f64()?;
        let adagrad_epsilon = config.f64()?;
        let flags = config.u8()?;
        if flags > 3 {
            return Err(Error::Format(format!("unknown config flags {flags:#x}")));
        }
        config.finish()?;
        let cfg = TrainConfig {
            batch_size,
            margin,
            lambda,
            knn_k,
            learning_rate,
            max_iters,
            seed,
            arch,
            d_out,
            d_hidden,
            lambda_w,
            label_propagation: flags & 1 != 0,
            feature_learning: flags & 2 != 0,
            adagrad_epsilon,
        };

        let kind = descriptor.arch()?;
        let d_in = descriptor.usize()?;
        let dh = descriptor.usize()?;
        let dout = descriptor.usize()?;
        descriptor.finish()?;
        let architecture = Architecture::from_parts(kind, d_in, dh, dout)
            .map_err(|e| Error::Format(format!("bad feature descriptor: {e}")))?;

        let params = theta.rest_f64s()?;
        if params.len() != architecture.param_count() {
            return Err(Error::Format(format!(
                "descriptor needs {} parameters, file has {}",
                architecture.param_count(),
                params.len()
            )));
        }
        let features = FeatureFunction::new(architecture, params)
            .map_err(|e| Error::Format(format!("bad parameters: {e}")))?;

        let dim = metric.usize()?;
        let entries = metric.rest_f64s()?;
        if dim.checked_mul(dim) != Some(entries.len()) {
            return Err(Error::Format(format!(
                "metric declares dimension {dim} but holds {} entries",
                entries.len()
            )));
        }
        let metric = MetricMatrix::from_array(Array2::from_shape_vec((dim, dim), entries).expect("checked"))
            .map_err(|e| Error::Format(format!("bad metric: {e}")))?;

        let n = optimizer.usize()?;
        let w_acc = optimizer.f64s(n)?;
        let m = optimizer.usize()?;
        let theta_acc = optimizer.f64s(m)?;
        optimizer.finish()?;

        let ckpt = Self {
            config: cfg,
            features,
            metric,
            optimizer: AdaGradState {
                w: w_acc,
                theta: theta_acc,
            },
            iteration,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

#[derive(Debug)]
struct Reader<'a> {
    bytes: &'a [u8],
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], section: &'static str) -> Self {
        Self { bytes, section }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() {
            return Err(Error::Format(format!(
                "{} section truncated: need {n} bytes, have {}",
                self.section,
                self.bytes.len()
            )));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("{} value {v} too large", self.section)))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format(format!("{} length overflows", self.section)))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn rest_f64s(&mut self) -> Result<Vec<f64>> {
        if !self.bytes.len().is_multiple_of(8) {
            return Err(Error::Format(format!("{} section length is not a multiple of 8", self.section)));
        }
        self.f64s(self.bytes.len() / 8)
    }

    fn arch(&mut self) -> Result<ArchKind> {
        let tag = self.u8()?;
        ArchKind::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown architecture tag {tag}")))
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "{} trailing bytes after {} section",
                self.bytes.len(),
                self.section
            )))
        }
    }
}
