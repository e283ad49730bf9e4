//! Asymmetric bilinear similarity, cosine similarity, and the triplet hinge
//! loss with its subgradient.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Norms below this make [`cosine`] return 0.
pub const COSINE_EPS: f64 = 1e-12;

/// Square matrix `W` of `s_W(a, b) = aᵀ W b`. Rows index source features,
/// columns index target features. Not required to be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix(Array2<f64>);

impl MetricMatrix {
    pub fn identity(dim: usize) -> Self {
        Self(Array2::eye(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Array2::zeros((dim, dim)))
    }

    pub fn from_array(w: Array2<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::Shape(format!(
                "metric matrix must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric matrix entry".into()));
        }
        // keep a standard layout so `entries` is always available
        Ok(Self(w.as_standard_layout().into_owned()))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let mut flat = Vec::with_capacity(d * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::shape(d, r.len(), "metric row"));
            }
            flat.extend_from_slice(r);
        }
        Self::from_array(Array2::from_shape_vec((d, d), flat).expect("checked shape"))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        self.0.as_slice().expect("standard layout")
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        self.0.as_slice_mut().expect("standard layout")
    }

    /// `W v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.0
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(v).fold(0.0, |acc, (&w, &x)| acc + w * x))
            .collect()
    }

    /// `Wᵀ v`
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (row, &vr) in self.0.rows().into_iter().zip(v) {
            for (o, &w) in out.iter_mut().zip(row.iter()) {
                *o += w * vr;
            }
        }
        out
    }

    /// `s_W(φ_s, φ_t) = φ_sᵀ W φ_t`.
    pub fn similarity(&self, phi_s: &[f64], phi_t: &[f64]) -> Result<f64> {
        let d = self.dim();
        if phi_s.len() != d {
            return Err(Error::shape(d, phi_s.len(), "source feature"));
        }
        if phi_t.len() != d {
            return Err(Error::shape(d, phi_t.len(), "target feature"));
        }
        Ok(dot(phi_s, &self.apply(phi_t)))
    }

    /// `scores[(i, j)] = s_W(source_i, target_j)`, with the same arithmetic
    /// as [`similarity`](Self::similarity).
    pub fn score_matrix(&self, source: &Array2<f64>, target: &Array2<f64>) -> Result<Array2<f64>> {
        let d = self.dim();
        if source.ncols() != d || target.ncols() != d {
            return Err(Error::Shape(format!(
                "feature widths {} / {} do not match metric dimension {d}",
                source.ncols(),
                target.ncols()
            )));
        }
        let source_rows: Vec<Vec<f64>> = source.rows().into_iter().map(to_vec).collect();
        let mut scores = Array2::zeros((source.nrows(), target.nrows()));
        for (j, t) in target.rows().into_iter().enumerate() {
            let wt = self.apply(&to_vec(t));
            for (i, s) in source_rows.iter().enumerate() {
                scores[(i, j)] = dot(s, &wt);
            }
        }
        Ok(scores)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na < COSINE_EPS || nb < COSINE_EPS {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (&x, &y)| acc + x * y)
}

fn to_vec(v: ArrayView1<'_, f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// A source anchor with its most similar same-label and different-label
/// targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub source: usize,
    pub positive: usize,
    pub negative: usize,
    /// `s⁻ − s⁺ + margin` at selection time; the hinge is active when > 0.
    pub margin_violation: f64,
}

impl Triplet {
    pub fn is_active(&self) -> bool {
        self.margin_violation > 0.0
    }
}

/// Picks the triplet for one source point from its row of similarity
/// scores against the target batch. Returns `None` when either the
/// same-label or the different-label set is empty. Ties go to the lowest
/// target index.
pub fn select_from_scores(
    source: usize,
    source_label: usize,
    scores: &[f64],
    target_labels: &[usize],
    margin: f64,
) -> Option<Triplet> {
    let mut pos: Option<(usize, f64)> = None;
    let mut neg: Option<(usize, f64)> = None;
    for (j, (&s, &y)) in scores.iter().zip(target_labels).enumerate() {
        let slot = if y == source_label { &mut pos } else { &mut neg };
        match slot {
            Some((_, best)) if s <= *best => {}
            _ => *slot = Some((j, s)),
        }
    }
    let ((positive, sp), (negative, sn)) = (pos?, neg?);
    Some(Triplet {
        source,
        positive,
        negative,
        margin_violation: sn - sp + margin,
    })
}

/// Triplet selection from features: scores the source feature against every
/// target row under `w`, then applies [`select_from_scores`].
pub fn select_triplet(
    w: &MetricMatrix,
    source: usize,
    source_label: usize,
    source_feature: &[f64],
    target_features: &Array2<f64>,
    target_labels: &[usize],
    margin: f64,
) -> Result<Option<Triplet>> {
    if target_features.nrows() == 0 {
        return Err(Error::Precondition("empty target batch".into()));
    }
    if target_labels.len() != target_features.nrows() {
        return Err(Error::shape(target_features.nrows(), target_labels.len(), "target labels"));
    }
    let scores = target_features
        .rows()
        .into_iter()
        .map(|t| w.similarity(source_feature, &to_vec(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(select_from_scores(source, source_label, &scores, target_labels, margin))
}

fn triplet_violation(
    w: &MetricMatrix,
    t: &Triplet,
    source_features: &Array2<f64>,
    target_features: &Array2<f64>,
    margin: f64,
) -> Result<f64> {
    let row = |m: &Array2<f64>, i: usize, what: &str| -> Result<Vec<f64>> {
        if i >= m.nrows() {
            return Err(Error::Shape(format!("{what} index {i} out of range {}", m.nrows())));
        }
        Ok(to_vec(m.row(i)))
    };
    let s = row(source_features, t.source, "source")?;
    let sp = w.similarity(&s, &row(target_features, t.positive, "positive")?)?;
    let sn = w.similarity(&s, &row(target_features, t.negative, "negative")?)?;
    Ok(sn - sp + margin)
}

/// `Σ [s⁻ − s⁺ + α]_+ + λ_W · ½‖W‖_F²`, with similarities recomputed
/// from `w`.
pub fn triplet_loss(
    w: &MetricMatrix,
    triplets: &[Triplet],
    source_features: &Array2<f64>,
    target_features: &Array2<f64>,
    margin: f64,
    lambda_w: f64,
) -> Result<f64> {
    let mut hinge = 0.0;
    for t in triplets {
        let v = triplet_violation(w, t, source_features, target_features, margin)?;
        if v > 0.0 {
            hinge += v;
        }
    }
    Ok(hinge + lambda_w * 0.5 * w.frobenius_sq())
}

/// Subgradient of [`triplet_loss`] with respect to `W`. A triplet
/// contributes `φ_s (φ⁻ − φ⁺)ᵀ` when its hinge argument is positive.
pub fn grad_w(
    w: &MetricMatrix,
    triplets: &[Triplet],
    source_features: &Array2<f64>,
    target_features: &Array2<f64>,
    margin: f64,
    lambda_w: f64,
) -> Result<Array2<f64>> {
    let d = w.dim();
    let mut g = w.as_array() * lambda_w;
    for t in triplets {
        if triplet_violation(w, t, source_features, target_features, margin)? <= 0.0 {
            continue;
        }
        let s = source_features.row(t.source);
        let pos = target_features.row(t.positive);
        let neg = target_features.row(t.negative);
        for a in 0..d {
            for b in 0..d {
                g[(a, b)] += s[a] * (neg[b] - pos[b]);
            }
        }
    }
    Ok(g)
}
