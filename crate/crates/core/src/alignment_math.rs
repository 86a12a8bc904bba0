//! Numeric pieces of signal-text contrastive alignment: patch tokens,
//! cosine similarity, the InfoNCE objective with its gradient, the LoRA
//! forward pass and cosine zero-shot classification.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util;
use crate::signal_processing::Spectrogram;

/// Non-overlapping `P x P` patches of a spectrogram, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    /// `rows * cols` patches of `P * P` values each, flattened row-major.
    pub patches: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    /// Token 0 of the sequence is reserved for a class token.
    pub has_class_slot: bool,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// `(temporal, doppler)` grid position of patch `p`.
    pub fn position(&self, p: usize) -> (usize, usize) {
        (p / self.cols, p % self.cols)
    }

    /// Sequence index of patch `p`, shifted past the class slot if present.
    pub fn token_index(&self, p: usize) -> usize {
        p + self.has_class_slot as usize
    }

    pub fn height(&self) -> usize {
        self.rows * self.patch_size
    }

    pub fn width(&self) -> usize {
        self.cols * self.patch_size
    }
}

pub fn patchify(s: &Spectrogram, patch_size: usize, has_class_slot: bool) -> Result<PatchGrid> {
    let (h, w, p) = (s.height, s.width, patch_size);
    if p == 0 || h % p != 0 || w % p != 0 || h == 0 || w == 0 {
        return Err(Error::param(
            "patch_size",
            format!("{p} does not divide spectrogram of H={h}, W={w}"),
        ));
    }
    if s.values.len() != h * w {
        return Err(Error::SizeMismatch {
            expected: h * w,
            actual: s.values.len(),
        });
    }
    let (rows, cols) = (h / p, w / p);
    let mut patches = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut patch = Vec::with_capacity(p * p);
            for r in 0..p {
                let start = (i * p + r) * w + j * p;
                patch.extend_from_slice(&s.values[start..start + p]);
            }
            patches.push(patch);
        }
    }
    Ok(PatchGrid {
        patches,
        rows,
        cols,
        patch_size: p,
        has_class_slot,
    })
}

/// Reassemble the `H x W` row-major values of a patch grid.
pub fn unpatchify(grid: &PatchGrid) -> Vec<f64> {
    let (p, w) = (grid.patch_size, grid.width());
    let mut out = vec![0.0; grid.height() * w];
    for (n, patch) in grid.patches.iter().enumerate() {
        let (i, j) = grid.position(n);
        for r in 0..p {
            let start = (i * p + r) * w + j * p;
            out[start..start + p].copy_from_slice(&patch[r * p..(r + 1) * p]);
        }
    }
    out
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", u.len(), v.len())));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn normalize(u: &[f64]) -> Result<Vec<f64>> {
    let n = norm(u);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(u.iter().map(|x| x / n).collect())
}

/// Paired signal and text embeddings, row `i` of each forming a positive
/// pair. Both matrices are `n x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    pub n: usize,
    pub dim: usize,
    pub signal: Vec<f64>,
    pub text: Vec<f64>,
    pub temperature: f64,
}

impl EmbeddingBatch {
    /// Batch whose rows must be unit vectors.
    pub fn new(n: usize, dim: usize, signal: Vec<f64>, text: Vec<f64>, temperature: f64) -> Result<Self> {
        let b = EmbeddingBatch::unnormalized(n, dim, signal, text, temperature)?;
        for (which, m) in [("signal", &b.signal), ("text", &b.text)] {
            for (i, row) in m.chunks(dim).enumerate() {
                let len = norm(row);
                if (len - 1.0).abs() > 1e-6 {
                    return Err(Error::param("embeddings", format!("{which} row {i} has norm {len}")));
                }
            }
        }
        Ok(b)
    }

    /// Batch with arbitrary rows; the loss is then a function of the raw
    /// entries.
    pub fn unnormalized(n: usize, dim: usize, signal: Vec<f64>, text: Vec<f64>, temperature: f64) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::Empty("embedding batch"));
        }
        if signal.len() != n * dim || text.len() != n * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {n}x{dim}, got {} signal and {} text values",
                signal.len(),
                text.len()
            )));
        }
        if !(temperature > 0.0) {
            return Err(Error::param("temperature", format!("must be > 0, got {temperature}")));
        }
        Ok(EmbeddingBatch {
            n,
            dim,
            signal,
            text,
            temperature,
        })
    }

    pub fn signal_row(&self, i: usize) -> &[f64] {
        &self.signal[i * self.dim..(i + 1) * self.dim]
    }

    pub fn text_row(&self, i: usize) -> &[f64] {
        &self.text[i * self.dim..(i + 1) * self.dim]
    }

    /// `logits[i][j] = v_i . t_j / tau`.
    pub fn logits(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                l[i * n + j] = dot(self.signal_row(i), self.text_row(j)) / self.temperature;
            }
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        Ok(l)
    }
}

/// Which InfoNCE normalization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoNceForm {
    /// One softmax per pair over the union of its row and column,
    /// `-log(exp(L_ii) / (sum_j exp(L_ij) + sum_j exp(L_ji)))`; the positive
    /// logit is counted in both sums.
    #[default]
    Joint,
    /// The usual symmetric CLIP loss: mean of row-wise and column-wise
    /// cross entropies.
    Symmetric,
}

fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss of a logit matrix and its gradient with respect to the logits.
pub fn infonce_from_logits(logits: &[f64], n: usize, form: InfoNceForm) -> (f64, Vec<f64>) {
    let at = |i: usize, j: usize| logits[i * n + j];
    let nf = n as f64;
    let mut grad = vec![0.0; n * n];
    let mut loss = 0.0;
    match form {
        InfoNceForm::Joint => {
            let log_z: Vec<f64> = (0..n)
                .map(|i| logsumexp((0..n).map(move |j| at(i, j)).chain((0..n).map(move |j| at(j, i)))))
                .collect();
            for (i, lz) in log_z.iter().enumerate() {
                loss += lz - at(i, i);
            }
            for a in 0..n {
                for b in 0..n {
                    let l = at(a, b);
                    let g = (l - log_z[a]).exp() + (l - log_z[b]).exp() - if a == b { 1.0 } else { 0.0 };
                    grad[a * n + b] = g / nf;
                }
            }
            (loss / nf, grad)
        }
        InfoNceForm::Symmetric => {
            let row: Vec<f64> = (0..n).map(|i| logsumexp((0..n).map(move |j| at(i, j)))).collect();
            let col: Vec<f64> = (0..n).map(|j| logsumexp((0..n).map(move |i| at(i, j)))).collect();
            for i in 0..n {
                loss += row[i] + col[i] - 2.0 * at(i, i);
            }
            for a in 0..n {
                for b in 0..n {
                    let l = at(a, b);
                    let g = (l - row[a]).exp() + (l - col[b]).exp() - if a == b { 2.0 } else { 0.0 };
                    grad[a * n + b] = g / (2.0 * nf);
                }
            }
            (loss / (2.0 * nf), grad)
        }
    }
}

pub fn infonce_loss(batch: &EmbeddingBatch) -> Result<f64> {
    infonce_loss_with(batch, InfoNceForm::Joint)
}

pub fn infonce_loss_with(batch: &EmbeddingBatch, form: InfoNceForm) -> Result<f64> {
    let logits = batch.logits()?;
    Ok(infonce_from_logits(&logits, batch.n, form).0)
}

/// Gradients of the loss with respect to the raw signal and text entries.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub loss: f64,
    pub signal: Vec<f64>,
    pub text: Vec<f64>,
}

pub fn infonce_grad(batch: &EmbeddingBatch) -> Result<InfoNceGrad> {
    infonce_grad_with(batch, InfoNceForm::Joint)
}

pub fn infonce_grad_with(batch: &EmbeddingBatch, form: InfoNceForm) -> Result<InfoNceGrad> {
    let (n, d) = (batch.n, batch.dim);
    let logits = batch.logits()?;
    let (loss, g) = infonce_from_logits(&logits, n, form);
    let inv_tau = 1.0 / batch.temperature;
    let mut signal = vec![0.0; n * d];
    let mut text = vec![0.0; n * d];
    for a in 0..n {
        for b in 0..n {
            let gab = g[a * n + b] * inv_tau;
            if gab == 0.0 {
                continue;
            }
            for k in 0..d {
                signal[a * d + k] += gab * batch.text[b * d + k];
                text[b * d + k] += gab * batch.signal[a * d + k];
            }
        }
    }
    Ok(InfoNceGrad { loss, signal, text })
}

/// Frozen `w0` (`d x k`) plus a rank-`r` update `b a` with `b` `d x r` and
/// `a` `r x k`. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraLinear {
    pub d: usize,
    pub k: usize,
    pub rank: usize,
    pub w0: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LoraLinear {
    pub fn new(d: usize, k: usize, rank: usize, w0: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if rank > d.min(k) {
            return Err(Error::param("rank", format!("{rank} exceeds min({d}, {k})")));
        }
        for (name, m, len) in [("w0", &w0, d * k), ("a", &a, rank * k), ("b", &b, d * rank)] {
            if m.len() != len {
                return Err(Error::DimensionMismatch(format!("{name} has {} values, expected {len}", m.len())));
            }
        }
        Ok(LoraLinear { d, k, rank, w0, a, b })
    }

    /// `w0 + b a`, materialized.
    pub fn merged(&self) -> Vec<f64> {
        let mut w = self.w0.clone();
        for i in 0..self.d {
            for j in 0..self.k {
                w[i * self.k + j] += (0..self.rank).map(|r| self.b[i * self.rank + r] * self.a[r * self.k + j]).sum::<f64>();
            }
        }
        w
    }
}

fn matvec(m: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    m.chunks(cols.max(1)).map(|row| dot(row, x)).collect()
}

/// `w0 x + b (a x)`, without forming `b a`.
pub fn lora_forward(layer: &LoraLinear, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != layer.k {
        return Err(Error::DimensionMismatch(format!("input has {} values, layer expects {}", x.len(), layer.k)));
    }
    let mut h = matvec(&layer.w0, layer.k, x);
    if layer.rank > 0 {
        let ax = matvec(&layer.a, layer.k, x);
        for (hi, bi) in h.iter_mut().zip(layer.b.chunks(layer.rank)) {
            *hi += dot(bi, &ax);
        }
    }
    Ok(h)
}

/// Index of the label embedding with the highest cosine similarity; ties
/// go to the lowest index.
pub fn zero_shot_classify(signal: &[f64], labels: &[(String, Vec<f64>)]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (_, emb)) in labels.iter().enumerate() {
        let s = cosine_similarity(signal, emb)?;
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

const EMBEDDING_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub format_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub normalized: bool,
}

/// Row-major `n x d` matrix of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f32>,
    pub normalized: bool,
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if m.values.len() != m.n * m.d {
        return Err(Error::SizeMismatch {
            expected: m.n * m.d,
            actual: m.values.len(),
        });
    }
    io_util::write_f32_le(path, m.values.iter().copied())?;
    io_util::write_json(
        &io_util::sidecar_path(path),
        &EmbeddingSidecar {
            format_version: EMBEDDING_FORMAT_VERSION,
            n: m.n,
            d: m.d,
            normalized: m.normalized,
        },
    )
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let side: EmbeddingSidecar = io_util::read_json(&io_util::sidecar_path(path))?;
    if side.format_version != EMBEDDING_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: side.format_version,
            expected: EMBEDDING_FORMAT_VERSION,
        });
    }
    let values = io_util::read_f32_le(path)?;
    if values.len() != side.n * side.d {
        return Err(Error::SizeMismatch {
            expected: side.n * side.d,
            actual: values.len(),
        });
    }
    Ok(EmbeddingMatrix {
        n: side.n,
        d: side.d,
        values,
        normalized: side.normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn spectro(h: usize, w: usize, values: Vec<f64>) -> Spectrogram {
        Spectrogram {
            height: h,
            width: w,
            values,
            frame_rate_hz: 50.0,
            doppler_resolution_hz: 50.0,
            is_db: false,
            provenance: None,
        }
    }

    #[test]
    fn patch_counts() {
        let s = spectro(8, 8, (0..64).map(f64::from).collect());
        let g = patchify(&s, 4, false).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.patches.iter().all(|p| p.len() == 16));
        assert_eq!(g.patches[1][..4], [4.0, 5.0, 6.0, 7.0]);
        assert_eq!(g.position(3), (1, 1));
        let whole = patchify(&s, 8, true).unwrap();
        assert_eq!(whole.patches, vec![s.values.clone()]);
        assert_eq!(whole.token_index(0), 1);
        let err = patchify(&spectro(6, 8, vec![0.0; 48]), 4, false).unwrap_err().to_string();
        assert!(err.contains("H=6") && err.contains("W=8") && err.contains('4'), "{err}");
    }

    #[test]
    fn checkerboard_patches() {
        let values: Vec<f64> = (0..16).map(|i| ((i / 4 + i % 4) % 2) as f64).collect();
        let s = spectro(4, 4, values.clone());
        let g = patchify(&s, 2, false).unwrap();
        for p in &g.patches {
            assert_eq!(p, &vec![0.0, 1.0, 1.0, 0.0]);
        }
        assert_eq!(unpatchify(&g), values);
    }

    proptest! {
        #[test]
        fn patchify_roundtrip(rows in 1usize..5, cols in 1usize..5, p in 1usize..5, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (h, w) = (rows * p, cols * p);
            let values: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
            let g = patchify(&spectro(h, w, values.clone()), p, false).unwrap();
            prop_assert_eq!(g.len(), rows * cols);
            prop_assert_eq!(unpatchify(&g), values);
        }
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[2.0, 3.0], &[2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroVector)));
    }

    /// Direct evaluation of the joint formula, no stabilization.
    fn joint_oracle(b: &EmbeddingBatch) -> f64 {
        let n = b.n;
        let s = |i: usize, j: usize| dot(b.signal_row(i), b.text_row(j)) / b.temperature;
        (0..n)
            .map(|i| {
                let den: f64 = (0..n).map(|j| s(i, j).exp() + s(j, i).exp()).sum();
                -(s(i, i).exp() / den).ln()
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn infonce_values() {
        let one = EmbeddingBatch::new(1, 2, vec![1.0, 0.0], vec![1.0, 0.0], 0.1).unwrap();
        assert!((infonce_loss(&one).unwrap() - 2f64.ln()).abs() < 1e-12);
        let two = EmbeddingBatch::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        let expected = -(e / (2.0 * (e + 1.0))).ln();
        assert!((infonce_loss(&two).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.00641).abs() < 1e-5);
        let hot = EmbeddingBatch { temperature: 1e9, ..two.clone() };
        assert!((infonce_loss(&hot).unwrap() - 4f64.ln()).abs() < 1e-6);
    }

    fn random_batch(rng: &mut impl Rng, n: usize, d: usize, tau: f64) -> EmbeddingBatch {
        let mut rows = |_| -> Vec<f64> { (0..n).flat_map(|_| normalize(&(0..d).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>()).unwrap()).collect() };
        let s = rows(0);
        let t = rows(1);
        EmbeddingBatch::new(n, d, s, t, tau).unwrap()
    }

    #[test]
    fn loss_matches_direct_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let b = random_batch(&mut rng, 5, 6, 0.3);
            assert!((infonce_loss(&b).unwrap() - joint_oracle(&b)).abs() < 1e-12);
            assert!(infonce_loss(&b).unwrap() >= 2f64.ln());
        }
    }

    #[test]
    fn stable_at_small_temperature() {
        let b = EmbeddingBatch::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], 1e-3).unwrap();
        let l = infonce_loss(&b).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12, "{l}");
    }

    fn fd_check(b: &EmbeddingBatch, form: InfoNceForm) -> f64 {
        let g = infonce_grad_with(b, form).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let scale = g.signal.iter().chain(&g.text).fold(0.0f64, |m, x| m.max(x.abs()));
        for which in 0..2 {
            for idx in 0..b.n * b.dim {
                let eval = |delta: f64| {
                    let mut p = b.clone();
                    if which == 0 { p.signal[idx] += delta } else { p.text[idx] += delta }
                    infonce_loss_with(&p, form).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = if which == 0 { g.signal[idx] } else { g.text[idx] };
                worst = worst.max((fd - an).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let b = random_batch(&mut rng, 4, 8, 0.5);
            assert!(fd_check(&b, InfoNceForm::Joint) < 1e-5);
            assert!(fd_check(&b, InfoNceForm::Symmetric) < 1e-5);
        }
    }

    #[test]
    fn symmetric_batch_has_equal_gradients() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let b = random_batch(&mut rng, 4, 8, 0.7);
        let sym = EmbeddingBatch { text: b.signal.clone(), ..b };
        let g = infonce_grad(&sym).unwrap();
        for (a, c) in g.signal.iter().zip(&g.text) {
            assert!((a - c).abs() < 1e-14);
        }
    }

    #[test]
    fn temperature_chain_rule() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let tau = 0.2;
        let b = random_batch(&mut rng, 4, 8, tau);
        let g = infonce_grad(&b).unwrap();
        // Same logits at tau = 1 with the signal rows pre-divided by tau.
        let unit = EmbeddingBatch::unnormalized(4, 8, b.signal.iter().map(|x| x / tau).collect(), b.text.clone(), 1.0).unwrap();
        let g1 = infonce_grad(&unit).unwrap();
        assert!((g.loss - g1.loss).abs() < 1e-12);
        for (a, c) in g.signal.iter().zip(&g1.signal) {
            assert!((a - c / tau).abs() < 1e-12);
        }
        for (a, c) in g.text.iter().zip(&g1.text) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_validation() {
        assert!(EmbeddingBatch::new(1, 2, vec![2.0, 0.0], vec![1.0, 0.0], 1.0).is_err());
        assert!(EmbeddingBatch::new(1, 2, vec![1.0, 0.0], vec![1.0, 0.0], 0.0).is_err());
        assert!(EmbeddingBatch::new(2, 2, vec![1.0, 0.0], vec![1.0, 0.0], 1.0).is_err());
        let b = EmbeddingBatch::unnormalized(1, 1, vec![f64::MAX], vec![f64::MAX], 1e-300).unwrap();
        assert!(matches!(infonce_loss(&b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let b = random_batch(&mut rng, 4, 3, 0.4);
        let perm = [2, 0, 3, 1];
        let permute = |m: &[f64]| perm.iter().flat_map(|&i| m[i * 3..i * 3 + 3].to_vec()).collect::<Vec<_>>();
        let p = EmbeddingBatch::new(4, 3, permute(&b.signal), permute(&b.text), 0.4).unwrap();
        assert!((infonce_loss(&b).unwrap() - infonce_loss(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lora_examples() {
        let layer = LoraLinear::new(2, 2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(lora_forward(&layer, &[1.0, 2.0]).unwrap(), vec![2.0, 2.0]);
        let zero_b = LoraLinear { b: vec![0.0, 0.0], ..layer.clone() };
        assert_eq!(lora_forward(&zero_b, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert!(lora_forward(&layer, &[1.0]).is_err());
        assert!(LoraLinear::new(2, 2, 3, vec![0.0; 4], vec![0.0; 6], vec![0.0; 6]).is_err());
        assert!(LoraLinear::new(2, 2, 1, vec![0.0; 4], vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    proptest! {
        #[test]
        fn lora_equals_dense(d in 1usize..7, k in 1usize..7, r_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = ((d.min(k) as f64) * r_frac).round() as usize;
            let mut m = |len: usize| (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>();
            let layer = LoraLinear::new(d, k, r, m(d * k), m(r * k), m(d * r)).unwrap();
            let x = m(k);
            let h = lora_forward(&layer, &x).unwrap();
            let dense = matvec(&layer.merged(), k, &x);
            for (a, b) in h.iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn zero_shot_examples() {
        let labels = vec![
            ("walk".to_string(), vec![1.0, 0.0]),
            ("sit".to_string(), vec![0.0, 1.0]),
            ("walk again".to_string(), vec![2.0, 0.0]),
        ];
        assert_eq!(zero_shot_classify(&[0.0, 3.0], &labels).unwrap(), 1);
        assert_eq!(zero_shot_classify(&[1.0, 0.0], &labels).unwrap(), 0);
        let graded = vec![
            ("low".to_string(), vec![0.1, (1.0f64 - 0.01).sqrt()]),
            ("high".to_string(), vec![0.9, (1.0f64 - 0.81).sqrt()]),
        ];
        assert_eq!(zero_shot_classify(&[1.0, 0.0], &graded).unwrap(), 1);
        assert!(zero_shot_classify(&[1.0, 0.0], &[]).is_err());
        assert!(zero_shot_classify(&[0.0, 0.0], &labels).is_err());
    }

    proptest! {
        #[test]
        fn zero_shot_scale_invariant(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut v = || (0..4).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<f64>>();
            let signal = v();
            let labels: Vec<(String, Vec<f64>)> = (0..5).map(|i| (i.to_string(), v())).collect();
            let scaled: Vec<f64> = signal.iter().map(|x| x * scale).collect();
            prop_assert_eq!(zero_shot_classify(&signal, &labels).unwrap(), zero_shot_classify(&scaled, &labels).unwrap());
        }
    }

    #[test]
    fn embedding_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.f32");
        let m = EmbeddingMatrix {
            n: 2,
            d: 3,
            values: vec![1.0, 0.0, 0.0, 0.0, 0.6, 0.8],
            normalized: true,
        };
        write_embeddings(&m, &path).unwrap();
        assert_eq!(read_embeddings(&path).unwrap(), m);
        let side = std::fs::read_to_string(path.with_extension("json")).unwrap();
        assert!(side.contains("\"N\": 2") && side.contains("\"D\": 3"));
    }
}
