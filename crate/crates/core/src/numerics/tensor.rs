use std::fmt;

use super::NumericsError;

/// Dense row-major tensor of 64-bit floats.
///
/// Every tensor is viewed as a matrix of `rows × cols`, where `cols` is the
/// trailing dimension and `rows` is the product of the leading ones.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, NumericsError> {
        if shape.is_empty() || shape.len() > 4 || shape.iter().any(|&d| d == 0) {
            return Err(NumericsError::InvalidShape(shape.to_vec()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Panics on an invalid shape; for internal use where shapes are known good.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(shape.iter().all(|&d| d > 0));
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![value; n])
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(&[rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().expect("tensor rank >= 1")
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self, NumericsError> {
        Self::new(shape, self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn as_matrix(&self, op: &'static str) -> Result<(usize, usize), NumericsError> {
        if self.shape.len() != 2 {
            return Err(NumericsError::Rank {
                op,
                expected: 2,
                shape: self.shape.clone(),
            });
        }
        Ok((self.shape[0], self.shape[1]))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `a[m×k] · b[k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    let (m, k) = a.as_matrix("matmul")?;
    let (k2, n) = b.as_matrix("matmul")?;
    if k != k2 {
        return Err(NumericsError::Dimension {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    matmul_into(&a.data, &b.data, &mut out, m, k, n);
    Ok(Tensor::from_parts(vec![m, n], out))
}

pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &aip) in a_row.iter().enumerate() {
            if aip != 0.0 {
                axpy(aip, &b[p * n..(p + 1) * n], out_row);
            }
        }
    }
}

/// `a[m×k] · b[n×k]ᵀ`.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    let (m, k) = a.as_matrix("matmul_bt")?;
    let (n, k2) = b.as_matrix("matmul_bt")?;
    if k != k2 {
        return Err(NumericsError::Dimension {
            op: "matmul_bt",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a.data[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] = dot(a_row, &b.data[j * k..(j + 1) * k]);
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// `a[m×k]ᵀ · b[m×n]`.
pub fn matmul_at(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    let (m, k) = a.as_matrix("matmul_at")?;
    let (m2, n) = b.as_matrix("matmul_at")?;
    if m != m2 {
        return Err(NumericsError::Dimension {
            op: "matmul_at",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let b_row = &b.data[i * n..(i + 1) * n];
        for (p, &aip) in a.data[i * k..(i + 1) * k].iter().enumerate() {
            if aip != 0.0 {
                axpy(aip, b_row, &mut out[p * n..(p + 1) * n]);
            }
        }
    }
    Ok(Tensor::from_parts(vec![k, n], out))
}

pub(crate) fn softmax_row_masked(row: &[f64], allowed: Option<&[bool]>, out: &mut [f64]) {
    let ok = |j: usize| allowed.is_none_or(|m| m[j]);
    let mut max = f64::NEG_INFINITY;
    for (j, &x) in row.iter().enumerate() {
        if ok(j) && x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        // fully masked row
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let mut total = 0.0;
    for (j, (&x, o)) in row.iter().zip(out.iter_mut()).enumerate() {
        *o = if ok(j) { (x - max).exp() } else { 0.0 };
        total += *o;
    }
    let inv = 1.0 / total;
    out.iter_mut().for_each(|o| *o *= inv);
}

/// Row-wise softmax over the trailing dimension, with max-subtraction.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let cols = x.cols();
    let mut out = vec![0.0; x.len()];
    for (row, o) in x.data.chunks(cols).zip(out.chunks_mut(cols)) {
        softmax_row_masked(row, None, o);
    }
    Tensor::from_parts(x.shape.clone(), out)
}

/// Per-row normalisation followed by an affine map. Returns the output
/// together with the normalised rows and per-row reciprocal std, which the
/// backward pass reuses.
pub(crate) fn layer_norm_parts(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
    eps: f64,
) -> Result<(Tensor, Vec<f64>, Vec<f64>), NumericsError> {
    let d = x.cols();
    if gain.len() != d || bias.len() != d {
        return Err(NumericsError::Dimension {
            op: "layer_norm",
            left: x.shape.clone(),
            right: gain.shape.clone(),
        });
    }
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = Vec::with_capacity(x.rows());
    for (r, row) in x.data.chunks(d).enumerate() {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + eps).sqrt();
        rstd.push(rs);
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gain.data[j] + bias.data[j];
        }
    }
    Ok((Tensor::from_parts(x.shape.clone(), out), xhat, rstd))
}

pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor, NumericsError> {
    layer_norm_parts(x, gain, bias, eps).map(|(out, _, _)| out)
}

fn check_ce_inputs(
    logits: &Tensor,
    targets: &[usize],
    weights: &[f64],
) -> Result<(), NumericsError> {
    let rows = logits.rows();
    if targets.len() != rows || weights.len() != rows {
        return Err(NumericsError::Dimension {
            op: "weighted_cross_entropy",
            left: logits.shape.clone(),
            right: vec![targets.len(), weights.len()],
        });
    }
    let vocab = logits.cols();
    if let Some(&t) = targets.iter().find(|&&t| t >= vocab) {
        return Err(NumericsError::TargetOutOfRange { target: t, vocab });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(NumericsError::NegativeWeight);
    }
    Ok(())
}

/// Per-position negative log-likelihoods and softmax probabilities.
pub(crate) fn cross_entropy_parts(
    logits: &Tensor,
    targets: &[usize],
    weights: &[f64],
) -> Result<(Vec<f64>, Tensor), NumericsError> {
    check_ce_inputs(logits, targets, weights)?;
    let v = logits.cols();
    let mut probs = vec![0.0; logits.len()];
    let mut nll = Vec::with_capacity(targets.len());
    for (i, row) in logits.data.chunks(v).enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, &x) in probs[i * v..(i + 1) * v].iter_mut().zip(row) {
            *p = (x - max).exp();
            total += *p;
        }
        let log_total = total.ln();
        nll.push(log_total - (row[targets[i]] - max));
        let inv = 1.0 / total;
        probs[i * v..(i + 1) * v].iter_mut().for_each(|p| *p *= inv);
    }
    Ok((nll, Tensor::from_parts(logits.shape.clone(), probs)))
}

/// `Σ wᵢ · −log softmax(logitsᵢ)[targetᵢ] / Σ wᵢ`.
pub fn weighted_cross_entropy(
    logits: &Tensor,
    targets: &[usize],
    weights: &[f64],
) -> Result<f64, NumericsError> {
    let (nll, _) = cross_entropy_parts(logits, targets, weights)?;
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(NumericsError::DegenerateWeights);
    }
    Ok(nll.iter().zip(weights).map(|(l, w)| l * w).sum::<f64>() / total_weight)
}
