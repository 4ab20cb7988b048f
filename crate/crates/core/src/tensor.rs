//! Dense row-major tensors, GEMM and the im2col lowering used by convolution.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Element type of a [`Tensor`].
///
/// Implemented for `f32` (training and inference) and `f64` (finite-difference
/// gradient checks).
pub trait Scalar: Float + Default + Debug + Send + Sync + Sum + 'static {
    /// `c ← alpha·a·b + beta·c` on strided matrices.
    ///
    /// # Safety
    /// All pointers must be valid for the extents implied by the dimensions
    /// and strides; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn of_f64(v: f64) -> f32 {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn of_f64(v: f64) -> f64 {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Borrowed strided matrix view used as a GEMM operand.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, T: Scalar> MatRef<'a, T> {
    /// Row-major contiguous `rows × cols` view.
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols, cs: 1 }
    }

    /// Transposed view (no copy).
    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn fits(&self) -> bool {
        self.rows == 0
            || self.cols == 0
            || (self.rows - 1) * self.rs + (self.cols - 1) * self.cs < self.data.len()
    }
}

/// `c ← alpha·a·b + beta·c` where `c` is row-major `a.rows × b.cols`.
///
/// With `beta == 0` the previous contents of `c` are ignored.
pub fn gemm<T: Scalar>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, c: &mut [T]) {
    assert_eq!(a.cols, b.rows, "gemm inner dimensions");
    assert!(a.fits() && b.fits(), "gemm operand view out of bounds");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "gemm output length");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v = if beta == T::zero() { T::zero() } else { *v * beta };
        }
        return;
    }
    // SAFETY: operand extents were checked against their slices above and `c`
    // is an exclusive borrow distinct from the shared operands.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// Distribution used to fill a new tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Constant(f64),
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std: f64 },
}

/// Dense N-dimensional array in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    /// Creates a tensor of the given shape.
    ///
    /// Random fills need an rng; a constant fill ignores it.
    pub fn new(shape: &[usize], fill: Fill, rng: Option<&mut Rng>) -> Result<Self> {
        let len = check_shape(shape)?;
        let data = match (fill, rng) {
            (Fill::Constant(c), _) => vec![T::of_f64(c); len],
            (Fill::Uniform { low, high }, Some(rng)) => {
                (0..len).map(|_| T::of_f64(rng.uniform(low, high))).collect()
            }
            (Fill::Gaussian { mean, std }, Some(rng)) => {
                (0..len).map(|_| T::of_f64(rng.gaussian(mean, std))).collect()
            }
            (fill, None) => {
                return Err(Error::Config(format!("{fill:?} fill requires a random generator")))
            }
        };
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![T::zero(); len] })
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![value; len] })
    }

    pub fn random(shape: &[usize], fill: Fill, rng: &mut Rng) -> Result<Self> {
        Self::new(shape, fill, Some(rng))
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_shape(shape)?;
        if data.len() != len {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros_like(&self) -> Self {
        Self { shape: self.shape.clone(), data: vec![T::zero(); self.data.len()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} ({} values) into {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Element type conversion (for moving between training and gradient-check precision).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of_f64(v.as_f64())).collect(),
        }
    }

    /// `self += alpha · other`, shapes must agree.
    pub fn add_scaled(&mut self, alpha: T, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
        Ok(())
    }

    /// Frobenius inner product accumulated in `f64`.
    pub fn dot(&self, other: &Tensor<T>) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.as_f64() * b.as_f64()).sum())
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }

    pub fn as_matrix(&self) -> Result<MatRef<'_, T>> {
        match self.shape[..] {
            [r, c] => Ok(MatRef::new(&self.data, r, c)),
            _ => Err(Error::shape(format!("expected a rank-2 tensor, got {:?}", self.shape))),
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let a = self.as_matrix()?;
        let b = other.as_matrix()?;
        if a.cols() != b.rows() {
            return Err(Error::shape(format!(
                "matmul inner dimensions differ: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = Tensor::zeros(&[a.rows(), b.cols()])?;
        gemm(T::one(), a, b, T::zero(), &mut out.data);
        Ok(out)
    }

    pub fn transpose(&self) -> Result<Tensor<T>> {
        let m = self.as_matrix()?;
        let (r, c) = (m.rows(), m.cols());
        let mut data = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                data.push(self.data[i * c + j]);
            }
        }
        Tensor::from_vec(&[c, r], data)
    }
}

/// Kernel size, stride and zero padding of a sliding window over NCHW data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn new(kh: usize, kw: usize, stride: usize, pad: usize) -> Self {
        Self { kh, kw, stride, pad }
    }

    /// Output spatial size for an `h × w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.kh == 0 || self.kw == 0 || self.stride == 0 {
            return Err(Error::shape(format!("degenerate window {self:?}")));
        }
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        if self.kh > ph || self.kw > pw {
            return Err(Error::shape(format!(
                "{}x{} window does not fit a {h}x{w} input padded by {}",
                self.kh, self.kw, self.pad
            )));
        }
        Ok(((ph - self.kh) / self.stride + 1, (pw - self.kw) / self.stride + 1))
    }
}

/// Lowers one sample `[c, h, w]` into `cols` laid out `[c·kh·kw, ho·wo]`.
pub(crate) fn im2col_sample<T: Scalar>(
    x: &[T],
    (c, h, w): (usize, usize, usize),
    g: ConvGeometry,
    (ho, wo): (usize, usize),
    cols: &mut [T],
) {
    let plane = ho * wo;
    debug_assert_eq!(cols.len(), c * g.kh * g.kw * plane);
    for ch in 0..c {
        let xc = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ch * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oi in 0..ho {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    let out_row = &mut dst[oi * wo..(oi + 1) * wo];
                    if ii < 0 || ii >= h as isize {
                        out_row.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &xc[ii as usize * w..(ii as usize + 1) * w];
                    for (oj, v) in out_row.iter_mut().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        *v = if jj < 0 || jj >= w as isize { T::zero() } else { src[jj as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col_sample`]: scatters-adds `cols` back into `dx`.
pub(crate) fn col2im_sample<T: Scalar>(
    cols: &[T],
    (c, h, w): (usize, usize, usize),
    g: ConvGeometry,
    (ho, wo): (usize, usize),
    dx: &mut [T],
) {
    let plane = ho * wo;
    for ch in 0..c {
        let xc = &mut dx[ch * h * w..(ch + 1) * h * w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ch * g.kh + ki) * g.kw + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oi in 0..ho {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let dst = &mut xc[ii as usize * w..(ii as usize + 1) * w];
                    for oj in 0..wo {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if jj >= 0 && jj < w as isize {
                            dst[jj as usize] = dst[jj as usize] + src[oi * wo + oj];
                        }
                    }
                }
            }
        }
    }
}

fn nchw(x: &[usize]) -> Result<(usize, usize, usize, usize)> {
    match *x {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::shape(format!("expected an NCHW tensor, got {x:?}"))),
    }
}

/// Column matrix `[C·kh·kw, N·H_out·W_out]` of an NCHW tensor.
///
/// Column `n·H_out·W_out + i·W_out + j` holds the (zero-padded) window whose
/// top-left corner sits at output position `(i, j)` of sample `n`.
pub fn im2col<T: Scalar>(x: &Tensor<T>, g: ConvGeometry) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw(x.shape())?;
    let (ho, wo) = g.output_size(h, w)?;
    let k = c * g.kh * g.kw;
    let plane = ho * wo;
    let mut out = Tensor::zeros(&[k, n * plane])?;
    let mut scratch = vec![T::zero(); k * plane];
    for s in 0..n {
        im2col_sample(&x.data()[s * c * h * w..(s + 1) * c * h * w], (c, h, w), g, (ho, wo), &mut scratch);
        for r in 0..k {
            out.data[r * n * plane + s * plane..r * n * plane + (s + 1) * plane]
                .copy_from_slice(&scratch[r * plane..(r + 1) * plane]);
        }
    }
    Ok(out)
}

/// Adjoint of [`im2col`]: sums column entries back onto an NCHW tensor of `input_shape`.
pub fn col2im<T: Scalar>(cols: &Tensor<T>, input_shape: &[usize], g: ConvGeometry) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw(input_shape)?;
    let (ho, wo) = g.output_size(h, w)?;
    let k = c * g.kh * g.kw;
    let plane = ho * wo;
    if cols.shape() != [k, n * plane] {
        return Err(Error::shape(format!(
            "columns {:?} do not match input {input_shape:?} under {g:?}",
            cols.shape()
        )));
    }
    let mut out = Tensor::zeros(input_shape)?;
    let mut scratch = vec![T::zero(); k * plane];
    for s in 0..n {
        for r in 0..k {
            scratch[r * plane..(r + 1) * plane]
                .copy_from_slice(&cols.data[r * n * plane + s * plane..r * n * plane + (s + 1) * plane]);
        }
        col2im_sample(&scratch, (c, h, w), g, (ho, wo), &mut out.data[s * c * h * w..(s + 1) * c * h * w]);
    }
    Ok(out)
}
