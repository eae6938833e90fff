//! Complex scalar type and the vector kernels every other module is built on.
//!
//! Reductions use four independent accumulators. The summation order depends
//! only on the vector length, never on how callers partition work, so results
//! are bit-reproducible across worker counts.

use num_complex::Complex;

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;

/// Machine epsilon for `f64`.
pub const EPS: f64 = f64::EPSILON;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn is_finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[inline]
pub fn abs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `e^{i theta}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    c64(libm::cos(theta), libm::sin(theta))
}

/// Conjugated inner product `sum conj(a_i) * b_i`.
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re + x[l].im * y[l].im;
            im[l] += x[l].re * y[l].im - x[l].im * y[l].re;
        }
    }
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        re[0] += x.re * y.re + x.im * y.im;
        im[0] += x.re * y.im - x.im * y.re;
    }
    c64((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[C64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut chunks = a.chunks_exact(4);
    for x in &mut chunks {
        for l in 0..4 {
            acc[l] += x[l].re * x[l].re + x[l].im * x[l].im;
        }
    }
    for x in chunks.remainder() {
        acc[0] += x.re * x.re + x.im * x.im;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    sqrt(norm_sq(a))
}

/// `y += alpha * x`.
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

pub fn scale(alpha: f64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Largest entry magnitude; zero for an empty slice.
pub fn max_abs(x: &[C64]) -> f64 {
    x.iter().map(|z| abs(*z)).fold(0.0, f64::max)
}
