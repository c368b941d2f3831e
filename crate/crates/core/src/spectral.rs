//! Discrete Fourier transforms and circular operations on length-`d` signals.
//!
//! The forward transform carries no normalization,
//! `x̂(ω) = Σ_u x(u) e^{-iωu}` for `ω ∈ {2πℓ/d}`, and the inverse carries the
//! full `1/d`. Every spectral formula elsewhere in the crate assumes this.
//!
//! Sizes here are small (the experiments use `d = 4`), so transforms are
//! direct `O(d²)` sums over a precomputed twiddle table.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};

/// A finite real vector of length at least two.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSignal(Vec<f64>);

impl RealSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!("signal length must be at least 2, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry at index {i}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    /// Unit impulse at position `at`.
    pub fn delta(d: usize, at: usize) -> Self {
        let mut v = vec![0.0; d];
        v[at % d] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl AsRef<[f64]> for RealSignal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A finite complex vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!("signal length must be at least 2, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry at index {i}")));
        }
        Ok(Self(values))
    }

    pub fn from_real(x: &RealSignal) -> Self {
        Self(x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.im).collect()
    }
}

impl AsRef<[Complex64]> for ComplexSignal {
    fn as_ref(&self) -> &[Complex64] {
        &self.0
    }
}

/// The grid `Ω_d = {2πℓ/d : 0 ≤ ℓ < d}` in radians per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    d: usize,
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(d: usize) -> Self {
        let omegas = (0..d).map(|l| 2.0 * PI * l as f64 / d as f64).collect();
        Self { d, omegas }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
}

/// Twiddle table for a length-`d` transform.
///
/// `w[k] = e^{-2πik/d}`. Entries at multiples of a quarter turn are exact and
/// `w[d-k]` is the exact conjugate of `w[k]`, so the transform of a real
/// signal is exactly conjugate-symmetric.
#[derive(Clone, Debug)]
pub struct DftPlan {
    d: usize,
    twiddles: Vec<Complex64>,
}

impl DftPlan {
    pub fn new(d: usize) -> Self {
        let mut twiddles = vec![Complex64::new(1.0, 0.0); d];
        for k in 1..=d / 2 {
            let w = if (4 * k) % d == 0 {
                match (4 * k / d) % 4 {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, -1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, 1.0),
                }
            } else {
                let theta = -2.0 * PI * k as f64 / d as f64;
                Complex64::new(theta.cos(), theta.sin())
            };
            twiddles[k] = w;
            twiddles[d - k] = w.conj();
        }
        Self { d, twiddles }
    }

    pub fn len(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    /// `e^{-iωu}` for `ω = 2πℓ/d`.
    #[inline]
    pub fn twiddle(&self, l: usize, u: usize) -> Complex64 {
        self.twiddles[(l * u) % self.d]
    }

    pub fn forward_real_into(&self, x: &[f64], out: &mut [Complex64]) {
        let d = self.d;
        debug_assert_eq!(x.len(), d);
        for (l, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0;
            for &xu in x {
                acc += self.twiddles[idx] * xu;
                idx += l;
                if idx >= d {
                    idx -= d;
                }
            }
            *o = acc;
        }
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.d];
        self.forward_real_into(x, &mut out);
        out
    }

    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let d = self.d;
        (0..d).map(|l| x.iter().enumerate().map(|(u, &xu)| self.twiddle(l, u) * xu).sum()).collect()
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let d = self.d;
        let scale = 1.0 / d as f64;
        (0..d)
            .map(|u| {
                spectrum.iter().enumerate().map(|(l, &s)| self.twiddle(l, u).conj() * s).sum::<Complex64>() * scale
            })
            .collect()
    }

    /// Real part of the inverse transform, for spectra known to be
    /// conjugate-symmetric.
    pub fn inverse_real_into(&self, spectrum: &[Complex64], out: &mut [f64]) {
        let d = self.d;
        let scale = 1.0 / d as f64;
        for (u, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0.0;
            let mut idx = 0;
            for s in spectrum {
                // Re(conj(w) s) = w.re s.re + w.im s.im
                let w = self.twiddles[idx];
                acc += w.re * s.re + w.im * s.im;
                idx += u;
                if idx >= d {
                    idx -= d;
                }
            }
            *o = acc * scale;
        }
    }
}

fn plan_for(d: usize) -> DftPlan {
    DftPlan::new(d)
}

/// Forward transform of a complex signal.
pub fn dft(x: &ComplexSignal) -> ComplexSignal {
    ComplexSignal(plan_for(x.len()).forward(x.as_slice()))
}

/// Forward transform of a real signal.
pub fn dft_real(x: &RealSignal) -> ComplexSignal {
    ComplexSignal(plan_for(x.len()).forward_real(x.as_slice()))
}

/// Inverse transform, including the `1/d` factor.
pub fn idft(spectrum: &ComplexSignal) -> ComplexSignal {
    ComplexSignal(plan_for(spectrum.len()).inverse(spectrum.as_slice()))
}

/// `(x ⋆ y)(u) = Σ_v x(v) y(u - v mod d)`.
pub fn circular_convolve(x: &RealSignal, y: &RealSignal) -> Result<RealSignal> {
    check_dim(x.len(), y.len())?;
    Ok(RealSignal(circular_convolve_slices(x.as_slice(), y.as_slice())))
}

pub(crate) fn circular_convolve_slices(x: &[f64], y: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; d];
    for (u, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (v, &xv) in x.iter().enumerate() {
            acc += xv * y[(u + d - v) % d];
        }
        *o = acc;
    }
    out
}

/// `x̃(u) = x(-u)*`.
pub fn reverse_conjugate(x: &ComplexSignal) -> ComplexSignal {
    let d = x.len();
    let v = x.as_slice();
    ComplexSignal((0..d).map(|u| v[(d - u) % d].conj()).collect())
}

/// Real-signal version of [`reverse_conjugate`]: `x̃(u) = x(-u)`.
pub fn reverse(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|u| x[(d - u) % d]).collect()
}

/// `d⁻¹ Σ_ω |x̂(ω)|²`, which equals `‖x‖²`.
pub fn parseval_energy(x: &RealSignal) -> f64 {
    let spectrum = dft_real(x);
    spectrum.as_slice().iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64
}
