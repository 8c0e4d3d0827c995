//! Finite Hilbert space over `Z_N`: position/momentum bases and the discrete
//! Fourier transform that relates them.
//!
//! Conventions: `<q_n|p_m> = exp(+2 pi i n m / N) / sqrt(N)`, so the
//! position-to-momentum transform uses the `-2 pi i` kernel.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hilbert space dimension `N`; the effective Planck constant is `1/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct HilbertDim(usize);

impl HilbertDim {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(HilbertDim(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Side length `2N` of the phase-space grid.
    #[inline]
    pub fn grid_side(self) -> usize {
        2 * self.0
    }

    /// Reduce any integer index into `Z_N`.
    #[inline]
    pub fn wrap(self, n: i64) -> usize {
        n.rem_euclid(self.0 as i64) as usize
    }
}

impl TryFrom<usize> for HilbertDim {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        HilbertDim::new(n)
    }
}

impl From<HilbertDim> for usize {
    fn from(d: HilbertDim) -> usize {
        d.0
    }
}

impl fmt::Display for HilbertDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Amplitudes `<q_n|psi>` (or `<p_m|psi>` after a forward transform).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        HilbertDim::new(amps.len())?;
        Ok(StateVector { amps })
    }

    /// Position eigenstate `|q_n>`, index reduced mod N.
    pub fn position_eigenstate(dim: HilbertDim, n: i64) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim.get()];
        amps[dim.wrap(n)] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    /// Uniform superposition `sum_n |q_n> / sqrt(N)`.
    pub fn uniform(dim: HilbertDim) -> Self {
        let a = 1.0 / (dim.get() as f64).sqrt();
        StateVector {
            amps: vec![Complex64::new(a, 0.0); dim.get()],
        }
    }

    /// Haar-ish random unit vector (normalised complex Gaussian entries).
    pub fn random<R: Rng + ?Sized>(dim: HilbertDim, rng: &mut R) -> Self {
        let amps = (0..dim.get())
            .map(|_| {
                // Box-Muller keeps us on the plain `rand` API.
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                let r = (-2.0 * u1.ln()).sqrt();
                Complex64::from_polar(r, std::f64::consts::TAU * u2)
            })
            .collect();
        let mut s = StateVector { amps };
        s.normalize();
        s
    }

    pub fn dim(&self) -> HilbertDim {
        HilbertDim(self.amps.len())
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    /// Amplitude at any integer index, reduced mod N.
    pub fn at(&self, n: i64) -> Complex64 {
        self.amps[n.rem_euclid(self.amps.len() as i64) as usize]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= norm);
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

impl Index<usize> for StateVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.amps[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.amps[i]
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Unitary N-point DFT pair. Plans are shared, so cloning is cheap and the
/// transform is usable from many threads at once.
#[derive(Clone)]
pub struct Dft {
    dim: HilbertDim,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("dim", &self.dim).finish()
    }
}

impl Dft {
    pub fn new(dim: HilbertDim) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            dim,
            forward: planner.plan_fft_forward(dim.get()),
            inverse: planner.plan_fft_inverse(dim.get()),
            scale: 1.0 / (dim.get() as f64).sqrt(),
        }
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    /// Position to momentum: `out[m] = N^{-1/2} sum_n exp(-2 pi i n m / N) in[n]`.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        check_len(self.dim.get(), buf.len())?;
        self.forward.process(buf);
        buf.iter_mut().for_each(|a| *a *= self.scale);
        Ok(())
    }

    /// Exact adjoint of [`Dft::forward_in_place`].
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        check_len(self.dim.get(), buf.len())?;
        self.inverse.process(buf);
        buf.iter_mut().for_each(|a| *a *= self.scale);
        Ok(())
    }

    /// Unnormalised forward transform, used by the Wigner row transform.
    pub(crate) fn forward_raw(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn forward(&self, state: &StateVector) -> Result<StateVector> {
        let mut out = state.clone();
        self.forward_in_place(&mut out.amps)?;
        Ok(out)
    }

    pub fn inverse(&self, state: &StateVector) -> Result<StateVector> {
        let mut out = state.clone();
        self.inverse_in_place(&mut out.amps)?;
        Ok(out)
    }
}

/// Position-to-momentum representation change.
pub fn forward_dft(state: &StateVector) -> Result<StateVector> {
    Dft::new(state.dim()).forward(state)
}

/// Momentum-to-position representation change.
pub fn inverse_dft(state: &StateVector) -> Result<StateVector> {
    Dft::new(state.dim()).inverse(state)
}

/// Multiply each amplitude by `exp(i phase(n))`.
pub fn diagonal_phase<F>(state: &StateVector, phase: F) -> Result<StateVector>
where
    F: Fn(usize) -> f64,
{
    let mut out = state.clone();
    for (n, a) in out.amps.iter_mut().enumerate() {
        let value = phase(n);
        if !value.is_finite() {
            return Err(Error::NonFinitePhase { index: n, value });
        }
        *a *= Complex64::from_polar(1.0, value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dim(n: usize) -> HilbertDim {
        HilbertDim::new(n).unwrap()
    }

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Direct O(N^2) summation of the forward kernel.
    fn naive_forward(state: &StateVector) -> StateVector {
        let n = state.len();
        let amps = (0..n)
            .map(|m| {
                (0..n)
                    .map(|j| {
                        let arg = -std::f64::consts::TAU * ((j * m) % n) as f64 / n as f64;
                        Complex64::from_polar(1.0, arg) * state[j]
                    })
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect();
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn dimension_validation() {
        assert!(HilbertDim::new(0).is_err());
        assert!(HilbertDim::new(1).is_err());
        assert!(HilbertDim::new(7).is_err());
        assert_eq!(HilbertDim::new(8).unwrap().grid_side(), 16);
        assert!(StateVector::from_amplitudes(vec![Complex64::new(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn delta_goes_to_uniform_and_back() {
        for n in [2, 4, 6, 16, 30] {
            let d = dim(n);
            let delta = StateVector::position_eigenstate(d, 0);
            let f = forward_dft(&delta).unwrap();
            assert!(max_diff(&f, &StateVector::uniform(d)) < 1e-12);
            let back = inverse_dft(&StateVector::uniform(d)).unwrap();
            assert!(max_diff(&back, &delta) < 1e-12);
        }
    }

    #[test]
    fn two_point_transform() {
        let psi = StateVector::position_eigenstate(dim(2), 0);
        let out = forward_dft(&psi).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out[0] - Complex64::new(h, 0.0)).norm() < 1e-15);
        assert!((out[1] - Complex64::new(h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 4, 8, 16, 6, 10] {
            let psi = StateVector::random(dim(n), &mut rng);
            let fast = forward_dft(&psi).unwrap();
            assert!(max_diff(&fast, &naive_forward(&psi)) < 1e-12, "N={n}");
        }
    }

    #[test]
    fn momentum_eigenstates_match_basis_overlap() {
        // <q_n|p_m> = exp(2 pi i n m / N)/sqrt(N): inverse-transforming a
        // momentum delta must reproduce that column.
        let d = dim(8);
        for m in 0..8 {
            let p = StateVector::position_eigenstate(d, m as i64);
            let q = inverse_dft(&p).unwrap();
            for n in 0..8 {
                let expect = Complex64::from_polar(
                    1.0 / 8f64.sqrt(),
                    std::f64::consts::TAU * (n * m) as f64 / 8.0,
                );
                assert!((q[n] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn unitarity_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = dim(64);
        let dft = Dft::new(d);
        for _ in 0..100 {
            let psi = StateVector::random(d, &mut rng);
            let phi = StateVector::random(d, &mut rng);
            let a = psi.inner(&phi).unwrap();
            let b = dft
                .forward(&psi)
                .unwrap()
                .inner(&dft.forward(&phi).unwrap())
                .unwrap();
            assert!((a - b).norm() < 1e-12);
            let inv = dft.inverse(&psi).unwrap();
            assert!((inv.norm() - psi.norm()).abs() < 1e-12);
            let round = dft.inverse(&dft.forward(&psi).unwrap()).unwrap();
            assert!(max_diff(&round, &psi) < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let dft = Dft::new(dim(4));
        let psi = StateVector::uniform(dim(8));
        assert!(matches!(
            dft.forward(&psi),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 8
            })
        ));
    }

    #[test]
    fn periodic_indexing() {
        let d = dim(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = StateVector::random(d, &mut rng);
        for n in -12i64..12 {
            assert_eq!(psi.at(n), psi.at(n + 6));
        }
        assert_eq!(
            StateVector::position_eigenstate(d, 7),
            StateVector::position_eigenstate(d, 1)
        );
    }

    #[test]
    fn diagonal_phase_properties() {
        let d = dim(16);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = StateVector::random(d, &mut rng);
        let same = diagonal_phase(&psi, |_| 0.0).unwrap();
        assert!(max_diff(&same, &psi) < 1e-15);

        let step = |n: usize| std::f64::consts::TAU * n as f64 / 16.0;
        let twice = diagonal_phase(&diagonal_phase(&psi, step).unwrap(), step).unwrap();
        let once = diagonal_phase(&psi, |n| 2.0 * step(n)).unwrap();
        assert!(max_diff(&twice, &once) < 1e-12);

        let table: Vec<f64> = (0..16).map(|_| rng.gen::<f64>() * 100.0).collect();
        let out = diagonal_phase(&psi, |n| table[n]).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);

        assert!(matches!(
            diagonal_phase(&psi, |n| if n == 3 { f64::NAN } else { 0.0 }),
            Err(Error::NonFinitePhase { index: 3, .. })
        ));
    }
}
