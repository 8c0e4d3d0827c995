//! Discrete Weyl-Wigner correspondence on the `2N x 2N` grid
//! `x_{n,m} = (n/2N, m/2N)`.
//!
//! The point operator is
//! `A_{n,m} = exp(i pi n m / N) / (2 sqrt N) sum_k exp(-2 pi i k m / N) |q_{n-k}><q_k|`,
//! symbols are `a_{n,m} = tr(A A_{n,m})` and quantisation is
//! `Q(a) = sum_{n,m} a_{n,m} A_{n,m}`. With this kernel a pure-state Wigner
//! function satisfies `sum W^2 = 1`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::hilbert::{check_len, Dft, HilbertDim, StateVector};

/// Tolerance separating round-off from a convention bug in the imaginary
/// part of a Wigner function or a Hermitian symbol.
pub const IMAG_TOLERANCE: f64 = 1e-10;

/// Largest N for which point operators are materialised densely.
pub const POINT_OPERATOR_LIMIT: usize = 64;

/// Real samples on the phase-space grid, row `n` (position) major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dim: HilbertDim,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(dim: HilbertDim) -> Self {
        let side = dim.grid_side();
        GridFunction {
            dim,
            values: vec![0.0; side * side],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(dim: HilbertDim, mut f: F) -> Self {
        let side = dim.grid_side();
        let mut values = Vec::with_capacity(side * side);
        for n in 0..side {
            for m in 0..side {
                values.push(f(n, m));
            }
        }
        GridFunction { dim, values }
    }

    pub fn from_values(dim: HilbertDim, values: Vec<f64>) -> Result<Self> {
        let side = dim.grid_side();
        check_len(side * side, values.len())?;
        Ok(GridFunction { dim, values })
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.dim.grid_side()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at `(n, m)` with both indices wrapped mod 2N.
    pub fn at(&self, n: i64, m: i64) -> f64 {
        let side = self.side() as i64;
        let n = n.rem_euclid(side) as usize;
        let m = m.rem_euclid(side) as usize;
        self.values[n * self.side() + m]
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[n * self.side() + m]
    }

    #[inline]
    pub fn set(&mut self, n: usize, m: usize, v: f64) {
        let side = self.side();
        self.values[n * side + m] = v;
    }

    /// Grid point `x_{n,m}` as `(q, p)`.
    pub fn point(&self, n: usize, m: usize) -> (f64, f64) {
        let side = self.side() as f64;
        (n as f64 / side, m as f64 / side)
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Write as CSV: a `# N=<N>` line, any extra comment lines, then `2N`
    /// rows of `2N` values with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        writeln!(w, "# N={}", self.dim)?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let side = self.side();
        for row in self.values.chunks(side) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut dim = None;
        let mut values = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(n) = rest.trim().strip_prefix("N=") {
                    let n: usize = n
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad N header: {line}")))?;
                    dim = Some(HilbertDim::new(n)?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad value: {field}")))?;
                values.push(v);
            }
        }
        let dim = dim.ok_or_else(|| Error::InvalidArgument("missing '# N=' header".into()))?;
        GridFunction::from_values(dim, values)
    }
}

/// `sum_{(n,m)} a(n,m) b(n,m)`; this is `tr(A B)` when `a` is the symbol
/// of `A` and `B = Q(b)`.
pub fn pairing(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    check_len(a.values.len(), b.values.len())?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

/// Orthogonal projection onto the Weyl symbols, `symbol(quantize(a))`.
///
/// Every symbol obeys `a(n+N, m) = (-1)^m a(n, m)` and
/// `a(n, m+N) = (-1)^n a(n, m)`, so the projection averages the four
/// half-period images with those signs.
pub fn project_symbol(a: &GridFunction) -> GridFunction {
    let n = a.dim.get();
    let side = 2 * n;
    GridFunction::from_fn(a.dim, |q, p| {
        let sq = if p % 2 == 0 { 1.0 } else { -1.0 };
        let sp = if q % 2 == 0 { 1.0 } else { -1.0 };
        let (q2, p2) = ((q + n) % side, (p + n) % side);
        0.25 * (a.get(q, p) + sq * a.get(q2, p) + sp * a.get(q, p2) + sq * sp * a.get(q2, p2))
    })
}

/// Complex-valued grid samples, for symbols of non-Hermitian operators.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    dim: HilbertDim,
    values: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.values[n * self.dim.grid_side() + m]
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Drop imaginary parts after checking they are round-off.
    pub fn into_real(self, tol: f64) -> Result<GridFunction> {
        let side = self.dim.grid_side();
        if let Some((i, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| v.im.abs() > tol)
        {
            return Err(Error::ImaginaryResidue {
                n: i / side,
                m: i % side,
                residue: v.im.abs(),
            });
        }
        Ok(GridFunction {
            dim: self.dim,
            values: self.values.into_iter().map(|v| v.re).collect(),
        })
    }
}

/// N x N complex matrix in the position basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    entries: Array2<Complex64>,
}

impl DenseOperator {
    pub fn zeros(dim: HilbertDim) -> Self {
        DenseOperator {
            entries: Array2::zeros((dim.get(), dim.get())),
        }
    }

    pub fn identity(dim: HilbertDim) -> Self {
        DenseOperator {
            entries: Array2::eye(dim.get()),
        }
    }

    pub fn from_array(entries: Array2<Complex64>) -> Result<Self> {
        let (r, c) = entries.dim();
        check_len(r, c)?;
        HilbertDim::new(r)?;
        Ok(DenseOperator { entries })
    }

    /// Diagonal operator with the given real entries.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        HilbertDim::new(n)?;
        let mut entries = Array2::zeros((n, n));
        for (i, v) in values.iter().enumerate() {
            entries[[i, i]] = Complex64::new(*v, 0.0);
        }
        Ok(DenseOperator { entries })
    }

    /// `|psi><psi|`.
    pub fn projector(state: &StateVector) -> Self {
        let a = state.amplitudes();
        let n = a.len();
        DenseOperator {
            entries: Array2::from_shape_fn((n, n), |(i, j)| a[i] * a[j].conj()),
        }
    }

    pub fn dim(&self) -> HilbertDim {
        HilbertDim::new(self.entries.nrows()).expect("validated on construction")
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator {
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn matmul(&self, rhs: &DenseOperator) -> Self {
        DenseOperator {
            entries: self.entries.dot(&rhs.entries),
        }
    }

    pub fn add(&self, rhs: &DenseOperator) -> Self {
        DenseOperator {
            entries: &self.entries + &rhs.entries,
        }
    }

    pub fn sub(&self, rhs: &DenseOperator) -> Self {
        DenseOperator {
            entries: &self.entries - &rhs.entries,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        DenseOperator {
            entries: self.entries.mapv(|z| z * s),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diag().sum()
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_len(self.entries.nrows(), state.len())?;
        let a = state.amplitudes();
        let out = self
            .entries
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum())
            .collect();
        StateVector::from_amplitudes(out)
    }

    /// `<psi| self |psi>`.
    pub fn expectation(&self, state: &StateVector) -> Result<Complex64> {
        state.inner(&self.apply(state)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - A^dagger|` entrywise.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.entries.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let d = (self.entries[[i, j]] - self.entries[[j, i]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Dense point operator `A_{n,m}`, for oracle use at small N.
pub fn point_operator(n: i64, m: i64, dim: HilbertDim) -> Result<DenseOperator> {
    let size = dim.get();
    if size > POINT_OPERATOR_LIMIT {
        return Err(Error::DenseTooLarge {
            n: size,
            limit: POINT_OPERATOR_LIMIT,
        });
    }
    let nf = size as f64;
    let side = dim.grid_side() as i64;
    let n = n.rem_euclid(side);
    let m = m.rem_euclid(side);
    let pref = Complex64::from_polar(1.0 / (2.0 * nf.sqrt()), PI * ((n * m) % side) as f64 / nf);
    let mut op = DenseOperator::zeros(dim);
    for k in 0..size as i64 {
        let row = dim.wrap(n - k);
        let phase = Complex64::from_polar(1.0, -2.0 * PI * ((k * m) % size as i64) as f64 / nf);
        op.entries[[row, k as usize]] += pref * phase;
    }
    Ok(op)
}

/// Fast Weyl-Wigner transforms for one Hilbert dimension.
///
/// Row `n` of a symbol is an N-point transform of the correlation sequence
/// `l -> A[l, n-l]` followed by the prefactor `exp(i pi n m / N)`; rows `n`
/// and `n + N` share the transform and differ by `(-1)^m`.
#[derive(Clone)]
pub struct WignerTransform {
    dim: HilbertDim,
    dft: Dft,
    grid_fft: Arc<dyn Fft<f64>>,
    /// `exp(i pi j / N)` for `j` in `Z_2N`.
    half_phase: Vec<Complex64>,
    norm: f64,
}

impl std::fmt::Debug for WignerTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WignerTransform")
            .field("dim", &self.dim)
            .finish()
    }
}

impl WignerTransform {
    pub fn new(dim: HilbertDim) -> Self {
        let nf = dim.get() as f64;
        let half_phase = (0..dim.grid_side())
            .map(|j| Complex64::from_polar(1.0, PI * j as f64 / nf))
            .collect();
        WignerTransform {
            dim,
            dft: Dft::new(dim),
            grid_fft: FftPlanner::new().plan_fft_forward(dim.grid_side()),
            half_phase,
            norm: 1.0 / (2.0 * nf.sqrt()),
        }
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    /// Runs the row transform for a correlation `corr(n, l)` (n in `Z_N`),
    /// handing each `(n, m, value)` to `sink`.
    fn transform_rows<C, S>(&self, mut corr: C, mut sink: S) -> Result<()>
    where
        C: FnMut(usize, usize) -> Complex64,
        S: FnMut(usize, usize, Complex64) -> Result<()>,
    {
        let size = self.dim.get();
        let side = self.dim.grid_side();
        let mut buf = vec![Complex64::new(0.0, 0.0); size * size];
        for (n, row) in buf.chunks_exact_mut(size).enumerate() {
            for (l, b) in row.iter_mut().enumerate() {
                *b = corr(n, l);
            }
        }
        // rustfft transforms each length-N chunk
        self.dft.forward_raw(&mut buf);
        for (n, row) in buf.chunks_exact(size).enumerate() {
            let mut phase = 0;
            for m in 0..side {
                let s = row[if m < size { m } else { m - size }] * self.norm;
                let base = self.half_phase[phase] * s;
                phase += n;
                if phase >= side {
                    phase -= side;
                }
                sink(n, m, base)?;
                // Row n + N picks up exp(i pi m) = (-1)^m.
                let flipped = if m % 2 == 0 { base } else { -base };
                sink(n + size, m, flipped)?;
            }
        }
        Ok(())
    }

    /// Wigner function `W_psi(n, m)` written into `out`.
    pub fn wigner_into(&self, state: &StateVector, out: &mut GridFunction) -> Result<()> {
        check_len(self.dim.get(), state.len())?;
        check_len(out.values.len(), self.dim.grid_side().pow(2))?;
        let a = state.amplitudes();
        let size = self.dim.get();
        let side = self.dim.grid_side();
        let values = &mut out.values;
        self.transform_rows(
            |n, l| a[l] * a[(n + size - l) % size].conj(),
            |n, m, v| {
                if v.im.abs() > IMAG_TOLERANCE {
                    return Err(Error::ImaginaryResidue {
                        n,
                        m,
                        residue: v.im.abs(),
                    });
                }
                values[n * side + m] = v.re;
                Ok(())
            },
        )
    }

    pub fn wigner(&self, state: &StateVector) -> Result<GridFunction> {
        let mut out = GridFunction::zeros(self.dim);
        self.wigner_into(state, &mut out)?;
        Ok(out)
    }

    /// Symbol `tr(A A_{n,m})` of an arbitrary operator.
    pub fn symbol_complex(&self, op: &DenseOperator) -> Result<ComplexGrid> {
        check_len(self.dim.get(), op.entries.nrows())?;
        let size = self.dim.get();
        let side = self.dim.grid_side();
        let e = &op.entries;
        let mut values = vec![Complex64::new(0.0, 0.0); side * side];
        self.transform_rows(
            |n, l| e[[l, (n + size - l) % size]],
            |n, m, v| {
                values[n * side + m] = v;
                Ok(())
            },
        )?;
        Ok(ComplexGrid {
            dim: self.dim,
            values,
        })
    }

    /// Real symbol of a Hermitian operator.
    pub fn symbol(&self, op: &DenseOperator) -> Result<GridFunction> {
        let dev = op.hermitian_deviation();
        if dev > IMAG_TOLERANCE * op.max_abs().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        self.symbol_complex(op)?.into_real(IMAG_TOLERANCE)
    }

    /// `Q(a) = sum a_{n,m} A_{n,m}`.
    ///
    /// For fixed `n` the coefficient of `|q_{n-l}><q_l|` is a 2N-point
    /// transform of row `n` of `a` at frequency `2l - n`.
    pub fn quantize(&self, symbol: &GridFunction) -> Result<DenseOperator> {
        check_len(self.dim.get(), symbol.dim.get())?;
        let size = self.dim.get();
        let side = self.dim.grid_side();
        let mut op = DenseOperator::zeros(self.dim);
        let mut buf = vec![Complex64::new(0.0, 0.0); side];
        for (n, row) in symbol.values.chunks(side).enumerate() {
            for (b, v) in buf.iter_mut().zip(row) {
                *b = Complex64::new(*v, 0.0);
            }
            self.grid_fft.process(&mut buf);
            for l in 0..size {
                let freq = (2 * l + side - n % side) % side;
                let r = (n + 2 * size - l) % size;
                op.entries[[r, l]] += buf[freq] * self.norm;
            }
        }
        Ok(op)
    }
}

/// Wigner function of a unit state.
pub fn wigner(state: &StateVector) -> Result<GridFunction> {
    WignerTransform::new(state.dim()).wigner(state)
}

pub fn quantize(symbol: &GridFunction) -> Result<DenseOperator> {
    WignerTransform::new(symbol.dim()).quantize(symbol)
}

pub fn symbol(op: &DenseOperator) -> Result<GridFunction> {
    WignerTransform::new(op.dim()).symbol(op)
}

pub fn symbol_complex(op: &DenseOperator) -> Result<ComplexGrid> {
    WignerTransform::new(op.dim()).symbol_complex(op)
}
