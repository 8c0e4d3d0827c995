//! Quantum perturbed cat map `U = exp(-i pi m^2 / N) exp(i pi k n^2 / N + i N eps . V)`
//! applied by split-operator FFT steps, torus coherent states, and the dense
//! echo operator `S^t = sum_{j=1..t} U_c^{-j} V U_c^{j}`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{minimal_image, v_potential, MapParams, Packet, WINDING_RANGE};
use crate::error::{Error, Result};
use crate::hilbert::{check_len, Dft, HilbertDim, StateVector};
use crate::weyl::DenseOperator;

/// Largest N for which propagators and echo operators are built densely.
pub const DENSE_LIMIT: usize = 128;

/// How the perturbation potential enters the position-diagonal phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `Theta(n) = 2 pi N eps . V(n / N)`: the quantum kick generates the
    /// classical momentum kick `eps . V'(q)` for all three components.
    #[default]
    Semiclassical,
    /// `Theta(n) = N eps . V(2 pi n / N)`, the argument taken literally.
    PaperLiteral,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Semiclassical => "semiclassical",
            Convention::PaperLiteral => "paper-literal",
        }
    }

    /// Diagonal entries of the generator `V_j` (component `j`) so that the
    /// perturbation factor is `exp(i N eps . V)`.
    pub fn generator(self, dim: HilbertDim, component: usize) -> Vec<f64> {
        let nf = dim.get() as f64;
        (0..dim.get())
            .map(|n| match self {
                Convention::Semiclassical => TAU * v_potential(n as f64 / nf)[component],
                Convention::PaperLiteral => v_potential(TAU * n as f64 / nf)[component],
            })
            .collect()
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semiclassical" => Ok(Convention::Semiclassical),
            "paper-literal" => Ok(Convention::PaperLiteral),
            _ => Err(Error::InvalidArgument(format!("unknown convention '{s}'"))),
        }
    }
}

/// One period of the quantum map, stored as its diagonal phase tables.
#[derive(Clone, Debug)]
pub struct Propagator {
    dim: HilbertDim,
    params: MapParams,
    convention: Convention,
    /// `-pi m^2 / N`, reduced mod 2 pi.
    kinetic_phase: Vec<f64>,
    /// `pi k n^2 / N + Theta(n)`.
    potential_phase: Vec<f64>,
    kinetic: Vec<Complex64>,
    potential: Vec<Complex64>,
    dft: Dft,
}

impl Propagator {
    pub fn new(dim: HilbertDim, params: MapParams, convention: Convention) -> Self {
        let size = dim.get();
        let side = dim.grid_side();
        let nf = size as f64;
        // exp(i pi j / N) only depends on j mod 2N, so reduce exactly.
        let half_turns = |j: usize| PI * (j % side) as f64 / nf;
        let kinetic_phase: Vec<f64> = (0..size).map(|m| -half_turns(m * m)).collect();
        let generators: Vec<Vec<f64>> = (0..3)
            .filter(|&j| params.eps[j] != 0.0)
            .map(|j| {
                let scale = nf * params.eps[j];
                convention
                    .generator(dim, j)
                    .into_iter()
                    .map(|v| scale * v)
                    .collect()
            })
            .collect();
        let k = params.k as usize % side;
        let potential_phase: Vec<f64> = (0..size)
            .map(|n| {
                let theta: f64 = generators.iter().map(|g| g[n]).sum();
                half_turns(k * ((n * n) % side)) + theta
            })
            .collect();
        let to_unit = |v: &Vec<f64>| v.iter().map(|x| Complex64::from_polar(1.0, *x)).collect();
        Propagator {
            dim,
            params,
            convention,
            kinetic: to_unit(&kinetic_phase),
            potential: to_unit(&potential_phase),
            kinetic_phase,
            potential_phase,
            dft: Dft::new(dim),
        }
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn kinetic_phase(&self) -> &[f64] {
        &self.kinetic_phase
    }

    pub fn potential_phase(&self) -> &[f64] {
        &self.potential_phase
    }

    /// One forward period: position phases, to momentum, kinetic phases,
    /// back to position.
    pub fn step_in_place(&self, amps: &mut [Complex64]) -> Result<()> {
        check_len(self.dim.get(), amps.len())?;
        amps.iter_mut()
            .zip(&self.potential)
            .for_each(|(a, f)| *a *= f);
        self.dft.forward_in_place(amps)?;
        amps.iter_mut()
            .zip(&self.kinetic)
            .for_each(|(a, f)| *a *= f);
        self.dft.inverse_in_place(amps)
    }

    /// One backward period, the exact adjoint factor sequence.
    pub fn step_back_in_place(&self, amps: &mut [Complex64]) -> Result<()> {
        check_len(self.dim.get(), amps.len())?;
        self.dft.forward_in_place(amps)?;
        amps.iter_mut()
            .zip(&self.kinetic)
            .for_each(|(a, f)| *a *= f.conj());
        self.dft.inverse_in_place(amps)?;
        amps.iter_mut()
            .zip(&self.potential)
            .for_each(|(a, f)| *a *= f.conj());
        Ok(())
    }

    /// `U^t psi` for any integer `t`.
    pub fn apply(&self, state: &StateVector, t: i64) -> Result<StateVector> {
        let mut out = state.clone();
        for _ in 0..t.unsigned_abs() {
            if t > 0 {
                self.step_in_place(out.amplitudes_mut())?;
            } else {
                self.step_back_in_place(out.amplitudes_mut())?;
            }
        }
        Ok(out)
    }

    /// Dense matrix of one period, built column by column.
    pub fn dense(&self) -> Result<DenseOperator> {
        let size = self.dim.get();
        if size > DENSE_LIMIT {
            return Err(Error::DenseTooLarge {
                n: size,
                limit: DENSE_LIMIT,
            });
        }
        let mut op = DenseOperator::zeros(self.dim);
        for col in 0..size {
            let mut e = vec![Complex64::new(0.0, 0.0); size];
            e[col] = Complex64::new(1.0, 0.0);
            self.step_in_place(&mut e)?;
            for (row, v) in e.into_iter().enumerate() {
                op.entries_mut()[[row, col]] = v;
            }
        }
        Ok(op)
    }
}

/// Convenience constructor mirroring [`Propagator::new`].
pub fn build_propagator(dim: HilbertDim, params: MapParams, convention: Convention) -> Propagator {
    Propagator::new(dim, params, convention)
}

/// Torus coherent state centred at `(q0, p0)`:
/// `<q_n|phi> ~ sum_nu exp(-pi N (q_n - q0 + nu)^2) exp(2 pi i N p0 (q_n - q0 + nu))`,
/// normalised and phased so the amplitude at the grid point nearest `q0`
/// is real and positive.
pub fn coherent_state(packet: Packet, dim: HilbertDim) -> StateVector {
    let size = dim.get();
    let nf = size as f64;
    let mut amps: Vec<Complex64> = (0..size)
        .map(|n| {
            let d = minimal_image(n as f64 / nf - packet.q0);
            (-WINDING_RANGE..=WINDING_RANGE)
                .map(|nu| {
                    let x = d + nu as f64;
                    let e = -PI * nf * x * x;
                    if e < -745.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::from_polar(e.exp(), TAU * nf * packet.p0 * x)
                    }
                })
                .sum()
        })
        .collect();
    let anchor = ((packet.q0 * nf).round() as usize) % size;
    let phase = amps[anchor].conj() / amps[anchor].norm();
    amps.iter_mut().for_each(|a| *a *= phase);
    let mut state = StateVector::from_amplitudes(amps).expect("dimension validated");
    state.normalize();
    state
}

/// The three components of `S^t = sum_{j=1..t} U_c^{-j} V U_c^{j}` as
/// dense matrices, with `V` the generator of the given convention.
pub fn s_operator(
    dim: HilbertDim,
    k: u32,
    t: usize,
    convention: Convention,
) -> Result<[DenseOperator; 3]> {
    if dim.get() > DENSE_LIMIT {
        return Err(Error::DenseTooLarge {
            n: dim.get(),
            limit: DENSE_LIMIT,
        });
    }
    if t == 0 {
        return Err(Error::InvalidArgument("S^t needs t >= 1".into()));
    }
    let u = Propagator::new(dim, MapParams::unperturbed(k)?, convention).dense()?;
    let u_dag = u.adjoint();
    let build = |component: usize| -> Result<DenseOperator> {
        let mut term = DenseOperator::diagonal(&convention.generator(dim, component))?;
        let mut acc = DenseOperator::zeros(dim);
        for _ in 0..t {
            term = u_dag.matmul(&term).matmul(&u);
            acc = acc.add(&term);
        }
        Ok(acc)
    };
    Ok([build(0)?, build(1)?, build(2)?])
}
