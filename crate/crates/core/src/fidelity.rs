//! Quantum-classical fidelity `F(t) = sum W_{phi^t} rho^t`, the quantum and
//! classical fidelities, and the split
//! `F = 1 + I1 + I2 + cross` relative to the unperturbed cat map.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::classical::{
    grid_forward, grid_point, inverse_pair_all, inverse_step_pair, map_forward_n, map_inverse_n,
    offset_point, GaussianDensity, MapParams, Packet, PairedEvolver, PhasePoint,
};
use crate::error::Result;
use crate::hilbert::{check_len, HilbertDim, StateVector};
use crate::propagator::{coherent_state, s_operator, Convention, Propagator};
use crate::weyl::{pairing, project_symbol, GridFunction, WignerTransform};

/// A phase-space density concentrated near one point pairs with a Wigner
/// function through its lift `2 P(rho)` to the Weyl symbols (see
/// [`project_symbol`]), which carries the signed half-period images a Wigner
/// function always has. Since `W = P(W)`, the pairing is `2 sum W rho`.
pub const IMAGE_FACTOR: f64 = 2.0;

/// One time slice of the fidelity decomposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FidelitySample {
    pub t: usize,
    /// `F(t)`.
    pub qcf: f64,
    /// `|F_q(t)|^2`.
    pub qf_abs2: f64,
    /// `F_c(t)`.
    pub cf: f64,
    pub i1: f64,
    pub i2: f64,
    /// `F - 1 - I1 - I2`.
    pub cross: f64,
    /// `F - |F_q|^2 - F_c + 1`.
    pub cross_qf: f64,
    pub i1_pred: f64,
    pub i2_pred: Option<f64>,
}

impl FidelitySample {
    fn columns(&self) -> [f64; 9] {
        [
            self.qcf,
            self.qf_abs2,
            self.cf,
            self.i1,
            self.i2,
            self.cross,
            self.i1_pred,
            self.cross_qf,
            self.i2_pred.unwrap_or(f64::NAN),
        ]
    }
}

/// Time-indexed fidelity record for one packet or an ensemble mean.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FidelitySeries {
    pub samples: Vec<FidelitySample>,
}

const BASE_COLUMNS: &str = "t,qcf,qf_abs2,cf,i1,i2,cross,i1_pred";

impl FidelitySeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `F(t)` indexed by `t`.
    pub fn qcf_values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.qcf).collect()
    }

    /// Arithmetic mean over series of equal length, reduced in order.
    pub fn mean(series: &[FidelitySeries]) -> Option<FidelitySeries> {
        let first = series.first()?;
        let count = series.len() as f64;
        let samples = (0..first.len())
            .map(|i| {
                let mut acc = [0.0; 9];
                let mut has_i2 = true;
                for s in series {
                    let sample = &s.samples[i];
                    has_i2 &= sample.i2_pred.is_some();
                    for (a, v) in acc.iter_mut().zip(sample.columns()) {
                        *a += v;
                    }
                }
                let m = acc.map(|a| a / count);
                FidelitySample {
                    t: first.samples[i].t,
                    qcf: m[0],
                    qf_abs2: m[1],
                    cf: m[2],
                    i1: m[3],
                    i2: m[4],
                    cross: m[5],
                    i1_pred: m[6],
                    cross_qf: m[7],
                    i2_pred: has_i2.then_some(m[8]),
                }
            })
            .collect();
        Some(FidelitySeries { samples })
    }

    /// CSV with the standard columns; `extended` appends `cross_qf` and
    /// `i2_pred`. Values use 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String], extended: bool) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        if extended {
            writeln!(w, "{BASE_COLUMNS},cross_qf,i2_pred")?;
        } else {
            writeln!(w, "{BASE_COLUMNS}")?;
        }
        let take = if extended { 9 } else { 7 };
        for s in &self.samples {
            let cols: Vec<String> = s.columns()[..take]
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(w, "{},{}", s.t, cols.join(","))?;
        }
        Ok(())
    }
}

/// Lift of a density to the Weyl symbols, `2 P(rho)`. For a coherent
/// state this is its Wigner function up to `exp(-O(N))`.
pub fn symbol_image(density: &GridFunction) -> GridFunction {
    let mut lifted = project_symbol(density);
    lifted
        .values_mut()
        .iter_mut()
        .for_each(|v| *v *= IMAGE_FACTOR);
    lifted
}

/// `F = sum_{(n,m)} W_psi(n,m) [2 P(rho)](n,m) = 2 sum W_psi rho`.
pub fn qcf(state: &StateVector, density: &GridFunction) -> Result<f64> {
    check_len(state.len(), density.dim().get())?;
    let w = WignerTransform::new(state.dim()).wigner(state)?;
    Ok(IMAGE_FACTOR * pairing(&w, density)?)
}

/// Dimension, map and quantisation convention shared by every fidelity
/// computation.
#[derive(Clone, Debug)]
pub struct FidelityModel {
    dim: HilbertDim,
    params: MapParams,
    convention: Convention,
    perturbed: Propagator,
    unperturbed: Propagator,
    transform: WignerTransform,
}

impl FidelityModel {
    pub fn new(dim: HilbertDim, params: MapParams, convention: Convention) -> Self {
        FidelityModel {
            dim,
            params,
            convention,
            perturbed: Propagator::new(dim, params, convention),
            unperturbed: Propagator::new(dim, params.to_unperturbed(), convention),
            transform: WignerTransform::new(dim),
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

    pub fn propagator(&self) -> &Propagator {
        &self.perturbed
    }

    pub fn unperturbed_propagator(&self) -> &Propagator {
        &self.unperturbed
    }

    pub fn transform(&self) -> &WignerTransform {
        &self.transform
    }

    /// `F_q(t) = <phi| U^{-t} U_c^t |phi>`.
    pub fn quantum_fidelity(&self, packet: Packet, t: usize) -> Result<Complex64> {
        let phi = coherent_state(packet, self.dim);
        let a = self.perturbed.apply(&phi, t as i64)?;
        let b = self.unperturbed.apply(&phi, t as i64)?;
        a.inner(&b)
    }

    /// `F_c(t) = sum rho(M^{-t} x) rho(M_c^{-t} x)`.
    pub fn classical_fidelity(&self, packet: Packet, t: usize) -> f64 {
        let rho = GaussianDensity::new(packet, self.dim);
        let plain = self.params.to_unperturbed();
        let side = self.dim.grid_side();
        let mut pre: Vec<(PhasePoint, [f64; 2])> = (0..side * side)
            .map(|i| (grid_point(i / side, i % side, side), [0.0, 0.0]))
            .collect();
        inverse_pair_all(&mut pre, &plain, &self.params, t);
        pre.iter()
            .map(|(c, d)| rho.eval(offset_point(*c, *d)) * rho.eval(*c))
            .sum()
    }

    /// Predicted `I1 ~ exp(-pi N |d|^2) - 1`, with `d` the deviation of the
    /// perturbed inverse trajectory launched from `M_c^t(q0, p0)`.
    pub fn i1_prediction(&self, packet: Packet, t: usize) -> f64 {
        if t == 0 || self.params.is_unperturbed() {
            return 0.0;
        }
        let plain = self.params.to_unperturbed();
        let anchor = map_forward_n(packet.center(), &plain, t);
        let mut c = anchor;
        let mut d = [0.0, 0.0];
        for _ in 0..t {
            (c, d) = inverse_step_pair(c, d, &plain, &self.params);
        }
        let [dq, dp] = d;
        let n = self.dim.get() as f64;
        (-std::f64::consts::PI * n * (dq * dq + dp * dp)).exp_m1()
    }

    /// First-order echo prediction `2 N eps . Im <phi_c^t| S^t |phi_c^t>`.
    /// Dense, so limited to small N.
    pub fn i2_leading(&self, packet: Packet, t: usize) -> Result<f64> {
        if t == 0 {
            // S^0 is empty; validate the dimension all the same
            s_operator(self.dim, self.params.k, 1, self.convention)?;
            return Ok(0.0);
        }
        let s = s_operator(self.dim, self.params.k, t, self.convention)?;
        let phi = self
            .unperturbed
            .apply(&coherent_state(packet, self.dim), t as i64)?;
        let n = self.dim.get() as f64;
        let mut acc = 0.0;
        for (j, op) in s.iter().enumerate() {
            if self.params.eps[j] != 0.0 {
                acc += self.params.eps[j] * op.expectation(&phi)?.im;
            }
        }
        Ok(2.0 * n * acc)
    }

    pub fn run(&self, packet: Packet) -> PacketRun<'_> {
        PacketRun::new(self, packet)
    }

    /// Full decomposition at a single time.
    pub fn decompose(&self, packet: Packet, t: usize) -> Result<FidelitySample> {
        let mut run = self.run(packet);
        run.advance_to(t)?;
        run.sample()
    }

    /// Decomposition for `t = 0..=t_max`, propagated incrementally.
    pub fn series(&self, packet: Packet, t_max: usize) -> Result<FidelitySeries> {
        let mut run = self.run(packet);
        let mut samples = Vec::with_capacity(t_max + 1);
        loop {
            samples.push(run.sample()?);
            if run.t() == t_max {
                break;
            }
            run.step()?;
        }
        Ok(FidelitySeries { samples })
    }
}

/// Paired classical/quantum evolution of one packet under the perturbed and
/// the unperturbed map, advanced one step at a time.
#[derive(Clone, Debug)]
pub struct PacketRun<'a> {
    model: &'a FidelityModel,
    packet: Packet,
    state: StateVector,
    state_c: StateVector,
    classical: PairedEvolver,
    t: usize,
}

impl<'a> PacketRun<'a> {
    pub fn new(model: &'a FidelityModel, packet: Packet) -> Self {
        let density = GaussianDensity::new(packet, model.dim);
        let phi = coherent_state(packet, model.dim);
        PacketRun {
            model,
            packet,
            state: phi.clone(),
            state_c: phi,
            classical: PairedEvolver::new(density, model.params),
            t: 0,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn packet(&self) -> Packet {
        self.packet
    }

    /// `|phi^t>`.
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// `|phi_c^t>`.
    pub fn unperturbed_state(&self) -> &StateVector {
        &self.state_c
    }

    pub fn step(&mut self) -> Result<()> {
        self.model
            .perturbed
            .step_in_place(self.state.amplitudes_mut())?;
        self.model
            .unperturbed
            .step_in_place(self.state_c.amplitudes_mut())?;
        self.classical.step();
        self.t += 1;
        Ok(())
    }

    pub fn advance_to(&mut self, t: usize) -> Result<()> {
        while self.t < t {
            self.step()?;
        }
        Ok(())
    }

    /// `rho^t` on the grid.
    pub fn density(&self) -> GridFunction {
        self.classical.grid()
    }

    /// `rho_c^t` on the grid.
    pub fn unperturbed_density(&self) -> GridFunction {
        self.classical.reference_grid()
    }

    /// `delta rho^t = rho^t - rho_c^t`, from the offset carried with each
    /// unperturbed preimage.
    pub fn density_deviation(&self) -> GridFunction {
        self.classical.difference_grid()
    }

    /// Every fidelity quantity at the current time.
    ///
    /// `I1 = 2 sum W_{phi_c^t} delta rho^t` uses `Q(rho_c^t) = |phi_c^t><phi_c^t|`;
    /// `I2 = |<phi_c^t|phi^t>|^2 - 1` is evaluated as
    /// `-|phi^t - <phi_c^t|phi^t> phi_c^t|^2` to keep precision when tiny.
    pub fn sample(&self) -> Result<FidelitySample> {
        let transform = &self.model.transform;
        let w = transform.wigner(&self.state)?;
        let w_c = transform.wigner(&self.state_c)?;
        let rho = self.density();
        let rho_c = self.unperturbed_density();
        let delta = self.density_deviation();

        let qcf = IMAGE_FACTOR * pairing(&w, &rho)?;
        let cf = pairing(&rho, &rho_c)?;
        let i1 = IMAGE_FACTOR * pairing(&w_c, &delta)?;

        let overlap = self.state_c.inner(&self.state)?;
        let i2 = -self
            .state
            .amplitudes()
            .iter()
            .zip(self.state_c.amplitudes())
            .map(|(a, b)| (a - overlap * b).norm_sqr())
            .sum::<f64>();
        let qf_abs2 = 1.0 + i2;

        Ok(FidelitySample {
            t: self.t,
            qcf,
            qf_abs2,
            cf,
            i1,
            i2,
            cross: qcf - 1.0 - i1 - i2,
            cross_qf: qcf - qf_abs2 - cf + 1.0,
            i1_pred: self.model.i1_prediction(self.packet, self.t),
            i2_pred: None,
        })
    }
}

/// Gaussian tails below `exp(-TAIL_EXPONENT)` of the peak are dropped by
/// [`QcfTracker`].
pub const TAIL_EXPONENT: f64 = 40.0;

/// Above this radius the tracker stops following a disk and keeps every
/// grid preimage instead.
const MAX_DISK_RADIUS: f64 = 0.3;

const PROBES_PER_SIDE: usize = 16;

#[derive(Clone, Debug)]
enum Support {
    /// Grid points `x = M_c^t y` for the grid points `y` within `radius` of
    /// the packet centre. `rho(M^{-t} x)` is negligible elsewhere while the
    /// deviation `M^{-t} x - M_c^{-t} x` stays below `(radius - reach) / 2`.
    Disk {
        radius: f64,
        origins: Vec<PhasePoint>,
        images: Vec<(usize, usize)>,
    },
    Full(PairedEvolver),
}

/// `F(t)` for one packet without the unperturbed and classical-fidelity
/// bookkeeping of [`PacketRun`]. A step costs one Wigner transform plus
/// `t` inverse map steps per tracked grid point.
#[derive(Clone, Debug)]
pub struct QcfTracker {
    packet: Packet,
    density: GaussianDensity,
    state: StateVector,
    support: Support,
    reach: f64,
    t: usize,
}

impl QcfTracker {
    pub fn new(model: &FidelityModel, packet: Packet) -> Self {
        let n = model.dim.get() as f64;
        let reach = (TAIL_EXPONENT / (2.0 * std::f64::consts::PI * n)).sqrt();
        let mut tracker = QcfTracker {
            packet,
            density: GaussianDensity::new(packet, model.dim),
            state: coherent_state(packet, model.dim),
            support: Support::Disk {
                radius: 0.0,
                origins: Vec::new(),
                images: Vec::new(),
            },
            reach,
            t: 0,
        };
        tracker.rebuild(model, reach + 0.02);
        tracker
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn packet(&self) -> Packet {
        self.packet
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Whether the tracker fell back to all grid preimages.
    pub fn is_full_grid(&self) -> bool {
        matches!(self.support, Support::Full(_))
    }

    fn rebuild(&mut self, model: &FidelityModel, radius: f64) {
        if radius > MAX_DISK_RADIUS {
            let mut evolver = PairedEvolver::new(self.density, model.params);
            while evolver.t() < self.t {
                evolver.step();
            }
            self.support = Support::Full(evolver);
            return;
        }
        let side = model.dim.grid_side();
        let k = model.params.k;
        let span = (radius * side as f64).ceil() as i64 + 1;
        let c = self.packet.center();
        let cn = (c.q * side as f64).round() as i64;
        let cm = (c.p * side as f64).round() as i64;
        let mut origins = Vec::new();
        let mut images = Vec::new();
        for dn in -span..=span {
            for dm in -span..=span {
                let n = (cn + dn).rem_euclid(side as i64) as usize;
                let m = (cm + dm).rem_euclid(side as i64) as usize;
                let y = grid_point(n, m, side);
                if c.distance(&y) > radius {
                    continue;
                }
                let mut x = (n, m);
                for _ in 0..self.t {
                    x = grid_forward(x.0, x.1, k, side);
                }
                origins.push(y);
                images.push(x);
            }
        }
        self.support = Support::Disk {
            radius,
            origins,
            images,
        };
    }

    /// Largest `|M^{-t} x - M_c^{-t} x|` over a coarse lattice.
    fn probe_deviation(&self, params: &MapParams) -> f64 {
        let plain = params.to_unperturbed();
        let mut worst: f64 = 0.0;
        for i in 0..PROBES_PER_SIDE {
            for j in 0..PROBES_PER_SIDE {
                let x = PhasePoint::new(
                    (i as f64 + 0.5) / PROBES_PER_SIDE as f64,
                    (j as f64 + 0.5) / PROBES_PER_SIDE as f64,
                );
                let a = map_inverse_n(x, params, self.t);
                let b = map_inverse_n(x, &plain, self.t);
                worst = worst.max(a.distance(&b));
            }
        }
        worst
    }

    pub fn step(&mut self, model: &FidelityModel) -> Result<()> {
        model.perturbed.step_in_place(self.state.amplitudes_mut())?;
        self.t += 1;
        let side = model.dim.grid_side();
        match &mut self.support {
            Support::Disk { images, .. } => {
                for x in images.iter_mut() {
                    *x = grid_forward(x.0, x.1, model.params.k, side);
                }
            }
            Support::Full(evolver) => evolver.step(),
        }
        Ok(())
    }

    /// `F(t)`; `scratch` receives the Wigner function of the current state.
    pub fn qcf(&mut self, model: &FidelityModel, scratch: &mut GridFunction) -> Result<f64> {
        model.transform.wigner_into(&self.state, scratch)?;
        let side = scratch.side();
        let plain = model.params.to_unperturbed();
        let mut deviation = self.probe_deviation(&model.params);
        loop {
            if let Support::Disk { radius, .. } = self.support {
                if self.reach + 2.0 * deviation > radius {
                    self.rebuild(model, self.reach + 4.0 * deviation);
                }
            }
            match &self.support {
                Support::Full(evolver) => {
                    let acc: f64 = scratch
                        .values()
                        .iter()
                        .zip(evolver.reference().zip(evolver.offsets()))
                        .map(|(w, (c, d))| w * self.density.eval(offset_point(c, *d)))
                        .sum();
                    return Ok(IMAGE_FACTOR * acc);
                }
                Support::Disk {
                    radius,
                    origins,
                    images,
                } => {
                    let mut pre: Vec<(PhasePoint, [f64; 2])> = images
                        .iter()
                        .map(|&(n, m)| (grid_point(n, m, side), [0.0, 0.0]))
                        .collect();
                    inverse_pair_all(&mut pre, &plain, &model.params, self.t);
                    let mut acc = 0.0;
                    let mut worst: f64 = 0.0;
                    for ((y, &(n, m)), (c, d)) in origins.iter().zip(images).zip(&pre) {
                        debug_assert_eq!(c, y);
                        worst = worst.max(d[0].hypot(d[1]));
                        acc += scratch.get(n, m) * self.density.eval(offset_point(*c, *d));
                    }
                    if self.reach + 2.0 * worst <= *radius {
                        return Ok(IMAGE_FACTOR * acc);
                    }
                    deviation = deviation.max(worst);
                }
            }
        }
    }
}
