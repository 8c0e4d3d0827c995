//! Classical perturbed cat map
//! `p' = p + k q + eps . V'(q)`, `q' = q + p'` (both mod 1), Gaussian packet
//! densities sampled on the phase-space grid, and trajectory deviations.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HilbertDim;
use crate::weyl::GridFunction;

/// Images `nu` kept in the periodised Gaussian sums.
pub const WINDING_RANGE: i32 = 3;

/// Terms whose exponent is below this underflow to (sub)normal zero.
const EXP_FLOOR: f64 = -745.0;

/// Map parameters: integer shear `k >= 1` and perturbation vector
/// `(eps0, eps1, eps2)` multiplying the quadratic, cosine and linear
/// potentials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub k: u32,
    pub eps: [f64; 3],
}

impl MapParams {
    pub fn new(k: u32, eps: [f64; 3]) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        if eps.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite eps {eps:?}")));
        }
        Ok(MapParams { k, eps })
    }

    pub fn unperturbed(k: u32) -> Result<Self> {
        MapParams::new(k, [0.0; 3])
    }

    /// Same `k` with the perturbation switched off.
    pub fn to_unperturbed(&self) -> Self {
        MapParams {
            k: self.k,
            eps: [0.0; 3],
        }
    }

    /// Perturbation strength `|eps|`.
    pub fn strength(&self) -> f64 {
        self.eps.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn is_unperturbed(&self) -> bool {
        self.eps.iter().all(|e| *e == 0.0)
    }

    #[inline]
    fn kick(&self, q: f64) -> f64 {
        let smooth = if self.eps[1] == 0.0 {
            0.0
        } else {
            self.eps[1] * (TAU * q).sin()
        };
        self.eps[0] * q + smooth + self.eps[2]
    }

    #[inline]
    fn kick_derivative(&self, q: f64) -> f64 {
        self.eps[0] + self.eps[1] * TAU * (TAU * q).cos()
    }
}

/// Point on the unit torus; coordinates are kept in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        PhasePoint {
            q: wrap01(q),
            p: wrap01(p),
        }
    }

    /// Minimal-image displacement `other - self`, components in `[-1/2, 1/2)`.
    pub fn displacement_to(&self, other: &PhasePoint) -> [f64; 2] {
        [
            minimal_image(other.q - self.q),
            minimal_image(other.p - self.p),
        ]
    }

    /// Minimal-image torus distance.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        let [dq, dp] = self.displacement_to(other);
        dq.hypot(dp)
    }
}

/// Centre `(q0, p0)` of a Gaussian packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub q0: f64,
    pub p0: f64,
}

impl Packet {
    pub fn new(q0: f64, p0: f64) -> Self {
        Packet {
            q0: wrap01(q0),
            p0: wrap01(p0),
        }
    }

    pub fn center(&self) -> PhasePoint {
        PhasePoint {
            q: self.q0,
            p: self.p0,
        }
    }
}

/// `f64::floor` through an integer truncation, which avoids a libm call on
/// targets without a rounding instruction. Exact for `|x| < 2^63`.
#[inline]
fn floor(x: f64) -> f64 {
    let t = x as i64 as f64;
    if t > x {
        t - 1.0
    } else {
        t
    }
}

/// Reduce into `[0, 1)`. `x - floor(x)` can round up to exactly 1 for tiny
/// negative `x`, which is folded back to 0.
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let r = x - floor(x);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Nearest-image representative in `[-1/2, 1/2)`.
#[inline]
pub fn minimal_image(d: f64) -> f64 {
    d - floor(d + 0.5)
}

/// `V(q) = (q^2/2, -cos(2 pi q)/(2 pi), q)`.
pub fn v_potential(q: f64) -> [f64; 3] {
    [0.5 * q * q, -(TAU * q).cos() / TAU, q]
}

/// `V'(q) = (q, sin(2 pi q), 1)`.
#[inline]
pub fn v_dot(q: f64) -> [f64; 3] {
    [q, (TAU * q).sin(), 1.0]
}

#[inline]
pub fn map_forward(x: PhasePoint, params: &MapParams) -> PhasePoint {
    let p = wrap01(x.p + params.k as f64 * x.q + params.kick(x.q));
    let q = wrap01(x.q + p);
    PhasePoint { q, p }
}

#[inline]
pub fn map_inverse(x: PhasePoint, params: &MapParams) -> PhasePoint {
    let q = wrap01(x.q - x.p);
    let p = wrap01(x.p - params.k as f64 * q - params.kick(q));
    PhasePoint { q, p }
}

/// One inverse step of a reference point `c` under `reference` together with
/// the minimal-image offset `d` of a second trajectory under `perturbed`.
/// The offset is updated directly, so it keeps full relative precision
/// however small it is.
#[inline]
pub fn inverse_step_pair(
    c: PhasePoint,
    d: [f64; 2],
    reference: &MapParams,
    perturbed: &MapParams,
) -> (PhasePoint, [f64; 2]) {
    let k = reference.k as f64;
    let q = wrap01(c.q - c.p);
    let dq = minimal_image(d[0] - d[1]);
    let q_moved = wrap01(q + dq);
    let kick_ref = reference.kick(q);
    let p = wrap01(c.p - k * q - kick_ref);
    let dp = minimal_image(d[1] - k * dq - (perturbed.kick(q_moved) - kick_ref));
    (PhasePoint { q, p }, [dq, dp])
}

/// [`inverse_step_pair`] applied `t` times to every `(c, d)` in place.
/// Trajectories are advanced in interleaved blocks, which is much faster
/// than one point at a time.
pub fn inverse_pair_all(
    points: &mut [(PhasePoint, [f64; 2])],
    reference: &MapParams,
    perturbed: &MapParams,
    t: usize,
) {
    const LANES: usize = 8;
    for block in points.chunks_mut(LANES) {
        for _ in 0..t {
            for (c, d) in block.iter_mut() {
                (*c, *d) = inverse_step_pair(*c, *d, reference, perturbed);
            }
        }
    }
}

/// The point `c + d` on the torus.
#[inline]
pub fn offset_point(c: PhasePoint, d: [f64; 2]) -> PhasePoint {
    PhasePoint::new(c.q + d[0], c.p + d[1])
}

/// `M^{-t}(x)`.
#[inline]
pub fn map_inverse_n(mut x: PhasePoint, params: &MapParams, t: usize) -> PhasePoint {
    for _ in 0..t {
        x = map_inverse(x, params);
    }
    x
}

/// `M^{t}(x)`.
#[inline]
pub fn map_forward_n(mut x: PhasePoint, params: &MapParams, t: usize) -> PhasePoint {
    for _ in 0..t {
        x = map_forward(x, params);
    }
    x
}

/// Jacobian of `M^{-1}` at the image point `x = (q', p')`, row-major.
pub fn inverse_jacobian(x: PhasePoint, params: &MapParams) -> [[f64; 2]; 2] {
    let q = wrap01(x.q - x.p);
    let s = params.k as f64 + params.kick_derivative(q);
    [[1.0, -1.0], [-s, 1.0 + s]]
}

/// Unperturbed map on integer grid coordinates `(n, m)` mod `2N`.
#[inline]
pub fn grid_forward(n: usize, m: usize, k: u32, side: usize) -> (usize, usize) {
    let p = (m + (k as usize % side) * n) % side;
    let q = (n + p) % side;
    (q, p)
}

/// Inverse of [`grid_forward`].
#[inline]
pub fn grid_inverse(n: usize, m: usize, k: u32, side: usize) -> (usize, usize) {
    let q = (n + side - m) % side;
    let p = (m + side - ((k as usize % side) * q) % side) % side;
    (q, p)
}

/// Lyapunov exponent `log[(k + 2 + sqrt(k (k + 4))) / 2]` of the
/// unperturbed map.
pub fn lyapunov(k: u32) -> f64 {
    let k = k as f64;
    ((k + 2.0 + (k * (k + 4.0)).sqrt()) / 2.0).ln()
}

/// Periodised Gaussian packet
/// `rho(q, p) = D g(q - q0) g(p - p0)`, `g(d) = sum_nu exp(-2 pi N (d + nu)^2)`,
/// with `D` fixed numerically by `sum_grid rho^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianDensity {
    packet: Packet,
    dim: HilbertDim,
    width: f64,
    norm: f64,
}

impl GaussianDensity {
    pub fn new(packet: Packet, dim: HilbertDim) -> Self {
        let mut g = GaussianDensity {
            packet,
            dim,
            width: 2.0 * PI * dim.get() as f64,
            norm: 1.0,
        };
        let side = dim.grid_side();
        let axis_sq = |c: f64| -> f64 {
            (0..side)
                .map(|j| g.profile(j as f64 / side as f64 - c).powi(2))
                .sum()
        };
        g.norm = 1.0 / (axis_sq(packet.q0) * axis_sq(packet.p0)).sqrt();
        g
    }

    pub fn packet(&self) -> Packet {
        self.packet
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    /// The normalisation constant `D`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Large-N approximation of `D`.
    pub fn asymptotic_norm(packet: Packet, dim: HilbertDim) -> f64 {
        let n = dim.get() as f64;
        let tail = (-PI * n).exp();
        let fq = 1.0 + 2.0 * (4.0 * PI * n * packet.q0).cos() * tail;
        let fp = 1.0 + 2.0 * (4.0 * PI * n * packet.p0).cos() * tail;
        1.0 / (n.sqrt() * (fq * fp).sqrt())
    }

    /// One-dimensional periodised profile `g(d)`.
    #[inline]
    pub fn profile(&self, d: f64) -> f64 {
        let d = minimal_image(d);
        let mut acc = 0.0;
        for nu in -WINDING_RANGE..=WINDING_RANGE {
            let x = d + nu as f64;
            let e = -self.width * x * x;
            if e > EXP_FLOOR {
                acc += e.exp();
            }
        }
        acc
    }

    /// Change `g(d + delta) - g(d)`, accurate when `delta` is small.
    fn profile_change(&self, d: f64, delta: f64) -> f64 {
        let d = minimal_image(d);
        let mut acc = 0.0;
        for nu in -WINDING_RANGE..=WINDING_RANGE {
            let x = d + nu as f64;
            let base = -self.width * x * x;
            if delta.abs() < 1e-3 {
                if base > EXP_FLOOR + 50.0 {
                    let shift = -self.width * delta * (2.0 * x + delta);
                    acc += base.exp() * shift.exp_m1();
                }
            } else {
                let y = x + delta;
                let shifted = -self.width * y * y;
                let a = if shifted > EXP_FLOOR {
                    shifted.exp()
                } else {
                    0.0
                };
                let b = if base > EXP_FLOOR { base.exp() } else { 0.0 };
                acc += a - b;
            }
        }
        acc
    }

    #[inline]
    pub fn eval(&self, x: PhasePoint) -> f64 {
        let gq = self.profile(x.q - self.packet.q0);
        if gq == 0.0 {
            return 0.0;
        }
        self.norm * gq * self.profile(x.p - self.packet.p0)
    }

    /// `rho(moved) - rho(reference)` evaluated from the minimal-image
    /// displacement, so that tiny differences keep full relative precision.
    pub fn difference(&self, reference: PhasePoint, moved: PhasePoint) -> f64 {
        self.difference_by(reference, reference.displacement_to(&moved))
    }

    /// `rho(reference + offset) - rho(reference)`.
    pub fn difference_by(&self, reference: PhasePoint, offset: [f64; 2]) -> f64 {
        let [dq, dp] = offset;
        let aq = reference.q - self.packet.q0;
        let ap = reference.p - self.packet.p0;
        let gq = self.profile(aq);
        let gp = self.profile(ap);
        let cq = self.profile_change(aq, dq);
        let cp = self.profile_change(ap, dp);
        self.norm * (gq * cp + cq * gp + cq * cp)
    }

    /// Samples on the grid.
    pub fn grid(&self) -> GridFunction {
        let side = self.dim.grid_side();
        let inv = 1.0 / side as f64;
        let gq: Vec<f64> = (0..side)
            .map(|j| self.profile(j as f64 * inv - self.packet.q0))
            .collect();
        let gp: Vec<f64> = (0..side)
            .map(|j| self.profile(j as f64 * inv - self.packet.p0))
            .collect();
        GridFunction::from_fn(self.dim, |n, m| self.norm * gq[n] * gp[m])
    }
}

/// Gaussian packet density on the grid.
pub fn gaussian_density(packet: Packet, dim: HilbertDim) -> GridFunction {
    GaussianDensity::new(packet, dim).grid()
}

#[inline]
pub(crate) fn grid_point(n: usize, m: usize, side: usize) -> PhasePoint {
    let inv = 1.0 / side as f64;
    PhasePoint {
        q: n as f64 * inv,
        p: m as f64 * inv,
    }
}

/// `rho^t = rho o M^{-t}` on the grid, iterating the inverse map from every
/// grid point and evaluating the closed-form density at the preimage.
pub fn evolve_density(
    packet: Packet,
    params: &MapParams,
    t: usize,
    dim: HilbertDim,
) -> GridFunction {
    let rho = GaussianDensity::new(packet, dim);
    let side = dim.grid_side();
    GridFunction::from_fn(dim, |n, m| {
        rho.eval(map_inverse_n(grid_point(n, m, side), params, t))
    })
}

/// Incremental density evolution that caches `M^{-t}(x)` for every grid
/// point, so a whole time series costs one map step per point per time.
#[derive(Clone, Debug)]
pub struct DensityEvolver {
    density: GaussianDensity,
    params: MapParams,
    preimages: Vec<PhasePoint>,
    t: usize,
}

impl DensityEvolver {
    pub fn new(density: GaussianDensity, params: MapParams) -> Self {
        let side = density.dim().grid_side();
        let preimages = (0..side * side)
            .map(|i| grid_point(i / side, i % side, side))
            .collect();
        DensityEvolver {
            density,
            params,
            preimages,
            t: 0,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn density(&self) -> &GaussianDensity {
        &self.density
    }

    /// Current preimages `M^{-t}(x_{n,m})`, row-major.
    pub fn preimages(&self) -> &[PhasePoint] {
        &self.preimages
    }

    pub fn step(&mut self) {
        let params = self.params;
        self.preimages
            .iter_mut()
            .for_each(|x| *x = map_inverse(*x, &params));
        self.t += 1;
    }

    pub fn advance_to(&mut self, t: usize) {
        while self.t < t {
            self.step();
        }
    }

    /// `rho^t` on the grid.
    pub fn grid(&self) -> GridFunction {
        let values = self
            .preimages
            .iter()
            .map(|x| self.density.eval(*x))
            .collect();
        GridFunction::from_values(self.density.dim(), values).expect("grid sized at construction")
    }
}

/// Preimages of every grid point under the unperturbed map, with the
/// offsets of the perturbed preimages carried alongside at full precision.
/// The unperturbed preimages are grid points given by an integer matrix mod
/// `2N`, so only the offsets are stored.
#[derive(Clone, Debug)]
pub struct PairedEvolver {
    density: GaussianDensity,
    params: MapParams,
    reference_params: MapParams,
    /// `M_c^{-t}` on grid coordinates, entries reduced mod `2N`.
    inverse: [[usize; 2]; 2],
    offsets: Vec<[f64; 2]>,
    t: usize,
}

/// Row-major grid preimages `inverse . (n, m)` mod `side`.
fn matrix_points(inverse: [[usize; 2]; 2], side: usize) -> impl Iterator<Item = PhasePoint> {
    (0..side).flat_map(move |n| {
        let mut q = inverse[0][0] * n % side;
        let mut p = inverse[1][0] * n % side;
        (0..side).map(move |_| {
            let x = grid_point(q, p, side);
            q = (q + inverse[0][1]) % side;
            p = (p + inverse[1][1]) % side;
            x
        })
    })
}

impl PairedEvolver {
    pub fn new(density: GaussianDensity, params: MapParams) -> Self {
        let side = density.dim().grid_side();
        PairedEvolver {
            density,
            params,
            reference_params: params.to_unperturbed(),
            inverse: [[1, 0], [0, 1]],
            offsets: vec![[0.0, 0.0]; side * side],
            t: 0,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn step(&mut self) {
        let (reference, perturbed) = (self.reference_params, self.params);
        let side = self.density.dim().grid_side();
        for (c, d) in matrix_points(self.inverse, side).zip(&mut self.offsets) {
            *d = inverse_step_pair(c, *d, &reference, &perturbed).1;
        }
        // one more inverse step: (q, p) -> (q - p, p - k (q - p))
        let k = self.params.k as usize % side;
        let a = self.inverse;
        let mut next = [[0; 2]; 2];
        for col in 0..2 {
            let q = (a[0][col] + side - a[1][col]) % side;
            next[0][col] = q;
            next[1][col] = (a[1][col] + side - k * q % side) % side;
        }
        self.inverse = next;
        self.t += 1;
    }

    /// Unperturbed preimages `M_c^{-t}(x_{n,m})`, row-major.
    pub fn reference(&self) -> impl Iterator<Item = PhasePoint> {
        matrix_points(self.inverse, self.density.dim().grid_side())
    }

    /// `M^{-t}(x_{n,m}) - M_c^{-t}(x_{n,m})`, minimal image.
    pub fn offsets(&self) -> &[[f64; 2]] {
        &self.offsets
    }

    fn collect(&self, f: impl Fn(PhasePoint, [f64; 2]) -> f64) -> GridFunction {
        let values = self
            .reference()
            .zip(&self.offsets)
            .map(|(c, d)| f(c, *d))
            .collect();
        GridFunction::from_values(self.density.dim(), values).expect("grid sized at construction")
    }

    /// `rho^t` under the perturbed map.
    pub fn grid(&self) -> GridFunction {
        self.collect(|c, d| self.density.eval(offset_point(c, d)))
    }

    /// `rho_c^t` under the unperturbed map.
    pub fn reference_grid(&self) -> GridFunction {
        self.collect(|c, _| self.density.eval(c))
    }

    /// `rho^t - rho_c^t`.
    pub fn difference_grid(&self) -> GridFunction {
        self.collect(|c, d| self.density.difference_by(c, d))
    }
}

/// Trajectory deviation `delta phi_t(x) = (phi + delta phi)^t(x) - phi^t(x)`
/// for the inverse maps `phi = M^{-1}` of two parameter sets sharing `k`,
/// for `t = 1..=t_max`, from exact co-iteration.
pub fn deviation_series(
    x: PhasePoint,
    params_ref: &MapParams,
    params_pert: &MapParams,
    t_max: usize,
) -> Result<Vec<[f64; 2]>> {
    check_same_k(params_ref, params_pert)?;
    let mut c = x;
    let mut d = [0.0, 0.0];
    Ok((0..t_max)
        .map(|_| {
            (c, d) = inverse_step_pair(c, d, params_ref, params_pert);
            d
        })
        .collect())
}

/// Linearised recursion
/// `delta_{t+1} = (grad phi)(phi^t x) delta_t + delta phi(phi^t x)`.
pub fn deviation_series_linearized(
    x: PhasePoint,
    params_ref: &MapParams,
    params_pert: &MapParams,
    t_max: usize,
) -> Result<Vec<[f64; 2]>> {
    check_same_k(params_ref, params_pert)?;
    let mut y = x;
    let mut d = [0.0, 0.0];
    let mut out = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        let jac = inverse_jacobian(y, params_ref);
        let next = map_inverse(y, params_ref);
        let step = next.displacement_to(&map_inverse(y, params_pert));
        d = [
            jac[0][0] * d[0] + jac[0][1] * d[1] + step[0],
            jac[1][0] * d[0] + jac[1][1] * d[1] + step[1],
        ];
        out.push(d);
        y = next;
    }
    Ok(out)
}

fn check_same_k(a: &MapParams, b: &MapParams) -> Result<()> {
    if a.k != b.k {
        return Err(Error::InvalidParams(format!(
            "deviation needs a common k, got {} and {}",
            a.k, b.k
        )));
    }
    Ok(())
}
