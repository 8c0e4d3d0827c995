//! Small-N oracle checks behind `catqcf selftest`.

use std::fmt;

use catqcf::fidelity::{qcf, FidelityModel};
use catqcf::propagator::coherent_state;
use catqcf::weyl::{pairing, quantize, symbol, wigner};
use catqcf::{Convention, DenseOperator, HilbertDim, MapParams, Packet, Propagator, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, value: catqcf::Result<f64>, tol: f64) -> CheckResult {
    match value {
        Ok(v) => CheckResult {
            name,
            passed: v <= tol,
            detail: format!("max deviation {v:.2e} (tolerance {tol:.0e})"),
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn dim(n: usize) -> HilbertDim {
    HilbertDim::new(n).expect("even")
}

fn split_vs_dense() -> catqcf::Result<f64> {
    let d = dim(8);
    let params = MapParams::new(1, [1e-3; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for convention in [Convention::Semiclassical, Convention::PaperLiteral] {
        let u = Propagator::new(d, params, convention);
        let dense = u.dense()?;
        let psi = StateVector::random(d, &mut rng);
        let mut expect = psi.clone();
        for _ in 0..5 {
            expect = dense.apply(&expect)?;
        }
        let got = u.apply(&psi, 5)?;
        for (a, b) in got.amplitudes().iter().zip(expect.amplitudes()) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok(worst)
}

fn egorov_operator() -> catqcf::Result<f64> {
    let d = dim(16);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in [1, 2] {
        let params = MapParams::unperturbed(k)?;
        let u = Propagator::new(d, params, Convention::default()).dense()?;
        let a = symbol(&random_hermitian(d, &mut rng))?;
        let moved = catqcf::GridFunction::from_fn(d, |n, m| {
            let (q, p) = catqcf::classical::grid_forward(n, m, k, d.grid_side());
            a.get(q, p)
        });
        let lhs = u.adjoint().matmul(&quantize(&a)?).matmul(&u);
        worst = worst.max(lhs.max_abs_diff(&quantize(&moved)?));
    }
    Ok(worst)
}

fn egorov_fidelity() -> catqcf::Result<f64> {
    let model = FidelityModel::new(dim(32), MapParams::unperturbed(1)?, Convention::default());
    let packet = Packet::new(0.3, 0.7);
    let mut run = model.run(packet);
    let f0 = run.sample()?.qcf;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        run.step()?;
        worst = worst.max((run.sample()?.qcf - f0).abs());
    }
    Ok(worst)
}

fn weyl_round_trip() -> catqcf::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for n in [8, 16] {
        let d = dim(n);
        for _ in 0..10 {
            let psi = StateVector::random(d, &mut rng);
            let phi = StateVector::random(d, &mut rng);
            let w = wigner(&psi)?;
            worst = worst.max(quantize(&w)?.max_abs_diff(&DenseOperator::projector(&psi)));
            let overlap = psi.inner(&phi)?.norm_sqr();
            worst = worst.max((pairing(&w, &wigner(&phi)?)? - overlap).abs());
            worst = worst.max((w.sum_sq() - 1.0).abs());
        }
    }
    Ok(worst)
}

fn decomposition() -> catqcf::Result<f64> {
    let model = FidelityModel::new(
        dim(32),
        MapParams::new(1, [1e-5, 0.0, 0.0])?,
        Convention::default(),
    );
    let mut run = model.run(Packet::new(0.61, 0.27));
    let mut worst: f64 = 0.0;
    for _ in 0..=12 {
        let s = run.sample()?;
        worst = worst.max((s.qcf - 1.0 - s.i1 - s.i2 - s.cross).abs());
        worst = worst.max((s.qcf - s.qf_abs2 - s.cf + 1.0 - s.cross_qf).abs());
        run.step()?;
    }
    Ok(worst)
}

fn initial_overlap() -> catqcf::Result<f64> {
    let d = dim(128);
    let packet = Packet::new(0.42, 0.17);
    let rho = catqcf::classical::gaussian_density(packet, d);
    Ok((qcf(&coherent_state(packet, d), &rho)? - 1.0).abs())
}

fn random_hermitian(d: HilbertDim, rng: &mut ChaCha8Rng) -> DenseOperator {
    let n = d.get();
    let mut op = DenseOperator::zeros(d);
    for i in 0..n {
        for j in 0..n {
            let z = num_complex::Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            op.entries_mut()[[i, j]] += z;
            op.entries_mut()[[j, i]] += z.conj();
        }
    }
    op
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("split-operator vs dense", split_vs_dense(), 1e-10),
        check("Egorov exactness (operator)", egorov_operator(), 1e-10),
        check("Egorov exactness (fidelity)", egorov_fidelity(), 1e-6),
        check("Weyl-Wigner round trips", weyl_round_trip(), 1e-10),
        check("decomposition identities", decomposition(), 1e-10),
        check("initial overlap", initial_overlap(), 1e-6),
    ]
}
