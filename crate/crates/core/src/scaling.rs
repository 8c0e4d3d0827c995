//! Packet ensembles, breaking times `t_br(p)`, the linearisation
//! `G(t) = log(-log <F(t)>)` and least-squares fits of the scaling laws.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{lyapunov, MapParams, Packet};
use crate::error::{Error, Result};
use crate::fidelity::{FidelityModel, FidelitySeries, QcfTracker};
use crate::hilbert::HilbertDim;
use crate::propagator::Convention;
use crate::weyl::GridFunction;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.9, 0.8, 0.7];

/// Name of the packet-centre generator, recorded in output metadata.
pub const RNG_NAME: &str = "chacha8";

/// Packet centres drawn uniformly on the torus.
pub fn sample_packets(n: usize, seed: u64) -> Vec<Packet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q = rng.gen::<f64>();
            Packet::new(q, rng.gen::<f64>())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_packets: usize,
    pub seed: u64,
    pub dim: HilbertDim,
    pub params: MapParams,
    pub t_max: usize,
    pub p_thresholds: Vec<f64>,
    pub convention: Convention,
}

impl EnsembleConfig {
    pub fn new(dim: HilbertDim, params: MapParams) -> Self {
        EnsembleConfig {
            n_packets: 100,
            seed: 0,
            dim,
            params,
            t_max: 40,
            p_thresholds: DEFAULT_THRESHOLDS.to_vec(),
            convention: Convention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_packets == 0 {
            return Err(Error::InvalidArgument("n_packets must be positive".into()));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be positive".into()));
        }
        if let Some(p) = self.p_thresholds.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "threshold {p} outside (0, 1)"
            )));
        }
        Ok(())
    }

    pub fn packets(&self) -> Vec<Packet> {
        sample_packets(self.n_packets, self.seed)
    }

    pub fn model(&self) -> FidelityModel {
        FidelityModel::new(self.dim, self.params, self.convention)
    }
}

/// Per-packet decompositions and their mean.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub packets: Vec<Packet>,
    pub series: Vec<FidelitySeries>,
    pub mean: FidelitySeries,
}

/// Full decomposition for every packet, `t = 0..=t_max`.
pub fn ensemble_series(config: &EnsembleConfig) -> Result<Ensemble> {
    config.validate()?;
    let model = config.model();
    let packets = config.packets();
    let series = packets
        .par_iter()
        .map(|p| model.series(*p, config.t_max))
        .collect::<Result<Vec<_>>>()?;
    let mean = FidelitySeries::mean(&series).expect("at least one packet");
    Ok(Ensemble {
        packets,
        series,
        mean,
    })
}

/// Ensemble mean of every decomposition column.
pub fn average_series(config: &EnsembleConfig) -> Result<FidelitySeries> {
    Ok(ensemble_series(config)?.mean)
}

/// `<F(t)>` only, with all packets advanced in lockstep. Stops after the
/// first `t` with `<F(t)> < stop_below` when given, else runs to `t_max`.
pub fn average_qcf(config: &EnsembleConfig, stop_below: Option<f64>) -> Result<Vec<f64>> {
    config.validate()?;
    let model = config.model();
    let mut trackers: Vec<QcfTracker> = config
        .packets()
        .into_par_iter()
        .map(|p| QcfTracker::new(&model, p))
        .collect();
    let dim = config.dim;
    let mut mean = Vec::with_capacity(config.t_max + 1);
    for t in 0..=config.t_max {
        if t > 0 {
            trackers.par_iter_mut().try_for_each(|tr| tr.step(&model))?;
        }
        let values = trackers
            .par_iter_mut()
            .map_init(
                || GridFunction::zeros(dim),
                |scratch, tr| tr.qcf(&model, scratch),
            )
            .collect::<Result<Vec<f64>>>()?;
        let f = values.iter().sum::<f64>() / values.len() as f64;
        mean.push(f);
        if stop_below.is_some_and(|s| f < s) {
            break;
        }
    }
    Ok(mean)
}

/// `min {t : <F(t)> < p}`.
pub fn breaking_time(mean_qcf: &[f64], p: f64) -> Option<usize> {
    mean_qcf.iter().position(|f| *f < p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakTimeRecord {
    pub p: f64,
    pub t_br: Option<usize>,
    pub eps_norm: f64,
    pub dim_n: usize,
    pub k: u32,
    pub lambda: f64,
}

impl BreakTimeRecord {
    pub fn new(mean_qcf: &[f64], p: f64, dim: HilbertDim, params: &MapParams) -> Self {
        BreakTimeRecord {
            p,
            t_br: breaking_time(mean_qcf, p),
            eps_norm: params.strength(),
            dim_n: dim.get(),
            k: params.k,
            lambda: lyapunov(params.k),
        }
    }

    /// `lambda t_br`.
    pub fn scaled(&self) -> Option<f64> {
        self.t_br.map(|t| self.lambda * t as f64)
    }
}

/// `G(t) = log(-log <F(t)>)` where `0 < <F(t)> < 1`; the remaining times
/// are listed in `omitted`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GSeries {
    pub points: Vec<(usize, f64)>,
    pub omitted: Vec<usize>,
}

pub fn g_transform(mean_qcf: &[f64]) -> GSeries {
    let mut out = GSeries::default();
    for (t, f) in mean_qcf.iter().enumerate() {
        if *f > 0.0 && *f < 1.0 {
            out.points.push((t, (-f.ln()).ln()));
        } else {
            out.omitted.push(t);
        }
    }
    out
}

/// Times used for the `G(t)` slope: `lower < <F(t)> < upper`.
pub fn g_window(mean_qcf: &[f64], lower: f64, upper: f64) -> Vec<(f64, f64)> {
    g_transform(mean_qcf)
        .points
        .into_iter()
        .filter(|(t, _)| mean_qcf[*t] > lower && mean_qcf[*t] < upper)
        .map(|(t, g)| (t as f64, g))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation from the fitted line.
    pub residual: f64,
    /// Standard error of the slope; zero for fewer than three points' worth
    /// of degrees of freedom.
    pub slope_error: f64,
}

/// Ordinary least squares on `points[window]`.
pub fn fit_linear(points: &[(f64, f64)], window: Range<usize>) -> Result<LinearFit> {
    let pts = points.get(window.clone()).ok_or_else(|| {
        Error::InvalidArgument(format!("window {window:?} outside {} points", points.len()))
    })?;
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        slope_error: (sse / (n - 2.0) / sxx).sqrt(),
    })
}

/// Ensemble settings shared by the scans.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanOptions {
    pub n_packets: usize,
    pub seed: u64,
    pub t_max: usize,
    pub p_thresholds: Vec<f64>,
    pub convention: Convention,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            n_packets: 100,
            seed: 0,
            t_max: 60,
            p_thresholds: DEFAULT_THRESHOLDS.to_vec(),
            convention: Convention::default(),
        }
    }
}

/// Fit of `lambda t_br` against the scan abscissa for one threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanFit {
    pub p: f64,
    pub fit: Option<LinearFit>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    /// `eps` for an eps scan, `N` for an N scan.
    pub x: f64,
    pub mean_qcf: Vec<f64>,
    pub records: Vec<BreakTimeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub fits: Vec<ScanFit>,
}

impl ScanResult {
    pub fn records(&self) -> impl Iterator<Item = &BreakTimeRecord> {
        self.points.iter().flat_map(|p| p.records.iter())
    }

    pub fn fit_for(&self, p: f64) -> Option<&LinearFit> {
        self.fits.iter().find(|f| f.p == p)?.fit.as_ref()
    }
}

fn scan_point(config: &EnsembleConfig, x: f64) -> Result<ScanPoint> {
    let lowest = config
        .p_thresholds
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mean_qcf = average_qcf(config, Some(lowest))?;
    let records = config
        .p_thresholds
        .iter()
        .map(|p| BreakTimeRecord::new(&mean_qcf, *p, config.dim, &config.params))
        .collect();
    Ok(ScanPoint {
        x,
        mean_qcf,
        records,
    })
}

fn fit_scan(
    points: &[ScanPoint],
    thresholds: &[f64],
    abscissa: impl Fn(f64) -> f64,
) -> Vec<ScanFit> {
    thresholds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pts: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|sp| sp.records[i].scaled().map(|y| (abscissa(sp.x), y)))
                .collect();
            ScanFit {
                p: *p,
                fit: fit_linear(&pts, 0..pts.len()).ok(),
                points: pts.len(),
            }
        })
        .collect()
}

fn unit(direction: [f64; 3]) -> Result<[f64; 3]> {
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument(
            "eps direction must be nonzero".into(),
        ));
    }
    Ok(direction.map(|d| d / norm))
}

/// `t_br(p)` for `eps = e * direction` over `eps_axis`, with fits of
/// `lambda t_br` against `-log eps`.
pub fn tbr_vs_eps_scan(
    dim: HilbertDim,
    k: u32,
    eps_axis: &[f64],
    direction: [f64; 3],
    opts: &ScanOptions,
) -> Result<ScanResult> {
    let direction = unit(direction)?;
    if eps_axis.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("eps values must be positive".into()));
    }
    let (lo, hi) = eps_axis
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
            (lo.min(*e), hi.max(*e))
        });
    if eps_axis.is_empty() || (hi / lo).log10() < 4.0 - 1e-9 {
        return Err(Error::InvalidArgument(
            "eps axis must span at least 4 decades".into(),
        ));
    }
    let points = eps_axis
        .iter()
        .map(|e| {
            let params = MapParams::new(k, direction.map(|d| d * e))?;
            scan_point(&ensemble(dim, params, opts), *e)
        })
        .collect::<Result<Vec<_>>>()?;
    let fits = fit_scan(&points, &opts.p_thresholds, |e| -e.ln());
    Ok(ScanResult { points, fits })
}

/// `t_br(p)` at fixed `eps` over `dims`, with fits of `lambda t_br` against
/// `log N`.
pub fn tbr_vs_n_scan(
    dims: &[HilbertDim],
    k: u32,
    eps: [f64; 3],
    opts: &ScanOptions,
) -> Result<ScanResult> {
    if dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "an N scan needs at least two dimensions".into(),
        ));
    }
    let params = MapParams::new(k, eps)?;
    let points = dims
        .iter()
        .map(|d| scan_point(&ensemble(*d, params, opts), d.get() as f64))
        .collect::<Result<Vec<_>>>()?;
    let fits = fit_scan(&points, &opts.p_thresholds, f64::ln);
    Ok(ScanResult { points, fits })
}

fn ensemble(dim: HilbertDim, params: MapParams, opts: &ScanOptions) -> EnsembleConfig {
    EnsembleConfig {
        n_packets: opts.n_packets,
        seed: opts.seed,
        dim,
        params,
        t_max: opts.t_max,
        p_thresholds: opts.p_thresholds.clone(),
        convention: opts.convention,
    }
}

/// Mean of `values[range]`, clipped to the available data.
pub fn time_average(values: &[f64], range: Range<usize>) -> Option<f64> {
    let end = range.end.min(values.len());
    let slice = values.get(range.start..end)?;
    (!slice.is_empty()).then(|| slice.iter().sum::<f64>() / slice.len() as f64)
}
