use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use catqcf::fidelity::FidelitySeries;
use catqcf::scaling::{
    ensemble_series, tbr_vs_eps_scan, tbr_vs_n_scan, EnsembleConfig, ScanOptions, ScanResult,
    RNG_NAME,
};
use catqcf::HilbertDim;
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::selftest;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] catqcf::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("self-test failed: {0} check(s)")]
    Selftest(usize),
}

impl RunError {
    pub fn is_numerical(&self) -> bool {
        match self {
            RunError::Core(e) => e.is_numerical(),
            RunError::Selftest(_) => true,
            _ => false,
        }
    }
}

/// Provenance lines written at the top of every output file.
struct Header {
    lines: Vec<String>,
    timestamp: bool,
    started: Instant,
}

impl Header {
    fn new(config: &RunConfig, timestamp: bool) -> Result<Self, RunError> {
        let lines = vec![
            format!("catqcf {VERSION}"),
            format!(
                "mode={}",
                serde_json::to_value(config.mode)?.as_str().unwrap_or("?")
            ),
            format!("convention={}", config.convention),
            format!("rng={RNG_NAME} seed={}", config.seed),
            format!("config={}", serde_json::to_string(config)?),
        ];
        Ok(Header {
            lines,
            timestamp,
            started: Instant::now(),
        })
    }

    fn comments(&self, extra: &[String]) -> Vec<String> {
        let mut out = self.lines.clone();
        out.extend_from_slice(extra);
        if self.timestamp {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            out.push(format!("timestamp_unix={now}"));
            out.push(format!(
                "runtime_s={:.3}",
                self.started.elapsed().as_secs_f64()
            ));
        }
        out
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs one mode and writes its outputs; returns lines for stdout.
pub fn run(config: &RunConfig, timestamp: bool) -> Result<Vec<String>, RunError> {
    let header = Header::new(config, timestamp)?;
    if config.mode != Mode::Selftest {
        fs::create_dir_all(&config.output_dir)?;
    }
    match config.mode {
        Mode::Series => series(config, &header, false),
        Mode::Decompose => series(config, &header, true),
        Mode::ScanEps => {
            let dim = config.dim();
            let scan = tbr_vs_eps_scan(
                dim,
                config.k,
                &config.eps_axis(),
                config.eps_direction,
                &scan_options(config),
            )?;
            write_scan(config, &header, &scan, "eps")
        }
        Mode::ScanN => {
            let dims = config
                .n_axis()
                .into_iter()
                .map(HilbertDim::new)
                .collect::<Result<Vec<_>, _>>()?;
            let scan = tbr_vs_n_scan(&dims, config.k, config.eps, &scan_options(config))?;
            write_scan(config, &header, &scan, "N")
        }
        Mode::Selftest => {
            let results = selftest::run_all();
            let failed = results.iter().filter(|r| !r.passed).count();
            let lines = results.iter().map(|r| r.to_string()).collect();
            if failed > 0 {
                for line in &lines {
                    eprintln!("{line}");
                }
                return Err(RunError::Selftest(failed));
            }
            Ok(lines)
        }
    }
}

fn ensemble_config(config: &RunConfig) -> EnsembleConfig {
    EnsembleConfig {
        n_packets: config.n_packets,
        seed: config.seed,
        dim: config.dim(),
        params: config.params(),
        t_max: config.t_max,
        p_thresholds: config.p_thresholds.clone(),
        convention: config.convention,
    }
}

fn scan_options(config: &RunConfig) -> ScanOptions {
    ScanOptions {
        n_packets: config.n_packets,
        seed: config.seed,
        t_max: config.t_max,
        p_thresholds: config.p_thresholds.clone(),
        convention: config.convention,
    }
}

fn series(config: &RunConfig, header: &Header, extended: bool) -> Result<Vec<String>, RunError> {
    let ensemble_cfg = ensemble_config(config);
    let mut ensemble = ensemble_series(&ensemble_cfg)?;
    if extended && config.dim_n <= catqcf::propagator::DENSE_LIMIT {
        let model = ensemble_cfg.model();
        for (packet, s) in ensemble.packets.iter().zip(ensemble.series.iter_mut()) {
            for sample in &mut s.samples {
                sample.i2_pred = Some(model.i2_leading(*packet, sample.t)?);
            }
        }
        ensemble.mean = FidelitySeries::mean(&ensemble.series).expect("non-empty");
    }
    let stem = if extended { "decompose" } else { "series" };
    if config.packet_files {
        let dir = config.output_dir.join("packets");
        fs::create_dir_all(&dir)?;
        for (i, (packet, s)) in ensemble.packets.iter().zip(&ensemble.series).enumerate() {
            let extra = [format!(
                "packet={i} q0={:.17e} p0={:.17e}",
                packet.q0, packet.p0
            )];
            let path = dir.join(format!("{stem}_{i:04}.csv"));
            let mut w = create(&path)?;
            s.write_csv(&mut w, &header.comments(&extra), extended)?;
            w.flush()?;
        }
    }
    let name = if extended {
        "avg_decompose.csv"
    } else {
        "avg_series.csv"
    };
    let path = config.output_dir.join(name);
    let extra = [format!("average over {} packets", ensemble.packets.len())];
    let mut w = create(&path)?;
    ensemble
        .mean
        .write_csv(&mut w, &header.comments(&extra), extended)?;
    w.flush()?;
    Ok(vec![format!("wrote {}", path.display())])
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'a str,
    rng: &'a str,
    seed: u64,
    convention: String,
    config: &'a RunConfig,
    abscissa: &'a str,
    fits: &'a [catqcf::scaling::ScanFit],
    points: &'a [catqcf::scaling::ScanPoint],
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_s: Option<f64>,
}

fn write_scan(
    config: &RunConfig,
    header: &Header,
    scan: &ScanResult,
    axis: &str,
) -> Result<Vec<String>, RunError> {
    let fit_lines: Vec<String> = scan
        .fits
        .iter()
        .map(|f| match &f.fit {
            Some(fit) => format!(
                "p={} slope={:.6} intercept={:.6} residual={:.3e} slope_error={:.3e} points={}",
                f.p, fit.slope, fit.intercept, fit.residual, fit.slope_error, f.points
            ),
            None => format!("p={} slope=none points={}", f.p, f.points),
        })
        .collect();
    let csv_path = config.output_dir.join("breaktimes.csv");
    let mut w = create(&csv_path)?;
    for c in header.comments(&fit_lines) {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{axis},p,t_br,lambda")?;
    for point in &scan.points {
        for r in &point.records {
            let t = r.t_br.map(|t| t.to_string()).unwrap_or_default();
            if axis == "N" {
                writeln!(w, "{},{},{},{:.16e}", r.dim_n, r.p, t, r.lambda)?;
            } else {
                writeln!(w, "{:.16e},{},{},{:.16e}", point.x, r.p, t, r.lambda)?;
            }
        }
    }
    w.flush()?;

    let (timestamp_unix, runtime_s) = if header.timestamp {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        (Some(now), Some(header.started.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };
    let summary = Summary {
        version: VERSION,
        rng: RNG_NAME,
        seed: config.seed,
        convention: config.convention.to_string(),
        config,
        abscissa: if axis == "N" { "log N" } else { "-log eps" },
        fits: &scan.fits,
        points: &scan.points,
        timestamp_unix,
        runtime_s,
    };
    let json_path = config.output_dir.join("summary.json");
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    let mut lines = fit_lines;
    lines.push(format!(
        "wrote {} and {}",
        csv_path.display(),
        json_path.display()
    ));
    Ok(lines)
}
