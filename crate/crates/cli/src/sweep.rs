use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chancert_core::correlations::{apply_noise, mub_correlations};
use chancert_core::fiber::artifact::Precision;
use chancert_core::mub::is_prime;
use chancert_core::tm_estimation::{
    default_num_probes, intensity_fit_tm_with, leading_subspace, simulate_probe_dataset, spectral_mean_tm,
};
use chancert_core::{build_mstm, certify, ApproxTm, FiberSpec, Mstm, MubFamily, Rng, TmMethod};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, WitnessName};
use crate::CliError;

/// One certification result. Column order is the CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub fiber_length_m: f64,
    pub d: usize,
    pub witness: String,
    pub m: usize,
    pub p_used: f64,
    pub lhs: f64,
    pub certified_n: usize,
    /// Zero unless timing is requested, so that output is reproducible.
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub timing: bool,
    /// Directory for cached transmission matrices.
    pub cache_dir: Option<PathBuf>,
}

pub fn cache_path(dir: &Path, spec: &FiberSpec) -> PathBuf {
    dir.join(format!("mstm-{}.bin", spec.cache_key()))
}

/// Loads the MSTM for `spec` from the cache or builds (and caches) it.
pub fn load_or_build_mstm(spec: &FiberSpec, cache_dir: Option<&Path>) -> Result<Mstm, CliError> {
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, spec);
        if path.exists() {
            match Mstm::read_artifact(BufReader::new(File::open(&path)?)) {
                Ok(m) if m.spec() == Some(spec) => {
                    info!("loaded cached MSTM {}", path.display());
                    return Ok(m);
                }
                Ok(_) => warn!("cache entry {} belongs to another fiber, rebuilding", path.display()),
                Err(e) => warn!("ignoring unreadable cache entry {}: {e}", path.display()),
            }
        }
    }
    let mstm = build_mstm(spec)?;
    info!("built MSTM: {} modes, {} wavelengths", mstm.dim(), mstm.len());
    if let Some(dir) = cache_dir {
        write_mstm_cache(&mstm, dir)?;
    }
    Ok(mstm)
}

pub fn write_mstm_cache(mstm: &Mstm, dir: &Path) -> Result<PathBuf, CliError> {
    let spec = mstm.spec().ok_or_else(|| CliError::Config("cannot cache an MSTM without a fiber spec".into()))?;
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, spec);
    let tmp = path.with_extension("tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        mstm.write_artifact(&mut out, Precision::Complex128)?;
        out.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Single approximate TM from the configured estimator.
pub fn estimate(mstm: &Mstm, config: &RunConfig) -> Result<ApproxTm, CliError> {
    Ok(match config.estimator {
        TmMethod::SpectralMean => spectral_mean_tm(mstm)?,
        TmMethod::IntensityFit => {
            let dim = mstm.dim();
            if dim > 40 {
                warn!("intensity fit on {dim} modes is slow; consider spectral_mean");
            }
            let mut rng = Rng::from_seed(config.seed);
            let probes = config.fit.num_probes.unwrap_or_else(|| default_num_probes(dim));
            let data = simulate_probe_dataset(mstm, probes, &mut rng)?;
            intensity_fit_tm_with(&data, dim, &config.fit.options(), &mut rng)?
        }
    })
}

/// Rows for every `(d, witness, m)` of the config, sorted by that key.
pub fn run_sweep(config: &RunConfig, options: &SweepOptions) -> Result<Vec<SweepRow>, CliError> {
    let mstm = load_or_build_mstm(&config.fiber, options.cache_dir.as_deref())?;
    sweep_mstm(&mstm, config, options)
}

/// [`run_sweep`] on an existing MSTM.
pub fn sweep_mstm(mstm: &Mstm, config: &RunConfig, options: &SweepOptions) -> Result<Vec<SweepRow>, CliError> {
    let big = mstm.dim();
    if let Some(&d) = config.dims.iter().find(|&&d| d > big) {
        return Err(CliError::Config(format!("subspace dimension {d} exceeds the {big} guided modes of the fiber")));
    }
    let approx = estimate(mstm, config)?;

    // (d, m) -> witnesses evaluated on that tensor
    let mut tasks: Vec<(usize, usize, Vec<WitnessName>)> = Vec::new();
    let dims: BTreeSet<usize> = config.dims.iter().copied().collect();
    for &d in &dims {
        let mut per_m: Vec<(usize, Vec<WitnessName>)> = Vec::new();
        let mut add = |m: usize, w: WitnessName| match per_m.iter_mut().find(|(k, _)| *k == m) {
            Some((_, list)) => list.push(w),
            None => per_m.push((m, vec![w])),
        };
        for &w in &config.witnesses {
            if w != WitnessName::FtMorelli {
                add(2, w);
                continue;
            }
            let ms: BTreeSet<usize> = config.mub_m.iter().map(|c| c.resolve(d)).collect();
            for m in ms {
                if m > 2 && !is_prime(d) {
                    info!("skipping ft_morelli m={m} at composite d={d}: only prime dimensions have more than two MUBs here");
                } else if m > d + 1 {
                    info!("skipping ft_morelli m={m} at d={d}: at most d+1 MUBs exist");
                } else {
                    add(m, w);
                }
            }
        }
        tasks.extend(per_m.into_iter().map(|(m, ws)| (d, m, ws)));
    }

    let length = mstm.spec().map_or(f64::NAN, |s| s.length_m);
    let results: Vec<Result<Vec<SweepRow>, CliError>> = tasks
        .par_iter()
        .map(|(d, m, witnesses)| {
            let start = Instant::now();
            let (d, m) = (*d, *m);
            let (input, output) = leading_subspace(&approx, d)?;
            let mubs = MubFamily::standard(d, m)?;
            let clean = mub_correlations(mstm, (&input, &output), &mubs)?;
            let p = config.noise.p_at(d)?;
            let c = apply_noise(&clean, &config.noise)?;
            let mut rows = Vec::new();
            for w in witnesses {
                let r = certify(&c, w.kind(m))?;
                rows.push(SweepRow {
                    fiber_length_m: length,
                    d,
                    witness: w.as_str().to_string(),
                    m,
                    p_used: p,
                    lhs: r.lhs,
                    certified_n: r.certified_n,
                    wall_time_ms: 0.0,
                });
            }
            if options.timing {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                rows.iter_mut().for_each(|r| r.wall_time_ms = ms);
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (a.d, &a.witness, a.m).cmp(&(b.d, &b.witness, b.m)));
    Ok(rows)
}

pub fn write_rows_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["fiber_length_m", "d", "witness", "m", "p_used", "lhs", "certified_n", "wall_time_ms"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    schema_version: u32,
    config: &'a RunConfig,
    fiber_cache_key: String,
    rows: usize,
    files: Vec<String>,
}

/// Writes `sweep.csv` and `manifest.json`; returns the CSV path.
pub fn write_outputs(
    rows: &[SweepRow],
    config: &RunConfig,
    out_dir: &Path,
    extra_files: &[PathBuf],
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("sweep.csv");
    write_rows_csv(rows, BufWriter::new(File::create(&csv_path)?))?;
    let mut files = vec!["sweep.csv".to_string()];
    files.extend(extra_files.iter().map(|p| p.strip_prefix(out_dir).unwrap_or(p).display().to_string()));
    let manifest = Manifest {
        tool: "chancert",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: crate::config::SCHEMA_VERSION,
        config,
        fiber_cache_key: config.fiber.cache_key(),
        rows: rows.len(),
        files,
    };
    let mut out = BufWriter::new(File::create(out_dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(csv_path)
}
