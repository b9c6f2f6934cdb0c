//! Run configuration: a versioned TOML schema.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! output_dir = "out/paper-5m"
//! dims = [4, 8, 13]
//! witnesses = ["pt_steering", "ft_bavaresco", "ft_morelli"]
//! mub_m = [2, 3, 5, "d+1"]
//! estimator = "spectral_mean"
//!
//! [fiber]
//! preset = "paper-5m"
//!
//! [noise]
//! kind = "preset"
//! ```
//!
//! Unknown keys are rejected. `[fiber]` takes either a preset, optionally
//! overriding single fields, or the full set of `FiberSpec` fields.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chancert_core::fiber::FiberSpec;
use chancert_core::tm_estimation::FitOptions;
use chancert_core::witness::WitnessKind;
use chancert_core::{NoiseModel, TmMethod};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use toml::Spanned;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Dimension grid used when a config gives none.
pub const DEFAULT_DIMS: [usize; 8] = [4, 8, 13, 29, 53, 89, 131, 173];

/// Witness families as named in configs and CSV output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessName {
    #[serde(alias = "ft")]
    FtBavaresco,
    #[serde(alias = "pt")]
    PtSteering,
    #[serde(alias = "morelli")]
    FtMorelli,
}

impl WitnessName {
    pub fn kind(self, m: usize) -> WitnessKind {
        match self {
            WitnessName::FtBavaresco => WitnessKind::FtBavaresco,
            WitnessName::PtSteering => WitnessKind::PtSteering,
            WitnessName::FtMorelli => WitnessKind::FtMorelli(m),
        }
    }

    pub fn as_str(self) -> &'static str {
        self.kind(2).name()
    }
}

/// Number of MUBs: a fixed count or one more than the subspace dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MubCount {
    Fixed(usize),
    DPlusOne,
}

impl MubCount {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MubCount::Fixed(m) => m,
            MubCount::DPlusOne => d + 1,
        }
    }
}

impl fmt::Display for MubCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MubCount::Fixed(m) => write!(f, "{m}"),
            MubCount::DPlusOne => f.write_str("d+1"),
        }
    }
}

impl Serialize for MubCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MubCount::Fixed(m) => s.serialize_u64(*m as u64),
            MubCount::DPlusOne => s.serialize_str("d+1"),
        }
    }
}

impl<'de> Deserialize<'de> for MubCount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CountVisitor;

        impl Visitor<'_> for CountVisitor {
            type Value = MubCount;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer >= 2 or the string \"d+1\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<MubCount, E> {
                if v < 2 {
                    return Err(E::custom(format!("MUB count must be at least 2, got {v}")));
                }
                Ok(MubCount::Fixed(v as usize))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<MubCount, E> {
                self.visit_i64(v.min(i64::MAX as u64) as i64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<MubCount, E> {
                match v.replace(' ', "").as_str() {
                    "d+1" => Ok(MubCount::DPlusOne),
                    _ => Err(E::custom(format!("unknown MUB count {v:?}, expected an integer or \"d+1\""))),
                }
            }
        }

        deserializer.deserialize_any(CountVisitor)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberSection {
    preset: Option<Spanned<String>>,
    /// Replace the source spectrum by the center wavelength.
    monochromatic: Option<bool>,
    length_m: Option<f64>,
    core_radius_m: Option<f64>,
    n_core: Option<f64>,
    numerical_aperture: Option<f64>,
    alpha: Option<f64>,
    center_wavelength_m: Option<f64>,
    bandwidth_m: Option<f64>,
    num_wavelengths: Option<usize>,
    sigma_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NoiseSection {
    None,
    FixedP {
        p: f64,
    },
    QuadraticP {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Coefficients belonging to the fiber preset.
    Preset,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSection {
    iters: Option<usize>,
    learning_rate: Option<f64>,
    restarts: Option<usize>,
    num_probes: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: Spanned<u32>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    dims: Option<Spanned<Vec<Spanned<usize>>>>,
    witnesses: Option<Spanned<Vec<WitnessName>>>,
    mub_m: Option<Spanned<Vec<MubCount>>>,
    estimator: Option<TmMethod>,
    fiber: Option<Spanned<FiberSection>>,
    noise: Option<Spanned<NoiseSection>>,
    fit: Option<FitSection>,
}

/// Intensity-fit settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitConfig {
    pub iters: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    /// Defaults to four probes per matrix entry.
    pub num_probes: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        Self { iters: o.iters, learning_rate: o.learning_rate, restarts: o.restarts, num_probes: None }
    }
}

impl FitConfig {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            iters: self.iters,
            learning_rate: self.learning_rate,
            restarts: self.restarts,
            ..FitOptions::default()
        }
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub fiber: FiberSpec,
    pub estimator: TmMethod,
    pub fit: FitConfig,
    pub witnesses: Vec<WitnessName>,
    pub mub_m: Vec<MubCount>,
    pub dims: Vec<usize>,
    pub noise: NoiseModel,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset("paper-2m").expect("built-in preset")
    }
}

impl RunConfig {
    /// A built-in preset with its fitted noise model and the default grid.
    pub fn preset(name: &str) -> Option<Self> {
        let (fiber, noise) = preset_fiber(name)?;
        Some(Self {
            preset: Some(name.to_string()),
            fiber,
            estimator: TmMethod::SpectralMean,
            fit: FitConfig::default(),
            witnesses: vec![WitnessName::PtSteering, WitnessName::FtBavaresco],
            mub_m: vec![MubCount::Fixed(2)],
            dims: DEFAULT_DIMS.to_vec(),
            noise,
            seed: 0,
            output_dir: PathBuf::from("out"),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Parses and validates a config; `origin` prefixes error locations.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let at = |span: Option<Range<usize>>, msg: &str| -> CliError {
            match span {
                Some(s) => {
                    let (line, col) = line_col(text, s.start);
                    CliError::Config(format!("{origin}:{line}:{col}: {msg}"))
                }
                None => CliError::Config(format!("{origin}: {msg}")),
            }
        };
        let raw: ConfigFile = toml::from_str(text).map_err(|e| at(e.span(), e.message()))?;

        if *raw.schema_version.get_ref() != SCHEMA_VERSION {
            return Err(at(
                Some(raw.schema_version.span()),
                &format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", raw.schema_version.get_ref()),
            ));
        }

        let mut preset_noise = None;
        let (preset, fiber) = match raw.fiber {
            None => {
                let (spec, noise) = preset_fiber("paper-2m").expect("built-in preset");
                preset_noise = Some(noise);
                (Some("paper-2m".to_string()), spec)
            }
            Some(section) => {
                let span = section.span();
                let section = section.into_inner();
                let (preset, base) = match &section.preset {
                    Some(name) => {
                        let (spec, noise) = preset_fiber(name.get_ref()).ok_or_else(|| {
                            at(
                                Some(name.span()),
                                &format!(
                                    "unknown fiber preset {:?}, expected \"paper-2m\" or \"paper-5m\"",
                                    name.get_ref()
                                ),
                            )
                        })?;
                        preset_noise = Some(noise);
                        (Some(name.get_ref().clone()), Some(spec))
                    }
                    None => (None, None),
                };
                let spec = merge_fiber(base, &section).map_err(|m| at(Some(span.clone()), &m))?;
                spec.validate().map_err(|e| at(Some(span), &e.to_string()))?;
                (preset, spec)
            }
        };

        let noise = match raw.noise {
            None => NoiseModel::None,
            Some(section) => match section.get_ref() {
                NoiseSection::None => NoiseModel::None,
                NoiseSection::FixedP { p } => {
                    if !(0.0..=1.0).contains(p) {
                        return Err(at(Some(section.span()), &format!("noise p must lie in [0, 1], got {p}")));
                    }
                    NoiseModel::FixedP { p: *p }
                }
                NoiseSection::QuadraticP { a, b, c } => NoiseModel::QuadraticP { a: *a, b: *b, c: *c },
                NoiseSection::Preset => preset_noise
                    .ok_or_else(|| at(Some(section.span()), "noise kind \"preset\" needs a fiber preset"))?,
            },
        };

        let dims = match raw.dims {
            None => DEFAULT_DIMS.to_vec(),
            Some(list) => {
                if list.get_ref().is_empty() {
                    return Err(at(Some(list.span()), "dims must not be empty"));
                }
                let mut dims = Vec::new();
                for d in list.get_ref() {
                    if *d.get_ref() < 2 {
                        return Err(at(
                            Some(d.span()),
                            &format!("subspace dimension must be at least 2, got {}", d.get_ref()),
                        ));
                    }
                    dims.push(*d.get_ref());
                }
                dims
            }
        };

        let witnesses = match raw.witnesses {
            None => vec![WitnessName::PtSteering, WitnessName::FtBavaresco],
            Some(list) if list.get_ref().is_empty() => {
                return Err(at(Some(list.span()), "witnesses must not be empty"))
            }
            Some(list) => list.into_inner(),
        };
        let mub_m = match raw.mub_m {
            None => vec![MubCount::Fixed(2)],
            Some(list) if list.get_ref().is_empty() => return Err(at(Some(list.span()), "mub_m must not be empty")),
            Some(list) => list.into_inner(),
        };

        let mut fit = FitConfig::default();
        if let Some(section) = raw.fit {
            fit.iters = section.iters.unwrap_or(fit.iters);
            fit.learning_rate = section.learning_rate.unwrap_or(fit.learning_rate);
            fit.restarts = section.restarts.unwrap_or(fit.restarts);
            fit.num_probes = section.num_probes;
            if fit.iters == 0 {
                return Err(at(None, "fit.iters must be at least 1"));
            }
        }

        Ok(Self {
            preset,
            fiber,
            estimator: raw.estimator.unwrap_or(TmMethod::SpectralMean),
            fit,
            witnesses,
            mub_m,
            dims,
            noise,
            seed: raw.seed.unwrap_or(0),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

/// Fiber and noise coefficients of a named preset.
pub fn preset_fiber(name: &str) -> Option<(FiberSpec, NoiseModel)> {
    match name {
        "paper-2m" => Some((FiberSpec::graded_2m(), NoiseModel::FIBER_2M)),
        "paper-5m" => Some((FiberSpec::graded_5m(), NoiseModel::FIBER_5M)),
        _ => None,
    }
}

fn merge_fiber(base: Option<FiberSpec>, s: &FiberSection) -> Result<FiberSpec, String> {
    let mut missing = Vec::new();
    let mut pick = |name: &'static str, given: Option<f64>, base: Option<f64>| -> f64 {
        given.or(base).unwrap_or_else(|| {
            missing.push(name);
            f64::NAN
        })
    };
    let b = base.as_ref();
    let mut spec = FiberSpec {
        length_m: pick("length_m", s.length_m, b.map(|f| f.length_m)),
        core_radius_m: pick("core_radius_m", s.core_radius_m, b.map(|f| f.core_radius_m)),
        n_core: pick("n_core", s.n_core, b.map(|f| f.n_core)),
        numerical_aperture: pick("numerical_aperture", s.numerical_aperture, b.map(|f| f.numerical_aperture)),
        alpha: pick("alpha", s.alpha, b.map(|f| f.alpha)),
        center_wavelength_m: pick("center_wavelength_m", s.center_wavelength_m, b.map(|f| f.center_wavelength_m)),
        bandwidth_m: pick("bandwidth_m", s.bandwidth_m, b.map(|f| f.bandwidth_m)),
        sigma_m: pick("sigma_m", s.sigma_m, b.map(|f| f.sigma_m)),
        num_wavelengths: 0,
    };
    match s.num_wavelengths.or(b.map(|f| f.num_wavelengths)) {
        Some(n) => spec.num_wavelengths = n,
        None => missing.push("num_wavelengths"),
    }
    if !missing.is_empty() {
        return Err(format!("[fiber] without a preset is missing: {}", missing.join(", ")));
    }
    if s.monochromatic == Some(true) {
        spec = spec.monochromatic();
    }
    Ok(spec)
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}
