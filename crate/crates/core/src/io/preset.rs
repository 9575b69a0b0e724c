//! Named algorithm presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::priors::PriorKind;

/// Noise used when `bmf` (or no preset) is chosen and `--noise` is absent.
pub const DEFAULT_FIXED_NOISE: NoiseSpec = NoiseSpec::Fixed { alpha: 5.0 };
/// Noise used by `macau` and `gfa` when `--noise` is absent.
pub const DEFAULT_ADAPTIVE_NOISE: NoiseSpec = NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Normal priors on both modes, fixed noise, no side information.
    Bmf,
    /// Normal priors plus a link matrix on each mode with side information.
    Macau,
    /// Normal prior on the shared rows, spike-and-slab on every view's columns.
    Gfa,
}

/// Defaults a preset contributes; explicit options override them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetDefaults {
    pub row_prior: PriorKind,
    pub col_prior: PriorKind,
    pub noise: NoiseSpec,
}

/// What the data-loading step knows when a preset is expanded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PresetInputs {
    pub side_rows: bool,
    pub side_cols: bool,
    pub n_views: usize,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Bmf => "bmf",
            Preset::Macau => "macau",
            Preset::Gfa => "gfa",
        }
    }

    pub fn expand(self, inp: PresetInputs) -> Result<PresetDefaults> {
        let side = inp.side_rows || inp.side_cols;
        match self {
            Preset::Bmf => {
                if side {
                    return Err(Error::Config(
                        "preset bmf takes no side information; drop --side-rows/--side-cols or use --preset macau".into(),
                    ));
                }
                if inp.n_views > 1 {
                    return Err(Error::Config("preset bmf takes one matrix; use --preset gfa for --view".into()));
                }
                Ok(PresetDefaults {
                    row_prior: PriorKind::Normal,
                    col_prior: PriorKind::Normal,
                    noise: DEFAULT_FIXED_NOISE,
                })
            }
            Preset::Macau => {
                if !side {
                    return Err(Error::Config(
                        "preset macau needs side information; pass --side-rows <file> and/or --side-cols <file>".into(),
                    ));
                }
                let pick = |has| if has { PriorKind::Macau } else { PriorKind::Normal };
                Ok(PresetDefaults {
                    row_prior: pick(inp.side_rows),
                    col_prior: pick(inp.side_cols),
                    noise: DEFAULT_ADAPTIVE_NOISE,
                })
            }
            Preset::Gfa => {
                if side {
                    return Err(Error::Config(
                        "preset gfa takes no side information; drop --side-rows/--side-cols".into(),
                    ));
                }
                Ok(PresetDefaults {
                    row_prior: PriorKind::Normal,
                    col_prior: PriorKind::SpikeAndSlab,
                    noise: DEFAULT_ADAPTIVE_NOISE,
                })
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bmf" => Ok(Preset::Bmf),
            "macau" => Ok(Preset::Macau),
            "gfa" => Ok(Preset::Gfa),
            other => Err(Error::Config(format!("unknown preset `{other}`; use bmf, macau or gfa"))),
        }
    }
}
