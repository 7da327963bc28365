//! Speed-density relationship and fundamental diagram.
//!
//! Per-frame `(density, mean speed)` samples are binned by density, a speed
//! model is fitted to the bin means by count-weighted least squares, and the
//! fitted flux curve `q(k) = k · v(k)` is searched for its maximum, which
//! marks the critical density between free flow and congestion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::FrameStats;

#[derive(Debug, Error, PartialEq)]
pub enum FdError {
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
    #[error("{model} fit needs at least {needed} bins, got {got}")]
    InsufficientBins {
        model: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("design matrix is degenerate: bins cover only {distinct} distinct density value(s)")]
    Degenerate { distinct: usize },
    #[error("no bins to build a fundamental diagram from")]
    Empty,
}

/// Density axis: vehicles per km, or the raw vehicle count per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisMode {
    #[default]
    Density,
    Count,
}

impl AxisMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisMode::Density => "density",
            AxisMode::Count => "count",
        }
    }

    pub fn default_bin_width(&self) -> f64 {
        match self {
            AxisMode::Density => 5.0,
            AxisMode::Count => 1.0,
        }
    }

    pub fn density_unit(&self) -> &'static str {
        match self {
            AxisMode::Density => "veh/km",
            AxisMode::Count => "vehicles",
        }
    }

    pub fn flux_unit(&self) -> &'static str {
        match self {
            AxisMode::Density => "veh/h",
            AxisMode::Count => "veh*km/h",
        }
    }
}

impl std::str::FromStr for AxisMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "density" => Ok(AxisMode::Density),
            "count" => Ok(AxisMode::Count),
            other => Err(format!("unknown axis mode `{other}` (expected density or count)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSample {
    pub density: f64,
    pub speed: f64,
    pub frame: u64,
}

/// One sample per frame that has both vehicles and a mean speed.
pub fn samples_from_stats(stats: &[FrameStats], mode: AxisMode) -> Vec<FdSample> {
    stats
        .iter()
        .filter(|s| s.vehicle_count > 0)
        .filter_map(|s| {
            let speed = s.mean_speed_kmh?;
            let density = match mode {
                AxisMode::Density => s.density_veh_per_km,
                AxisMode::Count => f64::from(s.vehicle_count),
            };
            Some(FdSample {
                density,
                speed,
                frame: s.frame,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdBin {
    /// Geometric center of the bin interval.
    pub center: f64,
    /// Mean density of the samples in the bin; used as the bin's abscissa.
    pub density: f64,
    pub mean_speed: f64,
    pub count: usize,
    pub flux: f64,
}

/// Groups samples by `floor(density / bin_width)` and drops sparse bins.
pub fn bin_samples(
    samples: &[FdSample],
    bin_width: f64,
    min_bin_count: usize,
) -> Result<Vec<FdBin>, FdError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(FdError::BadBinWidth(bin_width));
    }
    let mut groups: std::collections::BTreeMap<i64, (f64, f64, usize)> = Default::default();
    for s in samples {
        let key = (s.density / bin_width).floor() as i64;
        let g = groups.entry(key).or_insert((0.0, 0.0, 0));
        g.0 += s.density;
        g.1 += s.speed;
        g.2 += 1;
    }
    Ok(groups
        .into_iter()
        .filter(|(_, g)| g.2 >= min_bin_count.max(1))
        .map(|(key, (k_sum, v_sum, n))| {
            let density = k_sum / n as f64;
            let mean_speed = v_sum / n as f64;
            FdBin {
                center: (key as f64 + 0.5) * bin_width,
                density,
                mean_speed,
                count: n,
                flux: density * mean_speed,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `v = vf (1 - k / kj)`, linear in density.
    Greenshields,
    /// `v = a + b k + c k²`.
    #[default]
    Quadratic,
}

impl FitModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitModel::Greenshields => "greenshields",
            FitModel::Quadratic => "quadratic",
        }
    }

    fn params(&self) -> usize {
        match self {
            FitModel::Greenshields => 2,
            FitModel::Quadratic => 3,
        }
    }
}

impl std::str::FromStr for FitModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greenshields" => Ok(FitModel::Greenshields),
            "quadratic" => Ok(FitModel::Quadratic),
            other => Err(format!("unknown fit model `{other}` (expected greenshields or quadratic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpeedModel {
    /// Stored as intercept and slope so a flat or rising fit stays usable.
    Greenshields { vf: f64, slope: f64 },
    Quadratic { a: f64, b: f64, c: f64 },
}

impl SpeedModel {
    pub fn speed(&self, k: f64) -> f64 {
        match *self {
            SpeedModel::Greenshields { vf, slope } => vf + slope * k,
            SpeedModel::Quadratic { a, b, c } => a + b * k + c * k * k,
        }
    }

    pub fn flux(&self, k: f64) -> f64 {
        k * self.speed(k)
    }

    /// Speed extrapolated to zero density.
    pub fn free_flow_speed(&self) -> f64 {
        self.speed(0.0)
    }

    pub fn kind(&self) -> FitModel {
        match self {
            SpeedModel::Greenshields { .. } => FitModel::Greenshields,
            SpeedModel::Quadratic { .. } => FitModel::Quadratic,
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match *self {
            SpeedModel::Greenshields { vf, slope } => vec![vf, slope],
            SpeedModel::Quadratic { a, b, c } => vec![a, b, c],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedDensityFit {
    pub model: SpeedModel,
    /// `sqrt(Σ nᵢ (vᵢ − v̂(kᵢ))²)` over the bins.
    pub residual_norm: f64,
    /// Jam density `kj = -vf / slope`; `None` when the fitted speed does not
    /// fall with density over the observed range.
    pub jam_density: Option<f64>,
}

impl SpeedDensityFit {
    pub fn jam_density_unbounded(&self) -> bool {
        self.jam_density.is_none()
    }
}

/// Count-weighted least-squares fit of a speed model to binned means.
pub fn fit_speed_density(bins: &[FdBin], model: FitModel) -> Result<SpeedDensityFit, FdError> {
    let p = model.params();
    if bins.len() < p {
        return Err(FdError::InsufficientBins {
            model: model.as_str(),
            needed: p,
            got: bins.len(),
        });
    }
    let mut distinct: Vec<f64> = bins.iter().map(|b| b.density).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < p {
        return Err(FdError::Degenerate {
            distinct: distinct.len(),
        });
    }

    // Scale densities to O(1) so the quadratic column stays well conditioned.
    let scale = distinct.iter().fold(0.0f64, |m, k| m.max(k.abs())).max(1e-12);
    let n = bins.len();
    let mut a = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    for (i, b) in bins.iter().enumerate() {
        let w = (b.count as f64).sqrt();
        let k = b.density / scale;
        let mut pow = 1.0;
        for j in 0..p {
            a[(i, j)] = w * pow;
            pow *= k;
        }
        y[i] = w * b.mean_speed;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(&y, smax * 1e-12)
        .map_err(|_| FdError::Degenerate {
            distinct: distinct.len(),
        })?;
    let residual_norm = (&a * &x - &y).norm();

    let speed_model = match model {
        FitModel::Greenshields => SpeedModel::Greenshields {
            vf: x[0],
            slope: x[1] / scale,
        },
        FitModel::Quadratic => SpeedModel::Quadratic {
            a: x[0],
            b: x[1] / scale,
            c: x[2] / (scale * scale),
        },
    };
    let jam_density = match speed_model {
        SpeedModel::Greenshields { vf, slope } => {
            // A slope that moves the speed by less than 1e-9 relative over the
            // observed range is flat.
            let k_max = distinct.last().copied().unwrap_or(0.0).abs();
            if slope < 0.0 && vf > 0.0 && -slope * k_max > 1e-9 * vf.abs() {
                Some(-vf / slope)
            } else {
                None
            }
        }
        SpeedModel::Quadratic { .. } => None,
    };
    Ok(SpeedDensityFit {
        model: speed_model,
        residual_norm,
        jam_density,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCurve {
    pub axis_mode: AxisMode,
    pub bins: Vec<FdBin>,
    pub fit: SpeedDensityFit,
    /// Argmax of the fitted flux over the observed density range.
    pub critical_density: f64,
    /// Densities around the argmax where fitted flux stays ≥ 95 % of max.
    pub critical_range: (f64, f64),
    pub max_flux: f64,
    /// False when the maximum sits on an edge of the observed range.
    pub interior_maximum: bool,
}

impl FdCurve {
    pub fn flux_unit(&self) -> &'static str {
        self.axis_mode.flux_unit()
    }
}

/// Fitted flux curve and its maximum, searched on a grid of `bin_width / 10`
/// between the lowest and highest bin densities.
pub fn fundamental_diagram(
    bins: &[FdBin],
    fit: &SpeedDensityFit,
    bin_width: f64,
    axis_mode: AxisMode,
) -> Result<FdCurve, FdError> {
    if bins.is_empty() {
        return Err(FdError::Empty);
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(FdError::BadBinWidth(bin_width));
    }
    let grid = flux_grid(bins, bin_width);
    let flux: Vec<f64> = grid.iter().map(|&k| fit.model.flux(k)).collect();
    let mut best = 0;
    for (i, q) in flux.iter().enumerate() {
        if *q > flux[best] {
            best = i;
        }
    }
    let max_flux = flux[best];
    let cutoff = 0.95 * max_flux;
    let mut lo = best;
    while lo > 0 && flux[lo - 1] >= cutoff {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < flux.len() && flux[hi + 1] >= cutoff {
        hi += 1;
    }
    Ok(FdCurve {
        axis_mode,
        bins: bins.to_vec(),
        fit: *fit,
        critical_density: grid[best],
        critical_range: (grid[lo], grid[hi]),
        max_flux,
        interior_maximum: best > 0 && best + 1 < grid.len(),
    })
}

/// Density grid spanning the bins at a tenth of the bin width.
pub fn flux_grid(bins: &[FdBin], bin_width: f64) -> Vec<f64> {
    let lo = bins.iter().map(|b| b.density).fold(f64::INFINITY, f64::min);
    let hi = bins.iter().map(|b| b.density).fold(f64::NEG_INFINITY, f64::max);
    let step = bin_width / 10.0;
    let n = ((hi - lo) / step).ceil().max(0.0) as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    grid.dedup();
    grid
}

/// Settings for turning frame statistics into a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSettings {
    /// Defaults to the axis mode's natural width when unset.
    pub bin_width: Option<f64>,
    pub min_bin_count: usize,
    pub model: FitModel,
    pub axis_mode: AxisMode,
}

impl Default for FdSettings {
    fn default() -> Self {
        Self {
            bin_width: None,
            min_bin_count: 5,
            model: FitModel::Quadratic,
            axis_mode: AxisMode::Density,
        }
    }
}

impl FdSettings {
    pub fn effective_bin_width(&self) -> f64 {
        self.bin_width.unwrap_or_else(|| self.axis_mode.default_bin_width())
    }
}

/// Bins, fits and searches in one go.
pub fn build_curve(samples: &[FdSample], settings: &FdSettings) -> Result<FdCurve, FdError> {
    let width = settings.effective_bin_width();
    let bins = bin_samples(samples, width, settings.min_bin_count)?;
    let fit = fit_speed_density(&bins, settings.model)?;
    fundamental_diagram(&bins, &fit, width, settings.axis_mode)
}
