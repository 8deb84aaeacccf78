use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::IntegratorConfig;
use crate::section::{first_return, ReturnMapSample, SectionError, SectionPoint};
use crate::Params;

use super::word::SymbolWord;

pub const MIN_PARTITION_SAMPLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("{got} samples, at least {MIN_PARTITION_SAMPLES} needed")]
    InsufficientSamples { got: usize },
    #[error("no single interior extremum in the induced map")]
    NotUnimodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extremum {
    Max,
    Min,
}

/// Fold abscissa of the induced one-dimensional map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionModel {
    pub u_c: f64,
    pub extremum: Extremum,
    /// Symbol assigned to `u < u_c`; the other side gets the other symbol.
    pub lower_symbol: u8,
    pub u_range: [f64; 2],
    pub fold_value: f64,
    pub samples: usize,
}

impl PartitionModel {
    pub fn symbol(&self, u: f64) -> u8 {
        if u < self.u_c {
            self.lower_symbol
        } else {
            3 - self.lower_symbol
        }
    }

    /// Same fold with the two symbols exchanged.
    pub fn mirrored(&self) -> Self {
        PartitionModel {
            lower_symbol: 3 - self.lower_symbol,
            ..*self
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Least-squares quadratic `c0 + c1 x + c2 x²` in the shifted variable.
fn quadratic_fit(pts: &[(f64, f64)], x0: f64) -> Option<[f64; 3]> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &(x, y) in pts {
        let d = x - x0;
        let row = nalgebra::Vector3::new(1.0, d, d * d);
        ata += row * row.transpose();
        atb += row * y;
    }
    let c = ata.lu().solve(&atb)?;
    Some([c[0], c[1], c[2]])
}

/// Calibrates the fold from `(u, u′)` pairs of the induced one-dimensional map.
pub fn calibrate_from_pairs(pairs: &[(f64, f64)]) -> Result<PartitionModel, PartitionError> {
    let pairs: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|(u, v)| u.is_finite() && v.is_finite())
        .collect();
    if pairs.len() < MIN_PARTITION_SAMPLES {
        return Err(PartitionError::InsufficientSamples { got: pairs.len() });
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(PartitionError::NotUnimodal);
    }
    let nbins = ((pairs.len() as f64).sqrt() as usize).clamp(10, 200);
    let width = (hi - lo) / nbins as f64;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    for &(u, v) in &pairs {
        let k = (((u - lo) / width) as usize).min(nbins - 1);
        bins[k].push(v);
    }
    let binned: Vec<(f64, f64)> = bins
        .iter_mut()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(k, b)| (lo + (k as f64 + 0.5) * width, median(b)))
        .collect();
    if binned.len() < 5 {
        return Err(PartitionError::NotUnimodal);
    }
    let vmax = binned.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    let vmin = binned.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let span = vmax - vmin;
    if !(span > 0.0) {
        return Err(PartitionError::NotUnimodal);
    }
    // count significant turns of the binned curve, ignoring wiggles below 2% of the span
    let thresh = 0.02 * span;
    let mut turns = Vec::new();
    let mut anchor = 0usize;
    let mut dir = 0i8;
    for k in 1..binned.len() {
        let d = binned[k].1 - binned[anchor].1;
        if d.abs() < thresh {
            if (dir > 0 && binned[k].1 > binned[anchor].1) || (dir < 0 && binned[k].1 < binned[anchor].1) {
                anchor = k;
            }
            continue;
        }
        let nd = if d > 0.0 { 1 } else { -1 };
        if dir != 0 && nd != dir {
            turns.push(anchor);
        }
        dir = nd;
        anchor = k;
    }
    if turns.len() != 1 {
        return Err(PartitionError::NotUnimodal);
    }
    let peak = turns[0];
    if peak == 0 || peak == binned.len() - 1 {
        return Err(PartitionError::NotUnimodal);
    }
    let extremum = if binned[peak].1 > binned[peak - 1].1 {
        Extremum::Max
    } else {
        Extremum::Min
    };
    let x0 = binned[peak].0;
    let sign = if extremum == Extremum::Max { 1.0 } else { -1.0 };
    let mut half = 3.0 * width;
    let coeffs = loop {
        let local: Vec<(f64, f64)> = pairs
            .iter()
            .copied()
            .filter(|(u, _)| (u - x0).abs() <= half)
            .collect();
        if local.len() >= 5 {
            if let Some(c) = quadratic_fit(&local, x0) {
                if sign * c[2] < 0.0 {
                    break c;
                }
            }
        }
        half *= 1.5;
        if half > hi - lo {
            return Err(PartitionError::NotUnimodal);
        }
    };
    let fit = |u: f64| {
        let d = u - x0;
        sign * (coeffs[0] + coeffs[1] * d + coeffs[2] * d * d)
    };
    let a = (x0 - half).max(lo);
    let b = (x0 + half).min(hi);
    let u_c = golden_max(fit, a, b);
    if !(u_c > lo && u_c < hi) {
        return Err(PartitionError::NotUnimodal);
    }
    Ok(PartitionModel {
        u_c,
        extremum,
        lower_symbol: 1,
        u_range: [lo, hi],
        fold_value: sign * fit(u_c),
        samples: pairs.len(),
    })
}

/// Calibrates the fold from return-map samples lying on the attractor ridge.
///
/// Samples whose start `w` falls outside the band swept by the images are dropped.
pub fn calibrate_partition(
    _p: &Params,
    samples: &[ReturnMapSample],
) -> Result<PartitionModel, PartitionError> {
    if samples.len() < MIN_PARTITION_SAMPLES {
        return Err(PartitionError::InsufficientSamples { got: samples.len() });
    }
    let wlo = samples.iter().map(|s| s.out_point.w).fold(f64::INFINITY, f64::min);
    let whi = samples.iter().map(|s| s.out_point.w).fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (whi - wlo) + 1e-12;
    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.in_point.w >= wlo - pad && s.in_point.w <= whi + pad)
        .map(|s| (s.in_point.u, s.out_point.u))
        .collect();
    calibrate_from_pairs(&pairs)
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("itinerary stopped after {} symbols: {error}", prefix.len())]
pub struct ItineraryError {
    pub prefix: Vec<u8>,
    pub error: SectionError,
}

/// Symbols of `q` and its next `n − 1` returns.
pub fn itinerary(
    p: &Params,
    q: &SectionPoint,
    n: usize,
    model: &PartitionModel,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<SymbolWord, ItineraryError> {
    let mut out = Vec::with_capacity(n);
    let mut x = *q;
    for i in 0..n {
        out.push(model.symbol(x.u));
        if i + 1 < n {
            x = match first_return(p, &x, t_max, cfg) {
                Ok(s) => s.out_point,
                Err(error) => return Err(ItineraryError { prefix: out, error }),
            };
        }
    }
    SymbolWord::new(out).map_err(|_| ItineraryError {
        prefix: Vec::new(),
        error: SectionError::NoCrossing { t_max },
    })
}
