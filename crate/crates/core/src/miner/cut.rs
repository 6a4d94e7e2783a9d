//! Locating the cut in a variance trace.
//!
//! The trace (without its leading seed-distance entry) is smoothed with a
//! truncated Gaussian, then differentiated twice with central differences.
//! Each maximal run where the second derivative is positive marks a rise in
//! slope. A run that ends in a sign change to negative is a slope peak, i.e.
//! a jump in the trace, and the cut sits at the largest raw rise inside it.
//! A run that relaxes into a flat second derivative is a knee between two
//! slopes, and the cut sits at the curvature maximum. Either way the slope
//! reached at the end of the run must exceed the threshold.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub smoothed: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// A cut position in trace coordinates together with the smoothed slope it
/// reaches, so callers can apply different thresholds without recomputing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutCandidate {
    pub index: usize,
    pub slope: f64,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    k
}

/// Value of the signal extended by point reflection about each end, which
/// keeps linear trends linear across the boundary.
fn reflected(w: &[f64], mut i: isize) -> f64 {
    let last = w.len() as isize - 1;
    if last == 0 {
        return w[0];
    }
    let (mut sign, mut offset) = (1.0, 0.0);
    loop {
        if i < 0 {
            offset += sign * 2.0 * w[0];
            sign = -sign;
            i = -i;
        } else if i > last {
            offset += sign * 2.0 * w[last as usize];
            sign = -sign;
            i = 2 * last - i;
        } else {
            return offset + sign * w[i as usize];
        }
    }
}

/// Gaussian smoothing followed by central first and second differences.
pub fn smooth_derivatives(w: &[f64], sigma: f64) -> Derivatives {
    let n = w.len();
    if n == 0 {
        return Derivatives {
            smoothed: vec![],
            first: vec![],
            second: vec![],
        };
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    // smoothed values on -1..=n so differences exist at both ends
    let ext: Vec<f64> = (-1..=n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, g)| g * reflected(w, i + k as isize - radius))
                .sum()
        })
        .collect();
    let smoothed = ext[1..=n].to_vec();
    let first = (1..=n).map(|i| (ext[i + 1] - ext[i - 1]) / 2.0).collect();
    let second = (1..=n).map(|i| ext[i + 1] - 2.0 * ext[i] + ext[i - 1]).collect();
    Derivatives {
        smoothed,
        first,
        second,
    }
}

/// All cut candidates of a trace, with indices into `v`.
pub fn cut_candidates(v: &[f64], sigma: f64) -> Result<Vec<CutCandidate>> {
    if v.len() < 3 {
        return Err(Error::TraceTooShort(v.len()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    // the seed entry is a semantic distance, not a variance
    let w = &v[1..];
    let Derivatives {
        smoothed,
        first,
        second,
    } = smooth_derivatives(w, sigma);
    let n = w.len();
    let max_abs = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * (max_abs(&first) + 1e-3 * max_abs(&smoothed));

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if second[i] <= tol {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && second[i] > tol {
            i += 1;
        }
        // a run still rising at the last sample is not closed
        if i >= n - 1 {
            break;
        }
        let end = i - 1;
        let slope = first[end].max(first[i]);
        let at = if second[i] < -tol {
            // smoothing drags the slope peak towards the steeper side, so
            // the jump is placed at the largest raw rise of the run
            (start.max(1)..=i).fold(start.max(1), |best, k| {
                if w[k] - w[k - 1] > w[best] - w[best - 1] {
                    k
                } else {
                    best
                }
            })
        } else {
            (start..=end).fold(start, |best, k| if second[k] > second[best] { k } else { best })
        };
        out.push(CutCandidate {
            index: at + 1,
            slope,
        });
    }
    Ok(out)
}

/// Cut indices whose reached slope is above `threshold`, ascending.
pub fn detect_cut(v: &[f64], sigma: f64, threshold: f64) -> Result<Vec<usize>> {
    Ok(cut_candidates(v, sigma)?
        .into_iter()
        .filter(|c| c.slope > threshold)
        .map(|c| c.index)
        .collect())
}
