//! Normalized intensity cross-correlation G2(tau), peak statistics,
//! resonance widths and power spectra.
//!
//! G2(tau) = <dI1(t) dI2(t+tau)> / sqrt(<dI1^2> <dI2(t+tau)^2>), with every
//! average taken over the overlapping window only (truncated, non-circular)
//! and both means and both variances recomputed on the overlap at each lag.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// A sampled intensity record split into its mean and fluctuations.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries {
    /// Sample interval (s).
    pub dt: f64,
    /// Mean intensity over the record (arbitrary units).
    pub mean: f64,
    /// Zero-mean fluctuation samples (same units).
    pub fluctuations: Vec<f64>,
}

impl IntensitySeries {
    /// Splits raw samples into mean + fluctuations. Two-pass removal keeps
    /// the residual mean below 1e-12 of the RMS.
    pub fn from_samples(dt: f64, samples: &[f64]) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::RecordTooShort("empty intensity record".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("intensity samples"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let mut fluctuations: Vec<f64> = samples.iter().map(|x| x - mean).collect();
        let residual = fluctuations.iter().sum::<f64>() / n;
        for x in fluctuations.iter_mut() {
            *x -= residual;
        }
        Ok(IntensitySeries {
            dt,
            mean,
            fluctuations,
        })
    }

    /// Wraps an externally recorded fluctuation series (e.g. re-ingested
    /// CSV). The samples are re-centered to enforce the zero-mean invariant.
    pub fn from_fluctuations(dt: f64, mean: f64, fluctuations: &[f64]) -> Result<Self> {
        let mut s = Self::from_samples(dt, fluctuations)?;
        s.mean = mean;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.fluctuations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluctuations.is_empty()
    }

    /// Record length in seconds.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn variance(&self) -> f64 {
        let n = self.len() as f64;
        self.fluctuations.iter().map(|x| x * x).sum::<f64>() / n
    }
}

/// Normalized cross-correlation versus lag, symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    /// Lag values (s), ascending, symmetric about 0.
    pub lags: Vec<f64>,
    /// G2 at each lag, in [-1, 1].
    pub values: Vec<f64>,
}

impl CorrelationCurve {
    /// G2(0); the curve always contains the zero lag.
    pub fn at_zero(&self) -> f64 {
        self.values[self.lags.len() / 2]
    }
}

/// G2 over one truncated overlap: s1[i] paired with s2[i + k] for k >= 0.
/// Single pass; means and variances on the overlap.
fn g2_at_shift(s1: &[f64], s2: &[f64], k: usize) -> Result<f64> {
    let n = s1.len() - k;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let x = s1[i];
        let y = s2[i + k];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let nf = n as f64;
    let var_x = sxx / nf - (sx / nf).powi(2);
    let var_y = syy / nf - (sy / nf).powi(2);
    let cov = sxy / nf - (sx / nf) * (sy / nf);
    let denom = (var_x * var_y).sqrt();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::ZeroVariance(k as f64));
    }
    Ok(cov / denom)
}

/// Normalized cross-correlation over lags in [-max_lag, max_lag].
pub fn cross_correlation(
    s1: &IntensitySeries,
    s2: &IntensitySeries,
    max_lag: f64,
) -> Result<CorrelationCurve> {
    if s1.dt != s2.dt {
        return Err(Error::SampleRateMismatch(s1.dt, s2.dt));
    }
    if s1.len() != s2.len() {
        return Err(Error::InvalidParams(format!(
            "record lengths differ: {} vs {}",
            s1.len(),
            s2.len()
        )));
    }
    if !(max_lag >= 0.0) || !max_lag.is_finite() {
        return Err(Error::InvalidParams(format!(
            "max_lag must be non-negative, got {max_lag}"
        )));
    }
    let record = s1.duration();
    if max_lag > 0.2 * record {
        return Err(Error::LagTooLong(max_lag, record));
    }
    let k_max = (max_lag / s1.dt).round() as usize;
    let mut lags = Vec::with_capacity(2 * k_max + 1);
    let mut values = Vec::with_capacity(2 * k_max + 1);
    for j in -(k_max as i64)..=(k_max as i64) {
        // tau = j*dt: <dI1(t) dI2(t+tau)>. Negative tau pairs s1[i+|j|]
        // with s2[i], i.e. the mirrored shift with roles swapped.
        let g2 = if j >= 0 {
            g2_at_shift(&s1.fluctuations, &s2.fluctuations, j as usize)
        } else {
            g2_at_shift(&s2.fluctuations, &s1.fluctuations, (-j) as usize)
        }
        .map_err(|e| match e {
            Error::ZeroVariance(_) => Error::ZeroVariance(j as f64 * s1.dt),
            other => other,
        })?;
        debug_assert!(g2.abs() <= 1.0 + 1e-9, "Cauchy-Schwarz violated: {g2}");
        lags.push(j as f64 * s1.dt);
        values.push(g2);
    }
    Ok(CorrelationCurve { lags, values })
}

/// Summary of the dominant extremum of a correlation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakStats {
    pub peak_value: f64,
    pub peak_lag: f64,
    pub fwhm: f64,
    pub background: f64,
}

/// Median; input need not be sorted.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Half-height width about the extremum at `i_peak` relative to `baseline`,
/// walking outward with linear interpolation between samples.
fn width_about(xs: &[f64], ys: &[f64], i_peak: usize, baseline: f64) -> Result<f64> {
    let half = 0.5 * (ys[i_peak] + baseline);
    let sign = if ys[i_peak] >= baseline { 1.0 } else { -1.0 };
    let crossing = |step: i64| -> Option<f64> {
        let mut j = i_peak as i64;
        loop {
            let k = j + step;
            if k < 0 || k as usize >= ys.len() {
                return None;
            }
            let (yj, yk) = (ys[j as usize], ys[k as usize]);
            if sign * (yj - half) >= 0.0 && sign * (yk - half) <= 0.0 {
                let f = if yk == yj { 0.0 } else { (half - yj) / (yk - yj) };
                return Some(xs[j as usize] + f * (xs[k as usize] - xs[j as usize]));
            }
            j = k;
        }
    };
    let lo = crossing(-1).ok_or(Error::NoHalfCrossing("left"))?;
    let hi = crossing(1).ok_or(Error::NoHalfCrossing("right"))?;
    Ok((hi - lo).abs())
}

/// Number of samples making up each outer wing (20% of the record, at least
/// one sample).
fn wing_len(n: usize) -> usize {
    (n / 5).max(1)
}

/// Peak value, lag, FWHM and background of a correlation curve. The
/// background is the median of the outer 20% of lags; the peak is the
/// extremum of largest magnitude relative to that background.
pub fn peak_stats(curve: &CorrelationCurve) -> Result<PeakStats> {
    let n = curve.values.len();
    if n == 0 {
        return Err(Error::FlatCurve("empty curve"));
    }
    let w = wing_len(n);
    let wings: Vec<f64> = curve.values[..w.min(n)]
        .iter()
        .chain(curve.values[n - w.min(n)..].iter())
        .copied()
        .collect();
    let background = median(&wings);
    let i_peak = (0..n)
        .max_by(|&a, &b| {
            (curve.values[a] - background)
                .abs()
                .partial_cmp(&(curve.values[b] - background).abs())
                .unwrap()
        })
        .unwrap();
    if (curve.values[i_peak] - background).abs() == 0.0 {
        return Err(Error::FlatCurve("no extremum above background"));
    }
    let fwhm = width_about(&curve.lags, &curve.values, i_peak, background)?;
    Ok(PeakStats {
        peak_value: curve.values[i_peak],
        peak_lag: curve.lags[i_peak],
        fwhm,
        background,
    })
}

/// One-sided power spectrum of an intensity record.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Frequencies (Hz), 0 to Nyquist.
    pub frequencies: Vec<f64>,
    /// Power spectral density (units^2/Hz); integral over frequency equals
    /// the signal variance.
    pub psd: Vec<f64>,
}

/// Hann-windowed one-sided periodogram, rescaled so that the integral of the
/// psd over frequency equals the sample variance exactly.
pub fn power_spectrum(s: &IntensitySeries) -> Result<Spectrum> {
    let n = s.len();
    if n < 8 {
        return Err(Error::RecordTooShort(format!(
            "power_spectrum needs at least 8 samples, got {n}"
        )));
    }
    let variance = s.variance();
    // Periodic Hann window.
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let w = 0.5 * (1.0 - (std::f64::consts::TAU * j as f64 / n as f64).cos());
            Complex64::new(w * s.fluctuations[j], 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let n_half = n / 2 + 1;
    let df = 1.0 / (n as f64 * s.dt);
    let mut psd: Vec<f64> = (0..n_half)
        .map(|m| {
            let two_sided = buf[m].norm_sqr();
            // Double interior bins to fold the negative frequencies in.
            if m == 0 || (n % 2 == 0 && m == n / 2) {
                two_sided
            } else {
                2.0 * two_sided
            }
        })
        .collect();
    let integral: f64 = psd.iter().sum::<f64>() * df;
    let scale = if integral > 0.0 { variance / integral } else { 0.0 };
    for p in psd.iter_mut() {
        *p *= scale;
    }
    let frequencies = (0..n_half).map(|m| m as f64 * df).collect();
    Ok(Spectrum { frequencies, psd })
}

/// FWHM of the dominant extremum of (xs, ys) relative to the far-wing
/// baseline (median of the outer 20% of points on each side combined),
/// linear interpolation between samples.
pub fn resonance_width(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "resonance_width needs matched arrays of at least 3 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = ys.len();
    let w = wing_len(n);
    let wings: Vec<f64> = ys[..w].iter().chain(ys[n - w..].iter()).copied().collect();
    let baseline = median(&wings);
    let i_peak = (0..n)
        .max_by(|&a, &b| {
            (ys[a] - baseline)
                .abs()
                .partial_cmp(&(ys[b] - baseline).abs())
                .unwrap()
        })
        .unwrap();
    if (ys[i_peak] - baseline).abs() == 0.0 {
        return Err(Error::FlatCurve("no extremum above far-wing baseline"));
    }
    width_about(xs, ys, i_peak, baseline)
}

/// FWHM of the positive lobe peaking at the global maximum, measured against
/// an explicit baseline. Used for the bipolar correlation-vs-field curves,
/// where the far wings sit near zero but large negative side lobes would
/// corrupt a median-based baseline.
pub fn lobe_fwhm(xs: &[f64], ys: &[f64], baseline: f64) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParams(
            "lobe_fwhm needs matched arrays of at least 3 points".into(),
        ));
    }
    let i_peak = (0..ys.len())
        .max_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap())
        .unwrap();
    if ys[i_peak] <= baseline {
        return Err(Error::FlatCurve("maximum does not rise above the baseline"));
    }
    width_about(xs, ys, i_peak, baseline)
}

/// Optional detector model: first-order high-pass and low-pass stages in
/// cascade, applied causally to the fluctuation samples. Either corner can
/// be disabled by passing None.
pub fn detector_filter(
    s: &IntensitySeries,
    highpass_hz: Option<f64>,
    lowpass_hz: Option<f64>,
) -> Result<IntensitySeries> {
    for (name, f) in [("highpass", highpass_hz), ("lowpass", lowpass_hz)] {
        if let Some(f) = f {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} corner must be positive, got {f}"
                )));
            }
        }
    }
    let mut y = s.fluctuations.clone();
    if let Some(fc) = lowpass_hz {
        let a = (-std::f64::consts::TAU * fc * s.dt).exp();
        let mut state = 0.0;
        for v in y.iter_mut() {
            state = a * state + (1.0 - a) * *v;
            *v = state;
        }
    }
    if let Some(fc) = highpass_hz {
        let a = (-std::f64::consts::TAU * fc * s.dt).exp();
        let mut lp = 0.0;
        for v in y.iter_mut() {
            lp = a * lp + (1.0 - a) * *v;
            *v -= lp;
        }
    }
    IntensitySeries::from_fluctuations(s.dt, s.mean, &y)
}
