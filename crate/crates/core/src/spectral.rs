//! Frequency diagnostics: FFT magnitude spectra summed over grid points,
//! Welch power spectral density and premultiplied (St * PSD) spectra.
//!
//! Frequencies are reported directly in Strouhal units: the datasets in this
//! crate are nondimensional, so the sampling interval already encodes the
//! conversion. The FFT is exact for any length (radix-2 with a Bluestein
//! fallback), which keeps bin locations honest for records like 720 samples.

use crate::error::{Error, Result};

/// Window applied to Welch segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / n as f64;
                    x.sin().powi(2)
                })
                .collect(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }
}

/// Estimation metadata carried with a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeta {
    pub segment_length: usize,
    pub overlap: f64,
    pub window: &'static str,
    pub segments: usize,
}

/// A one-sided spectrum: strictly increasing frequencies up to Nyquist and
/// one value per bin (magnitude or PSD, see the producing function).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub window: Option<WindowMeta>,
    pub normalized_by_std: bool,
}

impl Spectrum {
    /// Frequency of the largest value with frequency in [lo, hi].
    pub fn peak_frequency_in(&self, lo: f64, hi: f64) -> Option<f64> {
        self.frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(f, _)| *f)
    }

    /// Largest value with frequency in [lo, hi].
    pub fn max_in(&self, lo: f64, hi: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .fold(0.0f64, |m, (_, v)| m.max(*v))
    }

    /// Trapezoidal integral of the spectrum over [lo, hi].
    pub fn integral_in(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.frequencies.len() {
            let (f0, f1) = (self.frequencies[i - 1], self.frequencies[i]);
            if f1 < lo || f0 > hi {
                continue;
            }
            acc += 0.5 * (self.values[i - 1] + self.values[i]) * (f1 - f0);
        }
        acc
    }

    pub fn frequency_resolution(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }
}

/// Pointwise St * PSD, the premultiplied spectrum.
pub fn premultiply(s: &Spectrum) -> Spectrum {
    Spectrum {
        frequencies: s.frequencies.clone(),
        values: s
            .frequencies
            .iter()
            .zip(&s.values)
            .map(|(f, v)| f * v)
            .collect(),
        window: s.window.clone(),
        normalized_by_std: s.normalized_by_std,
    }
}

/// One-sided FFT magnitude spectrum, summed across the given signals
/// (typically one signal per grid point). With `normalize_by_std` each
/// signal is divided by its own standard deviation first.
pub fn fft_magnitude(signals: &[Vec<f64>], dt: f64, normalize_by_std: bool) -> Result<Spectrum> {
    if signals.is_empty() {
        return Err(Error::Contract("fft_magnitude needs at least one signal".into()));
    }
    let n = signals[0].len();
    if n < 4 {
        return Err(Error::Contract("fft_magnitude needs at least 4 samples".into()));
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Contract(format!("sampling interval must be positive, got {dt}")));
    }
    if signals.iter().any(|s| s.len() != n) {
        return Err(Error::Contract("all signals must share the same length".into()));
    }

    let half = n / 2;
    let mut sum = vec![0.0; half + 1];
    for signal in signals {
        let mut re: Vec<f64>;
        if normalize_by_std {
            let mean = signal.iter().sum::<f64>() / n as f64;
            let sigma =
                (signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
            if sigma == 0.0 {
                return Err(Error::Contract(
                    "cannot std-normalize a constant signal".into(),
                ));
            }
            re = signal.iter().map(|v| v / sigma).collect();
        } else {
            re = signal.clone();
        }
        let mut im = vec![0.0; n];
        dft_in_place(&mut re, &mut im)?;
        for k in 0..=half {
            sum[k] += re[k].hypot(im[k]);
        }
    }

    let frequencies = (0..=half).map(|k| k as f64 / (n as f64 * dt)).collect();
    Ok(Spectrum { frequencies, values: sum, window: None, normalized_by_std: normalize_by_std })
}

/// Welch PSD with a Hann window (see [`welch_psd_with`] for other windows).
pub fn welch_psd(signal: &[f64], fs: f64, segment_length: usize, overlap: f64) -> Result<Spectrum> {
    welch_psd_with(signal, fs, segment_length, overlap, Window::Hann)
}

/// Welch power spectral density: overlapped, windowed, mean-detrended
/// segment periodograms averaged into a one-sided density, normalized so the
/// integral over frequency approximates the signal variance.
pub fn welch_psd_with(
    signal: &[f64],
    fs: f64,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<Spectrum> {
    if segment_length < 4 {
        return Err(Error::Contract("welch segment length must be >= 4".into()));
    }
    if segment_length > signal.len() {
        return Err(Error::Contract(format!(
            "segment length {segment_length} exceeds signal length {}",
            signal.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Contract("overlap must be in [0, 1)".into()));
    }
    if fs <= 0.0 {
        return Err(Error::Contract("sampling frequency must be positive".into()));
    }

    let n = segment_length;
    let step = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let coeffs = window.coefficients(n);
    let window_power: f64 = coeffs.iter().map(|w| w * w).sum();
    let half = n / 2;

    let mut acc = vec![0.0; half + 1];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + n <= signal.len() {
        let seg = &signal[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        let mut re: Vec<f64> = seg
            .iter()
            .zip(&coeffs)
            .map(|(v, w)| (v - mean) * w)
            .collect();
        let mut im = vec![0.0; n];
        dft_in_place(&mut re, &mut im)?;
        for k in 0..=half {
            acc[k] += re[k] * re[k] + im[k] * im[k];
        }
        segments += 1;
        start += step;
    }

    let scale = 1.0 / (fs * window_power * segments as f64);
    let mut values = vec![0.0; half + 1];
    for k in 0..=half {
        let one_sided = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
        values[k] = acc[k] * scale * one_sided;
    }
    let frequencies = (0..=half).map(|k| k as f64 * fs / n as f64).collect();
    Ok(Spectrum {
        frequencies,
        values,
        window: Some(WindowMeta {
            segment_length: n,
            overlap,
            window: window.name(),
            segments,
        }),
        normalized_by_std: false,
    })
}

// ---------------------------------------------------------------------------
// FFT kernels
// ---------------------------------------------------------------------------

/// In-place DFT of (re, im). Radix-2 when the length is a power of two,
/// Bluestein's chirp-z reduction onto a power-of-two FFT otherwise.
fn dft_in_place(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    let n = re.len();
    if n == 0 {
        return Err(Error::Contract("empty DFT input".into()));
    }
    if n.is_power_of_two() {
        fft_pow2(re, im, false);
        Ok(())
    } else {
        bluestein(re, im)
    }
}

/// Iterative radix-2 Cooley-Tukey. `invert` computes the unscaled inverse.
fn fft_pow2(re: &mut [f64], im: &mut [f64], invert: bool) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if invert { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut cr = 1.0;
            let mut ci = 0.0;
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr, vi) = (
                    re[i + k + len / 2] * cr - im[i + k + len / 2] * ci,
                    re[i + k + len / 2] * ci + im[i + k + len / 2] * cr,
                );
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let next_cr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = next_cr;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Bluestein's algorithm: an arbitrary-length DFT as a convolution with a
/// quadratic chirp, evaluated with power-of-two FFTs.
fn bluestein(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    let n = re.len();
    let m = (2 * n - 1).next_power_of_two();

    // chirp_k = exp(-i pi k^2 / n); k^2 taken mod 2n to keep angles accurate
    let mut chirp_re = vec![0.0; n];
    let mut chirp_im = vec![0.0; n];
    for k in 0..n {
        let sq = (k as u128 * k as u128 % (2 * n as u128)) as f64;
        let ang = -std::f64::consts::PI * sq / n as f64;
        chirp_re[k] = ang.cos();
        chirp_im[k] = ang.sin();
    }

    let mut a_re = vec![0.0; m];
    let mut a_im = vec![0.0; m];
    for k in 0..n {
        a_re[k] = re[k] * chirp_re[k] - im[k] * chirp_im[k];
        a_im[k] = re[k] * chirp_im[k] + im[k] * chirp_re[k];
    }
    let mut b_re = vec![0.0; m];
    let mut b_im = vec![0.0; m];
    b_re[0] = chirp_re[0];
    b_im[0] = -chirp_im[0];
    for k in 1..n {
        b_re[k] = chirp_re[k];
        b_im[k] = -chirp_im[k];
        b_re[m - k] = b_re[k];
        b_im[m - k] = b_im[k];
    }

    fft_pow2(&mut a_re, &mut a_im, false);
    fft_pow2(&mut b_re, &mut b_im, false);
    for k in 0..m {
        let (ar, ai) = (a_re[k], a_im[k]);
        a_re[k] = ar * b_re[k] - ai * b_im[k];
        a_im[k] = ar * b_im[k] + ai * b_re[k];
    }
    fft_pow2(&mut a_re, &mut a_im, true);
    let inv_m = 1.0 / m as f64;
    for k in 0..n {
        let (cr, ci) = (a_re[k] * inv_m, a_im[k] * inv_m);
        re[k] = cr * chirp_re[k] - ci * chirp_im[k];
        im[k] = cr * chirp_im[k] + ci * chirp_re[k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use std::f64::consts::PI;

    fn direct_dft(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for k in 0..n {
            for (j, &xj) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                re[k] += xj * ang.cos();
                im[k] += xj * ang.sin();
            }
        }
        (re, im)
    }

    #[test]
    fn fft_matches_direct_dft_for_awkward_lengths() {
        let mut rng = SeededRng::new(4);
        for n in [5usize, 12, 45, 64, 720] {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let (er, ei) = direct_dft(&x);
            let mut re = x.clone();
            let mut im = vec![0.0; n];
            dft_in_place(&mut re, &mut im).unwrap();
            let scale = er.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
            for k in 0..n {
                assert!(
                    (re[k] - er[k]).abs() < 1e-9 * scale && (im[k] - ei[k]).abs() < 1e-9 * scale,
                    "n={n} bin {k}: ({}, {}) vs ({}, {})",
                    re[k],
                    im[k],
                    er[k],
                    ei[k]
                );
            }
        }
    }

    #[test]
    fn sinusoid_peak_at_vortex_shedding_frequency() {
        let (n, dt) = (720usize, 0.125);
        let x: Vec<f64> = (0..n).map(|t| (2.0 * PI * 0.23 * t as f64 * dt).sin()).collect();
        let spec = fft_magnitude(&[x], dt, false).unwrap();
        let peak = spec.peak_frequency_in(0.01, f64::INFINITY).unwrap();
        let bin = 1.0 / (n as f64 * dt);
        assert!((peak - 0.23).abs() <= bin, "peak {peak}, bin width {bin}");
    }

    #[test]
    fn constant_signal_energy_in_dc_bin() {
        let x = vec![2.5; 64];
        let spec = fft_magnitude(&[x], 0.1, false).unwrap();
        assert!(spec.values[0] > 1.0);
        assert!(spec.values[1..].iter().all(|&v| v < 1e-9 * spec.values[0]));
    }

    #[test]
    fn two_bin_centered_sinusoids_have_equal_peaks() {
        let (n, dt) = (512usize, 0.25);
        let f1 = 10.0 / (n as f64 * dt);
        let f2 = 37.0 / (n as f64 * dt);
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let time = t as f64 * dt;
                (2.0 * PI * f1 * time).sin() + (2.0 * PI * f2 * time).sin()
            })
            .collect();
        let spec = fft_magnitude(&[x], dt, false).unwrap();
        let v1 = spec.max_in(f1 - 1e-9, f1 + 1e-9);
        let v2 = spec.max_in(f2 - 1e-9, f2 + 1e-9);
        assert!((v1 - v2).abs() < 0.01 * v1, "peaks differ: {v1} vs {v2}");
    }

    #[test]
    fn magnitude_is_linear_in_amplitude() {
        let (n, dt) = (256usize, 0.5);
        let f = 20.0 / (n as f64 * dt);
        let x: Vec<f64> = (0..n).map(|t| (2.0 * PI * f * t as f64 * dt).sin()).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let s1 = fft_magnitude(&[x], dt, false).unwrap();
        let s2 = fft_magnitude(&[x2], dt, false).unwrap();
        let p1 = s1.max_in(f - 1e-9, f + 1e-9);
        let p2 = s2.max_in(f - 1e-9, f + 1e-9);
        assert!((p2 - 2.0 * p1).abs() < 1e-10 * p2);
    }

    #[test]
    fn welch_parseval_for_white_noise() {
        let mut rng = SeededRng::new(2024);
        let n = 1 << 17;
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let psd = welch_psd(&x, 2.0, 1024, 0.5).unwrap();
        let integral = psd.integral_in(0.0, 1.0)
            + 0.5 * (psd.values[0] + psd.values[psd.values.len() - 1]) * 0.0; // endpoints already inside
        assert!(
            (integral - var).abs() < 0.02 * var,
            "PSD integral {integral} vs variance {var}"
        );
    }

    #[test]
    fn welch_sinusoid_peak_power() {
        let fs = 10.0;
        let n = 1 << 15;
        let a = 1.7;
        let f0 = 1.25; // bin-centered for segment 1024 at fs 10: 1.25*1024/10 = 128
        let x: Vec<f64> = (0..n)
            .map(|t| a * (2.0 * PI * f0 * t as f64 / fs).sin())
            .collect();
        let psd = welch_psd(&x, fs, 1024, 0.5).unwrap();
        let df = fs / 1024.0;
        let band = psd.integral_in(f0 - 5.0 * df, f0 + 5.0 * df);
        let expect = a * a / 2.0;
        assert!(
            (band - expect).abs() < 0.03 * expect,
            "peak power {band} vs {expect}"
        );
    }

    #[test]
    fn welch_variance_shrinks_with_more_segments() {
        let mut ratios = Vec::new();
        for seed in 0..6 {
            let mut rng = SeededRng::new(seed);
            let short: Vec<f64> = (0..4096).map(|_| rng.normal()).collect();
            let long: Vec<f64> = (0..16384).map(|_| rng.normal()).collect();
            let relvar = |s: &Spectrum| {
                let interior = &s.values[1..s.values.len() - 1];
                let m = interior.iter().sum::<f64>() / interior.len() as f64;
                interior.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                    / interior.len() as f64
                    / (m * m)
            };
            let p_short = welch_psd(&short, 1.0, 512, 0.0).unwrap();
            let p_long = welch_psd(&long, 1.0, 512, 0.0).unwrap();
            ratios.push(relvar(&p_long) / relvar(&p_short));
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(mean_ratio < 0.5, "variance ratio {mean_ratio}, per-seed {ratios:?}");
    }

    #[test]
    fn premultiply_is_pointwise_and_invertible() {
        let s = Spectrum {
            frequencies: vec![0.0, 0.5, 1.0, 2.0],
            values: vec![3.0, 4.0, 5.0, 6.0],
            window: None,
            normalized_by_std: false,
        };
        let p = premultiply(&s);
        assert_eq!(p.values, vec![0.0, 2.0, 5.0, 12.0]);
        for (k, f) in s.frequencies.iter().enumerate() {
            if *f > 0.0 {
                assert!((p.values[k] / f - s.values[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn welch_rejects_bad_segments() {
        let x = vec![0.0; 100];
        assert!(welch_psd(&x, 1.0, 0, 0.5).is_err());
        assert!(welch_psd(&x, 1.0, 128, 0.5).is_err());
        assert!(welch_psd(&x, 1.0, 64, 1.0).is_err());
    }

    #[test]
    fn fft_magnitude_input_checks() {
        assert!(fft_magnitude(&[], 0.1, false).is_err());
        assert!(fft_magnitude(&[vec![1.0, 2.0]], 0.1, false).is_err());
        assert!(fft_magnitude(&[vec![1.0; 8]], 0.0, false).is_err());
        assert!(fft_magnitude(&[vec![1.0; 8], vec![1.0; 9]], 0.1, false).is_err());
    }
}
