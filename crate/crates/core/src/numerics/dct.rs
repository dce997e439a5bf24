//! Type-II / type-III discrete cosine transforms via a complex FFT
//! (Makhoul's even-odd permutation). Unnormalized:
//! `dct2(x)[k] = 2 sum_j x[j] cos(pi k (2j+1) / (2n))`, and `idct2`
//! inverts it exactly.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub fn dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut v: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for j in 0..half {
        v[j] = Complex::new(x[2 * j], 0.0);
    }
    for j in 0..n / 2 {
        v[n - 1 - j] = Complex::new(x[2 * j + 1], 0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut v);
    let mut out = vec![0.0; n];
    for (k, item) in out.iter_mut().enumerate() {
        let ang = -std::f64::consts::PI * k as f64 / (2.0 * n as f64);
        let w = Complex::new(ang.cos(), ang.sin());
        *item = 2.0 * (w * v[k]).re;
    }
    out
}

pub fn idct2(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut v: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
    for (k, item) in v.iter_mut().enumerate() {
        let ang = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
        let w = Complex::new(ang.cos(), ang.sin());
        let c_mirror = if k == 0 { 0.0 } else { c[n - k] };
        *item = 0.5 * w * Complex::new(c[k], -c_mirror);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut v);
    let scale = 1.0 / n as f64;
    let mut x = vec![0.0; n];
    let half = n.div_ceil(2);
    for j in 0..half {
        x[2 * j] = v[j].re * scale;
    }
    for j in 0..n / 2 {
        x[2 * j + 1] = v[n - 1 - j].re * scale;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dct2(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                2.0 * x
                    .iter()
                    .enumerate()
                    .map(|(j, &xj)| {
                        xj * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0)
                            / (2.0 * n as f64))
                            .cos()
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn matches_naive_definition() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 37 + 11) % 17) as f64 * 0.31 - 1.2).collect();
        let fast = dct2(&x);
        let slow = naive_dct2(&x);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() < 1e-10, "{f} vs {s}");
        }
    }

    #[test]
    fn round_trip() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let back = idct2(&dct2(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
