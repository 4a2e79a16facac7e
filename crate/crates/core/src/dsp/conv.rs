use num_complex::Complex64;
use rustfft::FftPlanner;

/// Direct-form linear convolution truncated to `signal.len()` samples.
pub fn convolve_direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut out = vec![0.0; n];
    for (k, h) in kernel.iter().enumerate().filter(|(_, h)| **h != 0.0) {
        for (o, x) in out[k.min(n)..].iter_mut().zip(signal) {
            *o += h * x;
        }
    }
    out
}

/// Linear convolution of one signal with several kernels, each truncated to
/// `signal.len()` samples. Uses a single zero-padded FFT per kernel.
pub fn convolve_many(signal: &[f64], kernels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = signal.len();
    let taps = kernels.iter().map(Vec::len).max().unwrap_or(0);
    if n == 0 || taps == 0 {
        return vec![vec![0.0; n]; kernels.len()];
    }
    if n * taps <= 1 << 16 {
        return kernels.iter().map(|k| convolve_direct(signal, k)).collect();
    }
    let size = (n + taps - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut xs: Vec<Complex64> = signal.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    xs.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut xs);
    let scale = 1.0 / size as f64;
    kernels
        .iter()
        .map(|k| {
            let mut hs: Vec<Complex64> = k.iter().map(|v| Complex64::new(*v, 0.0)).collect();
            hs.resize(size, Complex64::new(0.0, 0.0));
            fwd.process(&mut hs);
            for (h, x) in hs.iter_mut().zip(&xs) {
                *h *= x;
            }
            inv.process(&mut hs);
            hs[..n].iter().map(|c| c.re * scale).collect()
        })
        .collect()
}
