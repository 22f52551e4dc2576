use num_complex::Complex64;
use rustfft::FftPlanner;

fn unitary(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut buf = input.to_vec();
    fft.process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Unitary DFT: `R[k] = N^{-1/2} Σ r[n] e^{-2πi kn/N}`.
pub fn dft(time: &[Complex64]) -> Vec<Complex64> {
    unitary(time, false)
}

/// Inverse of [`dft`].
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    unitary(spectrum, true)
}
