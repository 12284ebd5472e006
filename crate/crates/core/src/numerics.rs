//! Quadrature, root finding, finite differences and FFT helpers shared by all modules.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[C64], h: f64) -> C64 {
    match values.len() {
        0 | 1 => C64::new(0.0, 0.0),
        n => {
            let inner: C64 = values[1..n - 1].iter().sum();
            (inner + 0.5 * (values[0] + values[n - 1])) * h
        }
    }
}

/// Trapezoid rule for real samples.
pub fn trapezoid_real(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])) * h,
    }
}

/// Composite Simpson weights for `intervals` (even) panels of width `h`.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    assert!(intervals >= 2 && intervals.is_multiple_of(2), "Simpson needs an even panel count");
    (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = w * half;
        weights[n - 1 - i] = w * half;
    }
    (nodes, weights)
}

/// Bisection for a sign change of `f` on [a, b]; `None` when the endpoints share a sign.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Central difference of order 1 or 2 with one Richardson step (h and h/2).
pub fn central_derivative(f: impl Fn(f64) -> C64, x: f64, h: f64, order: u32) -> C64 {
    let stencil = |h: f64| match order {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => panic!("only first and second derivatives are supported"),
    };
    let coarse = stencil(h);
    let fine = stencil(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// In-place complex FFT. The forward transform uses e^{-2πi jk/N}; neither direction is scaled.
pub fn fft(data: &mut [C64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(data.len())
    } else {
        planner.plan_fft_forward(data.len())
    };
    plan.process(data);
}

/// Sums `amp(λ_m) e^{iλ_m x_j}` for λ_m = λ0 + mΔλ (m < n) and x_j = x0 + jΔx (j < n),
/// where ΔλΔx = 2π/n. Returns the n sums indexed by j.
pub fn fourier_synthesis(amp: &[C64], lambda0: f64, dlambda: f64, x0: f64, dx: f64) -> Vec<C64> {
    let n = amp.len();
    debug_assert!(((dlambda * dx * n as f64) - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    // e^{i(λ0+mΔλ)(x0+jΔx)} = e^{iλ0 x0} e^{iλ0 jΔx} e^{i mΔλ x0} e^{2πi mj/n}
    let mut buf: Vec<C64> = amp
        .iter()
        .enumerate()
        .map(|(m, a)| a * C64::from_polar(1.0, m as f64 * dlambda * x0))
        .collect();
    fft(&mut buf, true);
    buf.iter()
        .enumerate()
        .map(|(j, v)| v * C64::from_polar(1.0, lambda0 * (x0 + j as f64 * dx)))
        .collect()
}

/// Unwraps a phase sequence so consecutive values differ by less than π.
pub fn unwrap_phase(phases: &mut [f64]) {
    use std::f64::consts::PI;
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        phases[i] = phases[i - 1] + d;
    }
}

/// Ordinary least-squares slope and intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
