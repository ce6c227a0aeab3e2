//! Gaussian half-moments `I_n(w0) = E[(w + w0)^n Θ(w + w0)]`, `w ~ N(0, 1)`.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `I_1(w0) = φ(w0) + w0 Φ(w0)`.
pub fn i1(w0: f64) -> f64 {
    normal_pdf(w0) + w0 * normal_cdf(w0)
}

/// `I_2(w0) = (1 + w0²) Φ(w0) + w0 φ(w0)`.
pub fn i2(w0: f64) -> f64 {
    (1.0 + w0 * w0) * normal_cdf(w0) + w0 * normal_pdf(w0)
}

/// Order of the half-moment evaluated by [`i_n_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    First,
    Second,
}

/// Direct numerical integration of `∫_{-w0}^{∞} (w + w0)^n φ(w) dw`, cut off
/// ten standard deviations past the larger of the lower limit and zero.
/// Uses only the density, never the CDF, so it is independent of [`i1`] and
/// [`i2`].
pub fn i_n_quadrature(order: MomentOrder, w0: f64) -> f64 {
    let power = match order {
        MomentOrder::First => 1,
        MomentOrder::Second => 2,
    };
    let lower = -w0;
    let upper = lower.max(0.0) + 10.0;
    let f = |w: f64| (w + w0).powi(power) * normal_pdf(w);
    // Split at the mode so the peak is never straddled by a coarse panel.
    if lower < 0.0 {
        adaptive_gk(&f, lower, 0.0, 1e-14, 0) + adaptive_gk(&f, 0.0, upper, 1e-14, 0)
    } else {
        adaptive_gk(&f, lower, upper, 1e-14, 0)
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = K15_WEIGHTS[7] * f(c);
    let mut gauss = G7_WEIGHTS[3] * f(c);
    for (j, &x) in GK_NODES[..7].iter().enumerate() {
        let pair = f(c - h * x) + f(c + h * x);
        kronrod += K15_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += G7_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth >= 40 || (b - a).abs() < 1e-12 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive_gk(f, a, mid, 0.5 * tol, depth + 1) + adaptive_gk(f, mid, b, 0.5 * tol, depth + 1)
}
