//! Shared oracle helpers for integration tests.

use num_complex::Complex64;

/// Abramowitz & Stegun 9.4.1/9.4.3 polynomial approximations (abs error ~1e-7).
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 3.0 {
        let t = (x / 3.0) * (x / 3.0);
        1.0 + t
            * (-2.2499997
                + t * (1.2656208
                    + t * (-0.3163866 + t * (0.0444479 + t * (-0.0039444 + t * 0.0002100)))))
    } else {
        let t = 3.0 / ax;
        let f0 = 0.79788456
            + t * (-0.00000077
                + t * (-0.00552740
                    + t * (-0.00009512 + t * (0.00137237 + t * (-0.00072805 + t * 0.00014476)))));
        let theta0 = ax - 0.78539816
            + t * (-0.04166397
                + t * (-0.00003954
                    + t * (0.00262573 + t * (-0.00054125 + t * (-0.00029333 + t * 0.00013558)))));
        f0 * theta0.cos() / ax.sqrt()
    }
}

pub fn bessel_y0(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 3.0 {
        let t = (x / 3.0) * (x / 3.0);
        let p = 0.36746691
            + t * (0.60559366
                + t * (-0.74350384
                    + t * (0.25300117 + t * (-0.04261214 + t * (0.00427916 - t * 0.00024846)))));
        2.0 / std::f64::consts::PI * (x / 2.0).ln() * bessel_j0(x) + p
    } else {
        let t = 3.0 / x;
        let f0 = 0.79788456
            + t * (-0.00000077
                + t * (-0.00552740
                    + t * (-0.00009512 + t * (0.00137237 + t * (-0.00072805 + t * 0.00014476)))));
        let theta0 = x - 0.78539816
            + t * (-0.04166397
                + t * (-0.00003954
                    + t * (0.00262573 + t * (-0.00054125 + t * (-0.00029333 + t * 0.00013558)))));
        f0 * theta0.sin() / x.sqrt()
    }
}

/// Free-space 2D Green's function for (del^2 + k^2) G = -delta under the
/// e^{+jwt} convention: G = -(j/4) H0^(2)(k r).
pub fn green_2d(k: f64, r: f64) -> Complex64 {
    let h2 = Complex64::new(bessel_j0(k * r), -bessel_y0(k * r));
    Complex64::new(0.0, -0.25) * h2
}
