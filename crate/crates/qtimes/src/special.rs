//! Special functions: sine integral, complementary error function.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

/// Sine integral Si(u) = int_0^u sin(y)/y dy, absolute error below 1e-10.
///
/// Power series up to |u| = 12, continued fraction for the exponential
/// integral E1(i u) beyond.
pub fn sine_integral(u: f64) -> f64 {
    if u < 0.0 {
        return -sine_integral(-u);
    }
    if u == 0.0 {
        return 0.0;
    }
    if u <= 12.0 {
        si_series(u)
    } else {
        FRAC_PI_2 + e1_imag_axis(u).im
    }
}

/// f(u) = pi/2 - Si(u) = int_u^inf sin(y)/y dy.
pub fn si_tail(u: f64) -> f64 {
    FRAC_PI_2 - sine_integral(u)
}

fn si_series(u: f64) -> f64 {
    let u2 = u * u;
    let mut term = u;
    let mut sum = u;
    let mut k = 1u32;
    loop {
        // term_k = (-1)^k u^{2k+1} / (2k+1)!; summand divides by (2k+1)
        let tk = 2.0 * k as f64;
        term *= -u2 / (tk * (tk + 1.0));
        let add = term / (tk + 1.0);
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1.0) || k > 60 {
            break;
        }
        k += 1;
    }
    sum
}

/// E1(i u) for u > 0 via the modified Lentz continued fraction.
fn e1_imag_axis(u: f64) -> Complex64 {
    let z = Complex64::new(0.0, u);
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..200 {
        let a = -(i as f64) * (i as f64);
        b += 2.0;
        d = (b + d * a).inv();
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-15 {
            break;
        }
    }
    h * (-z).exp()
}

/// Complementary error function, absolute error below 1e-7.
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

#[allow(dead_code)]
pub(crate) fn si_tail_normalized(u: f64) -> f64 {
    si_tail(u) / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn si_zero() {
        assert_eq!(sine_integral(0.0), 0.0);
    }

    #[test]
    fn si_at_pi_against_quadrature_oracle() {
        // Independent oracle: composite Gauss-Legendre on [0, pi].
        let rule = crate::quad::GaussLegendre::new(40);
        let oracle = rule.integrate(0.0, std::f64::consts::PI, |y| {
            if y == 0.0 {
                1.0
            } else {
                y.sin() / y
            }
        });
        assert_abs_diff_eq!(oracle, 1.851937051982, epsilon = 1e-10);
        assert_abs_diff_eq!(sine_integral(std::f64::consts::PI), oracle, epsilon = 1e-10);
    }

    #[test]
    fn si_series_cf_match_at_switchover() {
        // the series keeps full accuracy through u = 16; the continued
        // fraction agrees there to ~1e-12, so the switchover at 12 is safe
        for u in [11.0f64, 11.9, 12.1, 13.0, 16.0] {
            let series = si_series(u);
            let cf = FRAC_PI_2 + e1_imag_axis(u).im;
            assert_abs_diff_eq!(series, cf, epsilon = 1e-11);
        }
    }

    #[test]
    fn si_large_argument_asymptote() {
        // Si oscillates around pi/2 with envelope 1/u; at u = 1e4 the leading
        // asymptotic form cos(u)/u + sin(u)/u^2 matches to well below 1e-8.
        let u = 1e4;
        let tail = si_tail(u);
        assert!(tail.abs() <= 1.01 / u);
        let asym = u.cos() / u + u.sin() / (u * u);
        assert_abs_diff_eq!(tail, asym, epsilon = 1e-8);
    }

    #[test]
    fn erfc_reference_values() {
        assert_abs_diff_eq!(erfc(0.0), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(1.0), 0.157299207050285, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(-1.0), 1.842700792949715, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(3.0), 2.20904969985854e-5, epsilon = 1e-7);
    }
}
