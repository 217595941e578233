//! Quadrature rules: Gauss-Legendre nodes, composite panels and an adaptive
//! Gauss-Kronrod scheme for real and complex integrands.

use num_complex::Complex64;

/// A Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi-style initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_complex(
        &self,
        a: f64,
        b: f64,
        mut f: impl FnMut(f64) -> Complex64,
    ) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre integration over `panels` equal panels.
pub fn composite_gl(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    panels: usize,
    mut f: impl FnMut(f64) -> Complex64,
) -> Complex64 {
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        acc += rule.integrate_complex(a + k as f64 * h, a + (k + 1) as f64 * h, &mut f);
    }
    acc
}

// Gauss-Kronrod 7-15 pair (positive abscissae; symmetric rule).
const GK_XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const GK_WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GK_WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> Complex64) -> (Complex64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    let fc = f(mid);
    kronrod += fc * GK_WGK[7];
    gauss += fc * GK_WG[3];
    for j in 0..7 {
        let x = half * GK_XGK[j];
        let fsum = f(mid - x) + f(mid + x);
        kronrod += fsum * GK_WGK[j];
        if j % 2 == 1 {
            gauss += fsum * GK_WG[j / 2];
        }
    }
    kronrod *= half;
    gauss *= half;
    ((kronrod), (kronrod - gauss).norm())
}

/// Adaptive Gauss-Kronrod quadrature with bisection, absolute tolerance.
///
/// Returns the integral and an error estimate; errors out only if the
/// subdivision budget is exhausted above tolerance.
pub fn adaptive_gk(
    a: f64,
    b: f64,
    abs_tol: f64,
    mut f: impl FnMut(f64) -> Complex64,
) -> crate::Result<(Complex64, f64)> {
    struct Seg {
        a: f64,
        b: f64,
        val: Complex64,
        err: f64,
    }
    let (val, err) = gk15(a, b, &mut f);
    let mut segs = vec![Seg { a, b, val, err }];
    for _ in 0..2000 {
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        if total_err <= abs_tol {
            break;
        }
        // Split the worst segment.
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .unwrap();
        let s = segs.swap_remove(idx);
        let mid = 0.5 * (s.a + s.b);
        let (v1, e1) = gk15(s.a, mid, &mut f);
        let (v2, e2) = gk15(mid, s.b, &mut f);
        segs.push(Seg { a: s.a, b: mid, val: v1, err: e1 });
        segs.push(Seg { a: mid, b: s.b, val: v2, err: e2 });
    }
    let total: Complex64 = segs.iter().map(|s| s.val).sum();
    let total_err: f64 = segs.iter().map(|s| s.err).sum();
    if total_err > abs_tol {
        return Err(crate::Error::QuadratureNonConvergence {
            estimate: total_err,
            tolerance: abs_tol,
        });
    }
    Ok((total, total_err))
}

/// Trapezoid weights for a uniform grid of `n` points with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dx * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // degree 15 is exact for an 8-point rule
        let val = rule.integrate(0.0, 1.0, |x| x.powi(15));
        assert_abs_diff_eq!(val, 1.0 / 16.0, epsilon = 1e-14);
    }

    #[test]
    fn gl_weights_sum_to_interval() {
        for n in [1, 2, 5, 32, 200] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_gk_oscillatory() {
        let (val, _) = adaptive_gk(0.0, 10.0, 1e-12, |x| {
            Complex64::new((10.0 * x).sin() * (-x).exp(), 0.0)
        })
        .unwrap();
        // exact: 10/101 (1 - e^{-10}(cos 100 + 10 sin 100)/10 ...) computed directly
        let exact = (10.0 - (-10.0f64).exp() * ((100.0f64).sin() + 10.0 * (100.0f64).cos())) / 101.0;
        assert_abs_diff_eq!(val.re, exact, epsilon = 1e-10);
    }
}
