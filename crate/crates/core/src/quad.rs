//! Small quadrature toolbox: Gauss-Legendre nodes, composite panels over a
//! finite interval, and trapezoid sums on uniform grids.

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; accurate to machine
/// precision for the orders used here (<= 64).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule over [a, b] split into `panels` panels of
/// `order` points each. Returns flattened (abscissae, weights).
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in gx.iter().zip(gw.iter()) {
            xs.push(mid + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Trapezoid weights for a uniform grid of `n` points with spacing `dx`.
pub fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![dx; n];
    w[0] = 0.5 * dx;
    w[n - 1] = 0.5 * dx;
    w
}

/// Uniform angle grid over [0, 2*pi) with equal weights 1/n, i.e. the
/// periodic trapezoid rule for the average (1/2pi) * integral d(theta).
pub fn periodic_angle_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 polynomial: x^14 over [-1,1] -> 2/15
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_gaussian_integral() {
        let (x, w) = composite_gauss_legendre(-10.0, 10.0, 20, 16);
        let s: f64 = x
            .iter()
            .zip(&w)
            .map(|(x, w)| w * (-x * x / 2.0).exp())
            .sum();
        assert!((s - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_mass() {
        let n = 2001;
        let dx = 20.0 / (n - 1) as f64;
        let w = trapezoid_weights(n, dx);
        let s: f64 = (0..n)
            .map(|i| {
                let x = -10.0 + i as f64 * dx;
                w[i] * (-x * x / 2.0).exp()
            })
            .sum();
        assert!((s - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }
}
