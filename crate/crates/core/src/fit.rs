//! Least-squares line and power-law fits.

/// Result of a least-squares line fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Standard error of the slope (`NaN` with fewer than three points).
    pub slope_stderr: f64,
}

impl LinearFit {
    /// Half-width of the normal-approximation 95% interval on the slope.
    pub fn slope_ci95(&self) -> f64 {
        1.96 * self.slope_stderr
    }
}

/// Ordinary least squares. Returns NaN fields for fewer than two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return LinearFit { slope: f64::NAN, intercept: f64::NAN, residual: f64::NAN, slope_stderr: f64::NAN };
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for k in 0..n {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = (0..n).map(|k| (ys[k] - slope * xs[k] - intercept).powi(2)).sum();
    let slope_stderr = if n > 2 { (ss / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, residual: (ss / nf).sqrt(), slope_stderr }
}

/// Fits `y ≈ c·x^p` on log–log axes, skipping non-positive samples.
/// The intercept field holds `c`; the residual is measured in log space.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let f = linear_fit(&lx, &ly);
    LinearFit { intercept: f.intercept.exp(), ..f }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope - 2.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14 && f.residual < 1e-14);
    }

    #[test]
    fn power_law_recovers_exponent() {
        let xs: Vec<f64> = (1..10).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.75)).collect();
        let f = power_law_fit(&xs, &ys);
        assert!((f.slope - 0.75).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_input() {
        assert!(linear_fit(&[1.0], &[2.0]).slope.is_nan());
    }
}
