//! Compactly supported polynomial smoothing kernels on `[-1, 1]`.

/// A symmetric kernel density supported on `[-1, 1]`.
///
/// All variants are polynomials on their support, so moments and the
/// roughness of the derivative are evaluated in closed form from the
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `3/4 (1 - x^2)`
    #[default]
    Epanechnikov,
    /// `15/16 (1 - x^2)^2`
    Quartic,
    /// `35/32 (1 - x^2)^3`
    Triweight,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Quartic => "quartic",
            Kernel::Triweight => "triweight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Some(Kernel::Epanechnikov),
            "quartic" | "biweight" => Some(Kernel::Quartic),
            "triweight" => Some(Kernel::Triweight),
            _ => None,
        }
    }

    /// Polynomial coefficients (ascending powers) of the kernel on its support.
    fn coefficients(self) -> &'static [f64] {
        match self {
            Kernel::Epanechnikov => &[0.75, 0.0, -0.75],
            Kernel::Quartic => &[15.0 / 16.0, 0.0, -30.0 / 16.0, 0.0, 15.0 / 16.0],
            Kernel::Triweight => &[
                35.0 / 32.0,
                0.0,
                -105.0 / 32.0,
                0.0,
                105.0 / 32.0,
                0.0,
                -35.0 / 32.0,
            ],
        }
    }

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let u = 1.0 - x * x;
        match self {
            Kernel::Epanechnikov => 0.75 * u,
            Kernel::Quartic => 0.9375 * u * u,
            Kernel::Triweight => 1.09375 * u * u * u,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let u = 1.0 - x * x;
        match self {
            Kernel::Epanechnikov => -1.5 * x,
            Kernel::Quartic => -3.75 * x * u,
            Kernel::Triweight => -6.5625 * x * u * u,
        }
    }

    /// `mu_l = int x^l K(x) dx`.
    pub fn moment(self, l: u32) -> f64 {
        poly_moment(self.coefficients(), l)
    }

    /// `phi_l = int x^l K(x)^2 dx`.
    pub fn squared_moment(self, l: u32) -> f64 {
        let c = self.coefficients();
        poly_moment(&poly_mul(c, c), l)
    }

    /// `int |K'(u)|^2 du`.
    pub fn derivative_roughness(self) -> f64 {
        let d = poly_derivative(self.coefficients());
        poly_moment(&poly_mul(&d, &d), 0)
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_derivative(a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c)
        .collect()
}

/// `int_{-1}^{1} x^l p(x) dx` for a polynomial `p`.
fn poly_moment(p: &[f64], l: u32) -> f64 {
    p.iter()
        .enumerate()
        .map(|(j, c)| {
            let e = j as u32 + l;
            if e % 2 == 1 {
                0.0
            } else {
                c * 2.0 / (e as f64 + 1.0)
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Kernel; 3] = [Kernel::Epanechnikov, Kernel::Quartic, Kernel::Triweight];

    fn simpson(f: impl Fn(f64) -> f64) -> f64 {
        let m = 4000;
        let h = 2.0 / m as f64;
        let mut s = f(-1.0) + f(1.0);
        for i in 1..m {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn epanechnikov_constants() {
        let k = Kernel::Epanechnikov;
        assert!((k.squared_moment(0) - 0.6).abs() < 1e-15);
        assert!((k.moment(2) - 0.2).abs() < 1e-15);
        assert!((k.derivative_roughness() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn moments_match_quadrature() {
        for k in ALL {
            assert!((simpson(|x| k.value(x)) - 1.0).abs() < 1e-10, "{k:?}");
            assert!((simpson(|x| x * k.value(x))).abs() < 1e-12);
            for l in 0..4 {
                let q = simpson(|x| x.powi(l as i32) * k.value(x));
                assert!((q - k.moment(l)).abs() < 1e-10, "{k:?} mu_{l}");
                let q = simpson(|x| x.powi(l as i32) * k.value(x).powi(2));
                assert!((q - k.squared_moment(l)).abs() < 1e-10, "{k:?} phi_{l}");
            }
            let q = simpson(|x| k.derivative(x).powi(2));
            assert!((q - k.derivative_roughness()).abs() < 1e-10, "{k:?}");
        }
    }

    #[test]
    fn symmetric_nonnegative_compact() {
        for k in ALL {
            for i in 0..=200 {
                let x = -1.2 + i as f64 * 0.012;
                assert_eq!(k.value(x), k.value(-x));
                assert!(k.value(x) >= 0.0);
                if x.abs() > 1.0 {
                    assert_eq!(k.value(x), 0.0);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for k in ALL {
            for &x in &[-0.7, -0.2, 0.0, 0.35, 0.9] {
                let h = 1e-6;
                let fd = (k.value(x + h) - k.value(x - h)) / (2.0 * h);
                assert!((fd - k.derivative(x)).abs() < 1e-8);
            }
        }
    }
}
