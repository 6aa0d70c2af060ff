//! Quadrature rules on the reference segment `[0, 1]` and the reference
//! triangle `{x, y >= 0, x + y <= 1}`.
//!
//! Segment rules are Gauss-Legendre with nodes computed by Newton
//! iteration on the Legendre polynomials. Triangle rules are collapsed
//! tensor-product Gauss rules (Duffy map), exact for all polynomials up
//! to the requested total degree. Weights sum to the reference measure:
//! 1 on the segment, 1/2 on the triangle.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates: `[t, 0]` on the segment, `[x, y]` on the
    /// triangle (barycentric with the first coordinate implied).
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Every polynomial up to this total degree is integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Largest supported exactness degree on segments.
pub const MAX_DEGREE_1D: usize = 11;
/// Largest supported exactness degree on triangles.
pub const MAX_DEGREE_2D: usize = 8;

/// Build a rule on the reference element of dimension `dim` (1 or 2)
/// exact for polynomials of total degree `exact_degree`.
pub fn quad_rule(dim: usize, exact_degree: usize) -> Result<QuadratureRule> {
    match dim {
        1 => {
            if exact_degree > MAX_DEGREE_1D {
                return Err(Error::invalid(format!(
                    "segment rules support degree <= {MAX_DEGREE_1D}, got {exact_degree}"
                )));
            }
            let n = exact_degree / 2 + 1; // n-point Gauss is exact to 2n-1
            let (points, weights) = gauss_legendre_unit(n);
            Ok(QuadratureRule {
                points: points.iter().map(|&t| [t, 0.0]).collect(),
                weights,
                degree: exact_degree,
            })
        }
        2 => {
            if exact_degree > MAX_DEGREE_2D {
                return Err(Error::invalid(format!(
                    "triangle rules support degree <= {MAX_DEGREE_2D}, got {exact_degree}"
                )));
            }
            // Duffy map x = s(1-t), y = t: the Jacobian factor (1-t) raises
            // the polynomial degree in t by one.
            let n = exact_degree / 2 + 1;
            let (gs, ws) = gauss_legendre_unit(n);
            let (gt, wt) = gauss_legendre_unit(exact_degree / 2 + 2);
            let mut points = Vec::with_capacity(gs.len() * gt.len());
            let mut weights = Vec::with_capacity(gs.len() * gt.len());
            for (i, &s) in gs.iter().enumerate() {
                for (j, &t) in gt.iter().enumerate() {
                    points.push([s * (1.0 - t), t]);
                    weights.push(ws[i] * wt[j] * (1.0 - t));
                }
            }
            Ok(QuadratureRule {
                points,
                weights,
                degree: exact_degree,
            })
        }
        d => Err(Error::invalid(format!("unsupported dimension {d}"))),
    }
}

/// The fixed high-order rule used for non-polynomial integrands
/// (the semilinear form and all error norms).
pub fn high_order_rule(dim: usize) -> QuadratureRule {
    match dim {
        1 => quad_rule(1, 10).expect("supported degree"),
        _ => quad_rule(2, 8).expect("supported degree"),
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Nodes on [-1, 1] by Newton iteration; symmetric pairs share work.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (points, weights)
}

/// Legendre polynomial P_n and its derivative at x via the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_1d(rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * f(p[0]))
            .sum()
    }

    fn integrate_2d(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn tri_monomial(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k as u64).product::<u64>() as f64;
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn two_point_gauss_matches_known_nodes() {
        let rule = quad_rule(1, 3).unwrap();
        assert_eq!(rule.len(), 2);
        let expect = [(1.0 - 1.0 / 3f64.sqrt()) / 2.0, (1.0 + 1.0 / 3f64.sqrt()) / 2.0];
        for (p, e) in rule.points.iter().zip(expect) {
            assert!((p[0] - e).abs() < 1e-15);
        }
        // Exact on t^0 .. t^3 against analytic integrals 1/(k+1).
        for k in 0..=3u32 {
            let num = integrate_1d(&rule, |t| t.powi(k as i32));
            assert!((num - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn segment_rules_exact_to_stated_degree() {
        for deg in 0..=MAX_DEGREE_1D {
            let rule = quad_rule(1, deg).unwrap();
            for k in 0..=deg as u32 {
                let num = integrate_1d(&rule, |t| t.powi(k as i32));
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (num - exact).abs() <= 1e-13 * exact.abs(),
                    "deg {deg} monomial {k}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn triangle_weights_sum_to_half() {
        for deg in 0..=MAX_DEGREE_2D {
            let rule = quad_rule(2, deg).unwrap();
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 0.5).abs() < 1e-14);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn triangle_xy_integral() {
        let rule = quad_rule(2, 2).unwrap();
        let num = integrate_2d(&rule, |x, y| x * y);
        assert!((num - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rules_exact_on_all_monomials() {
        for deg in 0..=MAX_DEGREE_2D {
            let rule = quad_rule(2, deg).unwrap();
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let num = integrate_2d(&rule, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    let exact = tri_monomial(a, b);
                    assert!(
                        (num - exact).abs() <= 1e-13 * exact,
                        "deg {deg} monomial x^{a} y^{b}: {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn unsupported_degrees_rejected() {
        assert!(quad_rule(1, 12).is_err());
        assert!(quad_rule(2, 9).is_err());
        assert!(quad_rule(3, 2).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn segment_rule_exact_on_random_cubics(c in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let rule = quad_rule(1, 3).unwrap();
            let num = integrate_1d(&rule, |t| c.iter().enumerate().map(|(k, a)| a * t.powi(k as i32)).sum());
            let exact: f64 = c.iter().enumerate().map(|(k, a)| a / (k as f64 + 1.0)).sum();
            proptest::prop_assert!((num - exact).abs() <= 1e-13 * (1.0 + exact.abs()));
        }

        #[test]
        fn triangle_rule_exact_on_random_quartics(c in proptest::collection::vec(-10.0f64..10.0, 15)) {
            // Total-degree-4 polynomial with 15 coefficients.
            let rule = quad_rule(2, 4).unwrap();
            let mut terms = Vec::new();
            for a in 0..=4u32 {
                for b in 0..=(4 - a) {
                    terms.push((a, b));
                }
            }
            let num = integrate_2d(&rule, |x, y| {
                terms.iter().zip(&c).map(|(&(a, b), co)| co * x.powi(a as i32) * y.powi(b as i32)).sum()
            });
            let exact: f64 = terms.iter().zip(&c).map(|(&(a, b), co)| co * tri_monomial(a, b)).sum();
            proptest::prop_assert!((num - exact).abs() <= 1e-13 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn randomized_polynomial_exactness() {
        // A fixed "random" polynomial of full degree on each element type.
        let coef = [0.37, -1.2, 2.9, -0.61, 1.7, -3.3, 0.12, 0.98, -2.01];
        let rule = quad_rule(1, 8).unwrap();
        let num = integrate_1d(&rule, |t| {
            coef.iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum()
        });
        let exact: f64 = coef
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k as f64 + 1.0))
            .sum();
        assert!((num - exact).abs() <= 1e-13 * exact.abs());

        let rule = quad_rule(2, 4).unwrap();
        let poly = |x: f64, y: f64| 0.3 - 1.1 * x + 0.7 * y + 2.2 * x * y - 0.9 * x * x * y * y;
        let num = integrate_2d(&rule, poly);
        let exact = 0.3 * tri_monomial(0, 0) - 1.1 * tri_monomial(1, 0) + 0.7 * tri_monomial(0, 1)
            + 2.2 * tri_monomial(1, 1)
            - 0.9 * tri_monomial(2, 2);
        assert!((num - exact).abs() <= 1e-13 * exact.abs());
    }
}
