//! Symmetric Gauss rules on triangles and Gauss-Legendre rules on `[0, 1]`.

use crate::error::{Error, Result};

/// A quadrature rule on a triangle in barycentric coordinates. Weights sum to
/// one; multiply by the element area when integrating.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    fn push_centroid(&mut self, w: f64) {
        let third = 1.0 / 3.0;
        self.points.push([third, third, third]);
        self.weights.push(w);
    }

    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn push_orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Symmetric rule exact for polynomials of total degree `degree`.
///
/// Supported degrees: 1 (centroid), 2 (3 points), 4 (6 points),
/// 6 (12 points, Dunavant).
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule> {
    let mut rule = QuadratureRule {
        degree,
        points: Vec::new(),
        weights: Vec::new(),
    };
    match degree {
        1 => rule.push_centroid(1.0),
        2 => rule.push_orbit3(1.0 / 6.0, 1.0 / 3.0),
        4 => {
            rule.push_orbit3(0.445_948_490_915_964_886_3, 0.223_381_589_678_011_465_7);
            rule.push_orbit3(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_6);
        }
        6 => {
            rule.push_orbit3(0.249_286_745_170_910_421_3, 0.116_786_275_726_379_366_0);
            rule.push_orbit3(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_92);
            rule.push_orbit6(
                0.053_145_049_844_816_947_35,
                0.310_352_451_033_784_405_4,
                0.082_851_075_618_373_575_19,
            );
        }
        other => return Err(Error::UnsupportedQuadrature(other)),
    }
    Ok(rule)
}

/// Gauss-Legendre nodes and weights on `[0, 1]` with four points (exact to
/// degree 7).
pub fn gauss_legendre_unit_4() -> [(f64, f64); 4] {
    let inner = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let outer = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let w_inner = (18.0 + 30f64.sqrt()) / 36.0;
    let w_outer = (18.0 - 30f64.sqrt()) / 36.0;
    [
        (0.5 * (1.0 - outer), 0.5 * w_outer),
        (0.5 * (1.0 - inner), 0.5 * w_inner),
        (0.5 * (1.0 + inner), 0.5 * w_inner),
        (0.5 * (1.0 + outer), 0.5 * w_outer),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^i y^j over the reference triangle.
    fn monomial(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    fn integrate(rule: &QuadratureRule, i: i32, j: i32) -> f64 {
        0.5 * rule
            .iter()
            .map(|(p, w)| w * p[1].powi(i) * p[2].powi(j))
            .sum::<f64>()
    }

    #[test]
    fn all_rules_exact_to_their_degree() {
        for degree in [1, 2, 4, 6] {
            let rule = quadrature_rule(degree).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for i in 0..=degree as u32 {
                for j in 0..=(degree as u32 - i) {
                    let err = (integrate(&rule, i as i32, j as i32) - monomial(i, j)).abs();
                    assert!(err < 1e-13, "degree {degree}: x^{i} y^{j} off by {err:e}");
                }
            }
        }
    }

    #[test]
    fn named_examples() {
        assert!((integrate(&quadrature_rule(1).unwrap(), 0, 0) - 0.5).abs() < 1e-16);
        assert!((integrate(&quadrature_rule(2).unwrap(), 2, 0) - 1.0 / 12.0).abs() < 1e-16);
        let x4y2 = integrate(&quadrature_rule(6).unwrap(), 4, 2);
        assert!((x4y2 - monomial(4, 2)).abs() < 1e-16);
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(
            quadrature_rule(3),
            Err(Error::UnsupportedQuadrature(3))
        ));
    }

    #[test]
    fn gauss_legendre_exact_to_degree_seven() {
        let rule = gauss_legendre_unit_4();
        for p in 0..=7 {
            let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(p)).sum();
            assert!((approx - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "t^{p}");
        }
    }
}
