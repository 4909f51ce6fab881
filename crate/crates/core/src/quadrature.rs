//! Gauss rules for the reference prism.
//!
//! The reference prism is the unit triangle `{xi1 >= 0, xi2 >= 0, xi1 + xi2 <= 1}`
//! extruded along `xi3 in [-1, 1]`; its volume is 1. A prism rule of order `p` is
//! the tensor product of a symmetric triangle rule exact to degree `2p` and a
//! `(p + 1)`-point Gauss-Legendre rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{check_order, MAX_ORDER};

/// A point in reference prism coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefCoords {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

impl RefCoords {
    pub const fn new(xi1: f64, xi2: f64, xi3: f64) -> Self {
        Self { xi1, xi2, xi3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.xi1, self.xi2, self.xi3]
    }

    /// True if the point lies in the closed reference prism (with slack `tol`).
    pub fn is_inside(&self, tol: f64) -> bool {
        self.xi1 >= -tol
            && self.xi2 >= -tol
            && self.xi1 + self.xi2 <= 1.0 + tol
            && (-1.0 - tol..=1.0 + tol).contains(&self.xi3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub order_p: usize,
    pub points: Vec<RefCoords>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of scalar entries (3 coordinates + 1 weight per point).
    pub fn entry_count(&self) -> usize {
        4 * self.len()
    }
}

/// Gauss-Legendre points and weights on `[-1, 1]`, exact to degree `2n - 1`.
///
/// Roots are found by Newton iteration on the three-term Legendre recurrence.
pub fn gauss_legendre_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre_1d needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    (points, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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

/// Orbit description of a fully symmetric triangle rule.
///
/// Weights are normalized to sum to 1 over the orbits' expanded points; the
/// centroid orbit has one point, `(a, a, 1 - 2a)` orbits three and `(a, b, 1 - a - b)`
/// orbits six.
struct SymmetricRule {
    centroid: Option<f64>,
    s21: &'static [(f64, f64)],
    s111: &'static [(f64, f64, f64)],
}

// Orbit parameters refined by Newton/least-squares on the symmetric moment
// equations; the point counts are 3, 6, 12, 16, 25, 33, 42.
const TRIANGLE_RULES: [SymmetricRule; 7] = [
    SymmetricRule {
        centroid: None,
        s21: &[(0.16666666666666669, 0.3333333333333333)],
        s111: &[],
    },
    SymmetricRule {
        centroid: None,
        s21: &[
            (0.44594849091596483, 0.22338158967801136),
            (0.09157621350977077, 0.10995174365532195),
        ],
        s111: &[],
    },
    SymmetricRule {
        centroid: None,
        s21: &[
            (0.2492867451708823, 0.11678627572642597),
            (0.06308901449150874, 0.05084490637021614),
        ],
        s111: &[(0.05314504984479771, 0.31035245103380743, 0.08285107561834563)],
    },
    SymmetricRule {
        centroid: Some(0.14431560767771442),
        s21: &[
            (0.4592925882926728, 0.09509163426733366),
            (0.17056930775170093, 0.10321737053473054),
            (0.050547228317032795, 0.03245849762320502),
        ],
        s111: &[(0.008394777409879095, 0.26311282963481336, 0.027230314174412983)],
    },
    SymmetricRule {
        centroid: Some(0.09081799038289234),
        s21: &[
            (0.48557763338363896, 0.03672595775650303),
            (0.10948157548505157, 0.04532105943552754),
        ],
        s111: &[
            (0.1417072194148148, 0.30793983876406605, 0.0727579168454291),
            (0.02500353476259588, 0.24667256063980897, 0.028327242531011237),
            (0.009540815400358785, 0.06680325101212033, 0.009421666963728993),
        ],
    },
    SymmetricRule {
        centroid: None,
        s21: &[
            (0.4882173897538188, 0.02573106651045281),
            (0.4397243922220292, 0.04369254433451547),
            (0.27121038521389523, 0.06285822392283333),
            (0.1275761455720461, 0.034796113083113756),
            (0.02131735044036367, 0.006166261041969145),
        ],
        s111: &[
            (0.27571327006890045, 0.6089432349483471, 0.04037155781313353),
            (0.28132558078026904, 0.6958360868524244, 0.022356773330132307),
            (0.11625191580222817, 0.8580140336802755, 0.01731623107695857),
        ],
    },
    SymmetricRule {
        centroid: None,
        s21: &[
            (0.48896391025003777, 0.02188358151942043),
            (0.4176447197144334, 0.03278835340795369),
            (0.2734775283157272, 0.0517741047687399),
            (0.17720553214170273, 0.04216258860865253),
            (0.06179988333533929, 0.01443369974131928),
            (0.019390961336008806, 0.00492340364303838),
        ],
        s111: &[
            (0.17226668803264025, 0.7706085547130824, 0.024665753138595654),
            (0.33686145930692774, 0.5702222909390013, 0.03857151068578831),
            (0.2983728825474946, 0.6869801673212477, 0.01443630816172096),
            (0.11897449786795732, 0.8797571712439557, 0.0050102288359996335),
        ],
    },
];

/// Symmetric quadrature on the unit triangle exact for total degree `poly_degree`.
///
/// Supported degrees are the even values 2..=14. Weights sum to 1/2 (the triangle area).
pub fn triangle_rule(poly_degree: usize) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    if !(2..=2 * MAX_ORDER).contains(&poly_degree) || !poly_degree.is_multiple_of(2) {
        return Err(Error::UnsupportedDegree(poly_degree));
    }
    let rule = &TRIANGLE_RULES[poly_degree / 2 - 1];
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if let Some(w) = rule.centroid {
        points.push([1.0 / 3.0, 1.0 / 3.0]);
        weights.push(0.5 * w);
    }
    for &(a, w) in rule.s21 {
        let b = 1.0 - 2.0 * a;
        for bc in [[a, a], [a, b], [b, a]] {
            points.push(bc);
            weights.push(0.5 * w);
        }
    }
    for &(a, b, w) in rule.s111 {
        let c = 1.0 - a - b;
        for bc in [[a, b], [b, a], [a, c], [c, a], [b, c], [c, b]] {
            points.push(bc);
            weights.push(0.5 * w);
        }
    }
    Ok((points, weights))
}

/// Tensor-product prism rule of order `p` (1..=7).
pub fn prism_quadrature(p: usize) -> Result<QuadratureRule> {
    check_order(p)?;
    let (tri_points, tri_weights) = triangle_rule(2 * p)?;
    let (line_points, line_weights) = gauss_legendre_1d(p + 1);
    let mut points = Vec::with_capacity(tri_points.len() * line_points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (tp, tw) in tri_points.iter().zip(&tri_weights) {
        for (lp, lw) in line_points.iter().zip(&line_weights) {
            points.push(RefCoords::new(tp[0], tp[1], *lp));
            weights.push(tw * lw);
        }
    }
    Ok(QuadratureRule {
        order_p: p,
        points,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn triangle_monomial(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn one_and_two_point_gauss() {
        let (x, w) = gauss_legendre_1d(1);
        assert_eq!(x, vec![0.0]);
        assert_eq!(w, vec![2.0]);
        let (x, w) = gauss_legendre_1d(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eight_point_gauss_integrates_x14() {
        let (x, w) = gauss_legendre_1d(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!(((s - 2.0 / 15.0) / (2.0 / 15.0)).abs() < 1e-14);
    }

    #[test]
    fn gauss_exactness_up_to_2n_minus_1() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre_1d(n);
            for k in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_point_counts() {
        let counts: Vec<usize> = (1..=7)
            .map(|k| triangle_rule(2 * k).unwrap().0.len())
            .collect();
        assert_eq!(counts, vec![3, 6, 12, 16, 25, 33, 42]);
    }

    #[test]
    fn degree_two_rule_has_equal_weights() {
        let (_, w) = triangle_rule(2).unwrap();
        for wi in w {
            assert!((wi - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_rules_are_exact_for_monomials() {
        for k in 1..=7 {
            let d = 2 * k;
            let (pts, w) = triangle_rule(d).unwrap();
            assert!(w.iter().all(|&wi| wi > 0.0));
            assert!(pts.iter().all(|p| p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0));
            for a in 0..=d {
                for b in 0..=d - a {
                    let s: f64 = pts
                        .iter()
                        .zip(&w)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = triangle_monomial(a, b);
                    assert!(((s - exact) / exact).abs() < 1e-12, "deg {d}: a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn unsupported_triangle_degrees() {
        for d in [0, 1, 3, 16] {
            assert!(matches!(triangle_rule(d), Err(Error::UnsupportedDegree(_))));
        }
    }

    #[test]
    fn prism_rule_counts_and_volume() {
        let expected = [6, 18, 48, 80, 150, 231, 336];
        for p in 1..=7 {
            let rule = prism_quadrature(p).unwrap();
            assert_eq!(rule.len(), expected[p - 1]);
            let vol: f64 = rule.weights.iter().sum();
            assert!((vol - 1.0).abs() < 1e-14);
            assert!(rule.points.iter().all(|x| x.is_inside(0.0)));
        }
        assert!(matches!(prism_quadrature(0), Err(Error::OrderOutOfRange(0))));
        assert!(matches!(prism_quadrature(8), Err(Error::OrderOutOfRange(8))));
    }
}
