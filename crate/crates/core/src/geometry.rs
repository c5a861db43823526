//! Plane vectors, angle triples on the simplex, shape coordinates and the
//! other small value types shared by all three chains.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SQRT3_OVER_2: f64 = 0.866_025_403_784_438_6;

/// Tolerance on `a + b + c = 1` for an [`AngleTriple`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[repr(C)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn midpoint(self, other: Vec2) -> Vec2 {
        Vec2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Triangle angles as fractions of the straight angle, so `a + b + c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct AngleTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AngleTriple {
    pub const EQUILATERAL: AngleTriple = AngleTriple {
        a: 1.0 / 3.0,
        b: 1.0 / 3.0,
        c: 1.0 / 3.0,
    };

    /// Checked constructor: components must be nonnegative and sum to one.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let t = Self { a, b, c };
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || a < 0.0 || b < 0.0 || c < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "angle triple components must be finite and nonnegative: ({a}, {b}, {c})"
            )));
        }
        if (a + b + c - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "angle triple must sum to 1, got {}",
                a + b + c
            )));
        }
        Ok(t)
    }

    /// Builds a triple from three angles in any common unit (degrees, radians, ...).
    pub fn from_angles(a: f64, b: f64, c: f64) -> Result<Self> {
        let s = a + b + c;
        if !(s > 0.0) || a < 0.0 || b < 0.0 || c < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize angles ({a}, {b}, {c})"
            )));
        }
        Ok(Self {
            a: a / s,
            b: b / s,
            c: c / s,
        })
    }

    /// Clamps tiny negative rounding residue and rescales to sum one.
    pub fn renormalized(self) -> Self {
        let a = self.a.max(0.0);
        let b = self.b.max(0.0);
        let c = self.c.max(0.0);
        let s = a + b + c;
        Self {
            a: a / s,
            b: b / s,
            c: c / s,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
        }
    }

    pub fn sum(self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn is_valid(self) -> bool {
        self.a >= 0.0
            && self.b >= 0.0
            && self.c >= 0.0
            && (self.sum() - 1.0).abs() <= SIMPLEX_SUM_TOL
    }

    /// Components sorted ascending.
    pub fn sorted(self) -> [f64; 3] {
        let mut v = self.to_array();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn to_radians(self) -> [f64; 3] {
        self.to_array().map(|t| t * std::f64::consts::PI)
    }
}

/// Euclidean distance between two triples viewed as points of R^3.
pub fn simplex_distance(u: AngleTriple, v: AngleTriple) -> f64 {
    let (da, db, dc) = (u.a - v.a, u.b - v.b, u.c - v.c);
    (da * da + db * db + dc * dc).sqrt()
}

/// Shape of a triangle with its longest side on `[0, 1]` and the apex at
/// `(x, y)`, `x` in `[1/2, 1]`, `0 <= y <= sqrt(3)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct ShapeCoord {
    pub x: f64,
    pub y: f64,
}

impl ShapeCoord {
    pub const EQUILATERAL: ShapeCoord = ShapeCoord {
        x: 0.5,
        y: SQRT3_OVER_2,
    };

    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { what: "x", value: x });
        }
        if !(0.0..=SQRT3_OVER_2 + 1e-12).contains(&y) {
            return Err(Error::OutOfDomain { what: "y", value: y });
        }
        Ok(Self { x, y })
    }

    /// Unchecked constructor for values produced by the chain itself.
    pub(crate) fn from_raw(x: f64, y: f64) -> Self {
        Self {
            x: x.clamp(0.5, 1.0),
            y: y.clamp(0.0, SQRT3_OVER_2),
        }
    }

    pub fn is_flat(self) -> bool {
        self.y == 0.0
    }
}

/// Normalized shape of the triangle `abc`.
///
/// The longest side is scaled to unit length and laid on `[0, 1]`, the apex
/// goes to the upper half plane, and a reflection puts it at `x >= 1/2`. The
/// result depends only on the sorted side lengths, so it is the same whichever
/// of several tied longest sides is used as the base.
pub fn shape_from_vertices(a: Vec2, b: Vec2, c: Vec2) -> Result<ShapeCoord> {
    let sides = [(b - c).norm_sq(), (c - a).norm_sq(), (a - b).norm_sq()];
    let mut sorted = sides;
    sorted.sort_by(f64::total_cmp);
    let [short, mid, long] = sorted;
    if long == 0.0 {
        return Err(Error::NullTriangle);
    }
    let x = (long + mid - short) / (2.0 * long);
    let y = (b - a).cross(c - a).abs() / long;
    Ok(ShapeCoord::from_raw(x.max(1.0 - x), y))
}

/// Convex, non-degenerate quadrilateral with vertices in boundary order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct Quadrilateral {
    pub a: Vec2,
    pub b: Vec2,
    pub c: Vec2,
    pub d: Vec2,
}

impl Quadrilateral {
    pub fn new(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Result<Self> {
        let q = Self { a, b, c, d };
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vertex".into()));
        }
        if q.signed_area().abs() <= f64::EPSILON * q.perimeter().powi(2) {
            return Err(Error::DegenerateQuadrilateral);
        }
        let turns = q.turns();
        let positive = turns.iter().all(|&t| t > 0.0);
        let negative = turns.iter().all(|&t| t < 0.0);
        if !(positive || negative) {
            return Err(Error::NonConvex);
        }
        Ok(q)
    }

    pub fn unit_square() -> Self {
        Self {
            a: Vec2::new(0.0, 0.0),
            b: Vec2::new(1.0, 0.0),
            c: Vec2::new(1.0, 1.0),
            d: Vec2::new(0.0, 1.0),
        }
    }

    pub fn vertices(&self) -> [Vec2; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Cross products of consecutive edges.
    fn turns(&self) -> [f64; 4] {
        let v = self.vertices();
        std::array::from_fn(|i| {
            let e0 = v[(i + 1) % 4] - v[i];
            let e1 = v[(i + 2) % 4] - v[(i + 1) % 4];
            e0.cross(e1)
        })
    }

    pub fn signed_area(&self) -> f64 {
        let v = self.vertices();
        0.5 * (0..4).map(|i| v[i].cross(v[(i + 1) % 4])).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        let v = self.vertices();
        (0..4).map(|i| (v[(i + 1) % 4] - v[i]).norm()).sum()
    }

    /// Vertex average.
    pub fn centroid(&self) -> Vec2 {
        (self.a + self.b + self.c + self.d) * 0.25
    }

    /// `(B - A, C - D)`: the pair of "horizontal" side vectors.
    pub fn horizontal_pair(&self) -> (Vec2, Vec2) {
        (self.b - self.a, self.c - self.d)
    }

    /// `(D - A, C - B)`: the pair of "vertical" side vectors.
    pub fn vertical_pair(&self) -> (Vec2, Vec2) {
        (self.d - self.a, self.c - self.b)
    }
}

/// One draw of the three side ratios driving a subtriangle step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct UniformTriple {
    pub xi_a: f64,
    pub xi_b: f64,
    pub xi_c: f64,
}

impl UniformTriple {
    pub fn new(xi_a: f64, xi_b: f64, xi_c: f64) -> Result<Self> {
        for (what, v) in [("xi_a", xi_a), ("xi_b", xi_b), ("xi_c", xi_c)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfDomain { what, value: v });
            }
        }
        Ok(Self { xi_a, xi_b, xi_c })
    }

    pub fn draw(src: &mut crate::rng::RandomSource) -> Self {
        Self {
            xi_a: src.next_uniform(),
            xi_b: src.next_uniform(),
            xi_c: src.next_uniform(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shape_scaled_triangle() {
        let s = shape_from_vertices(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.5, 1.0))
            .unwrap();
        assert_abs_diff_eq!(s.x, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.y, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn shape_equilateral_fixed() {
        let s = shape_from_vertices(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, SQRT3_OVER_2),
        )
        .unwrap();
        assert_abs_diff_eq!(s.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.y, SQRT3_OVER_2, epsilon = 1e-15);
    }

    #[test]
    fn shape_collinear() {
        let s = shape_from_vertices(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.75, 0.0))
            .unwrap();
        assert_eq!((s.x, s.y), (0.75, 0.0));
    }

    #[test]
    fn shape_reflects_into_right_half() {
        let s = shape_from_vertices(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.25, -0.5))
            .unwrap();
        assert_abs_diff_eq!(s.x, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.y, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn shape_two_coincident_vertices() {
        let p = Vec2::new(1.0, 1.0);
        let s = shape_from_vertices(p, p, Vec2::new(3.0, 1.0)).unwrap();
        assert_eq!((s.x, s.y), (1.0, 0.0));
    }

    #[test]
    fn null_triangle() {
        let p = Vec2::new(0.3, 0.3);
        assert_eq!(shape_from_vertices(p, p, p), Err(Error::NullTriangle));
    }

    #[test]
    fn distances() {
        let e = AngleTriple::EQUILATERAL;
        assert_eq!(simplex_distance(e, e), 0.0);
        let d = simplex_distance(
            AngleTriple::new(1.0, 0.0, 0.0).unwrap(),
            AngleTriple::new(0.0, 1.0, 0.0).unwrap(),
        );
        assert_abs_diff_eq!(d, 2f64.sqrt(), epsilon = 1e-15);
        let d = simplex_distance(e, AngleTriple::new(0.5, 0.25, 0.25).unwrap());
        assert_abs_diff_eq!(d, (1.0f64 / 24.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn angle_triple_rejects_off_simplex() {
        assert!(AngleTriple::new(0.5, 0.5, 0.1).is_err());
        assert!(AngleTriple::new(-0.1, 0.6, 0.5).is_err());
        let t = AngleTriple::from_angles(60.0, 60.0, 60.0).unwrap();
        assert!(t.is_valid());
    }

    #[test]
    fn quadrilateral_checks() {
        assert!(Quadrilateral::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(5.0, 3.0),
            Vec2::new(1.0, 4.0)
        )
        .is_ok());
        // dart
        assert_eq!(
            Quadrilateral::new(
                Vec2::new(0.0, 0.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(0.5, 0.5),
                Vec2::new(0.0, 2.0)
            ),
            Err(Error::NonConvex)
        );
        assert_eq!(
            Quadrilateral::new(
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(3.0, 0.0)
            ),
            Err(Error::DegenerateQuadrilateral)
        );
    }
}
