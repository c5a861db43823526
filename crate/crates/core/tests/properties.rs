use proptest::prelude::*;

use subdivlab::bisector;
use subdivlab::geometry::{AngleTriple, ShapeCoord, UniformTriple, Vec2};
use subdivlab::quadchain::{self, PairState};
use subdivlab::stats::StreamingMoments;
use subdivlab::subtriangle;
use subdivlab::{shape_from_vertices, RandomSource};

fn point() -> impl Strategy<Value = Vec2> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn simplex() -> impl Strategy<Value = AngleTriple> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        AngleTriple::from_array([lo, hi - lo, 1.0 - hi])
    })
}

fn shape() -> impl Strategy<Value = ShapeCoord> {
    (0.5..=1.0f64, 0.0..1.0f64).prop_map(|(x, t)| ShapeCoord::new(x, t * (1.0 - x * x).sqrt()).unwrap())
}

fn uniforms() -> impl Strategy<Value = UniformTriple> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, c)| UniformTriple::new(a, b, c).unwrap())
}

fn in_region(s: ShapeCoord) -> bool {
    (0.5 - 1e-12..=1.0 + 1e-12).contains(&s.x) && s.y >= 0.0 && s.x * s.x + s.y * s.y <= 1.0 + 1e-9
}

proptest! {
    #[test]
    fn shape_is_similarity_invariant(
        a in point(), b in point(), c in point(),
        angle in 0.0..std::f64::consts::TAU, scale in 0.01..100.0f64, shift in point(), flip: bool,
    ) {
        prop_assume!((b - a).cross(c - a).abs() > 1e-3);
        let s = shape_from_vertices(a, b, c).unwrap();
        prop_assert!(in_region(s));
        let (sin, cos) = angle.sin_cos();
        let map = |p: Vec2| {
            let p = if flip { Vec2::new(p.x, -p.y) } else { p };
            Vec2::new(cos * p.x - sin * p.y, sin * p.x + cos * p.y) * scale + shift
        };
        let t = shape_from_vertices(map(c), map(a), map(b)).unwrap();
        prop_assert!((s.x - t.x).abs() < 1e-9 && (s.y - t.y).abs() < 1e-9, "{s:?} vs {t:?}");
    }

    #[test]
    fn bisector_children_stay_in_simplex(t in simplex()) {
        for k in bisector::bisector_children(t) {
            prop_assert!(k.a >= 0.0 && k.b >= 0.0 && k.c >= 0.0);
            prop_assert!((k.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contraction_bound_holds(u in simplex(), v in simplex()) {
        prop_assume!(subdivlab::simplex_distance(u, v) > 1e-9);
        let c = bisector::pairwise_contraction(u, v).unwrap();
        prop_assert!(c <= (3f64.sqrt() / 2.0).ln() + 1e-12);
    }

    #[test]
    fn pair_gap_halves_exactly(u in point(), v in point(), seed: u64) {
        prop_assume!((u - v).norm() > 0.0);
        let s0 = PairState::new(u, v);
        let mut s = s0;
        let mut src = RandomSource::new(seed, 0);
        for n in 1..=40 {
            s = quadchain::pair_step(s, src.next_bit());
            prop_assert_eq!(s.gap(), s0.gap() * 0.5f64.powi(n));
            prop_assert!(quadchain::distance_to_segment(s.v, u, v) <= 1e-12 * (1.0 + u.norm() + v.norm()));
        }
    }

    #[test]
    fn subtriangle_step_stays_in_region(s in shape(), xi in uniforms()) {
        match subtriangle::step(s, xi) {
            Ok((next, d)) => {
                prop_assert!(in_region(next), "{next:?}");
                prop_assert!(d.r >= 0.0 && d.r.is_finite());
                if s.y > 1e-6 {
                    let w = subtriangle::step_via_vertices(s, xi).unwrap();
                    prop_assert!((w.x - next.x).abs() < 1e-9 && (w.y - next.y).abs() < 1e-9);
                }
            }
            Err(e) => prop_assert_eq!(e, subdivlab::Error::DegenerateChild),
        }
    }

    #[test]
    fn conditional_mean_is_positive(x in 0.5..0.999f64, a in 0.001..0.999f64) {
        let v = subtriangle::cond_r_given_a(x, a).unwrap();
        prop_assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn moments_merge_in_any_split(xs in prop::collection::vec(-1e6..1e6f64, 2..200), cut in 0usize..200) {
        let cut = cut % xs.len();
        let whole: StreamingMoments = xs.iter().copied().collect();
        let left: StreamingMoments = xs[..cut].iter().copied().collect();
        let right: StreamingMoments = xs[cut..].iter().copied().collect();
        let merged = left.merge(&right);
        prop_assert_eq!(merged.count, whole.count);
        prop_assert!((merged.mean - whole.mean).abs() <= 1e-9 * (1.0 + whole.mean.abs()));
        prop_assert!((merged.variance() - whole.variance()).abs() <= 1e-9 * (1.0 + whole.variance()));
    }
}
