use nalgebra::SVector;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

/// Euclidean projection of `(s, v)` onto `{(t, x) : ||x|| <= t}`.
pub fn project_soc<const N: usize>(s: f64, v: &SVector<f64, N>) -> (f64, SVector<f64, N>) {
    let mut out = *v;
    let t = project_soc_in_place(s, out.as_mut_slice());
    (t, out)
}

/// In-place variant of [`project_soc`]; returns the projected scalar.
pub fn project_soc_in_place(s: f64, v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= -s {
        v.iter_mut().for_each(|x| *x = 0.0);
        0.0
    } else if norm <= s {
        s
    } else {
        let scale = 0.5 * (s + norm);
        let factor = scale / norm;
        v.iter_mut().for_each(|x| *x *= factor);
        scale
    }
}

/// Projection of the pair `(a, b)` onto `{a <= b}`.
pub fn project_halfspace(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        let mid = 0.5 * (a + b);
        (mid, mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    #[test]
    fn closed_form_cases() {
        assert_eq!(project_soc(1.0, &Vector2::new(0.5, 0.0)), (1.0, Vector2::new(0.5, 0.0)));
        assert_eq!(project_soc(-2.0, &Vector2::new(1.0, 0.0)), (0.0, Vector2::zeros()));
        assert_eq!(project_soc(0.0, &Vector2::new(2.0, 0.0)), (1.0, Vector2::new(1.0, 0.0)));
        assert_eq!(project_soc(-1.0, &Vector2::zeros()), (0.0, Vector2::zeros()));
        let mut empty: [f64; 0] = [];
        assert_eq!(project_soc_in_place(-3.0, &mut empty), 0.0);
        assert_eq!(project_soc_in_place(3.0, &mut empty), 3.0);
    }

    #[test]
    fn soc_projection_beats_search() {
        // (0, [2, 0]): search the boundary t = |x| in 2-D for the closest point
        let (s, v) = (0.0, [2.0, 0.0]);
        let mut best = f64::INFINITY;
        let mut arg = (0.0, 0.0);
        for i in 0..=4000 {
            let t = i as f64 * 1e-3;
            for sign in [-1.0, 1.0] {
                let d = (t - s).powi(2) + (sign * t - v[0]).powi(2) + v[1] * v[1];
                if d < best {
                    best = d;
                    arg = (t, sign * t);
                }
            }
        }
        let (t, x) = project_soc(s, &Vector2::new(v[0], v[1]));
        assert!((t - arg.0).abs() < 1e-3 && (x[0] - arg.1).abs() < 1e-3);
        assert!((t - 1.0).abs() < 1e-15 && (x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn halfspace_cases_and_grid_oracle() {
        assert_eq!(project_halfspace(1.0, 2.0), (1.0, 2.0));
        assert_eq!(project_halfspace(3.0, 1.0), (2.0, 2.0));
        let (a, b) = (0.7, -0.4);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -200..=200 {
            for j in -200..=200 {
                let (x, y) = (i as f64 * 0.01, j as f64 * 0.01);
                if x <= y {
                    let d = (x - a).powi(2) + (y - b).powi(2);
                    if d < best.0 {
                        best = (d, x, y);
                    }
                }
            }
        }
        let (x, y) = project_halfspace(a, b);
        assert!((x - best.1).abs() <= 0.01 && (y - best.2).abs() <= 0.01);
    }

    fn pair() -> impl Strategy<Value = (f64, [f64; 3])> {
        (-5.0..5.0f64, prop::array::uniform3(-5.0..5.0f64))
    }

    proptest! {
        #[test]
        fn soc_idempotent_and_nonexpansive((s1, v1) in pair(), (s2, v2) in pair()) {
            let v1 = SVector::<f64, 3>::from(v1);
            let v2 = SVector::<f64, 3>::from(v2);
            let (t1, x1) = project_soc(s1, &v1);
            prop_assert!(x1.norm() <= t1 + 1e-12);
            let (t1b, x1b) = project_soc(t1, &x1);
            prop_assert!((t1b - t1).abs() <= 1e-12 && (x1b - x1).amax() <= 1e-12);
            let (t2, x2) = project_soc(s2, &v2);
            let before = ((s1 - s2).powi(2) + (v1 - v2).norm_squared()).sqrt();
            let after = ((t1 - t2).powi(2) + (x1 - x2).norm_squared()).sqrt();
            prop_assert!(after <= before + 1e-12);
        }

        #[test]
        fn halfspace_idempotent_and_nonexpansive(a1 in -5.0..5.0f64, b1 in -5.0..5.0f64, a2 in -5.0..5.0f64, b2 in -5.0..5.0f64) {
            let p1 = project_halfspace(a1, b1);
            prop_assert!(p1.0 <= p1.1);
            prop_assert_eq!(project_halfspace(p1.0, p1.1), p1);
            let p2 = project_halfspace(a2, b2);
            let before = (a1 - a2).hypot(b1 - b2);
            let after = (p1.0 - p2.0).hypot(p1.1 - p2.1);
            prop_assert!(after <= before + 1e-12);
        }
    }
}
