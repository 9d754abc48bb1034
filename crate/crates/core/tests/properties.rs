use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use qel_core::fields::{d_dr, d_dz, sample_local, MeridionalGrid, PacketFrame, ScalarField};
use qel_core::recovery::RecoverySolver;

fn grid(n: usize) -> Arc<MeridionalGrid> {
    Arc::new(MeridionalGrid::centered(1.0, 0.4, 0.4, n, n).unwrap())
}

fn blob(g: &Arc<MeridionalGrid>, rc: f64, zc: f64, w: f64, amp: f64) -> ScalarField {
    ScalarField::from_fn(g, |r, z| {
        let q = ((r - rc).powi(2) + (z - zc).powi(2)) / (w * w);
        if q < 1.0 {
            amp * (1.0 - q).powi(4)
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bicubic_sampling_reproduces_cubics(
        c in prop::array::uniform4(-2.0..2.0f64),
        r in 0.62..1.38f64,
        z in -0.38..0.38f64,
    ) {
        let g = grid(41);
        let p = |r: f64, z: f64| c[0] + c[1] * r * r * r + c[2] * r * z * z + c[3] * z * z * z;
        let f = ScalarField::from_fn(&g, p);
        prop_assert!((f.sample(r, z) - p(r, z)).abs() < 1e-11);
    }

    #[test]
    fn derivatives_are_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, k in 1.0..6.0f64) {
        let g = grid(33);
        let f = ScalarField::from_fn(&g, |r, z| (k * r).sin() * z.cos());
        let h = ScalarField::from_fn(&g, |r, z| (r * z * k).exp());
        let combo = f.scale(a).add(&h.scale(b));
        for d in [d_dr, d_dz] {
            let lhs = d(&combo);
            let rhs = d(&f).scale(a).add(&d(&h).scale(b));
            let scale = 1.0 + rhs.max_abs();
            for (x, y) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn local_sampling_follows_the_frame(r_star in 0.9..1.1f64, x in -0.2..0.2f64, y in -0.3..0.3f64) {
        let g = grid(65);
        let f = ScalarField::from_fn(&g, |r, z| r * r - 3.0 * z);
        let frame = PacketFrame::new(r_star, 0.05, 0.0).unwrap();
        let (r, z) = frame.from_local(x, y);
        let (xb, yb) = frame.to_local(r, z);
        prop_assert!((xb - x).abs() <= 1e-15 && yb == y);
        prop_assert_eq!(sample_local(&f, &frame, x, y), f.sample(r, z));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn recovery_is_linear(
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        zc in -0.15..0.15f64,
        rc in 0.85..1.15f64,
    ) {
        let g = grid(49);
        let f1 = blob(&g, rc, zc, 0.1, 1.0);
        let f2 = blob(&g, 1.0, -zc, 0.12, -0.5);
        let mut solver = RecoverySolver::new(&g);
        let tol = 1e-12;
        let r1 = solver.solve(&f1, tol).unwrap();
        let r2 = solver.solve(&f2, tol).unwrap();
        let r12 = solver.solve(&f1.scale(a).add(&f2.scale(b)), tol).unwrap();
        let expected = r1.phi.scale(a).add(&r2.phi.scale(b));
        let scale = 1e-9 * (1.0 + expected.max_abs());
        for (x, y) in r12.phi.values().iter().zip(expected.values()) {
            prop_assert!((x - y).abs() <= scale);
        }
    }
}

#[test]
fn odd_vorticity_gives_odd_axial_and_even_radial_velocity() {
    let g = grid(65);
    let odd = blob(&g, 1.05, 0.1, 0.1, 1.0).add(&blob(&g, 1.05, -0.1, 0.1, -1.0));
    let rec = RecoverySolver::new(&g).solve(&odd, 1e-12).unwrap();
    let scale = rec.u_r.max_abs().max(rec.u_z.max_abs());
    for (i, j, _, _) in g.nodes() {
        let jm = g.n_z - 1 - j;
        assert!((rec.u_z.at(i, j) + rec.u_z.at(i, jm)).abs() <= 1e-10 * scale);
        assert!((rec.u_r.at(i, j) - rec.u_r.at(i, jm)).abs() <= 1e-10 * scale);
    }
    assert_relative_eq!(rec.phi.sample(1.05, 0.0), 0.0, epsilon = 1e-12 * rec.phi.max_abs());
}
