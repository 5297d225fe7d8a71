//! Property tests over randomized geometry and kernels.

use proptest::prelude::*;
use std::sync::Arc;

use nlspec_core::domain::{symmetric_difference_measure, BoundarySample, DomainSpec, MapSpec};
use nlspec_core::kernel::{KernelFamily, KernelSpec};
use nlspec_core::operator::{assemble, lipschitz_bound, operator_norm_diff, ContainerGrid};

fn kernel_family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(KernelFamily::Bump),
        Just(KernelFamily::Gaussian),
        Just(KernelFamily::Tent),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn kernel_is_radially_nonincreasing_and_even(
        family in kernel_family(),
        width in 0.05f64..3.0,
        r1 in 0.0f64..4.0,
        r2 in 0.0f64..4.0,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let k = KernelSpec::new(family, width, 2).unwrap();
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let dir = [angle.cos(), angle.sin()];
        let near = k.eval(&[lo * dir[0], lo * dir[1]]).unwrap();
        let far = k.eval(&[hi * dir[0], hi * dir[1]]).unwrap();
        prop_assert!(near >= far, "J({lo}) = {near} < J({hi}) = {far}");
        prop_assert!(near >= 0.0 && far >= 0.0);
        // Evenness is bitwise.
        let p = [r1 * dir[0], r1 * dir[1]];
        let a = k.eval(&p).unwrap();
        let b = k.eval(&[-p[0], -p[1]]).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert_eq!(k.eval(&[0.0, 0.0]).unwrap(), k.peak());
    }
}

fn small_domain() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        // Boxes inside [-2, 2]^2.
        (-2.0f64..1.0, -2.0f64..1.0, 0.3f64..1.5, 0.3f64..1.5).prop_map(|(x, y, w, h)| {
            DomainSpec::rect([x, y], [x + w, y + h]).unwrap()
        }),
        // Balls inside the same box.
        (-1.2f64..1.2, -1.2f64..1.2, 0.2f64..0.8).prop_map(|(x, y, r)| {
            DomainSpec::ball([x, y], r, 2).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn symmetric_difference_satisfies_the_triangle_inequality(
        a in small_domain(),
        b in small_domain(),
        c in small_domain(),
    ) {
        let ab = symmetric_difference_measure(&a, &b).unwrap();
        let bc = symmetric_difference_measure(&b, &c).unwrap();
        let ac = symmetric_difference_measure(&a, &c).unwrap();
        // Subcell estimates carry up to ~1e-3 relative error each; allow
        // twice that on the comparison.
        let tol = 2e-3 * (ab + bc + ac).max(1.0);
        prop_assert!(
            ac <= ab + bc + tol,
            "triangle violated: {ac} > {ab} + {bc} (+{tol})"
        );
    }

    #[test]
    fn affine_images_scale_measures_exactly(
        d in small_domain(),
        sx in 0.3f64..2.5,
        sy in 0.3f64..2.5,
    ) {
        let base_measure = d.measure().value;
        let mapped = DomainSpec::mapped(d, MapSpec::AffineDiagonal { scales: [sx, sy] }).unwrap();
        let m = mapped.measure();
        prop_assert!(m.error.is_none(), "affine image measure must be exact");
        prop_assert!((m.value - base_measure * sx * sy).abs() < 1e-12 * base_measure.max(1.0));
    }

    #[test]
    fn boundary_normals_point_outward_on_balls(
        cx in -1.0f64..1.0,
        cy in -1.0f64..1.0,
        r in 0.3f64..1.2,
        m in 8usize..64,
    ) {
        let d = DomainSpec::ball([cx, cy], r, 2).unwrap();
        let bq = nlspec_core::boundary_quadrature(&d, m).unwrap();
        let total: f64 = bq.iter().map(|s| s.weight).sum();
        prop_assert!((total - std::f64::consts::TAU * r).abs() < 1e-10);
        let tau = 1e-4 * 2.0 * r;
        for BoundarySample { point, normal, .. } in &bq {
            let out = [point[0] + tau * normal[0], point[1] + tau * normal[1]];
            let inw = [point[0] - tau * normal[0], point[1] - tau * normal[1]];
            prop_assert!(!d.contains(out));
            prop_assert!(d.contains(inw));
        }
    }
}

/// Midpoint quadrature of the kernel over a covering box, the test-side
/// oracle for the unit-mass invariant.
fn midpoint_mass(k: &KernelSpec, half_width: f64, cells: usize) -> f64 {
    let h = 2.0 * half_width / cells as f64;
    match k.dim() {
        1 => (0..cells)
            .map(|i| {
                let x = -half_width + (i as f64 + 0.5) * h;
                k.eval(&[x]).unwrap()
            })
            .sum::<f64>()
            * h,
        _ => {
            let mut total = 0.0;
            for iy in 0..cells {
                let y = -half_width + (iy as f64 + 0.5) * h;
                for ix in 0..cells {
                    let x = -half_width + (ix as f64 + 0.5) * h;
                    total += k.eval(&[x, y]).unwrap();
                }
            }
            total * h * h
        }
    }
}

#[test]
fn midpoint_mass_converges_to_one_under_refinement() {
    for (family, width, dim) in [
        (KernelFamily::Bump, 0.8, 2),
        (KernelFamily::Gaussian, 0.25, 2),
        (KernelFamily::Tent, 0.6, 1),
    ] {
        let k = KernelSpec::new(family, width, dim).unwrap();
        let half = match family {
            KernelFamily::Gaussian => 6.0 * width,
            _ => width,
        };
        let errors: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&c| (midpoint_mass(&k, half, c) - 1.0).abs())
            .collect();
        // Refinement improves the error until it reaches the box-truncation
        // floor, which sits below the construction tolerance.
        for w in errors.windows(2) {
            assert!(
                w[1] < w[0] || w[1] < 1e-8,
                "{family:?}: errors not decreasing {errors:?}"
            );
        }
        // Second-order refinement while above the floor: each halving
        // shrinks the error about 4x.
        if errors[2] > 1e-8 {
            let ratio = errors[1] / errors[2];
            assert!(ratio > 2.5, "{family:?}: refinement ratio {ratio} too small");
        }
    }
}

#[test]
fn rough_symdiff_closed_form_agrees_with_subcell_counting() {
    // The closed form 2/(pi n) for the rough family against the unit square
    // is also measured independently by refined subcell counting.
    let square = DomainSpec::rect([0.0, 0.0], [1.0, 1.0]).unwrap();
    for n in [2u32, 8] {
        let rough = DomainSpec::rough(n).unwrap();
        let closed = symmetric_difference_measure(&square, &rough).unwrap();
        let counted =
            nlspec_core::domain::symmetric_difference_subcell(&square, &rough, 1e-4);
        assert!(
            (closed - counted).abs() <= 1e-3,
            "n = {n}: closed form {closed} vs subcell {counted}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn norm_distance_respects_the_explicit_bound(
        cut1 in 0.55f64..0.95,
        cut2 in 0.55f64..0.95,
        width in 0.1f64..0.6,
    ) {
        // Pairs of nested and staggered intervals on one container.
        let k = KernelSpec::new(KernelFamily::Bump, width, 1).unwrap();
        let d1 = DomainSpec::interval(0.0, cut1).unwrap();
        let d2 = DomainSpec::interval(0.05, cut2).unwrap();
        let full = DomainSpec::interval(0.0, 1.0).unwrap();
        let grid = Arc::new(ContainerGrid::covering(&[&full], 1.0 / 128.0, 1));
        let a = assemble(&k, &d1, grid.clone()).unwrap();
        let b = assemble(&k, &d2, grid).unwrap();
        let nd = operator_norm_diff(&a, &b).unwrap();
        let bound = lipschitz_bound(&k, &d1, &d2).unwrap();
        prop_assert!(nd <= bound + 1e-11, "norm diff {nd} above bound {bound}");
    }
}
