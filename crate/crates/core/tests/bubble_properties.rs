use mu2_core::assembly::Discretization;
use mu2_core::bubbles::{aubin_bubble, cutoff, default_epsilon_grid, two_bubble_config, BubbleParams};
use mu2_core::field::Field;
use mu2_core::functionals::yamabe_y;
use mu2_core::geometry::make_sphere;
use mu2_core::mesh::{Mesh, MeshSpec};
use proptest::prelude::*;

fn graded(n: usize, elements: usize, core: f64) -> Discretization {
    let g = make_sphere(n).unwrap();
    Discretization::new(&g, &Mesh::new(&g, MeshSpec::PoleGraded { elements, core }).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn cutoff_is_a_monotone_step(delta in 0.05f64..1.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (r1, r2) = if a <= b { (a, b) } else { (b, a) };
        let (e1, e2) = (cutoff(r1, delta), cutoff(r2, delta));
        prop_assert!((0.0..=1.0).contains(&e1));
        prop_assert!(e2 <= e1);
        prop_assert_eq!(cutoff(delta * 0.999, delta), 1.0);
        prop_assert_eq!(cutoff(2.0 * delta, delta), 0.0);
    }
}

#[test]
fn scaled_mass_bounded_over_grid() {
    for n in [3, 5] {
        let d = graded(n, 400, 3e-3);
        for e in default_epsilon_grid() {
            let b = aubin_bubble(&d, &BubbleParams::at_pole(e, 0.5)).unwrap();
            assert!((1e-3..=1e3).contains(&b.scaled_mass), "n={n} eps={e}: {}", b.scaled_mass);
        }
    }
}

#[test]
fn cutoff_error_constant_stable_across_dimensions() {
    let (small, large) = (0.25, 0.5);
    let constants: Vec<f64> = [5usize, 6, 7]
        .iter()
        .map(|&n| {
            let d = graded(n, 800, 3e-4);
            default_epsilon_grid()
                .into_iter()
                .map(|e| {
                    let y1 = yamabe_y(&d, &aubin_bubble(&d, &BubbleParams::at_pole(e, small)).unwrap().field).unwrap();
                    let y2 = yamabe_y(&d, &aubin_bubble(&d, &BubbleParams::at_pole(e, large)).unwrap().field).unwrap();
                    let budget = e.powf((n as f64 - 2.0) / 2.0) / small.powf(n as f64 - 2.0);
                    (y1 - y2).abs() / budget
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().cloned().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo < 2.0, "{constants:?}");
}

#[test]
fn two_bubble_gram_well_conditioned() {
    let d = graded(3, 400, 3e-3);
    let v = Field::constant(&d.mesh, 1.0);
    for e in default_epsilon_grid() {
        let tb = two_bubble_config(&d, &BubbleParams::at_pole(e, 0.5), &v, d.geom.consts.mu1_sphere).unwrap();
        let b = d.weighted_mass(tb.u.field(), 4.0).unwrap();
        let (g11, g22) = (b.quadratic(&tb.v_eps.values), b.quadratic(&tb.v.values));
        let g12 = b.bilinear(&tb.v_eps.values, &tb.v.values);
        let half = 0.5 * (g11 + g22);
        let root = (half * half - (g11 * g22 - g12 * g12)).sqrt();
        let cond = (half + root) / (half - root);
        assert!(cond < 1e8, "eps={e}: {cond}");
    }
}
