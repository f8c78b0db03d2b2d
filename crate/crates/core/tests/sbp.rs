//! Summation-by-parts identities of the staggered operators, checked against
//! inner products summed directly over cells.

mod common;

use binmix::grid::{Field, Grid, Location};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

struct Case {
    g: Grid,
    phi: Field,
    u: Field,
    v: Field,
    f: Field,
}

fn case(nx: usize, ny: usize, lx: f64, ly: f64, seed: u64) -> Case {
    let g = Grid::new(nx, ny, lx, ly).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = random_field(&g, Location::Cell, &mut rng);
    g.apply_neumann(&mut phi).unwrap();
    let mut u = random_field(&g, Location::EdgeEw, &mut rng);
    let mut v = random_field(&g, Location::EdgeNs, &mut rng);
    g.apply_velocity_bc(&mut u, &mut v).unwrap();
    let mut f = random_field(&g, Location::Vertex, &mut rng);
    zero_vertex_boundary(&g, &mut f);
    Case { g, phi, u, v, f }
}

fn grid_params() -> impl Strategy<Value = (usize, usize, f64, f64, u64)> {
    (2usize..=64, 2usize..=64, 0.5f64..2.0, 0.5f64..2.0, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn averages_are_adjoint((nx, ny, lx, ly, seed) in grid_params()) {
        let Case { g, phi, u, v, .. } = case(nx, ny, lx, ly, seed);
        let lhs = ew_sum(&g, &g.avg_x(&phi), &u);
        let rhs = cell_sum(&g, &phi, &g.avg_x(&u));
        prop_assert!((lhs - rhs).abs() <= TOL, "x: {lhs} vs {rhs}");
        let lhs = ns_sum(&g, &g.avg_y(&phi), &v);
        let rhs = cell_sum(&g, &phi, &g.avg_y(&v));
        prop_assert!((lhs - rhs).abs() <= TOL, "y: {lhs} vs {rhs}");
    }

    #[test]
    fn differences_are_negative_adjoint((nx, ny, lx, ly, seed) in grid_params()) {
        let Case { g, phi, u, v, .. } = case(nx, ny, lx, ly, seed);
        let s = ew_sum(&g, &g.diff_x(&phi), &u) + cell_sum(&g, &phi, &g.diff_x(&u));
        prop_assert!(s.abs() <= TOL, "x: {s}");
        let s = ns_sum(&g, &g.diff_y(&phi), &v) + cell_sum(&g, &phi, &g.diff_y(&v));
        prop_assert!(s.abs() <= TOL, "y: {s}");
    }

    #[test]
    fn vertex_averages_are_adjoint((nx, ny, lx, ly, seed) in grid_params()) {
        let Case { g, u, v, f, .. } = case(nx, ny, lx, ly, seed);
        let lhs = ew_sum(&g, &g.avg_y(&f), &u);
        let rhs = vc_sum(&g, &f, &g.avg_y(&u));
        prop_assert!((lhs - rhs).abs() <= TOL, "u: {lhs} vs {rhs}");
        let lhs = ns_sum(&g, &g.avg_x(&f), &v);
        let rhs = vc_sum(&g, &f, &g.avg_x(&v));
        prop_assert!((lhs - rhs).abs() <= TOL, "v: {lhs} vs {rhs}");
    }

    #[test]
    fn vertex_differences_are_negative_adjoint((nx, ny, lx, ly, seed) in grid_params()) {
        let Case { g, u, v, f, .. } = case(nx, ny, lx, ly, seed);
        let s = ew_sum(&g, &g.diff_y(&f), &u) + vc_sum(&g, &f, &g.diff_y(&u));
        prop_assert!(s.abs() <= TOL, "u: {s}");
        let s = ns_sum(&g, &g.diff_x(&f), &v) + vc_sum(&g, &f, &g.diff_x(&v));
        prop_assert!(s.abs() <= TOL, "v: {s}");
    }

    #[test]
    fn weighted_inner_products_match_direct_sums((nx, ny, lx, ly, seed) in grid_params()) {
        let g = Grid::new(nx, ny, lx, ly).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (loc, oracle) in [
            (Location::Cell, cell_sum as fn(&Grid, &Field, &Field) -> f64),
            (Location::EdgeEw, ew_sum),
            (Location::EdgeNs, ns_sum),
            (Location::Vertex, vc_sum),
        ] {
            let a = random_field(&g, loc, &mut rng);
            let b = random_field(&g, loc, &mut rng);
            let got = g.inner(&a, &b).unwrap();
            let want = oracle(&g, &a, &b);
            prop_assert!((got - want).abs() <= TOL, "{loc:?}: {got} vs {want}");
        }
    }

    #[test]
    fn laplacian_is_symmetric_and_nonpositive((nx, ny, lx, ly, seed) in grid_params()) {
        let Case { g, phi, .. } = case(nx, ny, lx, ly, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut psi = random_field(&g, Location::Cell, &mut rng);
        g.apply_neumann(&mut psi).unwrap();
        let a = cell_sum(&g, &g.laplacian(&phi).unwrap(), &psi);
        let b = cell_sum(&g, &phi, &g.laplacian(&psi).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        let e = cell_sum(&g, &g.laplacian(&phi).unwrap(), &phi);
        prop_assert!((e + g.grad_inner(&phi, &phi).unwrap()).abs() <= 1e-9 * (1.0 + e.abs()));
        prop_assert!(e <= 0.0);
    }
}

#[test]
fn differences_are_exact_on_linear_fields() {
    let g = Grid::new(7, 5, 1.4, 0.9).unwrap();
    let phi = g.sample(Location::Cell, |x, y| 3.0 * x - 2.0 * y + 0.5);
    let dx = g.diff_x(&phi);
    let dy = g.diff_y(&phi);
    for j in 0..=6 {
        for i in 0..=7 {
            assert!((dx.get(i, j) - 3.0).abs() < 1e-12);
        }
    }
    for j in 0..=5 {
        for i in 0..=8 {
            assert!((dy.get(i, j) + 2.0).abs() < 1e-12);
        }
    }
}

#[test]
fn laplacian_is_exact_on_quadratics() {
    let g = Grid::new(6, 9, 1.0, 2.0).unwrap();
    let phi = g.sample(Location::Cell, |x, y| x * x + 0.5 * y * y - x * y);
    let lap = g.laplacian(&phi).unwrap();
    for j in 1..=9 {
        for i in 1..=6 {
            assert!((lap.get(i, j) - 3.0).abs() < 1e-9, "{}", lap.get(i, j));
        }
    }
}
