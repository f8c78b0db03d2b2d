//! The step operator: matrix-free application against its dense matrix, and
//! positivity of the energy pairing that gives unique solvability.

mod common;

use binmix::energy::{BulkEnergy, EnergyModel};
use binmix::grid::{Grid, Location};
use binmix::scheme::{extrapolate, Block, Extrapolation, ModelParams, State, StepSystem};
use binmix::solver::LinearOperator;
use common::{dense, energy_pairing};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(hydro: bool) -> ModelParams {
    ModelParams {
        mobility: 2e-3,
        inv_re_s: [1.0 / 100.0, 1.0 / 50.0],
        inv_re_v: [1.0 / 300.0, 1.0 / 200.0],
        kappa: [1e-3, 3e-4, 6e-4],
        energy: EnergyModel::new(BulkEnergy::FloryHuggins { kbt_over_m: 1.0, n1: 1.0, n2: 2.0, chi: 2.5 }, 1.0)
            .unwrap(),
        hydro,
        rho_floor: 1e-10,
        extrapolation: Extrapolation::SecondOrder,
    }
}

fn random_state(g: &Grid, p: &ModelParams, rng: &mut ChaCha8Rng) -> State {
    let mut f = |loc, base: f64, amp: f64| {
        let mut x = g.zeros(loc);
        for v in x.data_mut() {
            *v = base + amp * rng.gen_range(-1.0..1.0);
        }
        x
    };
    let (r1, r2) = (f(Location::Cell, 0.5, 0.3), f(Location::Cell, 0.6, 0.3));
    let (u, v) = (f(Location::EdgeEw, 0.0, 0.5), f(Location::EdgeNs, 0.0, 0.5));
    State::new(g, r1, r2, u, v, &p.energy).unwrap()
}

fn system(hydro: bool, seed: u64) -> (Grid, StepSystem, ChaCha8Rng) {
    let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
    let p = params(hydro);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_state(&g, &p, &mut rng);
    let b = random_state(&g, &p, &mut rng);
    let c = extrapolate(&g, &p, &a, &b).unwrap();
    (g, StepSystem::new(&g, &p, 0.05, c), rng)
}

#[test]
fn dense_matrix_equals_matrix_free_application() {
    for hydro in [true, false] {
        let (_, sys, mut rng) = system(hydro, 11);
        let a = dense(&sys);
        let n = sys.dim();
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; n];
            sys.apply(&x, &mut y);
            let z = &a * DVector::from_column_slice(&x);
            let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = y.iter().zip(z.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12 * scale, "hydro={hydro}: {err} (scale {scale})");
        }
        // the probed sparse matrix used by the preconditioner is the same matrix
        let mut sparse = DMatrix::zeros(n, n);
        for (r, c, v) in sys.assemble() {
            sparse[(r, c)] += v;
        }
        let diff = (&sparse - &a).abs().max();
        assert!(diff <= 1e-12 * a.abs().max(), "hydro={hydro}: probed entries differ by {diff}");
    }
}

#[test]
fn energy_pairing_is_positive_for_random_unknowns() {
    for hydro in [true, false] {
        let (g, sys, mut rng) = system(hydro, 5);
        let n = sys.dim();
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = energy_pairing(&g, &sys, &x);
            assert!(e > 0.0, "hydro={hydro}: (AX, X) = {e}");
        }
    }
}

#[test]
fn energy_pairing_vanishes_on_constant_potentials_and_densities() {
    // the form is only semi-definite: uniform densities and chemical
    // potentials with no velocity or q carry no dissipation
    let (g, sys, _) = system(true, 9);
    let lay = *sys.layout();
    let mut x = vec![0.0; sys.dim()];
    for (b, val) in [(Block::Mu1, 0.7), (Block::Mu2, -0.2), (Block::Rho1, 0.4), (Block::Rho2, 1.3)] {
        let f = g.constant(Location::Cell, val);
        lay.gather(b, &f, &mut x);
    }
    let e = energy_pairing(&g, &sys, &x);
    assert!(e.abs() < 1e-10, "{e}");
}
