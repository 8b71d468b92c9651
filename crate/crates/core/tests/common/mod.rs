//! Shared oracles for the integration tests and the acceptance run.

use heatlmi::lmi::{solve_with, verify_certificate, BlockLayout, ConstraintBuilder, LmiProblem, Mat, SolverOptions, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Trust box (0, RHO] of the two scalar unknowns.
pub const RHO: f64 = 2.0;
pub const GRID: usize = 200;

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// Best margin min λ_max(F₀ + aF₁ + bF₂) over a GRID×GRID scan of the box.
pub fn grid_margin(f: &[Mat; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 1..=GRID {
        for j in 1..=GRID {
            let (a, b) = (RHO * i as f64 / GRID as f64, RHO * j as f64 / GRID as f64);
            best = best.min((&f[0] + &f[1] * a + &f[2] * b).symmetric_eigenvalues().max());
        }
    }
    best
}

fn problem(f: &[Mat; 3]) -> LmiProblem {
    let mut p = LmiProblem::new();
    let a = p.scalar("a");
    let b = p.scalar("b");
    let mut c = ConstraintBuilder::new("F", BlockLayout::new(&[3]));
    c.constant(0, 0, &f[0]);
    c.scaled(a, 0, 0, &f[1]);
    c.scaled(b, 0, 0, &f[2]);
    p.add_constraint(c.build()).expect("well-formed");
    p
}

/// Tally of an oracle comparison.
#[derive(Debug, Default)]
pub struct OracleTally {
    pub feasible: usize,
    pub infeasible: usize,
    pub mismatches: Vec<String>,
}

/// Compares solver verdicts with the grid oracle on `count` random instances.
/// Instances whose grid margin lies within 0.05 of zero are redrawn: the
/// boundary is then closer than the grid resolution can resolve.
pub fn oracle_comparison(seed: u64, count: usize) -> OracleTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions { trust_radius: RHO, ..Default::default() };
    let mut tally = OracleTally::default();
    let mut checked = 0;
    while checked < count {
        let shift = rng.gen_range(-1.5..1.5);
        let f = [random_sym(&mut rng, 3) + Mat::identity(3, 3) * shift, random_sym(&mut rng, 3), random_sym(&mut rng, 3)];
        let best = grid_margin(&f);
        if best.abs() < 0.05 {
            continue;
        }
        checked += 1;
        let p = problem(&f);
        match solve_with(&p, &opts).map(|r| r.verdict) {
            Ok(Verdict::Feasible(cert)) => {
                tally.feasible += 1;
                let sound = verify_certificate(&p, &cert.assignment, 1e-9).map(|c| c.feasible).unwrap_or(false);
                let inside = cert.assignment.values.iter().all(|v| v[(0, 0)] > 0.0 && v[(0, 0)] < RHO);
                if best >= 0.0 || !sound || !inside {
                    tally.mismatches.push(format!("instance {checked}: solver feasible, grid margin {best:.3e}, sound {sound}, inside {inside}"));
                }
            }
            Ok(Verdict::Infeasible { .. }) => {
                tally.infeasible += 1;
                if best < 0.0 {
                    tally.mismatches.push(format!("instance {checked}: solver infeasible, grid margin {best:.3e}"));
                }
            }
            Err(e) => tally.mismatches.push(format!("instance {checked}: {e}")),
        }
    }
    tally
}
