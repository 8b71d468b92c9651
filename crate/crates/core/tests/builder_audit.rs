//! Entry-wise audit of the assembled stability LMIs for N = 1, N₀ = 0
//! against matrices written out by hand from the modal equations.

use std::f64::consts::{PI, SQRT_2};

use heatlmi::lmi::builders::{build_lmi_delayed, build_lmi_nodelay, DelayParams};
use heatlmi::lmi::{Assignment, LmiProblem, Mat};
use heatlmi::spectral::{input_coefficient, kappa, tail_bound, MU};
use heatlmi::synthesis::{build_reduced_model, GainSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a + a.transpose()
}

fn random_assignment(p: &LmiProblem, rng: &mut ChaCha8Rng) -> Assignment {
    let values = p.vars.iter().map(|v| {
        let (r, _) = v.kind.shape();
        if r == 1 { Mat::from_element(1, 1, rng.gen_range(0.1..2.0)) } else { sym(rng, r) }
    });
    Assignment { values: values.collect() }
}

fn get<'a>(p: &LmiProblem, a: &'a Assignment, name: &str) -> &'a Mat {
    a.get(p.var_by_name(name).expect("variable exists"))
}

fn put(m: &mut Mat, r: usize, c: usize, piece: &Mat) {
    m.view_mut((r, c), piece.shape()).copy_from(piece);
    if r != c {
        m.view_mut((c, r), (piece.ncols(), piece.nrows())).copy_from(&piece.transpose());
    }
}

fn assert_close(a: &Mat, b: &Mat) {
    assert_eq!(a.shape(), b.shape());
    let diff = (a - b).abs().max();
    assert!(diff < 1e-12, "max entry difference {diff}");
}

#[test]
fn nodelay_lmi_matches_hand_assembly() {
    let (ku, k0, l) = (-5.468, 32.19, 2.75);
    let gains = GainSet::new(&[l], &[ku, k0], 1e-3);
    let model = build_reduced_model(0, 1, 0.0).unwrap();
    let (delta, sigma, gamma) = (1e-3, 0.4, 1.7);
    let prob = build_lmi_nodelay(&model, &gains, delta, sigma, gamma).unwrap();

    let (b0, b1) = (input_coefficient(0), input_coefficient(1));
    let (c0, c1) = (1.0, SQRT_2);
    let pi2 = PI * PI;
    // X = [û, ŵ₀, e₀, ŵ₁, e₁]
    let f = Mat::from_row_slice(5, 5, &[
        -MU - ku, -k0, 0.0, 0.0, 0.0,
        -b0 * ku, -b0 * k0, l * c0, 0.0, l * c1,
        0.0, 0.0, -l * c0, 0.0, -l * c1,
        -b1 * ku, -b1 * k0, 0.0, -pi2, 0.0,
        0.0, 0.0, 0.0, 0.0, -pi2,
    ]);
    let lz = Mat::from_column_slice(5, 1, &[0.0, l, -l, 0.0, 0.0]);
    let kx = Mat::from_row_slice(1, 5, &[ku, k0, 0.0, 0.0, 0.0]);
    let xi_x = Mat::from_diagonal(&nalgebra::DVector::from_row_slice(&[2.0 / pi2, 1.0, 0.0, 1.0, 0.0]));
    let xi_e = Mat::from_diagonal(&nalgebra::DVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0, 1.0]));
    let lam = 4.0 * pi2;
    let kap = kappa(2, gamma).unwrap();
    assert!((kap - (1.0 + gamma + lam / gamma)).abs() < 1e-12);
    let xi = tail_bound(1).unwrap();
    let s2 = sigma * sigma;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let a = random_assignment(&prob, &mut rng);
        let p = get(&prob, &a, "P");
        let (a1, a2, a3) = (get(&prob, &a, "alpha1")[(0, 0)], get(&prob, &a, "alpha2")[(0, 0)], get(&prob, &a, "alpha3")[(0, 0)]);
        let i5 = Mat::identity(5, 5);
        let mut h = Mat::zeros(19, 19);
        let fd = &f + &i5 * delta;
        let xx = p * &fd + fd.transpose() * p + &xi_x * (2.0 * a1 * s2) + &xi_e * (a2 * s2) + kx.transpose() * &kx * (2.0 * a3 * xi / pi2);
        put(&mut h, 0, 0, &xx);
        put(&mut h, 0, 5, &(p * &lz));
        put(&mut h, 0, 6, p);
        put(&mut h, 0, 11, p);
        h[(5, 5)] = 2.0 * (2.0 / kap) * (-lam * lam + delta * lam + a2 * s2 / 2.0);
        put(&mut h, 5, 16, &Mat::from_element(1, 3, 1.0));
        put(&mut h, 6, 6, &(&i5 * -a1));
        put(&mut h, 11, 11, &(&i5 * -a2));
        let c = -2.0 * kap / lam;
        h[(16, 16)] = c * a1 / lam;
        h[(17, 17)] = c * a2 / lam;
        h[(18, 18)] = c * a3;
        assert_close(&prob.evaluate(0, &a), &h);
    }
}

#[test]
fn delayed_lmis_match_hand_assembly() {
    let (ku, k0, lu, l0) = (1.95, 0.55, 7.33, 1.01);
    let gains = GainSet::new(&[lu, l0], &[ku, k0], 1e-3);
    let model = build_reduced_model(0, 1, 0.0).unwrap();
    let prm = DelayParams { delta: 1e-3, sigma: 0.5, gamma: 0.8, m: 2, r: 0.3 };
    let prob = build_lmi_delayed(&model, &gains, prm).unwrap();

    let (b0, b1) = (input_coefficient(0), input_coefficient(1));
    let (ps, c0, c1) = (-2.0 / PI, 1.0, SQRT_2);
    let pi2 = PI * PI;
    // X = [û, ŵ₀, ŵ₁]
    let fx = Mat::from_row_slice(3, 3, &[-MU - ku, -k0, 0.0, -b0 * ku, -b0 * k0, 0.0, -b1 * ku, -b1 * k0, -pi2]);
    let bx = Mat::from_column_slice(3, 1, &[1.0, b0, b1]);
    let f0 = Mat::from_row_slice(3, 3, &[
        -MU - lu * ps, -lu * c0, -lu * c1,
        -l0 * ps, -l0 * c0, -l0 * c1,
        0.0, 0.0, -pi2,
    ]);
    let lcal = Mat::from_column_slice(3, 1, &[lu, l0, 0.0]);
    let ccal = Mat::from_row_slice(1, 3, &[ps, c0, c1]);
    let lc = &lcal * &ccal;
    let mut fe = Mat::zeros(6, 6);
    fe.view_mut((0, 0), (3, 3)).copy_from(&f0);
    fe.view_mut((0, 3), (3, 3)).copy_from(&lc);
    fe.view_mut((3, 3), (3, 3)).copy_from(&f0);
    let mut le = Mat::zeros(6, 6);
    le.view_mut((0, 0), (3, 3)).copy_from(&lc);
    le.view_mut((0, 3), (3, 3)).copy_from(&(-&lc));
    le.view_mut((3, 3), (3, 3)).copy_from(&lc);
    let lz = Mat::from_column_slice(6, 1, &[lu, l0, 0.0, -lu, -l0, 0.0]);
    let k0i = Mat::from_row_slice(1, 6, &[ku, k0, 0.0, ku, k0, 0.0]);
    let k0t = Mat::from_row_slice(1, 3, &[ku, k0, 0.0]);
    let xi_x = Mat::from_diagonal(&nalgebra::DVector::from_row_slice(&[2.0 / pi2, 1.0, 1.0]));
    let xi_e = Mat::from_diagonal(&nalgebra::DVector::from_row_slice(&[2.0 / pi2, 1.0, 1.0, 2.0 / pi2, 1.0, 1.0]));
    let xi = tail_bound(1).unwrap();
    let tw = 2.0 * xi / pi2;
    let s2 = prm.sigma * prm.sigma;
    let eps = (-2.0 * prm.delta * prm.r / 2.0).exp();
    let h_sub = prm.r / 2.0;
    let lam = 4.0 * pi2;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let a = random_assignment(&prob, &mut rng);
        let px = get(&prob, &a, "P_X");
        let pe = get(&prob, &a, "P_e");
        let se = get(&prob, &a, "S_e");
        let re = get(&prob, &a, "R_e");
        let sc = |n: &str| get(&prob, &a, n)[(0, 0)];
        let (q, a1, a2, a3, beta) = (sc("q"), sc("alpha1"), sc("alpha2"), sc("alpha3"), sc("beta"));
        let i3 = Mat::identity(3, 3);
        let i6 = Mat::identity(6, 6);
        // blocks: X 0..3, G 3..6, XE 6..12, ζ 12, Υ 13..19, H 19..25
        let mut h = Mat::zeros(25, 25);
        let fxd = &fx + &i3 * prm.delta;
        put(&mut h, 0, 0, &(px * &fxd + fxd.transpose() * px + &xi_x * (2.0 * a1 * s2) + k0t.transpose() * &k0t * (a2 * tw)));
        put(&mut h, 0, 3, px);
        put(&mut h, 0, 6, &(px * &bx * &k0i));
        put(&mut h, 3, 3, &(&i3 * -a1));
        let fed = &fe + &i6 * prm.delta;
        let xe = pe * &fed + fed.transpose() * pe + se * (1.0 - eps) + k0i.transpose() * &k0i * (a3 * tw) + &xi_e * (2.0 * beta * s2);
        put(&mut h, 6, 6, &xe);
        put(&mut h, 6, 12, &(pe * &lz));
        put(&mut h, 6, 13, &(pe * &le - se * eps));
        put(&mut h, 6, 19, pe);
        h[(12, 12)] = -eps * q;
        put(&mut h, 13, 13, &(se * -eps + re * -eps));
        put(&mut h, 19, 19, &(&i6 * -beta));
        // (r/M)² Θᵀ R_e Θ with Θ = [F_e, 𝓛_ζ, Λ_e, I] on (XE, ζ, Υ, H)
        let mut theta = Mat::zeros(6, 25);
        theta.view_mut((0, 6), (6, 6)).copy_from(&fe);
        theta.view_mut((0, 12), (6, 1)).copy_from(&lz);
        theta.view_mut((0, 13), (6, 6)).copy_from(&le);
        theta.view_mut((0, 19), (6, 6)).copy_from(&i6);
        h += theta.transpose() * re * &theta * (h_sub * h_sub);
        assert_close(&prob.evaluate(0, &a), &h);

        let mut t = Mat::zeros(4, 4);
        t[(0, 0)] = -lam * lam + (prm.delta + q * prm.gamma / 2.0) * lam + s2 * (a1 + beta) + q / 2.0 * (1.0 + prm.gamma);
        for j in 1..4 {
            t[(0, j)] = 1.0;
            t[(j, 0)] = 1.0;
        }
        t[(1, 1)] = -2.0 / lam * a1 / lam;
        t[(2, 2)] = -2.0 / lam * a2;
        t[(3, 3)] = -2.0 / lam * a3;
        assert_close(&prob.evaluate(1, &a), &t);
    }
}
