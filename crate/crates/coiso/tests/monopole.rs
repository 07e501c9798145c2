use coiso::connection::{curvature_decomposition, validate, Classification};
use coiso::embedding::{certify_closed, certify_coisotropic, closedness_residual, CoisotropicEmbedding};
use coiso::models::monopole::build_monopole;
use coiso::models::su2::{left_mc, left_mc_inverse, numeric_adjoint_inverse, numeric_left_mc, rotation};
use coiso::poisson::{anomaly, block_decompose, bracket, invert, lift, projectability_check};
use coiso::presympl::kernel_basis;
use coiso::sampling::{rng, uniform};
use coiso::DiffBackend;
use nalgebra::Vector3;

fn enlarged_points(e: &CoisotropicEmbedding, base: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng(seed);
    base.iter().map(|x| e.with_mu(x, &[uniform(&mut g, -0.5, 0.5)])).collect()
}

#[test]
fn closed_form_frames_match_group_multiplication() {
    let mut g = rng(3);
    for _ in 0..50 {
        let s = Vector3::from_iterator(coiso::sampling::ball(&mut g, 3, 2.9));
        let t = left_mc(&s);
        assert!((t - numeric_left_mc(&s, 1e-3)).amax() < 1e-9);
        assert!((t * left_mc_inverse(&s) - nalgebra::Matrix3::identity()).amax() < 1e-12);
        assert!((rotation(&s).transpose() - numeric_adjoint_inverse(&s)).amax() < 1e-12);
    }
}

#[test]
fn maurer_cartan_sign_is_minus() {
    let b = build_monopole(1.0, false).unwrap();
    assert_eq!(b.model.mc.sign, -1.0);
    assert!(b.model.mc.residual < 1e-6, "{:?}", b.model.mc);
    assert!(b.model.mc.other_residual > 0.1);
}

#[test]
fn kernel_is_one_dimensional_and_vertical() {
    let b = build_monopole(1.0, true).unwrap();
    for x in b.model.sample_points(20, 1) {
        let k = kernel_basis(&b.structure, &x).unwrap();
        assert_eq!(k.corank(), 1);
        let v = b.model.vertical(&x);
        let om = b.structure.omega.eval_matrix(&x).unwrap();
        assert!((om * &v).amax() < 1e-12);
    }
}

#[test]
fn omega_is_closed() {
    let b = build_monopole(1.0, true).unwrap();
    let pts = b.model.sample_points(20, 2);
    let r = closedness_residual(&b.structure.omega, &pts, 1e-4, 9).unwrap();
    assert!(r.residual < 1e-7, "{}", r.residual);
}

#[test]
fn anomalous_algebra() {
    let b = build_monopole(1.0, true).unwrap();
    let pts = b.model.sample_points(20, 4);
    let e = CoisotropicEmbedding::build(&b.structure, &b.connection, &pts[0]).unwrap();
    let p = invert(&e);
    let fd = DiffBackend::fd_only(1e-5);
    let reg = b.observables.lifted(&e);
    let zs = enlarged_points(&e, &pts, 5);
    for z in &zs {
        let mu = z[7];
        for (j, k, l) in [(1, 2, 3), (2, 3, 1), (3, 1, 2)] {
            let jj = reg.get(&format!("J{j}")).unwrap();
            let jk = reg.get(&format!("J{k}")).unwrap();
            let v = bracket(&p, jj, jk, z, &fd).unwrap();
            let want = reg.get(&format!("J{l}")).unwrap().eval(z).unwrap()
                + mu * reg.get(&format!("theta3_{l}")).unwrap().eval(z).unwrap();
            assert!((v - want).abs() < 1e-5, "{v} vs {want}");
        }
    }
    let cr = certify_closed(&e, &zs).unwrap();
    assert!(cr.residual < 1e-4, "{}", cr.residual);
    let open = closedness_residual(&e.omega0_ext().unwrap(), &zs, 1e-5, 1).unwrap();
    assert!(open.residual > 1e-2, "{}", open.residual);
    let co = certify_coisotropic(&e, &p.lambda, &pts, 1e-6).unwrap();
    assert!(co.pass, "{co:?}");

    let val = validate(&b.connection, &b.structure, &pts, 1e-8).unwrap();
    assert!(val.pass, "{val:?}");
    let cls = curvature_decomposition(&b.connection, &pts, None).unwrap();
    assert_eq!(cls.classification, Classification::Curved);

    let bd = block_decompose(&p, &e, cls.classification, &zs, 1e-6).unwrap();
    let pr = projectability_check(&bd, &zs, &fd, 1e-6).unwrap();
    assert!(!pr.pass && pr.residual >= 0.5, "{pr:?}");

    let f = b.observables.get("J1").unwrap();
    let g = b.observables.get("J2").unwrap();
    let an = anomaly(&p, &e, f, g, &zs, &fd).unwrap();
    let t3 = lift(b.observables.get("theta3_3").unwrap(), &e);
    for z in &zs {
        let h = an.anomaly.eval(z).unwrap();
        assert!((h - z[7] * t3.eval(z).unwrap()).abs() < 1e-5);
    }
}
