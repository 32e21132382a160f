mod common;

use common::{brute_barrier, pv, SquaredNorm};
use modeconn::curve::{init_bend, train_curve, uniform_grid, CurveTrainOptions};
use modeconn::data::{make_gaussians, Split};
use modeconn::landscape::{
    barrier_from_losses, build_plane, eval_surface, project_iterate, project_linear,
    scan_segment, scan_segment_with, SurfaceRanges,
};
use modeconn::net::{forward_loss, init_params, Activation, MlpSpec};
use modeconn::rng::RngStream;
use modeconn::{axpy_combine, Error, ParamVector};
use proptest::prelude::*;

fn gaussian_vec(s: &mut RngStream, d: usize) -> ParamVector {
    pv(&(0..d).map(|_| s.gaussian(0.0, 1.0).unwrap()).collect::<Vec<_>>())
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Normal equations `GᵀG λ = Gᵀw` solved by Cramer's rule.
fn cramer_lambda(p: [&ParamVector; 3], w: &ParamVector) -> [f64; 3] {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = p[i].as_slice().iter().zip(p[j].as_slice()).map(|(x, y)| x * y).sum();
        }
        b[i] = p[i].as_slice().iter().zip(w.as_slice()).map(|(x, y)| x * y).sum();
    }
    let d = det3(a);
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        *slot = det3(m) / d;
    }
    out
}

#[test]
fn project_linear_matches_cramer_on_random_5d() {
    let mut s = RngStream::new(5, "cramer");
    for _ in 0..100 {
        let p: Vec<_> = (0..4).map(|_| gaussian_vec(&mut s, 5)).collect();
        let got = project_linear(&p[0], &p[1], &p[2], &p[3]).unwrap();
        let want = cramer_lambda([&p[0], &p[1], &p[2]], &p[3]);
        for k in 0..3 {
            assert!((got.lambda[k] - want[k]).abs() < 1e-10, "{:?} vs {want:?}", got.lambda);
        }
    }
}

#[test]
fn project_linear_edge_cases() {
    let p0 = pv(&[1.0, 0.0, 0.0, 0.0]);
    let p1 = pv(&[1.0, 1.0, 0.0, 0.0]);
    let p2 = pv(&[0.0, 1.0, 1.0, 0.0]);
    let at_p1 = project_linear(&p0, &p1, &p2, &p1).unwrap();
    for (k, want) in [0.0, 1.0, 0.0].iter().enumerate() {
        assert!((at_p1.lambda[k] - want).abs() < 1e-12);
    }
    assert!(at_p1.projected.distance(&p1).unwrap() < 1e-12);
    let orth = project_linear(&p0, &p1, &p2, &pv(&[0.0, 0.0, 0.0, 2.0])).unwrap();
    assert!(orth.projected.norm() < 1e-12);
    assert!(matches!(
        project_linear(&p0, &p1, &p1, &p2),
        Err(Error::SingularSystem)
    ));
}

#[test]
fn hand_built_orthogonal_decomposition() {
    let p0 = pv(&[1.0, 1.0, 1.0]);
    let plane = build_plane(&p0, &pv(&[2.0, 1.0, 1.0]), &pv(&[1.0, 3.0, 1.0])).unwrap();
    let w = pv(&[1.0 + 3.0, 1.0 + 4.0, 1.0 + 5.0]);
    let p = project_iterate(&plane, &w).unwrap();
    assert!((p.coords[0] - 3.0).abs() < 1e-12 && (p.coords[1] - 4.0).abs() < 1e-12);
    assert!((p.residual_norm - 5.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_properties(seed in any::<u64>(), d in 3usize..40) {
        let mut s = RngStream::new(seed, "proj");
        let p: Vec<_> = (0..4).map(|_| gaussian_vec(&mut s, d)).collect();
        let plane = build_plane(&p[0], &p[1], &p[2]).unwrap();
        let (u, v) = plane.basis();
        prop_assert!(u.dot(v).unwrap().abs() < 1e-12);
        prop_assert!((u.norm() - 1.0).abs() < 1e-12 && (v.norm() - 1.0).abs() < 1e-12);
        for a in plane.anchors() {
            let pa = plane.project(a).unwrap();
            prop_assert!(pa.residual_norm < 1e-10);
        }
        let once = plane.project(&p[3]).unwrap();
        let twice = plane.project(&once.projected).unwrap();
        prop_assert!(twice.projected.distance(&once.projected).unwrap() < 1e-10 * (1.0 + once.projected.norm()));
        prop_assert!(twice.residual_norm < 1e-10 * (1.0 + once.projected.norm()));
        let r = p[3].sub(&once.projected).unwrap();
        prop_assert!(r.dot(u).unwrap().abs() < 1e-10);
        prop_assert!(r.dot(v).unwrap().abs() < 1e-10);
        prop_assert!((r.norm() - once.residual_norm).abs() < 1e-12 * (1.0 + r.norm()));
    }

    #[test]
    fn barrier_matches_brute_force(losses in proptest::collection::vec(-5.0f64..5.0, 3..40)) {
        let grid = uniform_grid(losses.len()).unwrap();
        let got = barrier_from_losses(&grid, &losses).unwrap();
        let (has, height, idx) = brute_barrier(&losses);
        prop_assert_eq!(got.has_barrier, has);
        prop_assert_eq!(got.barrier_height, height);
        prop_assert_eq!(got.argmax_lambda, grid[idx]);
    }
}

#[test]
fn convex_quadratic_segment_has_no_barrier() {
    let scan = scan_segment_with(
        &pv(&[1.0, 0.0]),
        &pv(&[0.0, 1.0]),
        &uniform_grid(101).unwrap(),
        &SquaredNorm { dim: 2 },
    )
    .unwrap();
    let r = modeconn::landscape::detect_barrier(&scan).unwrap();
    assert!(!r.has_barrier);
    assert!(r.barrier_height < 0.0);
}

fn mlp_setup() -> (MlpSpec, Vec<ParamVector>, modeconn::data::Dataset, modeconn::data::Dataset) {
    let spec = MlpSpec::new(vec![3, 7, 3], Activation::Relu).unwrap();
    let mut s = RngStream::new(21, "surface");
    let ps = (0..3).map(|_| init_params(&spec, &mut s).unwrap()).collect();
    let train = make_gaussians(30, 3, 3, 3.0, &mut s, Split::Train).unwrap();
    let val = make_gaussians(30, 3, 3, 3.0, &mut s, Split::Validation).unwrap();
    (spec, ps, train, val)
}

#[test]
fn segment_matches_elementwise_recombination() {
    let (spec, ps, train, _) = mlp_setup();
    let grid = uniform_grid(11).unwrap();
    let scan = scan_segment(&ps[0], &ps[1], &grid, &spec, &train).unwrap();
    for (l, loss) in grid.iter().zip(&scan.losses) {
        let w: Vec<f64> = ps[0]
            .as_slice()
            .iter()
            .zip(ps[1].as_slice())
            .map(|(m, n)| l * m + (1.0 - l) * n)
            .collect();
        assert_eq!(*loss, forward_loss(&spec, &pv(&w), &train.full_batch()).unwrap().cross_entropy);
    }
}

#[test]
fn surface_matches_per_point_oracle() {
    let (spec, ps, train, val) = mlp_setup();
    let plane = build_plane(&ps[0], &ps[1], &ps[2]).unwrap();
    let ranges = SurfaceRanges::around_anchors(&plane, 0.2);
    let g = eval_surface(&plane, ranges, [5, 5], &spec, &train, &val).unwrap();
    let (u, v) = plane.basis();
    for (j, y) in g.ys.iter().enumerate() {
        for (i, x) in g.xs.iter().enumerate() {
            let w: Vec<f64> = (0..ps[0].len()).map(|k| ps[0][k] + x * u[k] + y * v[k]).collect();
            let tr = forward_loss(&spec, &pv(&w), &train.full_batch()).unwrap().cross_entropy;
            let va = forward_loss(&spec, &pv(&w), &val.full_batch()).unwrap().cross_entropy;
            assert!((g.train_loss[j][i] - tr).abs() < 1e-12);
            assert!((g.val_loss[j][i] - va).abs() < 1e-12);
        }
    }
}

#[test]
fn trained_bend_lies_in_its_own_plane() {
    let (spec, ps, train, _) = mlp_setup();
    let chain = init_bend(&ps[0], &ps[1]).unwrap();
    let out = train_curve(&chain, &spec, &train, 40, &CurveTrainOptions::default(), &RngStream::new(1, "c"))
        .unwrap();
    let plane = build_plane(out.w_a(), out.w_b(), out.theta()).unwrap();
    let p = project_iterate(&plane, out.theta()).unwrap();
    assert!(p.residual_norm < 1e-10);
    // and the midpoint of the endpoints too, which is an affine combination
    let mid = axpy_combine(&[0.5, 0.5], &[out.w_a(), out.w_b()]).unwrap();
    assert!(project_iterate(&plane, &mid).unwrap().residual_norm < 1e-10);
}
