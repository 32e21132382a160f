mod common;

use common::{fd_max_rel_error, pv, DoubleWell};
use modeconn::curve::{
    curve_grad, init_bend, sweep_curve, train_curve, uniform_grid, CurveChain, CurveTrainOptions,
    CurveTrainer,
};
use modeconn::data::{make_gaussians, make_spirals, Split};
use modeconn::net::{backward, forward_loss, init_params, Activation, MlpObjective, MlpSpec, Objective};
use modeconn::rng::RngStream;
use modeconn::{axpy_combine, ParamVector};

fn setup(seed: u64) -> (MlpSpec, CurveChain, modeconn::data::Dataset, modeconn::data::Dataset) {
    let spec = MlpSpec::new(vec![2, 6, 5, 3], Activation::Tanh).unwrap();
    let mut s = RngStream::new(seed, "curve-test");
    let a = init_params(&spec, &mut s).unwrap();
    let b = init_params(&spec, &mut s).unwrap();
    let theta = init_params(&spec, &mut s).unwrap();
    let chain = CurveChain::from_parts(a, b, theta).unwrap();
    let train = make_gaussians(24, 3, 2, 2.0, &mut s, Split::Train).unwrap();
    let val = make_gaussians(24, 3, 2, 2.0, &mut s, Split::Validation).unwrap();
    (spec, chain, train, val)
}

#[test]
fn grid_unbiasedness_identity() {
    let (spec, chain, train, _) = setup(1);
    let batch = train.full_batch();
    let obj = MlpObjective::new(&spec, &batch);
    let grid = uniform_grid(33).unwrap();
    let n = grid.len() as f64;

    // route A: average of per-t bend gradients
    let mut mean_a = ParamVector::zeros(chain.dim());
    for &t in &grid {
        let (_, g) = curve_grad(&chain, t, &obj).unwrap();
        mean_a.axpy_in_place(1.0 / n, &g).unwrap();
    }

    // route B: Jacobian of φ in θ read off φ itself (zero endpoints, unit
    // bend), applied to the weight gradient of the mean grid loss
    let probe = CurveChain::from_parts(
        ParamVector::zeros(chain.dim()),
        ParamVector::zeros(chain.dim()),
        pv(&vec![1.0; chain.dim()]),
    )
    .unwrap();
    let mut mean_b = ParamVector::zeros(chain.dim());
    for &t in &grid {
        let jac = probe.phi(t).unwrap();
        let (_, gw) = backward(&spec, &chain.phi(t).unwrap(), &batch).unwrap();
        let contrib: Vec<f64> = jac.as_slice().iter().zip(gw.as_slice()).map(|(j, g)| j * g).collect();
        mean_b.axpy_in_place(1.0 / n, &pv(&contrib)).unwrap();
    }
    for i in 0..chain.dim() {
        assert!((mean_a[i] - mean_b[i]).abs() < 1e-12, "coord {i}");
    }

    // and the mean grid loss is what that gradient differentiates
    let mean_loss = |theta: &ParamVector| {
        let c = CurveChain::from_parts(chain.w_a().clone(), chain.w_b().clone(), theta.clone()).unwrap();
        grid.iter().map(|&t| obj.loss(&c.phi(t).unwrap()).unwrap()).sum::<f64>() / n
    };
    assert!(fd_max_rel_error(chain.theta(), &mean_a, 1e-5, mean_loss) < 1e-5);
}

#[test]
fn curve_grad_matches_finite_differences() {
    for seed in 0..5 {
        let (spec, chain, train, _) = setup(10 + seed);
        let batch = train.batch(&[0, 3, 5, 7, 11, 13]).unwrap();
        let obj = MlpObjective::new(&spec, &batch);
        for t in [0.1, 0.37, 0.5, 0.81] {
            let (_, g) = curve_grad(&chain, t, &obj).unwrap();
            let err = fd_max_rel_error(chain.theta(), &g, 1e-5, |theta| {
                let c = CurveChain::from_parts(chain.w_a().clone(), chain.w_b().clone(), theta.clone())
                    .unwrap();
                obj.loss(&c.phi(t).unwrap()).unwrap()
            });
            assert!(err < 1e-5, "seed {seed} t {t}: {err}");
        }
    }
}

#[test]
fn endpoints_survive_training_bit_exactly() {
    let (spec, chain, train, _) = setup(3);
    let opts = CurveTrainOptions {
        lr: 0.1,
        momentum: 0.9,
        weight_decay: 1e-3,
        batch_size: 5,
        augment_sigma: 0.05,
    };
    let out = train_curve(&chain, &spec, &train, 50, &opts, &RngStream::new(4, "c")).unwrap();
    let bits = |p: &ParamVector| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(out.w_a()), bits(chain.w_a()));
    assert_eq!(bits(out.w_b()), bits(chain.w_b()));
    assert_ne!(out.theta(), chain.theta());
}

#[test]
fn training_is_deterministic() {
    let (spec, chain, train, _) = setup(5);
    let opts = CurveTrainOptions::default();
    let s = RngStream::new(6, "c");
    let a = train_curve(&chain, &spec, &train, 30, &opts, &s).unwrap();
    let b = train_curve(&chain, &spec, &train, 30, &opts, &s).unwrap();
    assert_eq!(a, b);
    let c = train_curve(&chain, &spec, &train, 30, &opts, &RngStream::new(7, "c")).unwrap();
    assert_ne!(a, c);
}

fn trained_double_well(dim: usize, w_a: &[f64], w_b: &[f64], seed: u64) -> CurveChain {
    let obj = DoubleWell { dim };
    let chain = init_bend(&pv(w_a), &pv(w_b)).unwrap();
    let opts = CurveTrainOptions {
        lr: 0.02,
        ..Default::default()
    };
    let mut trainer = CurveTrainer::new(chain, &opts, &RngStream::new(seed, "well")).unwrap();
    for _ in 0..4000 {
        trainer.step(&obj).unwrap();
    }
    trainer.into_chain()
}

#[test]
fn double_well_1d_grid_max_below_segment_midpoint() {
    // Any path from −1 to 1 crosses 0 where the loss is 1; the claim holds
    // on the 101-point grid because the trained bend moves the crossing off
    // the grid.
    let obj = DoubleWell { dim: 1 };
    let segment_mid = obj.loss(&pv(&[0.0])).unwrap();
    assert_eq!(segment_mid, 1.0);
    for seed in 0..4 {
        let chain = trained_double_well(1, &[-1.0], &[1.0], seed);
        let theta = chain.theta()[0];
        assert!((0.8..1.4).contains(&theta.abs()), "seed {seed}: θ = {theta}");
        let max = uniform_grid(101)
            .unwrap()
            .iter()
            .map(|&t| obj.loss(&chain.phi(t).unwrap()).unwrap())
            .fold(f64::MIN, f64::max);
        assert!(max < segment_mid, "seed {seed}: grid max {max}");
    }
}

#[test]
fn double_well_ring_curve_avoids_the_hump() {
    // In 2-D the wells form the unit circle; the straight segment between
    // two points on it dips through the centre.
    let obj = DoubleWell { dim: 2 };
    let a = [-0.95f64.sqrt(), 0.05f64.sqrt()];
    let b = [0.95f64.sqrt(), 0.05f64.sqrt()];
    let seg_max = uniform_grid(101)
        .unwrap()
        .iter()
        .map(|&l| obj.loss(&axpy_combine(&[l, 1.0 - l], &[&pv(&a), &pv(&b)]).unwrap()).unwrap())
        .fold(f64::MIN, f64::max);
    assert!(seg_max > 0.9);
    let chain = trained_double_well(2, &a, &b, 1);
    let curve_max = uniform_grid(1001)
        .unwrap()
        .iter()
        .map(|&t| obj.loss(&chain.phi(t).unwrap()).unwrap())
        .fold(f64::MIN, f64::max);
    assert!(curve_max < 0.5 * seg_max, "curve {curve_max} vs segment {seg_max}");
}

#[test]
fn sweep_endpoints_match_direct_evaluation() {
    let (spec, chain, train, val) = setup(8);
    let sweep = sweep_curve(&chain, &spec, &train, &val, &[0.0, 1.0]).unwrap();
    for (row, w) in sweep.rows.iter().zip([chain.w_a(), chain.w_b()]) {
        let tr = forward_loss(&spec, w, &train.full_batch()).unwrap();
        let va = forward_loss(&spec, w, &val.full_batch()).unwrap();
        assert_eq!(row.train_loss, tr.cross_entropy);
        assert_eq!(row.train_acc, tr.accuracy);
        assert_eq!(row.val_loss, va.cross_entropy);
        assert_eq!(row.val_acc, va.accuracy);
    }
    assert!(sweep_curve(&chain, &spec, &train, &val, &[]).is_err());
}

#[test]
fn degenerate_chain_gives_constant_rows() {
    let (spec, chain, train, val) = setup(9);
    let w = chain.w_a().clone();
    let flat = CurveChain::from_parts(w.clone(), w.clone(), w).unwrap();
    let sweep = sweep_curve(&flat, &spec, &train, &val, &uniform_grid(21).unwrap()).unwrap();
    let first = sweep.rows[0];
    for r in &sweep.rows {
        assert_eq!((r.train_loss, r.train_acc, r.val_loss, r.val_acc), (first.train_loss, first.train_acc, first.val_loss, first.val_acc));
    }
}

#[test]
fn sweeps_agree_on_shared_grid_points() {
    let (spec, chain, train, val) = setup(10);
    let coarse = sweep_curve(&chain, &spec, &train, &val, &uniform_grid(21).unwrap()).unwrap();
    let fine = sweep_curve(&chain, &spec, &train, &val, &uniform_grid(41).unwrap()).unwrap();
    for (i, r) in coarse.rows.iter().enumerate() {
        assert_eq!(*r, fine.rows[2 * i]);
    }
    let csv = coarse.to_csv();
    assert!(csv.starts_with("t,train_loss,train_acc,val_loss,val_acc\n"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn spiral_curve_reduces_mean_loss() {
    let spec = MlpSpec::new(vec![2, 16, 2], Activation::Relu).unwrap();
    let mut s = RngStream::new(12, "spiral-curve");
    let data = make_spirals(100, 1.0, 0.0, &mut s, Split::Train).unwrap();
    let a = init_params(&spec, &mut s).unwrap();
    let b = init_params(&spec, &mut s).unwrap();
    let chain = init_bend(&a, &b).unwrap();
    let grid = uniform_grid(21).unwrap();
    let before = sweep_curve(&chain, &spec, &data, &data, &grid).unwrap();
    let out = train_curve(&chain, &spec, &data, 200, &CurveTrainOptions::default(), &s).unwrap();
    let after = sweep_curve(&out, &spec, &data, &data, &grid).unwrap();
    let mean = |sw: &modeconn::curve::CurveSweep| sw.rows.iter().map(|r| r.train_loss).sum::<f64>();
    assert!(mean(&after) < mean(&before));
}
