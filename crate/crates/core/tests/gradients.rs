mod common;

use errmodel::regress::{loss_and_grad, Hyper, Mode, TrainSeq};

#[test]
fn analytic_gradients_match_central_differences() {
    for (family, mode, worst) in common::gradient_suite(20, 17) {
        assert!(worst <= 1e-5, "{family} {mode:?}: relative gradient error {worst:e}");
    }
}

#[test]
fn perfect_fit_has_zero_loss_and_gradient() {
    let h = Hyper::Arx { alpha: 0.0 };
    let arch = h.arch(2);
    let p = vec![0.5, -1.0, 0.8, 0.1];
    let feats = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let mut y = 0.3;
    let targets: Vec<f64> = feats
        .iter()
        .map(|f| {
            y = 0.5 * f[0] - f[1] + 0.8 * y + 0.1;
            y
        })
        .collect();
    let data = [TrainSeq { feats, targets, y0: 0.3 }];
    let (l, g) = loss_and_grad(&arch, &p, &data, Mode::Rt, 0.0).unwrap();
    assert!(l < 1e-28);
    assert!(g.iter().all(|v| v.abs() < 1e-14));
}
