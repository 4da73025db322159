//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use errmodel::regress::{loss_and_grad, Family, Hyper, Mode, TrainSeq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every admissible (family, mode) pair of the trainable families.
pub const TRAINABLE: [(Family, Mode); 8] = [
    (Family::Ann, Mode::Nonrecursive),
    (Family::Arx, Mode::Nrt),
    (Family::Arx, Mode::Rt),
    (Family::AnnI, Mode::Nrt),
    (Family::AnnI, Mode::Rt),
    (Family::Larx, Mode::Rt),
    (Family::Rnn, Mode::Rt),
    (Family::Lstm, Mode::Rt),
];

pub fn batch(rng: &mut ChaCha8Rng, n_in: usize) -> Vec<TrainSeq> {
    (0..2)
        .map(|_| {
            let len = rng.random_range(1..=6);
            TrainSeq {
                feats: (0..len).map(|_| (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
                targets: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
                y0: rng.random_range(-0.5..0.5),
            }
        })
        .collect()
}

pub fn random_hyper(rng: &mut ChaCha8Rng, family: Family) -> Hyper {
    let alpha = [0.0, 0.01, 0.1][rng.random_range(0..3)];
    match family {
        Family::Arx => Hyper::Arx { alpha },
        Family::Larx => Hyper::Larx {
            latent: rng.random_range(1..=6),
            alpha,
        },
        f => Hyper::network(f, rng.random_range(1..=2), rng.random_range(1..=6), alpha),
    }
}

/// Worst relative error between the analytic gradient and central differences.
pub fn worst_gradient_error(rng: &mut ChaCha8Rng, hyper: Hyper, mode: Mode) -> f64 {
    let n_in = rng.random_range(1..=8);
    let arch = hyper.arch(n_in);
    let mut p = arch.init(rng);
    // Non-zero biases exercise every branch.
    for v in p.iter_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let data = batch(rng, n_in);
    let alpha = hyper.alpha();
    let (_, g) = loss_and_grad(&arch, &p, &data, mode, alpha).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] += h;
        let (lp, _) = loss_and_grad(&arch, &q, &data, mode, alpha).unwrap();
        q[i] -= 2.0 * h;
        let (lm, _) = loss_and_grad(&arch, &q, &data, mode, alpha).unwrap();
        let fd = (lp - lm) / (2.0 * h);
        let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3);
        worst = worst.max(rel);
    }
    worst
}

/// Largest relative gradient error over `instances` random problems per
/// admissible (family, mode) pair.
pub fn gradient_suite(instances: usize, seed: u64) -> Vec<(Family, Mode, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TRAINABLE
        .iter()
        .map(|&(family, mode)| {
            let worst = (0..instances)
                .map(|_| {
                    let h = random_hyper(&mut rng, family);
                    worst_gradient_error(&mut rng, h, mode)
                })
                .fold(0.0, f64::max);
            (family, mode, worst)
        })
        .collect()
}
