use proptest::prelude::*;

use errmodel::datagen::{sample_parameters, split_indices, SplitConfig};
use errmodel::dynsys::{build_advection_diffusion, build_burgers_fom, prolong, DynamicalSystem, ParamVector, ProlongationOp};
use errmodel::eval::{error_bound_sequence, fvu, BoundParams};
use errmodel::integrator::MultistepScheme;
use errmodel::noise::{
    fit_ar1, fit_gaussian, fit_laplacian, noise_scale_sequence, standardize_errors, validation_frequency, NoiseModel,
};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn fd_jacobian_error(sys: &dyn DynamicalSystem, x: &[f64], mu: &ParamVector) -> f64 {
    let j = sys.jacobian(x, 0.0, mu).to_dense();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let vp = sys.velocity(&xp, 0.0, mu);
        let vm = sys.velocity(&xm, 0.0, mu);
        for i in 0..x.len() {
            let fd = (vp[i] - vm[i]) / (2.0 * h);
            worst = worst.max((fd - j[(i, k)]).abs() / (1.0 + j[(i, k)].abs()));
        }
    }
    worst
}

fn sequences(max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2..max_len), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn advection_diffusion_velocity_is_linear(
        x in prop::collection::vec(-2.0..2.0f64, 20),
        y in prop::collection::vec(-2.0..2.0f64, 20),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        m0 in -2.0..-0.1f64,
        m1 in -0.1..1.0f64,
    ) {
        let sys = build_advection_diffusion(21).unwrap();
        let mu = ParamVector::new(vec![m0, m1]);
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let vz = sys.velocity(&z, 0.0, &mu);
        let vx = sys.velocity(&x, 0.0, &mu);
        let vy = sys.velocity(&y, 0.0, &mu);
        for i in 0..z.len() {
            prop_assert!(rel_close(vz[i], a * vx[i] + b * vy[i], 1e-10));
        }
    }

    #[test]
    fn advection_diffusion_jacobian_matches_differences(
        x in prop::collection::vec(-2.0..2.0f64, 10),
        m0 in -2.0..-0.1f64,
        m1 in -0.1..1.0f64,
    ) {
        let sys = build_advection_diffusion(11).unwrap();
        prop_assert!(fd_jacobian_error(&sys, &x, &ParamVector::new(vec![m0, m1])) < 1e-6);
    }

    #[test]
    fn burgers_jacobian_matches_differences(
        u in prop::collection::vec(-3.0..6.0f64, 20),
        m2 in 3.5..4.5f64,
    ) {
        let sys = build_burgers_fom(5.0).unwrap();
        let mu = ParamVector::new(vec![0.02, 0.02, m2, 1.5]);
        prop_assert!(fd_jacobian_error(&sys, &u, &mu) < 1e-6);
    }

    #[test]
    fn prolongation_preserves_constants_and_order(
        c in -10.0..10.0f64,
        steps in prop::collection::vec(0.0..2.0f64, 5),
    ) {
        let coarse = build_burgers_fom(20.0).unwrap();
        let fine = build_burgers_fom(2.0).unwrap();
        let op = errmodel::dynsys::burgers_prolongation(&coarse, &fine).unwrap();
        let mu = ParamVector::new(vec![0.02, 0.02, 4.0, 1.5]);
        let flat = prolong(&op, &[c; 5], &mu).unwrap();
        prop_assert!(flat.iter().all(|v| rel_close(*v, c, 1e-12)));
        let mut acc = 0.0;
        let rising: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
        let up = prolong(&op, &rising, &mu).unwrap();
        prop_assert!(up.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn interpolation_rows_sum_to_one(fine in prop::collection::vec(0.0..10.0f64, 3..30)) {
        let mut fine = fine;
        fine.sort_by(f64::total_cmp);
        fine.dedup();
        prop_assume!(fine.len() >= 3);
        let coarse = vec![fine[0], fine[fine.len() / 2], fine[fine.len() - 1]];
        prop_assume!(coarse[0] < coarse[1] && coarse[1] < coarse[2]);
        let op = ProlongationOp::linear_interpolation(&coarse, &fine).unwrap();
        for row in &op.rows {
            let s: f64 = row.iter().map(|r| r.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fvu_is_affine_invariant(
        pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..40),
        a in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64],
        b in -10.0..10.0f64,
    ) {
        let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let base = fvu(&truth, &pred);
        prop_assume!(base.is_ok());
        let t2: Vec<f64> = truth.iter().map(|v| a * v + b).collect();
        let p2: Vec<f64> = pred.iter().map(|v| a * v + b).collect();
        prop_assert!(rel_close(fvu(&t2, &p2).unwrap(), base.unwrap(), 1e-9));
    }

    #[test]
    fn bound_grows_with_residuals(
        res in prop::collection::vec(0.0..1.0f64, 1..30),
        bump in prop::collection::vec(0.0..1.0f64, 30),
        e0 in 0.0..1.0f64,
        kappa in 0.0..50.0f64,
    ) {
        let p = BoundParams::new(kappa, MultistepScheme::implicit_euler(), 1e-3).unwrap();
        let lower = error_bound_sequence(&res, &[e0], &p).unwrap();
        let bigger: Vec<f64> = res.iter().zip(&bump).map(|(r, d)| r + d).collect();
        let upper = error_bound_sequence(&bigger, &[e0], &p).unwrap();
        prop_assert!(lower.iter().zip(&upper).all(|(l, u)| *l <= *u));
        prop_assert!(lower.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn noise_fits_ignore_ordering(seqs in sequences(12), rot in 0usize..5) {
        let flat: Vec<f64> = seqs.concat();
        let mut shuffled = flat.clone();
        shuffled.reverse();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        for fit in [fit_gaussian, fit_laplacian] {
            match (scale_of(fit(&flat)), scale_of(fit(&shuffled))) {
                (Some(a), Some(b)) => prop_assert!(rel_close(a, b, 1e-12)),
                (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
            }
        }
        let mut reordered = seqs.clone();
        reordered.reverse();
        let (a, b) = (fit_ar1(&seqs), fit_ar1(&reordered));
        if let (Ok(NoiseModel::Ar1 { c: c1, variance: v1 }), Ok(NoiseModel::Ar1 { c: c2, variance: v2 })) = (a, b) {
            prop_assert!(rel_close(c1, c2, 1e-12) && rel_close(v1, v2, 1e-12));
        }
    }

    #[test]
    fn coverage_is_monotone_in_level(
        seqs in sequences(20),
        levels in prop::collection::vec(0.01..0.99f64, 2..6),
        which in 0usize..3,
    ) {
        let model = match which {
            0 => NoiseModel::Gaussian { variance: 2.0 },
            1 => NoiseModel::Laplacian { scale: 1.3 },
            _ => NoiseModel::Ar1 { c: 0.6, variance: 1.5 },
        };
        let mut levels = levels;
        levels.sort_by(f64::total_cmp);
        let w: Vec<f64> = levels.iter().map(|c| validation_frequency(&model, &seqs, *c).unwrap()).collect();
        prop_assert!(w.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn ar1_scale_approaches_stationary(c in -0.95..0.95f64, variance in 0.01..10.0f64) {
        let model = NoiseModel::Ar1 { c, variance };
        let s = noise_scale_sequence(&model, 2000);
        let stationary = (variance / (1.0 - c * c)).sqrt();
        prop_assert!(rel_close(*s.last().unwrap(), stationary, 1e-9));
        prop_assert!(s.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    }

    #[test]
    fn standardization_round_trips(seqs in sequences(15), c in -0.9..0.9f64, variance in 0.1..4.0f64) {
        let model = NoiseModel::Ar1 { c, variance };
        let z = standardize_errors(&model, &seqs);
        let horizon = seqs.iter().map(Vec::len).max().unwrap();
        let scales = noise_scale_sequence(&model, horizon);
        let back: Vec<f64> = {
            let mut it = z.iter();
            seqs.iter()
                .flat_map(|s| (0..s.len()).map(|k| it.next().unwrap() * scales[k]).collect::<Vec<_>>())
                .collect()
        };
        for (a, b) in seqs.concat().iter().zip(&back) {
            prop_assert!(rel_close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn splits_partition_the_instances(n_val in 1usize..6, n_test in 1usize..20, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let n_noise_train = (frac * n_test as f64) as usize;
        let cfg = SplitConfig { n_train: 4 * n_val, n_val, n_test, n_noise_train, seed };
        let s = split_indices(cfg.total(), &cfg).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..cfg.total()).collect::<Vec<_>>());
        let mut noise: Vec<usize> = s.noise_train.iter().chain(&s.noise_test).copied().collect();
        noise.sort_unstable();
        prop_assert_eq!(noise, s.test.clone());
        prop_assert_eq!(s.noise_train.len(), n_noise_train);
    }

    #[test]
    fn sampling_is_deterministic_and_in_domain(count in 1usize..40, seed in any::<u64>()) {
        let sys = build_burgers_fom(2.0).unwrap();
        let a = sample_parameters(sys.domain(), count, seed).unwrap();
        let b = sample_parameters(sys.domain(), count, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|m| sys.domain().contains(m.as_slice())));
    }
}

fn scale_of(m: errmodel::Result<NoiseModel>) -> Option<f64> {
    match m.ok()? {
        NoiseModel::Gaussian { variance } => Some(variance),
        NoiseModel::Laplacian { scale } => Some(scale),
        NoiseModel::Ar1 { .. } => None,
    }
}
