//! Analytic parameter gradients against central finite differences.

use ptoffset_core::features::FeatureMatrix;
use ptoffset_core::loss::{loss_and_grad, LossTerms};
use ptoffset_core::rng::{standard_normal, stream_rng, Stream};
use ptoffset_core::{OffsetNet, Vec3};
use rand::Rng;

fn total(net: &OffsetNet, f: &FeatureMatrix, gt: &[Vec3], terms: LossTerms) -> f64 {
    let (l, _) = loss_and_grad(net, f, gt, terms).unwrap();
    l.l_off
}

fn instance(seed: u64) -> (OffsetNet, FeatureMatrix, Vec<Vec3>) {
    let mut rng = stream_rng(seed, Stream::Init);
    let n = rng.gen_range(2..=16);
    let c = rng.gen_range(3..=6);
    let net = OffsetNet::new(c, 8, &mut rng).unwrap();
    let data = (0..n * c).map(|_| standard_normal(&mut rng)).collect();
    let f = FeatureMatrix::from_vec(n, c, data).unwrap();
    let gt = (0..n)
        .map(|_| {
            if rng.gen_bool(0.3) {
                Vec3::ZERO
            } else {
                Vec3::new(standard_normal(&mut rng), standard_normal(&mut rng), standard_normal(&mut rng)) * 0.1
            }
        })
        .collect();
    (net, f, gt)
}

fn check(terms: LossTerms, seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let (net, f, gt) = instance(seed);
        let (_, g) = loss_and_grad(&net, &f, &gt, terms).unwrap();
        for i in 0..net.param_count() {
            let theta = net.params()[i];
            let h = 1e-5 * theta.abs().max(1.0);
            let mut plus = net.clone();
            plus.params_mut()[i] = theta + h;
            let mut minus = net.clone();
            minus.params_mut()[i] = theta - h;
            let numeric = (total(&plus, &f, &gt, terms) - total(&minus, &f, &gt, terms)) / (2.0 * h);
            let analytic = g.as_slice()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "seed {seed} {}: analytic {analytic} numeric {numeric}", net.param_name(i));
        }
    }
}

#[test]
fn full_loss_gradients_match_finite_differences() {
    check(LossTerms::FULL, 0..20);
}

#[test]
fn single_term_gradients_match_finite_differences() {
    check(LossTerms::DIST_ONLY, 100..105);
    check(LossTerms::DIR_ONLY, 200..205);
}
