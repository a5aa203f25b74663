//! Distributional checks on genome sampling and mutation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use nca_lab::evolution::{mutate_at, random_genome, IdAllocator, MutationParams};
use nca_lab::nca::{Genome, NUM_PARAMS};

#[test]
fn random_genomes_are_centred_and_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut ids = IdAllocator::default();
    let mut values = Vec::new();
    for _ in 0..1000 {
        let g = random_genome(&mut rng, &mut ids);
        values.extend(g.params());
    }
    assert!(values.iter().all(|v| (-1.0..=1.0).contains(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!(mean.abs() < 0.02, "mean {mean}");
}

#[test]
fn same_seed_same_genome() {
    let a = random_genome(&mut ChaCha8Rng::seed_from_u64(1), &mut IdAllocator::default());
    let b = random_genome(&mut ChaCha8Rng::seed_from_u64(1), &mut IdAllocator::default());
    let c = random_genome(&mut ChaCha8Rng::seed_from_u64(2), &mut IdAllocator::default());
    assert_eq!(a, b);
    assert_ne!(a.params(), c.params());
}

#[test]
fn mutation_touches_exactly_one_parameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut ids = IdAllocator::starting_at(1);
    let parent = Genome::zeros(0);
    for _ in 0..500 {
        let (child, index) = mutate_at(&parent, &mut rng, &mut ids, &MutationParams::default());
        let changed: Vec<usize> = (0..NUM_PARAMS).filter(|&i| child.param(i) != 0.0).collect();
        assert_eq!(changed, vec![index]);
        assert_eq!(child.parent_id, Some(0));
    }
}

#[test]
fn mutation_index_is_uniform() {
    let draws = 55_000;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut ids = IdAllocator::starting_at(1);
    let parent = Genome::zeros(0);
    let mut counts = [0u64; NUM_PARAMS];
    for _ in 0..draws {
        counts[mutate_at(&parent, &mut rng, &mut ids, &MutationParams::default()).1] += 1;
    }
    let expected = draws as f64 / NUM_PARAMS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((NUM_PARAMS - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn mutation_noise_has_the_configured_scale() {
    // from a zero parent the clamp at +-1 hits with P(|N(0, 0.5)| > 1) = 0.0455
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut ids = IdAllocator::starting_at(1);
    let parent = Genome::zeros(0);
    let mut clamped = 0usize;
    let mut sum = 0.0;
    for _ in 0..n {
        let (child, i) = mutate_at(&parent, &mut rng, &mut ids, &MutationParams::default());
        let v = child.param(i);
        sum += v;
        clamped += usize::from(v.abs() == 1.0);
    }
    let frac = clamped as f64 / n as f64;
    let sd = (0.0455f64 * 0.9545 / n as f64).sqrt();
    assert!((frac - 0.0455).abs() < 5.0 * sd, "clamped fraction {frac}");
    assert!((sum / n as f64).abs() < 5.0 * 0.5 / (n as f64).sqrt());
}
