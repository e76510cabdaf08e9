use blockcs::inblock::{modified_omp, DeviceSideProblem};
use blockcs::oracle::{binomial, exhaustive_block_decode, exhaustive_inblock_decode, OracleBudget};
use blockcs::signature::{MatrixParams, StructuredMatrix};
use blockcs::sketch::decode;
use blockcs::{ActivationPattern, Cplx};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn unambiguous_instance_matches_the_sketch_decoder() {
    // L=2, d=2 on disjoint rows: only the true counts explain y.
    let p = MatrixParams::new(2, 1, 2, 2, 1.0).unwrap();
    let m = StructuredMatrix::from_parts(p, vec![0, 1], vec![1.0, -1.0]).unwrap();
    let x = ActivationPattern::from_supports(2, 2, vec![vec![0, 1], vec![1]]).unwrap();
    let y = m.measure(&x).unwrap();
    let sols = exhaustive_block_decode(&m, &y, 1e-9, &OracleBudget::default()).unwrap();
    assert_eq!(sols, vec![vec![2, 1]]);
    assert_eq!(decode(&m, &y, 0.5).unwrap().counts(), sols[0].as_slice());
}

#[test]
fn zero_observation_admits_zero_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = StructuredMatrix::<f64>::sample(MatrixParams::new(16, 9, 3, 3, 1.0).unwrap(), &mut rng).unwrap();
    let sols = exhaustive_block_decode(&m, &vec![0.0; m.measurements()], 1e-9, &OracleBudget::default()).unwrap();
    assert_eq!(sols[0], vec![0, 0, 0]);
}

#[test]
fn ambiguous_instance_contains_the_decoder_answer() {
    let p = MatrixParams::new(1, 1, 2, 1, 1.0).unwrap();
    let m = StructuredMatrix::from_parts(p, vec![0, 0], vec![1.0, -1.0]).unwrap();
    let x = ActivationPattern::from_supports(2, 1, vec![vec![0], vec![0]]).unwrap();
    let y = m.measure(&x).unwrap();
    assert_eq!(y, vec![0.0]);
    let sols = exhaustive_block_decode(&m, &y, 1e-9, &OracleBudget::default()).unwrap();
    assert!(sols.len() > 1);
    let ours = decode(&m, &y, 0.5).unwrap();
    assert!(sols.iter().any(|s| s.as_slice() == ours.counts()));
}

#[test]
fn inblock_oracle_counts_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let columns: Vec<Vec<Cplx<f64>>> = (0..8)
        .map(|_| (0..6).map(|_| Cplx::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect())
        .collect();
    let y: Vec<Cplx<f64>> = (0..6).map(|u| columns[1][u] + columns[4][u]).collect();
    let p = DeviceSideProblem::new(0, (0..6).collect(), y, columns, 2).unwrap();
    let o = exhaustive_inblock_decode(&p, 2, &OracleBudget::default()).unwrap();
    assert_eq!(o.evaluated, binomial(8, 2));
    assert_eq!(o.support, vec![1, 4]);
    assert!(o.residual_norm < 1e-9);
}

#[test]
fn omp_success_implies_oracle_success() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let budget = OracleBudget::default();
    let mut omp_hits = 0;
    for _ in 0..10_000 {
        let d = rng.random_range(2..=8);
        let rows = rng.random_range(2..=10);
        // k < rows keeps the true support the only zero-residual one.
        let k = rng.random_range(1..=d.min(rows - 1));
        let columns: Vec<Vec<Cplx<f64>>> = (0..d)
            .map(|_| (0..rows).map(|_| Cplx::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect())
            .collect();
        let mut truth = rand::seq::index::sample(&mut rng, d, k).into_vec();
        truth.sort_unstable();
        let y: Vec<Cplx<f64>> = (0..rows).map(|u| truth.iter().map(|&j| columns[j][u]).sum()).collect();
        let p = DeviceSideProblem::new(0, (0..rows).collect(), y, columns, k).unwrap();
        if modified_omp(&p).unwrap().support == truth {
            omp_hits += 1;
            assert_eq!(exhaustive_inblock_decode(&p, k, &budget).unwrap().support, truth);
        }
    }
    assert!(omp_hits > 5_000);
}
