use blockcs::model::ActivationPattern;
use blockcs::signature::{MatrixParams, StructuredMatrix};
use blockcs::sketch::{count_from_estimate, decode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_patterns(l: usize, d: usize, max_pop: usize) -> Vec<ActivationPattern> {
    let n = l * d;
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize <= max_pop)
        .map(|mask| {
            let bits = (0..n).map(|i| mask >> i & 1 == 1).collect();
            ActivationPattern::from_bits(l, d, bits).unwrap()
        })
        .collect()
}

#[test]
fn sparse_measure_matches_dense_product_exhaustively() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for l in 1..=3 {
        for d in 1..=3 {
            for r in 1..=3 {
                for t in 1..=2 {
                    let patterns = all_patterns(l, d, 3);
                    for _ in 0..3 {
                        let m = StructuredMatrix::sample(MatrixParams::new(r, t, l, d, 1.5).unwrap(), &mut rng).unwrap();
                        let dense = m.to_dense();
                        for x in &patterns {
                            let fast = m.measure(x).unwrap();
                            let slow: Vec<f64> = dense
                                .iter()
                                .map(|row| row.iter().zip(x.bits()).filter(|(_, &b)| b).map(|(&a, _)| a).sum())
                                .collect();
                            assert_eq!(fast, slow);
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn signatures_reconstruct_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = StructuredMatrix::sample(MatrixParams::new(5, 4, 6, 3, 1.0).unwrap(), &mut rng).unwrap();
    let dense = m.to_dense();
    for i in 0..m.devices() {
        let col = m.signature(i).unwrap();
        let mut full = vec![0.0; m.measurements()];
        for (&row, &v) in col.rows.iter().zip(&col.values) {
            full[row] = v;
        }
        let expect: Vec<f64> = dense.iter().map(|row| row[i]).collect();
        assert_eq!(full, expect);
    }
}

#[test]
fn storage_is_independent_of_block_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [1, 10, 1000] {
        let m = StructuredMatrix::<f64>::sample(MatrixParams::new(16, 14, 100, d, 1.0).unwrap(), &mut rng).unwrap();
        assert_eq!(m.stored_cells(), 14 * 100);
    }
}

#[test]
fn band_rows_are_uniform() {
    // Chi-square over 8 band rows from 80k draws; 99.9% critical value at 7 dof is 24.3.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut hist = [0usize; 8];
    let mut signs = 0i64;
    for _ in 0..100 {
        let m = StructuredMatrix::<f64>::sample(MatrixParams::new(8, 20, 40, 2, 1.0).unwrap(), &mut rng).unwrap();
        for t in 0..20 {
            for l in 0..40 {
                hist[m.band_row(t, l)] += 1;
                signs += m.sign(t, l).signum() as i64;
            }
        }
    }
    let expect = 80_000.0 / 8.0;
    let chi2: f64 = hist.iter().map(|&h| (h as f64 - expect).powi(2) / expect).sum();
    assert!(chi2 < 24.3, "chi2 {chi2}");
    assert!(signs.abs() < 4 * 283, "sign bias {signs}");
}

#[test]
fn any_positive_alpha_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for alpha in [0.5, 2.0, 1.0] {
        let m = StructuredMatrix::sample(MatrixParams::new(64, 9, 4, 6, alpha).unwrap(), &mut rng).unwrap();
        let x = ActivationPattern::from_supports(4, 6, vec![vec![0, 5], vec![], vec![1, 2, 3], vec![]]).unwrap();
        let det = decode(&m, &m.measure(&x).unwrap(), alpha * alpha / 2.0).unwrap();
        assert_eq!(det.counts(), &[2, 0, 3, 0]);
        assert_eq!(count_from_estimate(3.0 * alpha * alpha, alpha, 6), 3);
    }
}

#[test]
fn sidecar_round_trip_through_a_file() {
    use std::io::{BufReader, Seek, SeekFrom};
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = StructuredMatrix::sample(MatrixParams::new(7, 5, 9, 4, 0.5).unwrap(), &mut rng).unwrap();
    let mut file = tempfile::tempfile().unwrap();
    m.write_sidecar(&mut file).unwrap();
    file.seek(SeekFrom::Start(0)).unwrap();
    let back = StructuredMatrix::<f64>::read_sidecar(BufReader::new(file)).unwrap();
    assert_eq!(back.to_dense(), m.to_dense());
}
