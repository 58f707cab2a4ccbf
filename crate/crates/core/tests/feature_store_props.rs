use std::fmt::Write;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specprobe_core::feature_store::{
    decode_ftrx, encode_ftrx, import_csv_reader, read_ftrx, read_ftrx_header, write_ftrx, HEADER_LEN,
};
use specprobe_core::FeatureMatrix;

fn matrix_strategy() -> impl Strategy<Value = FeatureMatrix> {
    (1usize..20, 1usize..20, 2u32..6).prop_flat_map(|(n, d, c)| {
        (
            prop::collection::vec(-1e6f32..1e6, n * d),
            prop::collection::vec(0..c, n),
        )
            .prop_map(move |(data, labels)| FeatureMatrix::new(n, d, c, data, labels).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ftrx_round_trips(m in matrix_strategy()) {
        let bytes = encode_ftrx(&m);
        prop_assert_eq!(bytes.len(), HEADER_LEN + 4 * m.n() * m.d() + 4 * m.n());
        let back = decode_ftrx(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode_ftrx(&back), bytes);
    }

    #[test]
    fn csv_import_matches_written_values(m in matrix_strategy()) {
        let mut text = String::new();
        for j in 0..m.d() {
            let _ = write!(text, "f{j},");
        }
        text.push_str("label\n");
        for i in 0..m.n() {
            for v in m.row(i) {
                let _ = write!(text, "{v},");
            }
            let _ = writeln!(text, "{}", m.labels()[i]);
        }
        let imported = import_csv_reader(text.as_bytes(), "label").unwrap().matrix;
        prop_assert_eq!(imported.data(), m.data());
        prop_assert_eq!(imported.labels(), m.labels());
    }
}

#[test]
fn rewrite_of_random_matrix_is_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(128);
    let (n, d) = (128, 64);
    let data = (0..n * d).map(|_| rng.random_range(-5.0f32..5.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..10)).collect();
    let m = FeatureMatrix::new(n, d, 10, data, labels).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.ftrx");
    let second = dir.path().join("b.ftrx");
    write_ftrx(&m, &first).unwrap();
    write_ftrx(&read_ftrx(&first).unwrap(), &second).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    let header = read_ftrx_header(&second).unwrap();
    assert_eq!((header.n, header.d, header.num_classes), (128, 64, 10));
}
