use std::collections::BTreeMap;

use auv_core::npy::{encode_npy, parse_npy, write_npy, Dtype};
use auv_core::records::{read_records, write_records, RecordsHeader, StatsSource};
use auv_core::spectrum::{log_range, AuvRecord};
use auv_core::tensor::{class_matrix, load_feature_volume, save_feature_volume, FeatureVolume};
use auv_core::Error;
use proptest::prelude::*;

fn shape4() -> impl Strategy<Value = [usize; 4]> {
    (1usize..4, 1usize..5, 1usize..5, 2usize..5).prop_map(|(c, d, h, w)| [c, d, h, w])
}

fn volume_data() -> impl Strategy<Value = ([usize; 4], Vec<f32>)> {
    shape4().prop_flat_map(|s| {
        let n: usize = s.iter().product();
        (Just(s), prop::collection::vec(-1e6f32..1e6, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn f64_arrays_round_trip(data in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..50)) {
        let bytes = encode_npy(Dtype::F64, &[data.len()], &data).unwrap();
        prop_assert_eq!(bytes.len() % 64, (data.len() * 8) % 64);
        let back = parse_npy(&bytes).unwrap();
        prop_assert_eq!(back.shape, vec![data.len()]);
        prop_assert!(back.data.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn volumes_round_trip_bit_exactly((shape, data) in volume_data()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.npy");
        let ids: Vec<u32> = (0..shape[0] as u32).map(|c| c * 3 + 1).collect();
        let wide: Vec<f64> = data.iter().map(|&v| v as f64).collect();
        let v = FeatureVolume::new("vol", ids.clone(), shape, wide).unwrap();
        save_feature_volume(&v, &path).unwrap();
        let back: FeatureVolume<f64> = load_feature_volume(&path, &ids).unwrap();
        prop_assert_eq!(&back, &v);
        let narrow: FeatureVolume<f32> = load_feature_volume(&path, &ids).unwrap();
        prop_assert!(narrow.data().iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
        let again = dir.path().join("again.npy");
        save_feature_volume(&narrow, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn uncentered_matrix_is_a_reshape((shape, data) in volume_data()) {
        let wide: Vec<f64> = data.iter().map(|&v| v as f64).collect();
        let v = FeatureVolume::new("v", (0..shape[0] as u32).collect(), shape, wide).unwrap();
        let last = shape[0] as u32 - 1;
        let m = class_matrix(&v, last, false).unwrap();
        prop_assert_eq!(m.rows(), shape[1]);
        prop_assert_eq!(m.cols(), shape[2] * shape[3]);
        let mut a: Vec<u64> = m.data().iter().map(|x| x.to_bits()).collect();
        let mut b: Vec<u64> = v.channel(last).unwrap().iter().map(|x| x.to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn centered_rows_sum_to_zero((shape, data) in volume_data()) {
        let wide: Vec<f64> = data.iter().map(|&v| v as f64).collect();
        let v = FeatureVolume::new("v", (0..shape[0] as u32).collect(), shape, wide).unwrap();
        let m = class_matrix(&v, 0, true).unwrap();
        let max = v.channel(0).unwrap().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for i in 0..m.rows() {
            let sum: f64 = m.row(i).iter().sum();
            prop_assert!(sum.abs() <= 1e-6 * m.cols() as f64 * max.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn records_round_trip(scales in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..20)) {
        let records: Vec<AuvRecord> = scales
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| AuvRecord {
                sample_id: format!("case_{i}"),
                per_class_scale: BTreeMap::from([(1, a), (2, b)]),
                sample_scale: a + b,
                auv: a,
            })
            .collect();
        let totals: Vec<f64> = records.iter().map(|r| r.sample_scale).collect();
        let header = RecordsHeader::new(
            1e-12,
            1e-12,
            true,
            None,
            log_range(&totals, 1e-12).unwrap(),
            StatsSource::Batch,
            records.len(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_records(&header, &records, std::fs::File::create(&path).unwrap()).unwrap();
        let (h, back) = read_records(&path).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(back, records);
    }
}

#[test]
fn rank_mismatch_is_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.npy");
    write_npy(&path, Dtype::F32, &[2, 3, 4], &[0.0; 24]).unwrap();
    assert!(matches!(load_feature_volume::<f64>(&path, &[]), Err(Error::Shape(_))));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(
        load_feature_volume::<f64>("/definitely/not/here.npy", &[]),
        Err(Error::Io { .. })
    ));
}

#[test]
fn non_finite_payload_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nan.npy");
    let mut data = vec![0.5; 8];
    data[3] = f64::INFINITY;
    write_npy(&path, Dtype::F64, &[1, 2, 2, 2], &data).unwrap();
    assert!(matches!(load_feature_volume::<f64>(&path, &[]), Err(Error::Data(_))));
}
