use proptest::prelude::*;

use hashbench::codecs::{hamming_distance, BinaryCode, PqCodebook, TightFrame};
use hashbench::container::{pq_from_record, pq_record, read_all};
use hashbench::dataio::{generate_synthetic_dataset, SyntheticSpec};
use hashbench::metrics::{average_precision_at_k, mean_average_precision, RelevanceJudgment};
use hashbench::protocols::{run_ssh, SshConfig, SshStrategy};
use hashbench::retrieval::{rank_hamming, rank_l2, DatabaseRepresentation};
use hashbench::{FeatureMatrix, Ranking};

fn labels_and_order() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    (1usize..80).prop_flat_map(|n| {
        (
            proptest::collection::vec(0usize..4, n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            0usize..4,
        )
    })
}

proptest! {
    #[test]
    fn ap_grows_with_cutoff((db, order, q) in labels_and_order()) {
        let rel = RelevanceJudgment::new(q, &db).unwrap();
        prop_assume!(rel.num_correct() > 0);
        let ranking = Ranking::new(order, db.len()).unwrap();
        let mut prev = 0.0;
        for k in 1..=db.len() {
            let ap = average_precision_at_k(&rel, &ranking, k).unwrap();
            prop_assert!(ap >= prev && ap <= 1.0);
            prev = ap;
        }
    }

    #[test]
    fn correct_items_first_gives_unit_ap((db, _order, q) in labels_and_order()) {
        let rel = RelevanceJudgment::new(q, &db).unwrap();
        prop_assume!(rel.num_correct() > 0);
        let mut order: Vec<usize> = (0..db.len()).filter(|&i| db[i] == q).collect();
        order.extend((0..db.len()).filter(|&i| db[i] != q));
        let ap = average_precision_at_k(&rel, &Ranking::new(order, db.len()).unwrap(), db.len()).unwrap();
        prop_assert!((ap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn map_ignores_query_order((db, order, _) in labels_and_order(), qs in proptest::collection::vec(0usize..4, 1..6)) {
        let n = db.len();
        let rels: Vec<RelevanceJudgment<'_>> = qs.iter().map(|&q| RelevanceJudgment::new(q, &db).unwrap()).collect();
        let rankings: Vec<Ranking> = (0..qs.len())
            .map(|i| {
                let mut o = order.clone();
                o.rotate_left(i % n);
                Ranking::new(o, n).unwrap()
            })
            .collect();
        let a = mean_average_precision(&rels, &rankings, n);
        let mut rr = rels.clone();
        let mut rk = rankings.clone();
        rr.reverse();
        rk.reverse();
        let b = mean_average_precision(&rr, &rk, n);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.value - b.value).abs() < 1e-12);
                prop_assert_eq!(a.skipped_queries, b.skipped_queries);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one order errored"),
        }
    }

    #[test]
    fn hamming_ranking_sorted(bits in proptest::collection::vec(any::<bool>(), 24 * 30), q in proptest::collection::vec(any::<bool>(), 24)) {
        let codes: Vec<BinaryCode> = bits.chunks(24).map(|c| BinaryCode::from_bits(c.iter().copied())).collect();
        let query = BinaryCode::from_bits(q);
        let db = DatabaseRepresentation::BinaryCodes { codes: codes.clone(), bits: 24 };
        let order = rank_hamming(&query, &db).unwrap().into_vec();
        for w in order.windows(2) {
            let (a, b) = (hamming_distance(&query, &codes[w[0]]).unwrap(), hamming_distance(&query, &codes[w[1]]).unwrap());
            prop_assert!(a < b || (a == b && w[0] < w[1]));
        }
    }

    #[test]
    fn sh_onehot_map_bounds_accuracy(seed in 0u64..1000, sep in 0.0f64..6.0) {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(4, 40, 5, sep, seed).with_test_per_class(8), "p").unwrap();
        let cfg = SshConfig { n_label: None, h: 16, runs: 1, seed, lambda_grid: vec![1e-2], ..SshConfig::default() };
        let r = run_ssh(&ds, &cfg, SshStrategy::OneHot).unwrap();
        prop_assert!(r.records[0].value >= r.records[0].accuracy.unwrap());
    }
}

#[test]
fn adc_ranking_matches_reconstruction_ranking() {
    let ds = generate_synthetic_dataset(&SyntheticSpec::new(5, 60, 12, 2.0, 4), "adc").unwrap();
    let cb = PqCodebook::train(&ds.features, 3, 16, 1).unwrap();
    let codes = cb.encode_all(&ds.features).unwrap();
    let recon = cb.decode_all(&codes).unwrap();
    let pq_db = DatabaseRepresentation::PqCodes { codebook: cb.clone(), codes };
    for q in 0..20 {
        let query = ds.features.row(q);
        let adc = rank_l2(query, &pq_db).unwrap().into_vec();
        let direct: Vec<f64> = recon
            .iter_rows()
            .map(|r| r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        // equal up to rounding: every adjacent pair in the ADC order is non-decreasing in direct distance
        for w in adc.windows(2) {
            assert!(direct[w[0]] <= direct[w[1]] + 1e-9);
        }
    }
}

#[test]
fn codebook_survives_container_file() {
    let ds = generate_synthetic_dataset(&SyntheticSpec::new(4, 50, 7, 2.0, 9), "c").unwrap();
    let cb = PqCodebook::train(&ds.features, 2, 8, 3).unwrap();
    let frame = TightFrame::new(7, 16, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("codec.bin");
    let mut bytes = Vec::new();
    pq_record(&cb).unwrap().write_to(&mut bytes).unwrap();
    hashbench::container::frame_record(&frame).unwrap().write_to(&mut bytes).unwrap();
    std::fs::write(&path, bytes).unwrap();
    let recs = read_all(&mut std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(recs.len(), 2);
    let back = pq_from_record(&recs[0]).unwrap();
    // centroids pass through f32, so compare assignments rather than raw values
    assert_eq!(back.encode_all(&ds.features).unwrap(), cb.encode_all(&ds.features).unwrap());
    let frame_back = hashbench::container::frame_from_record(&recs[1]).unwrap();
    let x = FeatureMatrix::new(3, 7, (0..21).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    assert_eq!(frame_back.encode_all(&x).unwrap(), frame.encode_all(&x).unwrap());
}
