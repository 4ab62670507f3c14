use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hashbench::classifier::softmax_objective;
use hashbench::codecs::{BinaryCode, PqCodebook};
use hashbench::dataio::{generate_synthetic, SyntheticSpec};
use hashbench::metrics::{mean_average_precision, RelevanceJudgment};
use hashbench::retrieval::{rank_hamming, rank_l2, DatabaseRepresentation};
use hashbench::Ranking;

fn hamming(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let codes: Vec<BinaryCode> = (0..50_000)
        .map(|_| BinaryCode::from_bits((0..64).map(|_| r.random::<bool>())))
        .collect();
    let query = codes[0].clone();
    let db = DatabaseRepresentation::BinaryCodes { codes, bits: 64 };
    c.bench_function("rank_hamming 64 bits x 50k", |b| b.iter(|| rank_hamming(black_box(&query), &db).unwrap()));
}

fn pq(c: &mut Criterion) {
    let (x, _) = generate_synthetic(&SyntheticSpec::new(20, 500, 64, 2.0, 3)).unwrap();
    let cb = PqCodebook::train(&x, 8, 256, 1).unwrap();
    c.bench_function("pq encode 10k x 64d (M=8)", |b| b.iter(|| cb.encode_all(black_box(&x)).unwrap()));
    let db = DatabaseRepresentation::PqCodes { codes: cb.encode_all(&x).unwrap(), codebook: cb };
    let q = x.row(0).to_vec();
    c.bench_function("pq ADC ranking 10k", |b| b.iter(|| rank_l2(black_box(&q), &db).unwrap()));
}

fn softmax(c: &mut Criterion) {
    let (x, y) = generate_synthetic(&SyntheticSpec::new(10, 500, 100, 2.0, 5)).unwrap();
    let params = vec![0.01; 10 * 100 + 10];
    let mut grad = vec![0.0; params.len()];
    c.bench_function("softmax objective+gradient 5k x 100 (C=10)", |b| {
        b.iter(|| softmax_objective(black_box(&x), y.as_slice(), 10, 1e-3, &params, &mut grad))
    });
}

fn map(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let db: Vec<usize> = (0..n).map(|_| r.random_range(0..10)).collect();
    let rels: Vec<RelevanceJudgment<'_>> = (0..100).map(|q| RelevanceJudgment::new(q % 10, &db).unwrap()).collect();
    let rankings: Vec<Ranking> = (0..100)
        .map(|_| {
            let mut o: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(o.as_mut_slice(), &mut r);
            Ranking::new(o, n).unwrap()
        })
        .collect();
    c.bench_function("mAP 100 queries x 10k", |b| {
        b.iter(|| mean_average_precision(black_box(&rels), &rankings, n).unwrap())
    });
}

criterion_group!(benches, hamming, pq, softmax, map);
criterion_main!(benches);
