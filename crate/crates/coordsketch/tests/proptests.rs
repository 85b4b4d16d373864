//! Property tests for the serialization surfaces and the weighted sampler.

use coordsketch::experiment::Table;
use coordsketch::sampler::weighted::multinomial_counts;
use coordsketch::sketch::{SenEntry, SenSample, Sketch, SketchParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn arb_sketch() -> impl Strategy<Value = Sketch> {
    let entry = ("[a-z]{1,8}", proptest::collection::vec(-1e3f64..1e3, 3), 1e-6f64..=1.0)
        .prop_map(|(key, val, prob)| SenEntry { key, val, prob });
    let sample = proptest::collection::vec(entry, 0..12);
    (proptest::collection::vec(sample, 1..4), 0u64..u64::MAX)
        .prop_map(|(sample_entries, salt)| {
            let t = sample_entries.len() as u32;
            let samples = sample_entries
                .into_iter()
                .enumerate()
                .map(|(i, entries)| SenSample {
                    hash_index: i as u64 + 1,
                    entries,
                })
                .collect();
            Sketch {
                params: SketchParams {
                    eps: 0.25,
                    delta: 0.01,
                    p: 2.0,
                    salt,
                    sample_const: 1.0,
                },
                t,
                gamma: 0.125,
                d: 3,
                samples,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sketch_bytes_round_trip(sk in arb_sketch()) {
        let bytes = sk.to_bytes();
        let back = Sketch::from_bytes(&bytes).unwrap();
        prop_assert_eq!(sk, back);
    }

    #[test]
    fn table_csv_round_trips(
        rows in proptest::collection::vec(
            proptest::collection::vec("[a-zA-Z0-9_.+-]{0,10}", 3), 0..20),
        summary in proptest::collection::vec(("[a-z_]{1,10}", "[a-zA-Z0-9_.]{1,10}"), 0..4),
    ) {
        let mut table = Table::new(&["alpha", "beta", "gamma"]);
        for row in rows {
            table.push_row(row);
        }
        for (k, v) in summary {
            table.push_summary(&k, v);
        }
        let back = Table::from_csv(&table.to_csv()).unwrap();
        prop_assert_eq!(table, back);
    }

    #[test]
    fn multinomial_counts_are_a_valid_histogram(
        weights in proptest::collection::vec(0.0f64..10.0, 1..40),
        draws in 0u64..5000,
        seed in 0u64..1000,
    ) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let counts = multinomial_counts(&weights, draws, &mut rng);
        let total: u64 = counts.iter().map(|(_, c)| c).sum();
        let has_mass = weights.iter().any(|w| *w > 0.0);
        if has_mass {
            prop_assert_eq!(total, draws);
        } else {
            prop_assert_eq!(total, 0);
        }
        for (i, c) in counts {
            prop_assert!(weights[i] > 0.0);
            prop_assert!(c > 0);
        }
    }
}
