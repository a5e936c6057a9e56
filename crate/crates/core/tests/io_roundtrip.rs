use opanel::io::{dataset_to_csv, default_covariate_names, ingest_reader, IngestOptions};
use opanel::model::{PanelDataset, Subject};
use opanel::simulation::{replicate_dataset, SimScenario};
use proptest::prelude::*;

fn reingest(data: &PanelDataset) -> PanelDataset {
    let text = dataset_to_csv(data, &default_covariate_names(data.covariate_dim())).unwrap();
    let opts = IngestOptions { levels: Some(data.levels()), tau: Some(data.tau()), ..Default::default() };
    ingest_reader(text.as_bytes(), &opts).unwrap().data
}

#[test]
fn simulated_datasets_round_trip() {
    for (i, sc) in [SimScenario::scenario1(), SimScenario::scenario2().with_frailty(0.1)].iter().enumerate() {
        let data = replicate_dataset(sc, 300, i as u64).unwrap().data;
        assert_eq!(reingest(&data), data);
    }
}

#[test]
fn scale_ingest_is_fast() {
    let data = replicate_dataset(&SimScenario::scenario1(), 2000, 0).unwrap().data;
    let text = dataset_to_csv(&data, &default_covariate_names(2)).unwrap();
    let start = std::time::Instant::now();
    let got = ingest_reader(text.as_bytes(), &IngestOptions::default()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert_eq!(got.data.n_obs(), data.n_obs());
}

fn arb_subject(p: usize, levels: u32) -> impl Strategy<Value = Subject> {
    (
        prop::collection::vec(-1e3f64..1e3, p),
        prop::collection::btree_set(1u32..100_000, 1..6),
        prop::collection::vec(1..=levels, 6),
    )
        .prop_map(|(x, ticks, ys)| {
            let visits: Vec<f64> = ticks.iter().map(|&k| k as f64 / 997.0).collect();
            let responses = ys[..visits.len()].to_vec();
            Subject::new(String::new(), x, visits, responses)
        })
}

fn arb_dataset() -> impl Strategy<Value = PanelDataset> {
    (0usize..4, 2u32..6)
        .prop_flat_map(|(p, levels)| (Just(levels), prop::collection::vec(arb_subject(p, levels), 1..12)))
        .prop_map(|(levels, mut subs)| {
            for (i, s) in subs.iter_mut().enumerate() {
                s.id = format!("s{i}");
            }
            PanelDataset::new(subs, levels, Some(200.0)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn arbitrary_datasets_round_trip(data in arb_dataset()) {
        prop_assert_eq!(reingest(&data), data);
    }
}
