//! Shared fixtures for the benchmarks in `benches/`.

use std::path::Path;

use dflsim_core::data::{self, ClientDataset, Dataset, LabelColumn, SkewSpec};

pub struct Fixture {
    pub partition: Vec<ClientDataset>,
    pub test: Dataset,
}

/// WDBC split with seed 0 and partitioned at `skew` across five clients.
pub fn wdbc_fixture(skew: &str) -> Fixture {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/wdbc.csv");
    let d = data::load_csv_dataset(path, &LabelColumn::Name("diagnosis".into())).expect("wdbc");
    let (train, validation, test) = data::split_dataset(&d, (0.8, 0.1, 0.1), 0).expect("split");
    let spec = SkewSpec::named(skew, 5).expect("skew");
    let partition = data::partition_label_skew(&train, &validation, &spec, 5, 0).expect("partition");
    Fixture { partition, test }
}
