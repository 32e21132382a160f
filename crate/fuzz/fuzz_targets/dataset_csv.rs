#![no_main]

use libfuzzer_sys::fuzz_target;
use modeconn::data::{Dataset, Split};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::from_csv_reader(data, Split::Train) {
        assert!(!ds.is_empty());
        assert!(ds.labels().iter().all(|&l| l < ds.n_classes()));
        assert!(ds.full_batch().inputs().iter().all(|v| v.is_finite()));
    }
});
