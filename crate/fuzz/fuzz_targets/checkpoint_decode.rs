#![no_main]

use libfuzzer_sys::fuzz_target;
use modeconn::checkpoint::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_bytes(data) {
        // anything that decodes must re-encode to something that decodes the same
        let bytes = ck.to_bytes().expect("decoded checkpoint re-encodes");
        let again = Checkpoint::from_bytes(&bytes).expect("re-encoded checkpoint decodes");
        assert_eq!(
            ck.params.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            again.params.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(ck.spec, again.spec);
        assert_eq!(ck.epoch, again.epoch);
    }
});
