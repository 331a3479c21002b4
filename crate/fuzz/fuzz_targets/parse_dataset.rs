#![no_main]

use libfuzzer_sys::fuzz_target;

// The dataset parser must never panic on arbitrary input, and anything it
// accepts must survive a serialize -> parse round trip bit-exactly.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dataset) = kronlik::io::parse_dataset(text) {
        let again = kronlik::io::parse_dataset(&kronlik::io::serialize_dataset(&dataset))
            .expect("serialized dataset must parse");
        assert_eq!(dataset.n(), again.n());
        for (a, b) in dataset.observations().iter().zip(again.observations()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
});
