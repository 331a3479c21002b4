#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(matrix) = kronlik::io::parse_matrix(text) {
        let again = kronlik::io::parse_matrix(&kronlik::io::serialize_matrix(&matrix))
            .expect("serialized matrix must parse");
        for (x, y) in matrix.iter().zip(again.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
});
