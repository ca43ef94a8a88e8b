#![no_main]

use libfuzzer_sys::fuzz_target;
use pfl_core::network::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ckpt) = Checkpoint::from_json_str(text) else { return };
    // a checkpoint that parses must rebuild without panicking
    let _ = ckpt.to_hypernet();
    let text = ckpt.to_json_string().expect("parsed checkpoint serializes");
    assert_eq!(Checkpoint::from_json_str(&text).expect("round trip"), ckpt);
});
