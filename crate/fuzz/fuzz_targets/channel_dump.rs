#![no_main]
use libfuzzer_sys::fuzz_target;
use robustbf::model::{parse_channel_dump, read_channel_dump};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_channel_dump(text);
    // a form feed splits estimate and truth
    if let Some((est, truth)) = text.split_once('\u{c}') {
        let _ = read_channel_dump(est, Some(truth));
    }
});
