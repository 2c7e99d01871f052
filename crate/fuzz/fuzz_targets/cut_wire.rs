#![no_main]
use libfuzzer_sys::fuzz_target;
use robustbf::cutting_planes::{parse_cut, parse_cuts, write_cuts};
use robustbf::model::PackingLayout;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_cut(text, 1, None);
    let _ = parse_cuts(text, Some(&PackingLayout::new(2, 2, 1)));
    // whatever parses must survive a round trip
    if let Ok(cuts) = parse_cuts(text, None) {
        let again = parse_cuts(&write_cuts(&cuts), None).expect("re-parse of written cuts");
        assert_eq!(again.len(), cuts.len());
    }
});
