#![no_main]
use libfuzzer_sys::fuzz_target;
use robustbf::bladrbf::{validate_graph, CommGraph};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = CommGraph::parse(text) {
        assert_eq!(CommGraph::parse(&g.to_text()).unwrap(), g);
        if g.nodes() <= 64 {
            let _ = validate_graph(&g);
        }
    }
});
