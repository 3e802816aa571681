#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(task) = tara_core::RetrievalTask::parse(text) {
            assert_eq!(tara_core::RetrievalTask::parse(&task.to_json()).unwrap(), task);
        }
    }
});
