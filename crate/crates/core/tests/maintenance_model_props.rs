mod common;

use emaint::maintenance_model::{export_model, import_model};
use proptest::prelude::*;

use common::aggregate::aggregate;

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn amm_round_trip(m in aggregate()) {
        let text = export_model(&m);
        let back = match import_model(&text) {
            Ok(b) => b,
            Err(e) => {
                let lines: Vec<String> = e.diagnostics.iter().map(|d| d.to_string()).collect();
                return Err(TestCaseError::fail(format!("{}\n---\n{text}", lines.join("\n"))));
            }
        };
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(export_model(&back), text);
    }
}
