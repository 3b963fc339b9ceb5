mod common;

use mhealth_audit::fixtures::{build_apk, build_dex};
use mhealth_audit::staticscan::{
    class_set_from_bytes, classes_from_dex, default_signature_db, match_trackers,
};
use proptest::prelude::*;

#[test]
fn hand_assembled_apk_matches_reader() {
    let apk = common::hand_assembled_apk();
    let set = class_set_from_bytes(&apk, "hand").unwrap();
    let got: Vec<String> = set.classes.into_iter().collect();
    assert_eq!(got, common::oracle_apk_classes(&apk));
    assert!(got.contains(&"org.ünï.Cläss".to_string()));
    assert!(got.contains(&"io.emoji.Face😀".to_string()));
    assert!(!got.iter().any(|c| c.contains('[') || c == "I"));
}

#[test]
fn hand_assembled_apk_trackers() {
    let set = class_set_from_bytes(&common::hand_assembled_apk(), "hand").unwrap();
    let report = match_trackers(&set, &default_signature_db());
    assert_eq!(
        report.tracker_names,
        vec!["AppsFlyer", "Facebook Analytics", "Sentry"]
    );
}

fn class_name() -> impl Strategy<Value = String> {
    "[a-zäöü😀]{1,6}(\\.[a-zA-Z0-9_$é]{1,8}){1,4}"
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn written_dex_matches_reader(classes in prop::collection::vec(class_name(), 0..40)) {
        let dex = build_dex(&classes, &["V".into(), "not/a/Type".into()]);
        let mut got = classes_from_dex(&dex).unwrap();
        got.sort();
        let mut want = common::oracle_dex_classes(&dex);
        want.sort();
        prop_assert_eq!(&got, &want);
        let mut input = classes.clone();
        input.sort();
        input.dedup();
        prop_assert_eq!(got, input);
    }

    #[test]
    fn apk_union_of_dex_files(a in prop::collection::vec(class_name(), 1..10), b in prop::collection::vec(class_name(), 1..10)) {
        let apk = build_apk(&[build_dex(&a, &[]), build_dex(&b, &[])]);
        let set = class_set_from_bytes(&apk, "p").unwrap();
        let got: Vec<String> = set.classes.into_iter().collect();
        prop_assert_eq!(got, common::oracle_apk_classes(&apk));
    }
}
