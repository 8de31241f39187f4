use ltrans_core::identities::{verify_all, Verdict};

#[test]
fn registry_holds_through_1000() {
    for r in verify_all(1000).unwrap() {
        assert_eq!(r.verdict, Verdict::Equal, "{} first differs at {:?}", r.name, r.first_mismatch);
        assert_eq!(r.order_checked, 1000);
    }
}

#[test]
fn weight2_report_records_the_matching_reading() {
    let r = ltrans_core::identities::verify("weight2_resum", 200).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"verdict\":\"equal\""));
    assert!(r.notes.iter().any(|n| n.starts_with("single-sum reading sum n (-4/n)") && n.contains("agrees")));
    assert!(r.notes.iter().any(|n| n.starts_with("single-sum reading sum n^2") && n.contains("differs")));
}
