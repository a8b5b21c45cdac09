//! Query results against a plain linear scan of every usage.

mod common;

#[test]
fn thousand_random_queries() {
    let (_, nonempty, fallbacks) = common::scan::check_queries(42, 1000);
    // the generator has to exercise the interesting paths
    assert!(nonempty > 200, "{nonempty}");
    assert!(fallbacks > 5, "{fallbacks}");
}

#[test]
fn pages_partition_results() {
    common::scan::check_paging(9);
}
