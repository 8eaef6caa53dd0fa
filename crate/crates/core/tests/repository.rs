use fuzzgate_core::SharedRepository;
use proptest::prelude::*;

#[path = "support/repo_model.rs"]
mod repo_model;
use repo_model::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn schedules_match_model(ops in schedule()) {
        if let Err(e) = run_schedule(&ops) {
            return Err(TestCaseError::fail(e));
        }
    }
}

#[test]
fn sync_into_other_namespace_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let repo = SharedRepository::open(dir.path()).unwrap();
    let ws = repo.provision("bench-a").unwrap();
    ws.write("x.txt", "a").unwrap();
    assert!(repo.sync("bench-b", &ws).is_err());
    assert_eq!(repo.read("bench-b", "x.txt").unwrap(), None);
}

#[test]
fn concurrent_stage_overwrites_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let repo = SharedRepository::open(dir.path()).unwrap();
    let first = repo.provision("ns").unwrap();
    let second = repo.provision("ns").unwrap();
    first.write("f", "one").unwrap();
    second.write("f", "two").unwrap();
    assert!(repo.sync("ns", &first).unwrap().conflicts.is_empty());
    assert_eq!(repo.sync("ns", &second).unwrap().conflicts, ["f"]);
    assert_eq!(repo.read("ns", "f").unwrap().unwrap(), b"two");
}

#[test]
fn escaping_paths_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let repo = SharedRepository::open(dir.path().join("r")).unwrap();
    let ws = repo.provision("ns").unwrap();
    assert!(ws.write("../evil", "x").is_err());
    assert!(ws.write("/abs", "x").is_err());
    assert!(repo.provision("../up").is_err());
    assert!(repo.read("ns", "../../etc/passwd").is_err());
}
