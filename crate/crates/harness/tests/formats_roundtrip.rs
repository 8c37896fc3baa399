use lqg_latent::formats::{
    controller_artifact, controller_from_artifact, dataset_from_bytes, dataset_to_bytes, model_artifact, model_from_artifact, read_blocks,
    read_dataset, read_system_json, representation_artifact, representation_from_artifact, write_blocks, write_dataset, write_dataset_csv,
    write_system_json,
};
use lqg_latent::pipeline::learn;
use lqg_latent_core::corel::CorelConfig;
use lqg_latent_core::sim::collect_dataset;
use lqg_latent_core::system::{random_system, LqgSystem, RandomSystemSpec};
use proptest::prelude::*;

fn fixture(seed: u64) -> LqgSystem {
    random_system(&RandomSystemSpec::new(2, 3, 1, 3), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dataset_bytes_roundtrip_exactly(seed in any::<u64>(), n in 1usize..12) {
        let sys = fixture(seed % 1000);
        let ds = collect_dataset(&sys, 0.9, n, seed, "prop").unwrap();
        let bytes = dataset_to_bytes(&ds, sys.state_dim());
        let (header, back) = dataset_from_bytes(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(header.n, n as u64);
        prop_assert_eq!(header.state_dim, 2);
        prop_assert_eq!(header.master_seed, seed);
        prop_assert_eq!(back.trajectories.len(), n);
        for (a, b) in ds.trajectories.iter().zip(&back.trajectories) {
            prop_assert_eq!(&a.observations, &b.observations);
            prop_assert_eq!(&a.controls, &b.controls);
            prop_assert_eq!(&a.costs, &b.costs);
            prop_assert!(b.states.is_none());
        }
    }

    #[test]
    fn truncated_dataset_bytes_are_rejected(cut in 1usize..200) {
        let sys = fixture(1);
        let ds = collect_dataset(&sys, 1.0, 3, 1, "cut").unwrap();
        let bytes = dataset_to_bytes(&ds, 2);
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(dataset_from_bytes(&bytes[..keep], std::path::Path::new("mem")).is_err());
    }
}

#[test]
fn system_json_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("system.json");
    let sys = fixture(4);
    write_system_json(&path, &sys).unwrap();
    let back = read_system_json(&path).unwrap();
    assert_eq!(back.parts(), sys.parts());
}

#[test]
fn dataset_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sys = fixture(5);
    let ds = collect_dataset(&sys, 1.0, 7, 3, "files").unwrap();
    let bin = dir.path().join("d.bin");
    write_dataset(&bin, &ds, sys.state_dim()).unwrap();
    let (header, back) = read_dataset(&bin).unwrap();
    assert_eq!(header.system_tag, "files");
    assert_eq!(back.sigma_u, 1.0);
    assert_eq!(back.trajectories[6].costs, ds.trajectories[6].costs);

    let csv = dir.path().join("d.csv");
    write_dataset_csv(&csv, &ds).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() > 1);
    let width = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == width));
}

#[test]
fn learned_artifacts_roundtrip_through_block_files() {
    let dir = tempfile::tempdir().unwrap();
    let sys = fixture(6);
    let ds = collect_dataset(&sys, 1.0, 300, 2, "blocks").unwrap();
    let learned = learn(&ds, &CorelConfig::new(2, 1, 2), sys.control_costs(), true).unwrap();
    let model = learned.model.unwrap();
    let ctl = learned.controller.unwrap();

    write_blocks(dir.path(), "rep", &representation_artifact(&learned.representation)).unwrap();
    write_blocks(dir.path(), "model", &model_artifact(&model)).unwrap();
    write_blocks(dir.path(), "ctl", &controller_artifact(&ctl)).unwrap();

    let rep = representation_from_artifact(&read_blocks(dir.path(), "rep").unwrap(), &dir.path().join("rep")).unwrap();
    assert_eq!(rep.blocks, learned.representation.blocks);
    assert_eq!(rep.quadratic_forms, learned.representation.quadratic_forms);
    assert_eq!(rep.threshold, learned.representation.threshold);
    assert_eq!(model_from_artifact(&read_blocks(dir.path(), "model").unwrap(), &dir.path().join("model")).unwrap(), model);
    assert_eq!(controller_from_artifact(&read_blocks(dir.path(), "ctl").unwrap(), &dir.path().join("ctl")).unwrap().gains, ctl.gains);
}

#[test]
fn missing_block_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_blocks(dir.path(), "absent").unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
