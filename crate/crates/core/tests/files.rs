use std::path::{Path, PathBuf};

use blockmf::finite_system::{simulate, SimulationRun};
use blockmf::io::{read_trajectory_csv, write_trajectory_csv};
use blockmf::model::{example_model, quantized_configuration};
use blockmf::{EmpiricalVector, ModelSpec};

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

#[test]
fn shipped_models_parse_and_roundtrip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(models_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let spec = ModelSpec::from_json_file(&path).unwrap();
            assert_eq!(ModelSpec::from_json_str(&spec.to_json_string()).unwrap(), spec, "{path:?}");
            seen += 1;
        }
    }
    assert!(seen >= 3);
    let example = ModelSpec::from_json_file(models_dir().join("example.json")).unwrap();
    assert_eq!(example, example_model(4.0));
}

#[test]
fn simulated_paths_survive_csv() {
    let spec = example_model(4.0).sized_for_total(80).unwrap();
    let x0 = quantized_configuration(&spec, &EmpiricalVector::repeated(2, &[0.7, 0.3]).unwrap()).unwrap();
    let run = SimulationRun::uniform(3, 4.0, 41, 1).unwrap();
    let path = simulate(&spec, &x0, &run).unwrap().remove(0);
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    write_trajectory_csv(&file, &path).unwrap();
    assert_eq!(read_trajectory_csv(&file).unwrap(), path);
}
