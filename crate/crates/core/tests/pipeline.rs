use std::fs;
use std::io::BufReader;

use debatenet::analysis::{matrix_report, parse_matrix_csv, MatrixReport};
use debatenet::config::validate_config;
use debatenet::digest::file_digest;
use debatenet::grid::{analyze, run_grid, CellStatus, GridManifest, MANIFEST_FILE};
use debatenet::netgen::read_graph;
use debatenet::opinion::{parse_trajectory_csv, TRAJECTORY_HEADER};
use debatenet::rng::{derive_seed, tag};
use debatenet::simulator::read_events;

const CONFIG: &str = r#"
iterations = 15
master_seed = 5

[network]
n = 40
homophily = [0.25, 1.0]
minority_fraction = [0.3]

[scenario]
awareness = [false, true]

[backend]
kind = "drift"

[analysis]
n_perm = 100
"#;

#[test]
fn grid_outputs_are_consistent() {
    let config = validate_config(CONFIG).unwrap();
    let out = tempfile::tempdir().unwrap();
    let root = out.path();
    let manifest = run_grid(&config, root, Some(1)).unwrap();
    assert_eq!(manifest.cells.len(), 2 * 2 * 2);
    assert_eq!(manifest.networks.len(), 2);

    let on_disk: GridManifest = serde_json::from_str(&fs::read_to_string(root.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);

    for net in &manifest.networks {
        let g = read_graph(&root.join(&net.files[0].path), &root.join(&net.files[1].path)).unwrap();
        assert_eq!(g.node_count(), 40);
    }

    for cell in &manifest.cells {
        assert_eq!(cell.status, CellStatus::Ok);
        for f in &cell.files {
            assert_eq!(file_digest(&root.join(&f.path)).unwrap(), f.digest, "{}", f.path);
        }
        let dir = root.join("runs").join(&cell.plan.id);

        let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
        assert_eq!(traj.lines().next(), Some(TRAJECTORY_HEADER));
        let rows = parse_trajectory_csv(&traj).unwrap();
        assert_eq!(rows.len(), 16);
        for (_, p) in &rows {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        let events = read_events(BufReader::new(fs::File::open(dir.join("events.jsonl")).unwrap())).unwrap();
        assert_eq!(events.len(), 15 * 40);
        let obs: Vec<_> = events.iter().map(Into::into).collect();
        let seed = derive_seed(cell.plan.seed, &[tag::PERMUTATION]);
        let matrices = analyze(&obs, &config.analysis, seed).unwrap();
        for m in &matrices {
            let stem = format!("matrix_{}", m.spec.conditioning.as_str());
            let expected = matrix_report(m);
            let json: MatrixReport =
                serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap();
            assert_eq!(json, expected);
            let csv = parse_matrix_csv(&fs::read_to_string(dir.join(format!("{stem}.csv"))).unwrap()).unwrap();
            assert_eq!(csv.cells.len(), expected.cells.len());
            for (a, b) in csv.cells.iter().zip(&expected.cells) {
                assert_eq!((&a.key, a.n, a.successes, a.significant), (&b.key, b.n, b.successes, b.significant));
            }
        }
    }
}

#[test]
fn output_directory_does_not_change_the_manifest() {
    let mut config = validate_config(CONFIG).unwrap();
    config.network.homophily = vec![0.5];
    config.scenario.awareness = vec![false];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    config.output = a.path().to_path_buf();
    let ma = run_grid(&config, a.path(), Some(1)).unwrap();
    config.output = b.path().to_path_buf();
    let mb = run_grid(&config, b.path(), None).unwrap();
    assert_eq!(ma, mb);
}
