use ecpcs::allocation::{AllocationScheme, UploadScheme};
use ecpcs::harness::{
    emit_results, run_comparison, run_pipeline, OutputFormat, PreparedScene, ResultRow,
    SelectionScheme,
};
use ecpcs::scenario::{generate_preset, load_scenario, save_scenario, Preset};
use ecpcs::selection::greedy_select;

fn comparison(preset: Preset, seed: u64) -> Vec<ResultRow> {
    run_comparison(
        &generate_preset(preset, seed).unwrap(),
        &SelectionScheme::ALL,
        &AllocationScheme::ALL,
        &[
            UploadScheme::EdgePartial,
            UploadScheme::EdgeTotal,
            UploadScheme::CloudPartial,
        ],
    )
    .unwrap()
}

fn find<'a>(rows: &'a [ResultRow], sel: &str, alloc: &str, upload: &str) -> &'a ResultRow {
    rows.iter()
        .find(|r| r.selection == sel && r.allocation == alloc && r.upload == upload)
        .unwrap()
}

#[test]
fn greedy_rows_are_feasible_across_eta() {
    for preset in Preset::ALL {
        for seed in 0..5 {
            let scene = PreparedScene::new(&generate_preset(preset, seed).unwrap()).unwrap();
            for eta in [0.5, 0.8, 0.95, 1.0] {
                let s = scene.with_eta(eta).unwrap();
                let r = greedy_select(&s.problem);
                assert!(r.feasible);
                let cov = r.coverage_ratio(s.problem.target_size());
                assert!(cov >= eta - 1e-12, "{preset} seed {seed} eta {eta}: {cov}");
            }
        }
    }
}

#[test]
fn optimal_allocation_never_loses() {
    for preset in Preset::ALL {
        for seed in 0..4 {
            let rows = comparison(preset, seed);
            for sel in ["greedy", "rpss", "cpss"] {
                for upload in ["edge_partial", "edge_total", "cloud_partial"] {
                    let best = find(&rows, sel, "optimal", upload).max_delay_s;
                    for alloc in ["fras", "wras", "rras"] {
                        let other = find(&rows, sel, alloc, upload).max_delay_s;
                        assert!(
                            best <= other * (1.0 + 1e-12),
                            "{preset} {seed} {sel} {upload} {alloc}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn cloud_hop_adds_delay_and_partial_beats_total() {
    for seed in 0..6 {
        let rows = comparison(Preset::GateLike, seed);
        for alloc in ["optimal", "fras", "wras"] {
            let edge = find(&rows, "greedy", alloc, "edge_partial").max_delay_s;
            let cloud = find(&rows, "greedy", alloc, "cloud_partial").max_delay_s;
            assert!(cloud > edge, "seed {seed} {alloc}");
        }
        let edge = find(&rows, "greedy", "optimal", "edge_partial").max_delay_s;
        let total = find(&rows, "greedy", "optimal", "edge_total").max_delay_s;
        assert!(edge <= total);
    }
}

#[test]
fn baselines_share_the_greedy_budget() {
    let rows = comparison(Preset::TempleLike, 3);
    let n = find(&rows, "greedy", "optimal", "edge_partial").photo_count;
    assert!(rows.iter().all(|r| r.photo_count == n));
    assert_eq!(rows.len(), 3 * 4 * 3);
}

#[test]
fn pipeline_row_is_sane() {
    let row = run_pipeline(&generate_preset(Preset::TempleLike, 1).unwrap()).unwrap();
    assert!(row.feasible);
    assert!(row.coverage_ratio >= 0.95);
    assert!(row.total_cost > 0.0 && row.max_delay_s > 0.0);
    let hit = row.hit_ratio.unwrap();
    assert!((0.0..=1.0).contains(&hit));
}

#[test]
fn emitted_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Csv, OutputFormat::Json] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        emit_results(&comparison(Preset::GateLike, 11), format, &a).unwrap();
        emit_results(&comparison(Preset::GateLike, 11), format, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn saved_scenario_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.toml");
    let scenario = generate_preset(Preset::TempleLike, 12).unwrap();
    save_scenario(&scenario, &path).unwrap();
    let loaded = load_scenario(&path).unwrap();
    assert_eq!(
        run_pipeline(&scenario).unwrap(),
        run_pipeline(&loaded).unwrap()
    );
}
