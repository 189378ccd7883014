use std::fs;
use std::path::Path;

use palmvein_core::pipeline::{
    run_compare, run_cube_average, run_extract, stage_file_name, SKELETON_FILE,
};
use palmvein_core::synthetic::{vein_scene, SceneConfig};
use palmvein_core::{
    load_image, save_image, CompareMethod, Error, ExtractInput, GrayImage, PipelineConfig, Stage,
};

fn write_cube(dir: &Path, bands: &[(f64, GrayImage)]) -> std::path::PathBuf {
    let mut manifest = String::from("# wavelength\tfile\n");
    for (i, (nm, img)) in bands.iter().enumerate() {
        let name = format!("band{i}.png");
        save_image(img, dir.join(&name)).unwrap();
        manifest.push_str(&format!("{nm}\t{name}\n"));
    }
    let path = dir.join("cube.txt");
    fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn extract_writes_every_stage_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let scene = vein_scene(&SceneConfig::default().with_size(120, 160));
    let input = dir.path().join("in.png");
    save_image(&scene.image, &input).unwrap();
    let out = dir.path().join("out");
    let (trace, skeleton) = run_extract(
        &ExtractInput::Image(input),
        &PipelineConfig::default(),
        &out,
        true,
    )
    .unwrap();

    let expected: Vec<&str> = Stage::ORDER.iter().map(|s| s.name()).collect();
    assert_eq!(trace.stage_names(), expected);
    for (i, rec) in trace.records.iter().enumerate() {
        let path = rec.path.as_ref().unwrap();
        assert_eq!(
            path.file_name().unwrap().to_str().unwrap(),
            stage_file_name(rec.stage, i)
        );
        assert!(path.exists());
        assert!(rec.millis >= 0.0);
    }
    let saved = load_image(out.join(SKELETON_FILE)).unwrap();
    assert_eq!(saved.dimensions(), skeleton.dimensions());
    assert!(skeleton.count() > 0);
}

#[test]
fn extract_without_trace_writes_only_the_skeleton() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    save_image(&GrayImage::filled(40, 30, 0.4), &input).unwrap();
    let out = dir.path().join("out");
    let (trace, skeleton) = run_extract(
        &ExtractInput::Image(input),
        &PipelineConfig::default(),
        &out,
        false,
    )
    .unwrap();
    assert!(trace.records.iter().all(|r| r.path.is_none()));
    assert_eq!(skeleton.count(), 0);
    let names: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, vec![SKELETON_FILE]);
}

#[test]
fn extract_from_cube_averages_the_band_window() {
    let dir = tempfile::tempdir().unwrap();
    let scene = vein_scene(&SceneConfig::default().with_size(90, 120));
    let manifest = write_cube(
        dir.path(),
        &[
            (700.0, GrayImage::filled(90, 120, 0.0)),
            (848.0, scene.image.clone()),
            (852.0, scene.image.clone()),
            (990.0, GrayImage::filled(90, 120, 1.0)),
        ],
    );
    let cube = run_extract(
        &ExtractInput::Cube(manifest),
        &PipelineConfig::default(),
        &dir.path().join("a"),
        false,
    )
    .unwrap()
    .1;
    let single = dir.path().join("single.png");
    save_image(&scene.image, &single).unwrap();
    let plain = run_extract(
        &ExtractInput::Image(single),
        &PipelineConfig::default(),
        &dir.path().join("b"),
        false,
    )
    .unwrap()
    .1;
    assert_eq!(cube, plain);
}

#[test]
fn cube_average_examples() {
    let dir = tempfile::tempdir().unwrap();
    let bands: Vec<(f64, GrayImage)> = [830.0, 845.0, 850.0, 855.0, 870.0]
        .iter()
        .enumerate()
        .map(|(i, &nm)| (nm, GrayImage::filled(8, 6, i as f64 * 0.2)))
        .collect();
    let manifest = write_cube(dir.path(), &bands);
    let out = dir.path().join("avg.png");
    run_cube_average(&manifest, 850.0, 10.0, &out).unwrap();
    // bands 845, 850, 855 hold 0.2, 0.4, 0.6
    let avg = load_image(&out).unwrap();
    assert!(avg.as_slice().iter().all(|&v| (v - 0.4).abs() < 1e-12));

    let err = run_cube_average(&manifest, 1000.0, 10.0, &dir.path().join("none.png")).unwrap_err();
    assert!(matches!(err, Error::EmptyBandSelection { .. }), "{err}");

    let one_dir = dir.path().join("one");
    fs::create_dir(&one_dir).unwrap();
    let band = GrayImage::from_fn(13, 7, |x, y| ((x * 19 + y * 7) % 256) as f64 / 255.0);
    let manifest = write_cube(&one_dir, &[(850.0, band)]);
    let resaved = one_dir.join("resaved.png");
    run_cube_average(&manifest, 850.0, 400.0, &resaved).unwrap();
    assert_eq!(
        fs::read(&resaved).unwrap(),
        fs::read(one_dir.join("band0.png")).unwrap()
    );
}

#[test]
fn compare_report_layouts() {
    let scene = vein_scene(&SceneConfig::default().with_size(100, 140));
    let cfg = PipelineConfig::default();
    let report = run_compare(&scene.image, &CompareMethod::ALL, &cfg).unwrap();
    let methods: Vec<&str> = report.entries.iter().map(|e| e.method.as_str()).collect();
    assert_eq!(methods, ["Original", "ssr", "clahe", "dog-he", "glpf"]);
    let md = report.to_markdown();
    assert!(md.contains("Improvement of ssr"), "{md}");
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 5);

    let single = run_compare(&scene.image, &[CompareMethod::Ssr], &cfg).unwrap();
    assert_eq!(single.entries.len(), 2);
    assert!(single.improvements.is_none());
    assert!(!single.to_markdown().contains("Improvement"));
}
