use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use si_forge_core::catalog::{ingest_backgrounds, ingest_foregrounds, validate_manifest, ClassMap, IngestOptions};
use si_forge_core::compositor::{transform_object, ObjectCutout};
use si_forge_core::raster::is_opaque;
use si_forge_core::sweep::{generate, preset_config, refilter, GenerateOptions, PresetKind, MANIFEST_FILE};
use si_forge_core::{AssetManifest, DatasetManifest};

fn shape(w: u32, h: u32, inside: impl Fn(f64, f64) -> bool) -> RgbaImage {
    RgbaImage::from_fn(w, h, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
        if inside(u, v) {
            Rgba([(x * 7 % 256) as u8, 120, (y * 5 % 256) as u8, 255])
        } else {
            Rgba([0, 0, 0, 0])
        }
    })
}

fn toy_assets(root: &Path) -> AssetManifest {
    let fg = root.join("fg");
    fs::create_dir_all(fg.join("ball")).unwrap();
    fs::create_dir_all(fg.join("box")).unwrap();
    shape(40, 40, |u, v| (u - 0.5).powi(2) + (v - 0.5).powi(2) < 0.2).save(fg.join("ball/a.png")).unwrap();
    shape(60, 30, |_, _| true).save(fg.join("box/wide.png")).unwrap();
    shape(30, 50, |u, v| v > u).save(fg.join("box/wedge.png")).unwrap();
    fs::write(root.join("classes.csv"), "class_label,label_id\nball,1\nbox,2\nbox,3\n").unwrap();
    let bg = root.join("bg");
    fs::create_dir_all(&bg).unwrap();
    for (i, (w, h)) in [(300u32, 260u32), (256, 400), (512, 512)].iter().enumerate() {
        RgbImage::from_fn(*w, *h, |x, y| Rgb([(x % 251) as u8, (y % 241) as u8, (i * 80) as u8]))
            .save(bg.join(format!("bg{i}.png")))
            .unwrap();
    }
    let map = ClassMap::load(&root.join("classes.csv")).unwrap();
    let fgs = ingest_foregrounds(&fg, &map, IngestOptions::default()).unwrap();
    let bgs = ingest_backgrounds(&bg, 224).unwrap();
    assert!(fgs.errors.is_empty() && bgs.errors.is_empty());
    AssetManifest::new(fgs.assets, bgs.assets, IngestOptions::default().alpha_threshold)
}

#[test]
fn ingested_manifest_validates_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = toy_assets(dir.path());
    assert_eq!(m.foregrounds.len(), 3);
    assert_eq!(m.backgrounds.len(), 3);
    assert!(validate_manifest(&m).is_empty());
    let path = dir.path().join("assets.jsonl");
    m.save(&path).unwrap();
    assert_eq!(AssetManifest::load(&path).unwrap(), m);
    let wedge = m.foregrounds.iter().find(|f| f.asset_id == "box/wedge").unwrap();
    assert_eq!(wedge.target_label_ids.iter().copied().collect::<Vec<_>>(), vec![2, 3]);
}

#[test]
fn location_sweep_counts_and_in_image_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let assets = toy_assets(dir.path());
    let mut config = preset_config(PresetKind::Location);
    config.canvas_px = 64;
    config.size_fractions = vec![0.1];
    let out = dir.path().join("loc");
    let ds = generate(&assets, &config, &out, GenerateOptions { jobs: Some(4) }).unwrap();
    assert_eq!(ds.counts.generated, 3 * 2 * 441);
    assert_eq!(ds.counts.filtered_out + ds.counts.failed, 0);
    assert_eq!(fs::read_dir(out.join("images")).unwrap().count(), 3 * 2 * 441);

    // brute-force oracle: paste the transformed raster onto an unbounded
    // plane and count opaque pixels that land inside the canvas
    let index: std::collections::HashMap<_, _> = assets.foregrounds.iter().map(|f| (f.asset_id.clone(), f)).collect();
    for fg in &assets.foregrounds {
        let cut = ObjectCutout::load(fg, assets.mask_alpha_threshold).unwrap();
        let t = transform_object(&cut, 0.1, 0.0, 64, assets.mask_alpha_threshold).unwrap();
        for s in ds.samples.iter().filter(|s| s.foreground_id == fg.asset_id) {
            let (ox, oy) = t.offset_for((s.fx, s.fy));
            let mut inside = 0u64;
            for (x, y, p) in t.pixels.enumerate_pixels() {
                let (cx, cy) = (x as i64 + ox, y as i64 + oy);
                if is_opaque(p[3], t.threshold) && (0..64).contains(&cx) && (0..64).contains(&cy) {
                    inside += 1;
                }
            }
            assert_eq!(s.in_image_fraction, inside as f64 / t.opaque_area_px as f64, "{}", s.image_id);
        }
        assert!(index.contains_key(&fg.asset_id));
    }

    let loaded = DatasetManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, ds);

    // filters partition the unfiltered set
    for t in [0.5, 0.75, 0.95] {
        let f = refilter(&ds, t).unwrap();
        assert_eq!(f.counts.generated + f.counts.filtered_out, ds.counts.generated);
        assert!(f.samples.iter().all(|s| s.in_image_fraction >= t));
        let kept = ds.samples.iter().filter(|s| s.in_image_fraction >= t).count();
        assert_eq!(kept, f.counts.generated);
        assert!(kept > 0 && kept < ds.samples.len());
    }
}

#[test]
fn generation_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let assets = toy_assets(dir.path());
    let mut config = preset_config(PresetKind::Rotation);
    config.canvas_px = 48;
    config.rotations_deg.truncate(5);
    let a = generate(&assets, &config, &dir.path().join("a"), GenerateOptions { jobs: Some(1) }).unwrap();
    let b = generate(&assets, &config, &dir.path().join("b"), GenerateOptions { jobs: Some(8) }).unwrap();
    assert_eq!(a.samples_jsonl(), b.samples_jsonl());
    assert_eq!(a.summary_json(), b.summary_json());
    for s in &a.samples {
        let pa = fs::read(dir.path().join("a").join(&s.image_path)).unwrap();
        let pb = fs::read(dir.path().join("b").join(&s.image_path)).unwrap();
        assert_eq!(pa, pb);
    }
    assert_eq!(
        a.counts.generated + a.counts.filtered_out + a.counts.failed,
        config.total_samples(assets.foregrounds.len())
    );
}
