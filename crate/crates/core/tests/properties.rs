use std::collections::{BTreeSet, HashMap};

use image::{Rgba, RgbaImage};
use proptest::prelude::*;
use si_forge_core::compositor::{fixres_crop_geometry, transform_object, ObjectCutout, TEST_RESOLUTIONS};
use si_forge_core::metrics::{
    anchor_accuracy, delta_map, normalize_best, normalize_p95, pm_k_accuracy, FactorProfile, Grid, Normalization,
};
use si_forge_core::raster::is_opaque;
use si_forge_core::stats::{pearson, spearman};
use si_forge_core::sweep::{preset_config, refilter, PresetKind, SampleCounts, SampleRecord};
use si_forge_core::{DatasetManifest, FrameGroup, PredictionSet};

fn preds(pairs: impl IntoIterator<Item = (String, u32)>) -> PredictionSet {
    PredictionSet {
        model_id: "m".into(),
        entries: pairs.into_iter().map(|(k, v)| (k, vec![v])).collect(),
    }
}

fn manifest(fractions: &[f64]) -> DatasetManifest {
    let samples = fractions
        .iter()
        .enumerate()
        .map(|(i, f)| SampleRecord {
            image_id: format!("{i:04}"),
            foreground_id: "c/o".into(),
            background_id: "b".into(),
            class_label: "c".into(),
            target_label_ids: vec![1],
            size_fraction: 0.2,
            fx: 0.5,
            fy: 0.5,
            rotation_deg: 0.0,
            in_image_fraction: *f,
            image_path: format!("images/{i:04}.png"),
        })
        .collect();
    DatasetManifest {
        config: preset_config(PresetKind::Location),
        samples,
        counts: SampleCounts {
            generated: fractions.len(),
            filtered_out: 0,
            failed: 0,
        },
        failures: vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spearman_ignores_monotone_transforms(
        xs in prop::collection::vec(-100.0f64..100.0, 3..40),
        seed in any::<u64>(),
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.3 + ((i as u64 ^ seed) % 17) as f64).collect();
        let base = match spearman(&xs, &ys) { Ok(v) => v, Err(_) => return Ok(()) };
        let fx: Vec<f64> = xs.iter().map(|x| (x / 50.0).exp()).collect();
        let fy: Vec<f64> = ys.iter().map(|y| y.powi(3) + 2.0 * y).collect();
        prop_assert!((spearman(&fx, &fy).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((pearson(&y, &x).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn refilter_composes_as_max(
        fracs in prop::collection::vec(0.0f64..=1.0, 0..60),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let m = manifest(&fracs);
        let twice = refilter(&refilter(&m, a).unwrap(), b).unwrap();
        let once = refilter(&m, a.max(b)).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn pm_k_never_increases_with_k(
        groups in prop::collection::vec((0usize..5, 0usize..5), 1..12),
        labels in prop::collection::vec(0u32..3, 200),
    ) {
        let mut fg = vec![];
        let mut p = HashMap::new();
        let mut next = 0usize;
        let mut id = || { next += 1; format!("f{next}") };
        for (g, (nb, na)) in groups.iter().enumerate() {
            let before: Vec<String> = (0..*nb).map(|_| id()).collect();
            let after: Vec<String> = (0..*na).map(|_| id()).collect();
            let anchor = id();
            for f in before.iter().chain(&after).chain(std::iter::once(&anchor)) {
                p.insert(f.clone(), labels[p.len() % labels.len()]);
            }
            fg.push(FrameGroup {
                group_id: format!("g{g}"),
                anchor_id: anchor,
                neighbors_before: before,
                neighbors_after: after,
                label_ids: BTreeSet::from([0]),
            });
        }
        let p = preds(p);
        prop_assert_eq!(pm_k_accuracy(&p, &fg, 0).unwrap(), anchor_accuracy(&p, &fg).unwrap());
        let mut last = 1.0;
        for k in 0..6 {
            let v = pm_k_accuracy(&p, &fg, k).unwrap();
            prop_assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn normalizations_are_scale_invariant(
        vals in prop::collection::vec(prop::option::weighted(0.8, 0.05f64..1.0), 1..30),
        c in prop::sample::select(vec![0.5f64, 2.0, 3.7]),
    ) {
        prop_assume!(vals.iter().any(|v| v.is_some()));
        let grid = |s: f64| Grid {
            rows: 1,
            cols: vals.len(),
            values: vals.iter().map(|v| v.map(|x| x * s)).collect(),
            support: vals.iter().map(|v| v.is_some() as u64).collect(),
            normalization: Normalization::Raw,
        };
        let a = normalize_p95(&grid(1.0)).unwrap();
        let b = normalize_p95(&grid(c)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                (None, None) => {}
                _ => prop_assert!(false, "support changed"),
            }
        }
        let zero = delta_map(&a, &a).unwrap();
        prop_assert!(zero.values.iter().flatten().all(|v| *v == 0.0));

        let prof = |s: f64| FactorProfile {
            factor_name: "size".into(),
            bins: (0..vals.len()).map(|i| i as f64).collect(),
            accuracy: vals.iter().map(|v| v.map(|x| x * s)).collect(),
            support: vals.iter().map(|v| v.is_some() as u64).collect(),
            normalization: Normalization::Raw,
        };
        let pa = normalize_best(&prof(1.0)).unwrap();
        let pb = normalize_best(&prof(c)).unwrap();
        for (x, y) in pa.accuracy.iter().zip(&pb.accuracy) {
            if let (Some(x), Some(y)) = (x, y) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
        prop_assert!(pa.accuracy.iter().flatten().any(|v| *v == 1.0));
    }

    #[test]
    fn fixres_crop_is_interior(w in 1u32..4000, h in 1u32..4000, ri in 0usize..8) {
        let r = TEST_RESOLUTIONS[ri];
        let g = fixres_crop_geometry(w, h, r);
        prop_assert!(g.crop_x + r <= g.resize_w);
        prop_assert!(g.crop_y + r <= g.resize_h);
        prop_assert_eq!(g.resize_w.min(g.resize_h), 115 * r / 100);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn in_image_count_matches_brute_force(
        w in 3u32..40,
        h in 3u32..40,
        bits in prop::collection::vec(any::<bool>(), 1600),
        size in 0.02f64..0.6,
        rot in 0.0f64..360.0,
        fx in 0.0f64..=1.0,
        fy in 0.0f64..=1.0,
    ) {
        let img = RgbaImage::from_fn(w, h, |x, y| {
            if bits[(y * 40 + x) as usize] { Rgba([200, 10, 10, 255]) } else { Rgba([0, 0, 0, 0]) }
        });
        let Ok(cut) = ObjectCutout::from_raster(&img, 127) else { return Ok(()) };
        let Ok(t) = transform_object(&cut, size, rot, 48, 127) else { return Ok(()) };
        let (ox, oy) = t.offset_for((fx, fy));
        let brute = t
            .pixels
            .enumerate_pixels()
            .filter(|(x, y, p)| {
                let (cx, cy) = (*x as i64 + ox, *y as i64 + oy);
                is_opaque(p[3], 127) && (0..48).contains(&cx) && (0..48).contains(&cy)
            })
            .count() as u64;
        prop_assert_eq!(t.opaque_inside((ox, oy)), brute);
    }
}
