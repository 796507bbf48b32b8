use std::ffi::{CStr, CString};
use std::ptr;

use tensorgen_ffi::*;

fn last_error() -> String {
    let p = tg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &std::path::Path) -> CString {
    CString::new(s.to_str().unwrap()).unwrap()
}

/// Two well separated blocks of four features each.
fn blocks(rows: usize) -> *mut TgDataset {
    let values: Vec<u8> = (0..rows)
        .flat_map(|i| {
            let first = i % 3 != 0;
            (0..8).map(move |j| {
                let on = (j < 4) == first;
                // deterministic noise so the second moment has full rank
                let flip = (i * 31 + j * 17) % 11 == 0;
                (on != flip) as u8
            })
        })
        .collect();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tg_dataset_from_rows(values.as_ptr(), rows, 8, &mut out) }, TgStatus::Ok);
    out
}

#[test]
fn fit_sample_save_load() {
    let dir = tempfile::tempdir().unwrap();
    let data = blocks(3000);
    unsafe {
        assert_eq!(tg_dataset_rows(data), 3000);
        assert_eq!(tg_dataset_cols(data), 8);

        let mut model = ptr::null_mut();
        assert_eq!(tg_model_fit(data, 2, 7, &mut model), TgStatus::Ok, "{}", last_error());
        assert_eq!(tg_model_k(model), 2);
        assert_eq!(tg_model_d(model), 8);

        let mut w = [0.0; 2];
        assert_eq!(tg_model_weights(model, w.as_mut_ptr(), 2), TgStatus::Ok);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-9);
        let mut sorted = w;
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 1.0 / 3.0).abs() < 0.05, "{w:?}");

        let mut p = [0.0; 16];
        assert_eq!(tg_model_cond_probs(model, p.as_mut_ptr(), 16), TgStatus::Ok);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(tg_model_cond_probs(model, p.as_mut_ptr(), 15), TgStatus::InvalidArgument);

        let path = c(&dir.path().join("m.nbm"));
        assert_eq!(tg_model_save(model, path.as_ptr()), TgStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(tg_model_load(path.as_ptr(), &mut loaded), TgStatus::Ok);
        let mut p2 = [0.0; 16];
        tg_model_cond_probs(loaded, p2.as_mut_ptr(), 16);
        assert_eq!(p, p2);

        let (mut s1, mut s2) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(tg_model_sample(model, 500, 3, &mut s1), TgStatus::Ok);
        assert_eq!(tg_model_sample(loaded, 500, 3, &mut s2), TgStatus::Ok);
        let csv1 = c(&dir.path().join("s1.csv"));
        let csv2 = c(&dir.path().join("s2.csv"));
        tg_dataset_save_csv(s1, csv1.as_ptr());
        tg_dataset_save_csv(s2, csv2.as_ptr());
        assert_eq!(
            std::fs::read(dir.path().join("s1.csv")).unwrap(),
            std::fs::read(dir.path().join("s2.csv")).unwrap()
        );

        let mut reread = ptr::null_mut();
        assert_eq!(tg_dataset_load_csv(csv1.as_ptr(), &mut reread), TgStatus::Ok);
        assert_eq!(tg_dataset_rows(reread), 500);

        let mut ll = 0.0;
        assert_eq!(tg_model_log_likelihood(model, data, &mut ll), TgStatus::Ok);
        assert!(ll < 0.0 && ll.is_finite());

        for d in [data, s1, s2, reread] {
            tg_dataset_free(d);
        }
        tg_model_free(model);
        tg_model_free(loaded);
    }
}

#[test]
fn evaluate_and_mmd() {
    let data = blocks(2000);
    unsafe {
        let mut base = ptr::null_mut();
        assert_eq!(tg_baseline_fit(data, &mut base), TgStatus::Ok);
        let mut synth = ptr::null_mut();
        assert_eq!(tg_baseline_sample(base, 2000, 1, &mut synth), TgStatus::Ok);

        let mut report = TgEvalReport::default();
        assert_eq!(tg_evaluate(data, synth, 0, &mut report), TgStatus::Ok, "{}", last_error());
        // the baseline loses the block structure entirely
        assert!(report.accuracy > 0.9, "{report:?}");

        let mut fixed = 0.0;
        let mut median = 0.0;
        assert_eq!(tg_mmd_unbiased(data, synth, 1.0, &mut fixed), TgStatus::Ok);
        assert_eq!(tg_mmd_unbiased(data, synth, 0.0, &mut median), TgStatus::Ok);
        assert!(fixed > 0.0 && median > 0.0);
        assert_ne!(fixed, median);

        tg_baseline_free(base);
        tg_dataset_free(synth);
        tg_dataset_free(data);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        let missing = c(&dir.path().join("missing.csv"));
        assert_eq!(tg_dataset_load_csv(missing.as_ptr(), &mut out), TgStatus::Io);
        assert!(last_error().contains("missing.csv"));
        assert!(out.is_null());

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,b\n0,2\n").unwrap();
        assert_eq!(tg_dataset_load_csv(c(&bad).as_ptr(), &mut out), TgStatus::Parse);

        assert_eq!(tg_dataset_load_csv(ptr::null(), &mut out), TgStatus::NullPointer);
        assert_eq!(tg_model_fit(ptr::null(), 2, 0, &mut ptr::null_mut()), TgStatus::NullPointer);
        assert_eq!(tg_dataset_rows(ptr::null()), 0);
        tg_dataset_free(ptr::null_mut());

        // identical rows: the second moment has rank one
        let ones = [1u8; 40];
        let mut data = ptr::null_mut();
        tg_dataset_from_rows(ones.as_ptr(), 10, 4, &mut data);
        let mut model = ptr::null_mut();
        assert_eq!(tg_model_fit(data, 3, 0, &mut model), TgStatus::RankDeficient);
        assert!(last_error().contains("rank 1"), "{}", last_error());

        let other = [0u8; 30];
        let mut narrow = ptr::null_mut();
        tg_dataset_from_rows(other.as_ptr(), 10, 3, &mut narrow);
        let mut v = 0.0;
        assert_eq!(tg_mmd_unbiased(data, narrow, 1.0, &mut v), TgStatus::DimensionMismatch);

        let twos = [2u8; 4];
        assert_eq!(tg_dataset_from_rows(twos.as_ptr(), 2, 2, &mut out), TgStatus::InvalidArgument);
        assert!(last_error().contains("not 0 or 1"));

        let base_path = dir.path().join("b.nbm");
        let zeros = tensorgen::BinaryDataset::from_rows(tensorgen::BinaryDataset::default_names(2), &[[0u8, 1]]).unwrap();
        tensorgen::model::NbmFile::Baseline(tensorgen::model::fit_baseline(&zeros))
            .save(&base_path)
            .unwrap();
        assert_eq!(tg_model_load(c(&base_path).as_ptr(), &mut model), TgStatus::InvalidArgument);
        assert!(last_error().contains("baseline"));

        tg_dataset_free(data);
        tg_dataset_free(narrow);
    }
}
