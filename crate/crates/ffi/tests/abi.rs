use std::ffi::CStr;
use std::ptr;

use ssep_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ssep_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn stationary_handle_round_trip() {
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(
            ssep_stationary_new(4, 1.0, 1e-13, &mut handle),
            SsepStatus::Ok
        );
        assert!(!handle.is_null());
        let mut m = 0.0;
        for x in 1..=4usize {
            assert_eq!(
                ssep_stationary_moment(handle, &x, 1, &mut m),
                SsepStatus::Ok
            );
            assert!((m - x as f64 / 5.0).abs() < 1e-10);
        }
        let mut total = 0.0;
        for mask in 0..16u64 {
            let mut p = 0.0;
            assert_eq!(
                ssep_stationary_probability(handle, mask, &mut p),
                SsepStatus::Ok
            );
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-12);
        let mut p = 0.0;
        assert_eq!(
            ssep_stationary_probability(handle, 16, &mut p),
            SsepStatus::Validation
        );
        assert!(last_error().contains("out of range"));
        ssep_stationary_free(handle);
    }
}

#[test]
fn stationary_errors_map_to_codes() {
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(
            ssep_stationary_new(21, 1.0, 1e-13, &mut handle),
            SsepStatus::Resource
        );
        assert!(handle.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            ssep_stationary_new(0, 1.0, 1e-13, &mut handle),
            SsepStatus::Validation
        );
        assert_eq!(
            ssep_stationary_new(4, -1.0, 1e-13, &mut handle),
            SsepStatus::Validation
        );
        assert_eq!(
            ssep_stationary_new(4, 1.0, 1e-13, ptr::null_mut()),
            SsepStatus::NullPointer
        );
        let mut m = 0.0;
        let x = 1usize;
        assert_eq!(
            ssep_stationary_moment(ptr::null(), &x, 1, &mut m),
            SsepStatus::NullPointer
        );
        // null handles are ignored by the destructors
        ssep_stationary_free(ptr::null_mut());
        ssep_pair_absorption_free(ptr::null_mut());
        ssep_ladder_free(ptr::null_mut());
    }
}

#[test]
fn pair_absorption_matches_stationary_two_point() {
    let (mut pair, mut pi) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(
            ssep_pair_absorption_new(6, 1.0, 1e-13, &mut pair),
            SsepStatus::Ok
        );
        assert_eq!(ssep_stationary_new(6, 1.0, 1e-13, &mut pi), SsepStatus::Ok);
        for x in 1..=6usize {
            for y in x + 1..=6 {
                let (mut a, mut b) = (0.0, 0.0);
                assert_eq!(ssep_pair_absorption_get(pair, x, y, &mut a), SsepStatus::Ok);
                assert_eq!(
                    ssep_stationary_moment(pi, [x, y].as_ptr(), 2, &mut b),
                    SsepStatus::Ok
                );
                assert!((a - b).abs() < 1e-9, "({x},{y}): {a} vs {b}");
            }
        }
        let mut v = 0.0;
        assert_eq!(
            ssep_pair_absorption_get(pair, 3, 3, &mut v),
            SsepStatus::Validation
        );
        assert_eq!(
            ssep_pair_absorption_get(pair, 1, 8, &mut v),
            SsepStatus::Validation
        );
        ssep_pair_absorption_free(pair);
        ssep_stationary_free(pi);
    }
}

#[test]
fn ladder_handle() {
    let mut ladder = ptr::null_mut();
    unsafe {
        assert_eq!(
            ssep_ladder_new(16, 1.0, 4, 9, 10, 1e-13, &mut ladder),
            SsepStatus::Ok
        );
        let mut depth = 0;
        assert_eq!(ssep_ladder_depth(ladder, &mut depth), SsepStatus::Ok);
        assert_eq!(depth, 10);
        let (mut c, mut g, mut p) = (0.0, 0.0, 0.0);
        assert_eq!(
            ssep_ladder_row(ladder, 1, &mut c, &mut g, &mut p),
            SsepStatus::Ok
        );
        assert!((g - 15.0 / 16.0).abs() < 1e-15);
        assert!(c <= g);
        assert_eq!(
            ssep_ladder_row(ladder, 0, &mut c, &mut g, &mut p),
            SsepStatus::Validation
        );
        assert_eq!(
            ssep_ladder_row(ladder, 11, &mut c, &mut g, &mut p),
            SsepStatus::Validation
        );
        let mut s = SsepLadderSummary::default();
        assert_eq!(ssep_ladder_summary(ladder, &mut s), SsepStatus::Ok);
        assert!((s.p_inf - 2.0 / 17.0).abs() < 1e-10);
        assert!(s.p0 - s.p_inf <= s.bound);
        ssep_ladder_free(ladder);
        assert_eq!(
            ssep_ladder_new(16, 1.0, 4, 5, 10, 1e-13, &mut ladder),
            SsepStatus::Validation
        );
    }
}

#[test]
fn monte_carlo_entry_points() {
    let mut e = SsepEstimate::default();
    let points = [3usize, 7];
    unsafe {
        assert_eq!(
            ssep_dual_absorption(10, 1.0, 5, points.as_ptr(), 2, 20_000, &mut e),
            SsepStatus::Ok
        );
        assert_eq!(e.samples, 20_000);
        let exact = 18.0 / 110.0;
        assert!((e.mean - exact).abs() < 4.0 * e.std_error, "{e:?}");

        let initial = [1u8, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let (mut fwd, mut dual) = (SsepEstimate::default(), SsepEstimate::default());
        assert_eq!(
            ssep_transient_moment(
                10,
                1.0,
                5,
                initial.as_ptr(),
                points.as_ptr(),
                2,
                1.0,
                20_000,
                &mut fwd
            ),
            SsepStatus::Ok
        );
        assert_eq!(
            ssep_transient_dual_moment(
                10,
                1.0,
                5,
                initial.as_ptr(),
                points.as_ptr(),
                2,
                1.0,
                20_000,
                &mut dual
            ),
            SsepStatus::Ok
        );
        let z = (fwd.mean - dual.mean) / (fwd.std_error.powi(2) + dual.std_error.powi(2)).sqrt();
        assert!(z.abs() < 4.0, "forward {fwd:?} dual {dual:?}");

        let unsorted = [7usize, 3];
        assert_eq!(
            ssep_dual_absorption(10, 1.0, 5, unsorted.as_ptr(), 2, 10, &mut e),
            SsepStatus::Validation
        );
        assert_eq!(
            ssep_dual_absorption(10, 1.0, 5, ptr::null(), 2, 10, &mut e),
            SsepStatus::NullPointer
        );
        assert_eq!(
            ssep_transient_moment(10, 1.0, 5, ptr::null(), points.as_ptr(), 2, 1.0, 10, &mut e),
            SsepStatus::NullPointer
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ssep_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/ssep.h");
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    for code in [
        "SSEP_STATUS_OK = 0",
        "SSEP_STATUS_VALIDATION = 2",
        "SSEP_STATUS_PANIC = 5",
    ] {
        assert!(header.contains(code));
    }
}

/// Compiles `tests/smoke.c` against the generated header and the static
/// library; skipped when no C compiler is installed.
#[test]
fn c_smoke_program() {
    use std::path::PathBuf;
    use std::process::Command;

    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    if Command::new(&compiler).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/abi-* -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libssep_ffi.a");
    if !lib.exists() {
        // integration tests link the rlib only; build the static archive too
        let mut build = Command::new(env!("CARGO"));
        build.args([
            "build",
            "--offline",
            "-p",
            "ssep-ffi",
            "--lib",
            "--target-dir",
        ]);
        build.arg(profile_dir.parent().unwrap());
        if profile_dir.ends_with("release") {
            build.arg("--release");
        }
        assert!(
            build.status().unwrap().success(),
            "building the static library failed"
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let binary = dir.path().join("smoke");
    let status = Command::new(&compiler)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&binary)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&binary).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("P_inf = 0.117647058824"));
}
