use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use corrcache_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = corrcache_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn trace(source: &str, scale: f64) -> *mut CorrcacheTrace {
    let mut t = ptr::null_mut();
    let s = unsafe { corrcache_trace_generate(c(source).as_ptr(), 1, scale, &mut t) };
    assert_eq!(s, CorrcacheStatus::Ok, "{}", last_error());
    t
}

#[test]
fn simulation_matches_the_library() {
    let t = trace("toroid-switch", 0.02);
    let volume = unsafe { corrcache_trace_total_volume(t) };
    let mut m = ptr::null_mut();
    let s = unsafe { corrcache_simulate(t, c("lfrus:2:0.5").as_ptr(), volume / 20, 0.05, 3, &mut m) };
    assert_eq!(s, CorrcacheStatus::Ok);
    let mut sum = CorrcacheSummary::default();
    assert_eq!(unsafe { corrcache_metrics_summary(m, &mut sum) }, CorrcacheStatus::Ok);

    let spec = corrcache::workload::preset("toroid-switch").unwrap().scaled(0.02).unwrap();
    let native = spec.generate(1).unwrap();
    let cfg = corrcache::CacheConfig::new(volume / 20).unwrap().with_local_fraction(0.05).unwrap();
    let want = corrcache::simulate(&native, &"lfrus:2:0.5".parse().unwrap(), &cfg, 3).unwrap();
    assert_eq!(sum.trace_events, native.len() as u64);
    assert_eq!((sum.requests, sum.hits, sum.local_hits), (want.forwarded, want.hits, want.local_hits));
    assert_eq!(sum.local_hits + sum.requests, sum.trace_events);

    let mut r = 0.0;
    let client = *want.per_client.keys().next().unwrap();
    assert_eq!(unsafe { corrcache_metrics_client_hit_ratio(m, client.0, &mut r) }, CorrcacheStatus::Ok);
    assert_eq!(Some(r), want.client_hit_ratio(client));
    assert_eq!(unsafe { corrcache_metrics_client_hit_ratio(m, 99_999, &mut r) }, CorrcacheStatus::NotFound);
    unsafe {
        corrcache_metrics_free(m);
        corrcache_trace_free(t);
    }
}

#[test]
fn traces_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("t.trace").to_str().unwrap());
    let t = trace("fig3-setup", 0.01);
    assert_eq!(unsafe { corrcache_trace_write(t, path.as_ptr()) }, CorrcacheStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { corrcache_trace_read(path.as_ptr(), &mut back) }, CorrcacheStatus::Ok);
    unsafe {
        assert_eq!(corrcache_trace_len(back), corrcache_trace_len(t));
        assert_eq!(corrcache_trace_total_volume(back), corrcache_trace_total_volume(t));
        corrcache_trace_free(back);
        corrcache_trace_free(t);
    }
}

#[test]
fn inline_workload_text_is_accepted() {
    let text = "kind = \"grouped\"\nhorizon = 100.0\nsizes = 1\n[[group]]\nobjects = [1, 50]\nrate = 5.0\n\
                zipf = 0.9\nfollowers = 2\ndelay = { kind = \"structured\", delta = 1.0 }\n";
    let t = trace(text, 1.0);
    assert!(unsafe { corrcache_trace_len(t) } > 0);
    unsafe { corrcache_trace_free(t) };

    let mut model = ptr::null_mut();
    assert_eq!(unsafe { corrcache_model_new(c(text).as_ptr(), &mut model) }, CorrcacheStatus::Ok);
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { corrcache_model_solve(model, 10.0, 0, 0, &mut report) }, CorrcacheStatus::Ok);
    let mut lead = 0.0;
    let mut follow = 0.0;
    unsafe {
        assert_eq!(corrcache_report_hit_prob(report, 0, 0, 1, &mut lead), CorrcacheStatus::Ok);
        assert_eq!(corrcache_report_hit_prob(report, 0, 2, 1, &mut follow), CorrcacheStatus::Ok);
        assert_eq!(corrcache_report_hit_prob(report, 1, 0, 1, &mut lead), CorrcacheStatus::NotFound);
        assert!(corrcache_report_t_star(report) > 0.0);
        corrcache_report_free(report);
        corrcache_model_free(model);
    }
    assert!((0.0..=1.0).contains(&follow));
}

#[test]
fn failures_set_status_and_message() {
    let mut t = ptr::null_mut();
    let s = unsafe { corrcache_trace_generate(c("fig9").as_ptr(), 1, 1.0, &mut t) };
    assert_eq!(s, CorrcacheStatus::Config);
    assert!(t.is_null());
    assert!(last_error().contains("fig2-setup"));

    let s = unsafe { corrcache_trace_generate(ptr::null(), 1, 1.0, &mut t) };
    assert_eq!(s, CorrcacheStatus::NullPointer);

    let bad = [0xffu8, 0];
    let s = unsafe { corrcache_trace_generate(bad.as_ptr().cast(), 1, 1.0, &mut t) };
    assert_eq!(s, CorrcacheStatus::InvalidUtf8);

    let missing = c("/nonexistent/dir/x.trace");
    assert_eq!(unsafe { corrcache_trace_read(missing.as_ptr(), &mut t) }, CorrcacheStatus::Io);

    let tr = trace("fig3-setup", 0.01);
    let mut m = ptr::null_mut();
    // Mixed sizes rule out the offline optimum.
    let s = unsafe { corrcache_simulate(tr, c("belady").as_ptr(), 100, 0.0, 1, &mut m) };
    assert_eq!(s, CorrcacheStatus::Config);
    assert!(last_error().contains("same size"));
    let s = unsafe { corrcache_simulate(tr, c("lru").as_ptr(), 0, 0.0, 1, &mut m) };
    assert_eq!(s, CorrcacheStatus::Config);

    let mut model = ptr::null_mut();
    assert_eq!(unsafe { corrcache_model_new(c("toroid-trace1").as_ptr(), &mut model) }, CorrcacheStatus::Config);
    unsafe {
        corrcache_trace_free(tr);
        corrcache_trace_free(ptr::null_mut());
        corrcache_metrics_free(ptr::null_mut());
        corrcache_model_free(ptr::null_mut());
        corrcache_report_free(ptr::null_mut());
        assert_eq!(corrcache_trace_len(ptr::null()), 0);
        assert!(corrcache_report_t_star(ptr::null()).is_nan());
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(corrcache_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/corrcache.h");
    assert!(header.exists(), "header is generated by the build script");
    let lib = target_dir().join("libcorrcache_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("hit_ratio="));
}
