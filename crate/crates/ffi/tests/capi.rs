use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use num_complex::Complex64;
use rftrigger::datacube::{
    bpm_demux, bpm_mux, load_cube, save_cube, ChannelKind, IQCube, RadarConfig,
};
use rftrigger::fidelity::{dfd, Curve};
use rftrigger::rfrep::range_doppler_map;
use rftrigger_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { rft_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn mimo_virtual_cube() -> IQCube {
    let mut cube = IQCube::zeros(RadarConfig::mimo_77ghz(), ChannelKind::Virtual, 128).unwrap();
    for s in 0..cube.n_slow() {
        for f in 0..cube.n_fast() {
            for c in 0..cube.n_chan() {
                let phase = 0.3 * f as f64 + 0.1 * s as f64 + 0.2 * c as f64;
                cube.set(f, s, c, Complex64::from_polar(1.0, phase));
            }
        }
    }
    cube
}

#[test]
fn cube_round_trips_through_the_handle_api() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in.rfc");
    let virt = mimo_virtual_cube();
    let phys = bpm_mux(&virt).unwrap();
    save_cube(&phys, &src).unwrap();

    let mut h: *mut RftCube = ptr::null_mut();
    assert_eq!(
        unsafe { rft_cube_load(cstr(&src).as_ptr(), &mut h) },
        RftStatus::Ok
    );
    let (mut f, mut s, mut c, mut v) = (0, 0, 0, true);
    assert_eq!(
        unsafe { rft_cube_shape(h, &mut f, &mut s, &mut c, &mut v) },
        RftStatus::Ok
    );
    assert_eq!(
        (f, s, c, v),
        (phys.n_fast(), phys.n_slow(), phys.n_chan(), false)
    );

    let mut d: *mut RftCube = ptr::null_mut();
    assert_eq!(unsafe { rft_cube_demux(h, &mut d) }, RftStatus::Ok);
    unsafe { rft_cube_shape(d, &mut f, &mut s, &mut c, &mut v) };
    assert_eq!((c, v), (8, true));

    let (mut len, mut nr, mut nd) = (0, 0, 0);
    let status =
        unsafe { rft_cube_range_doppler(d, 0, 3, ptr::null_mut(), 0, &mut len, &mut nr, &mut nd) };
    assert_eq!(status, RftStatus::BufferTooSmall);
    assert_eq!(len, nr * nd);
    let mut buf = vec![0.0; len];
    let status = unsafe {
        rft_cube_range_doppler(d, 0, 3, buf.as_mut_ptr(), len, &mut len, &mut nr, &mut nd)
    };
    assert_eq!(status, RftStatus::Ok);
    let stored = bpm_demux(&load_cube(&src).unwrap()).unwrap();
    let expect = range_doppler_map(&stored, 0, 3).unwrap();
    assert_eq!(buf.as_slice(), expect.magnitude.as_slice());

    let mut m: *mut RftCube = ptr::null_mut();
    assert_eq!(unsafe { rft_cube_mux(d, &mut m) }, RftStatus::Ok);
    let dst = dir.path().join("out.rfc");
    assert_eq!(
        unsafe { rft_cube_save(m, cstr(&dst).as_ptr()) },
        RftStatus::Ok
    );
    let before = load_cube(&src).unwrap();
    let after = load_cube(&dst).unwrap();
    assert_eq!(before.data(), after.data());
    unsafe {
        rft_cube_free(h);
        rft_cube_free(d);
        rft_cube_free(m);
        rft_cube_free(ptr::null_mut());
    }
}

#[test]
fn failures_map_to_status_codes_and_messages() {
    let mut h: *mut RftCube = ptr::null_mut();
    let missing = CString::new("/nonexistent/cube.rfc").unwrap();
    assert_eq!(
        unsafe { rft_cube_load(missing.as_ptr(), &mut h) },
        RftStatus::Io
    );
    assert!(h.is_null());
    assert!(last_error().contains("nonexistent"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.rfc");
    std::fs::write(&junk, b"not a cube").unwrap();
    assert_eq!(
        unsafe { rft_cube_load(cstr(&junk).as_ptr(), &mut h) },
        RftStatus::Format
    );

    assert_eq!(
        unsafe { rft_cube_load(ptr::null(), &mut h) },
        RftStatus::NullPointer
    );
    let mut out = 0.0;
    assert_eq!(
        unsafe { rft_dtw(ptr::null(), 2, ptr::null(), 0, &mut out) },
        RftStatus::NullPointer
    );

    let a = [1.0, 2.0];
    assert_eq!(
        unsafe { rft_dtw(a.as_ptr(), 2, a.as_ptr(), 2, &mut out) },
        RftStatus::Ok
    );
    assert_eq!(out, 0.0);
    assert_eq!(last_error(), "");
}

#[test]
fn distances_match_the_library() {
    let a = [0.0, 1.0, 3.0, 2.0];
    let b = [0.5, 2.5, 2.0];
    let mut out = 0.0;
    assert_eq!(
        unsafe { rft_dtw(a.as_ptr(), 4, b.as_ptr(), 3, &mut out) },
        RftStatus::Ok
    );
    assert_eq!(out, rftrigger::fidelity::dtw_values(&a, &b));

    let ta = [0.0, 0.1, 0.2, 0.3];
    let tb = [0.0, 0.15, 0.3];
    let status = unsafe {
        rft_dfd(
            ta.as_ptr(),
            a.as_ptr(),
            4,
            tb.as_ptr(),
            b.as_ptr(),
            3,
            false,
            &mut out,
        )
    };
    assert_eq!(status, RftStatus::Ok);
    let ca = Curve::new(ta.iter().copied().zip(a).collect()).unwrap();
    let cb = Curve::new(tb.iter().copied().zip(b).collect()).unwrap();
    assert_eq!(out, dfd(&ca, &cb));

    let bad = [0.0, 0.0, 0.1, 0.2];
    let status = unsafe {
        rft_dfd(
            bad.as_ptr(),
            a.as_ptr(),
            4,
            tb.as_ptr(),
            b.as_ptr(),
            3,
            true,
            &mut out,
        )
    };
    assert_eq!(status, RftStatus::InvalidInput);
}

#[test]
fn detection_finds_a_burst() {
    let mut v = vec![0.01; 60];
    for x in &mut v[20..35] {
        *x = 1.0;
    }
    let cfg = RftStaLta {
        t1_steps: 2,
        t2_steps: 10,
        sigma1: 0.15,
        sigma2: 2.0,
        sigma3: 0.05,
        min_steps: 2,
    };
    let mut iv = [RftInterval {
        start_step: 0,
        end_step: 0,
    }; 4];
    let mut n = 0;
    for det in [RftDetector::Vw, RftDetector::Fixed, RftDetector::Pbc] {
        let status = unsafe {
            rft_detect_motion(
                v.as_ptr(),
                v.len(),
                det,
                &cfg,
                15,
                0.5,
                iv.as_mut_ptr(),
                4,
                &mut n,
            )
        };
        assert_eq!(status, RftStatus::Ok, "{det:?}");
        assert_eq!(n, 1, "{det:?}");
        assert!(
            iv[0].start_step >= 19 && iv[0].start_step <= 21,
            "{det:?} {:?}",
            iv[0]
        );
        assert!(
            iv[0].end_step >= 33 && iv[0].end_step <= 37,
            "{det:?} {:?}",
            iv[0]
        );
    }
    let bad = RftStaLta {
        t1_steps: 10,
        ..cfg
    };
    let status = unsafe {
        rft_detect_motion(
            v.as_ptr(),
            v.len(),
            RftDetector::Vw,
            &bad,
            0,
            0.5,
            iv.as_mut_ptr(),
            4,
            &mut n,
        )
    };
    assert_eq!(status, RftStatus::InvalidInput);
}

fn stream(rows: &[[f64; 3]]) -> *mut RftScoreStream {
    let names: Vec<CString> = ["blank", "teacher", "other"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let ptrs: Vec<*const c_char> = names.iter().map(|s| s.as_ptr()).collect();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let mut h = ptr::null_mut();
    let status =
        unsafe { rft_scores_new(flat.as_ptr(), rows.len(), 3, ptrs.as_ptr(), 0.1, &mut h) };
    assert_eq!(status, RftStatus::Ok, "{}", last_error());
    h
}

#[test]
fn decoding_and_triggers_go_through_the_stream_handle() {
    let t = [0.1, 0.8, 0.1];
    let o = [0.1, 0.1, 0.8];
    let b = [0.8, 0.1, 0.1];
    let h = stream(&[b, t, t, b, o, o, t, b]);
    let mut out = [0usize; 8];
    let mut n = 0;
    assert_eq!(
        unsafe { rft_best_path_decode(h, out.as_mut_ptr(), 8, &mut n) },
        RftStatus::Ok
    );
    assert_eq!(&out[..n], &[1, 2, 1]);

    let class = CString::new("teacher").unwrap();
    let cfg = RftTriggerConfig {
        trigger_class: class.as_ptr(),
        gamma: 0.5,
        gamma_low: 0.35,
        dwell_fraction: 0.5,
        dwell_requires_classification: true,
    };
    let iv = [
        RftInterval {
            start_step: 1,
            end_step: 2,
        },
        RftInterval {
            start_step: 4,
            end_step: 5,
        },
    ];
    let mut ev = [RftTriggerEvent {
        interval: iv[0],
        fire_step: 0,
        accumulated_score: 0.0,
        mechanism: RftMechanism::Dwell,
    }; 2];
    let status = unsafe {
        rft_trigger(
            h,
            iv.as_ptr(),
            2,
            &cfg,
            RftTriggerMode::Single,
            ev.as_mut_ptr(),
            2,
            &mut n,
        )
    };
    assert_eq!(status, RftStatus::Ok);
    assert_eq!(n, 1);
    assert_eq!(ev[0].interval, iv[0]);
    assert_eq!(ev[0].fire_step, 2);
    assert_eq!(ev[0].mechanism, RftMechanism::HighThreshold);
    assert!((ev[0].accumulated_score - 1.6).abs() < 1e-12);

    let bad = RftTriggerConfig {
        gamma_low: 0.6,
        ..cfg
    };
    let status = unsafe {
        rft_trigger(
            h,
            iv.as_ptr(),
            2,
            &bad,
            RftTriggerMode::Double,
            ev.as_mut_ptr(),
            2,
            &mut n,
        )
    };
    assert_eq!(status, RftStatus::InvalidInput);
    let far = [RftInterval {
        start_step: 6,
        end_step: 9,
    }];
    let status = unsafe {
        rft_trigger(
            h,
            far.as_ptr(),
            1,
            &cfg,
            RftTriggerMode::Double,
            ev.as_mut_ptr(),
            2,
            &mut n,
        )
    };
    assert_ne!(status, RftStatus::Ok);
    unsafe { rft_scores_free(h) };

    let names = [CString::new("teacher").unwrap()];
    let ptrs = [names[0].as_ptr()];
    let mut h2 = ptr::null_mut();
    let status = unsafe { rft_scores_new([1.0].as_ptr(), 1, 1, ptrs.as_ptr(), 0.1, &mut h2) };
    assert_eq!(status, RftStatus::InvalidInput);
    assert!(h2.is_null());
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rftrigger.h")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_declares_the_exported_symbols() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "rft_last_error_message",
        "rft_cube_load",
        "rft_cube_save",
        "rft_cube_free",
        "rft_cube_shape",
        "rft_cube_demux",
        "rft_cube_mux",
        "rft_cube_range_doppler",
        "rft_dtw",
        "rft_dfd",
        "rft_detect_motion",
        "rft_scores_new",
        "rft_scores_free",
        "rft_best_path_decode",
        "rft_trigger",
        "typedef struct RftCube RftCube;",
        "RFT_STATUS_BUFFER_TOO_SMALL = 9",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    if !have_cc() {
        eprintln!("cc not found; skipping compile checks");
        return;
    }
    for lang in ["c", "c++"] {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

/// Compiles a C program against the header and static library when both
/// are available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .join("librftrigger_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("cc or static library missing; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "rftrigger.h"

int main(void) {
    double a[] = {0.0, 1.0, 2.0};
    double b[] = {0.0, 2.0};
    double d = -1.0;
    if (rft_dtw(a, 3, b, 2, &d) != RFT_STATUS_OK || d != 1.0) return 1;
    RftCube *cube = NULL;
    if (rft_cube_load("/nonexistent.rfc", &cube) != RFT_STATUS_IO) return 2;
    char msg[128];
    if (rft_last_error_message(msg, sizeof msg) == 0 || cube != NULL) return 3;
    printf("ok %g\n", d);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok 1");
}
