//! The C ABI exercised from Rust through the same symbols a C caller links.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use monodomain_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        md_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn small() -> *mut MdSimulation {
    let cfg = CString::new("[mesh]\nn = 4\n[time]\ntau = 0.1\nt_end = 0.3\n").unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { md_simulation_new(cfg.as_ptr(), &mut sim) },
        MdStatus::Ok
    );
    assert!(!sim.is_null());
    sim
}

#[test]
fn run_and_read_back() {
    let sim = small();
    unsafe {
        let mut states = 99;
        assert_eq!(md_simulation_num_states(sim, &mut states), MdStatus::Ok);
        assert_eq!(states, 0);
        assert_eq!(md_simulation_run(sim), MdStatus::Ok);
        assert_eq!(md_simulation_num_states(sim, &mut states), MdStatus::Ok);
        assert_eq!(states, 4);
        let mut nv = 0;
        assert_eq!(md_simulation_num_vertices(sim, &mut nv), MdStatus::Ok);
        assert_eq!(nv, 25);

        let (mut u, mut w, mut t) = (vec![0.0; nv], vec![0.0; nv], 0.0);
        assert_eq!(
            md_simulation_state(sim, 3, u.as_mut_ptr(), w.as_mut_ptr(), nv, &mut t),
            MdStatus::Ok
        );
        assert!((t - 0.3).abs() < 1e-12);
        assert!(u.iter().any(|v| *v > 0.1) && w.iter().any(|v| *v > 0.0));

        let (mut eta, mut theta, mut gamma, mut cum) = (0.0, 0.0, 0.0, 0.0);
        let mut last = 0.0;
        for step in 1..=3 {
            assert_eq!(
                md_simulation_indicators(sim, step, &mut eta, &mut theta, &mut gamma, &mut cum),
                MdStatus::Ok
            );
            assert!(eta > 0.0 && theta > 0.0 && gamma >= 0.0 && cum >= last);
            last = cum;
        }
        assert_eq!(
            md_simulation_indicators(
                sim,
                0,
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut()
            ),
            MdStatus::InvalidState
        );
        assert_eq!(
            md_simulation_indicators(
                sim,
                4,
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut()
            ),
            MdStatus::InvalidState
        );
        assert_eq!(
            md_simulation_state(sim, 4, u.as_mut_ptr(), w.as_mut_ptr(), nv, ptr::null_mut()),
            MdStatus::InvalidState
        );
        assert_eq!(
            md_simulation_state(
                sim,
                0,
                u.as_mut_ptr(),
                w.as_mut_ptr(),
                nv - 1,
                ptr::null_mut()
            ),
            MdStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 25"));
        md_simulation_free(sim);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let bad = CString::new("[model]\na = 1.5\n").unwrap();
        let mut sim = ptr::null_mut();
        assert_eq!(
            md_simulation_new(bad.as_ptr(), &mut sim),
            MdStatus::InvalidConfig
        );
        assert!(sim.is_null());
        assert!(last_error().contains("model.a"));

        let unknown = CString::new("[mesh]\nsize = 3\n").unwrap();
        assert_eq!(
            md_simulation_new(unknown.as_ptr(), &mut sim),
            MdStatus::InvalidConfig
        );
        assert!(last_error().contains("line 2"));

        assert_eq!(
            md_simulation_new(ptr::null(), ptr::null_mut()),
            MdStatus::NullPointer
        );
        assert_eq!(md_simulation_run(ptr::null_mut()), MdStatus::NullPointer);
        let mut n = 0;
        assert_eq!(
            md_simulation_num_vertices(ptr::null(), &mut n),
            MdStatus::NullPointer
        );
        md_simulation_free(ptr::null_mut());

        let sim = small();
        let mut buf = [0.0; 25];
        assert_eq!(
            md_simulation_state(
                sim,
                0,
                buf.as_mut_ptr(),
                ptr::null_mut(),
                25,
                ptr::null_mut()
            ),
            MdStatus::NullPointer
        );
        assert_eq!(
            md_simulation_state(
                sim,
                0,
                buf.as_mut_ptr(),
                buf.as_mut_ptr(),
                25,
                ptr::null_mut()
            ),
            MdStatus::InvalidState
        );
        md_simulation_free(sim);
    }
}

#[test]
fn defaults_and_truncated_messages() {
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(md_simulation_new(ptr::null(), &mut sim), MdStatus::Ok);
        let mut nv = 0;
        md_simulation_num_vertices(sim, &mut nv);
        assert_eq!(nv, 33 * 33);
        md_simulation_free(sim);

        let bad = CString::new("[time]\ntau = -1\n").unwrap();
        md_simulation_new(bad.as_ptr(), &mut sim);
        let full = md_last_error(ptr::null_mut(), 0);
        let mut tiny = [1 as c_char; 5];
        assert_eq!(md_last_error(tiny.as_mut_ptr(), tiny.len()), full);
        assert_eq!(tiny[4], 0);
        assert_eq!(
            CStr::from_ptr(md_version()).to_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
    }
}

#[test]
fn generated_header_is_valid_c() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/monodomain.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for name in [
        "md_simulation_new",
        "md_simulation_run",
        "md_simulation_state",
        "md_last_error",
        "MD_STATUS_OK",
        "typedef struct MdSimulation MdSimulation",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Syntax-check with the system C compiler when one is installed.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
