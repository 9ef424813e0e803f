use std::ffi::CString;
use std::path::Path;
use std::ptr;

use hierbayes_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let len = unsafe { hb_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..len.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn map_and_chain_through_handles() {
    unsafe {
        let mut prob = ptr::null_mut();
        assert_eq!(hb_problem_new(ptr::null(), &mut prob), HbStatus::Ok);
        let (mut m, mut n) = (0, 0);
        assert_eq!(hb_problem_dims(prob, &mut m, &mut n), HbStatus::Ok);
        assert_eq!((m, n), (22, 128));

        let mut needed = 0;
        assert_eq!(
            hb_problem_copy_b_hat(prob, ptr::null_mut(), 0, &mut needed),
            HbStatus::Ok
        );
        assert_eq!(needed, 22);
        let mut small = [0.0; 4];
        assert_eq!(
            hb_problem_copy_b_hat(prob, small.as_mut_ptr(), 4, ptr::null_mut()),
            HbStatus::BufferTooSmall
        );

        let mut gamma = ptr::null_mut();
        assert_eq!(
            hb_hypermodel_new(1.0, 1.501, 0.05, &mut gamma),
            HbStatus::Ok
        );
        let mut inv = ptr::null_mut();
        assert_eq!(
            hb_hypermodel_match(-1.0, 1.501, 0.05, &mut inv),
            HbStatus::Ok
        );
        let (mut r, mut beta, mut vt) = (0.0, 0.0, 0.0);
        assert_eq!(
            hb_hypermodel_params(inv, &mut r, &mut beta, &mut vt),
            HbStatus::Ok
        );
        assert_eq!(r, -1.0);
        assert!((beta - 1.0016667).abs() < 1e-6);

        let mut map = ptr::null_mut();
        assert_eq!(
            hb_map_run(prob, gamma, inv, 0.005, 500, &mut map),
            HbStatus::Ok
        );
        assert_eq!(hb_map_converged(map), 1);
        assert!(hb_map_iterations(map) > 0);
        let mut theta = vec![0.0; 128];
        assert_eq!(
            hb_map_copy_theta(map, theta.as_mut_ptr(), 128, ptr::null_mut()),
            HbStatus::Ok
        );
        assert!(theta.iter().all(|t| *t > 0.0));

        let mut chain = ptr::null_mut();
        let st = hb_chain_run(
            prob,
            inv,
            map,
            HbKernel::RadialPcn,
            0.001,
            0.05,
            1_000,
            10,
            3,
            &mut chain,
        );
        assert_eq!(st, HbStatus::Ok, "{}", last_error());
        assert_eq!(hb_chain_stored(chain), 100);
        let rate = hb_chain_acceptance_rate(chain);
        assert!((0.0..=1.0).contains(&rate));
        let mut draws = vec![0.0; 100 * 256];
        assert_eq!(
            hb_chain_copy_draws(chain, draws.as_mut_ptr(), draws.len(), ptr::null_mut()),
            HbStatus::Ok
        );
        assert!(draws.iter().all(|d| d.is_finite()));

        hb_chain_free(chain);
        hb_map_free(map);
        hb_hypermodel_free(inv);
        hb_hypermodel_free(gamma);
        hb_problem_free(prob);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            hb_hypermodel_new(0.0, 1.0, 1.0, &mut h),
            HbStatus::InvalidArgument
        );
        assert!(h.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            hb_hypermodel_match(0.5, 1.2, 0.05, &mut h),
            HbStatus::InvalidArgument
        );
        assert_eq!(
            hb_hypermodel_match(0.5, 1.6, -1.0, &mut h),
            HbStatus::Domain
        );

        let (mut m, mut n) = (0, 0);
        assert_eq!(
            hb_problem_dims(ptr::null(), &mut m, &mut n),
            HbStatus::NullPointer
        );
        assert!(last_error().contains("problem"));

        let bad = CString::new(r#"{"n": "lots"}"#).unwrap();
        let mut prob = ptr::null_mut();
        assert_eq!(
            hb_problem_new(bad.as_ptr(), &mut prob),
            HbStatus::InvalidArgument
        );
        assert!(prob.is_null());

        assert_eq!(hb_map_converged(ptr::null()), 0);
        assert!(hb_chain_acceptance_rate(ptr::null()).is_nan());
        hb_problem_free(ptr::null_mut());
    }
}

#[test]
fn lambda_update_matches_library() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(hb_hypermodel_new(1.0, 1.501, 1.0, &mut h), HbStatus::Ok);
        let xi = [0.0, 1.0, -1.0];
        let mut out = [0.0; 3];
        assert_eq!(
            hb_lambda_update(h, xi.as_ptr(), 3, out.as_mut_ptr()),
            HbStatus::Ok
        );
        assert!((out[0] - 0.001).abs() < 1e-15);
        assert_eq!(out[1], out[2]);
        hb_hypermodel_free(h);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hierbayes.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "hb_problem_new",
        "hb_map_run",
        "hb_chain_run",
        "hb_last_error_message",
        "typedef struct HbProblem HbProblem",
        "HB_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    // Syntax-check with the system C compiler when one is installed.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c"])
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
