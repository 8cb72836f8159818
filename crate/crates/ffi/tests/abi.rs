use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use votermix_ffi::*;

fn last_error() -> String {
    let len = unsafe { vm_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; len + 1];
    unsafe { vm_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cycle(n: usize) -> *mut VmKernel {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { vm_kernel_cycle(n, &mut k) }, VmStatus::Ok);
    assert!(!k.is_null());
    k
}

#[test]
fn kernel_lifecycle_and_stationary() {
    let k = cycle(5);
    unsafe {
        assert_eq!(vm_kernel_n_sites(k), 5);
        let mut q = 0.0;
        assert_eq!(vm_kernel_q_max(k, &mut q), VmStatus::Ok);
        assert_eq!(q, 1.0);
        let mut pi = [0.0; 5];
        let mut rho = 0.0;
        assert_eq!(vm_kernel_stationary(k, pi.as_mut_ptr(), 5, &mut rho), VmStatus::Ok);
        assert!(pi.iter().all(|p| (p - 0.2).abs() < 1e-12));
        assert!((rho - 1.0).abs() < 1e-9);
        assert_eq!(vm_kernel_stationary(k, pi.as_mut_ptr(), 4, ptr::null_mut()), VmStatus::BufferTooSmall);
        assert!(last_error().contains("need 5"));
        vm_kernel_free(k);
        vm_kernel_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    let mut k = ptr::null_mut();
    unsafe {
        assert_eq!(vm_kernel_cycle(2, &mut k), VmStatus::InvalidSize);
        assert!(k.is_null());
        assert!(last_error().contains("n >= 3"));
        assert_eq!(vm_kernel_cycle(5, ptr::null_mut()), VmStatus::NullPointer);
        let (from, to, rate) = ([0usize], [0usize], [1.0]);
        assert_eq!(vm_kernel_from_rates(2, from.as_ptr(), to.as_ptr(), rate.as_ptr(), 1, &mut k), VmStatus::InvalidRate);
        let junk = CString::new("sites 2\nrate 0 x 1.0\n").unwrap();
        assert_eq!(vm_kernel_parse(junk.as_ptr(), &mut k), VmStatus::Parse);
        let missing = CString::new("/nonexistent/kernel.txt").unwrap();
        assert_eq!(vm_kernel_from_file(missing.as_ptr(), &mut k), VmStatus::Io);
        let mut x = 0.0;
        assert_eq!(vm_kernel_q_max(ptr::null(), &mut x), VmStatus::NullPointer);
        assert_eq!(vm_wilson_lower_bound(256, 1.0, 1.0, 0.5, &mut x), VmStatus::OutOfValidity);
        assert_eq!(vm_upsilon_alpha(0.7, 0.1, 0.1, &mut x), VmStatus::InvalidArgument);
        let big = cycle(21);
        let mut g = ptr::null_mut();
        assert_eq!(vm_exact_new(big, &mut g), VmStatus::Capacity);
        vm_kernel_free(big);
        // A success clears the message.
        assert!(vm_dgm_limit(0.0) > 0.0);
        assert_eq!(vm_hypercube_tv(3, 1.0, &mut x), VmStatus::Ok);
        assert_eq!(last_error(), "");
        let name = CStr::from_ptr(vm_status_name(VmStatus::Capacity));
        assert_eq!(name.to_str().unwrap(), "capacity exceeded");
    }
}

#[test]
fn kernel_from_rates_matches_parse() {
    let from = [0usize, 1];
    let to = [1usize, 0];
    let rate = [2.0, 1.0];
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    let text = CString::new("sites 2\nrate 0 1 2.0\nrate 1 0 1.0\n").unwrap();
    unsafe {
        assert_eq!(vm_kernel_from_rates(2, from.as_ptr(), to.as_ptr(), rate.as_ptr(), 2, &mut a), VmStatus::Ok);
        assert_eq!(vm_kernel_parse(text.as_ptr(), &mut b), VmStatus::Ok);
        let (mut pa, mut pb) = ([0.0; 2], [0.0; 2]);
        vm_kernel_stationary(a, pa.as_mut_ptr(), 2, ptr::null_mut());
        vm_kernel_stationary(b, pb.as_mut_ptr(), 2, ptr::null_mut());
        assert_eq!(pa, pb);
        assert!((pa[0] - 1.0 / 3.0).abs() < 1e-12);
        vm_kernel_free(a);
        vm_kernel_free(b);
    }
}

#[test]
fn exact_generator() {
    let k = cycle(4);
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(vm_exact_new(k, &mut g), VmStatus::Ok);
        assert_eq!(vm_exact_n_states(g), 16);
        let mut law = [0.0; 16];
        assert_eq!(vm_exact_evolve(g, 15, 0.0, law.as_mut_ptr(), 16), VmStatus::Ok);
        assert_eq!(law[15], 1.0);
        assert_eq!(vm_exact_evolve(g, 15, 50.0, law.as_mut_ptr(), 16), VmStatus::Ok);
        let mut pi = [0.0; 16];
        assert_eq!(vm_exact_stationary(g, pi.as_mut_ptr(), 16), VmStatus::Ok);
        let tv: f64 = 0.5 * law.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 1e-12);
        // Symmetric under global flip.
        assert!((pi[0] - pi[15]).abs() < 1e-14);
        assert_eq!(vm_exact_evolve(g, 16, 1.0, law.as_mut_ptr(), 16), VmStatus::InvalidArgument);
        assert_eq!(vm_exact_evolve(g, 0, -1.0, law.as_mut_ptr(), 16), VmStatus::InvalidArgument);
        let mut t = 0.0;
        assert_eq!(vm_t_mix_exact(k, 0.25, &mut t), VmStatus::Ok);
        assert!(t > 0.0 && t < 5.0);
        vm_exact_free(g);
        vm_kernel_free(k);
    }
}

#[test]
fn sampling_is_deterministic() {
    let k = cycle(6);
    let start = [1u8; 6];
    let (mut a, mut b) = ([0u8; 6], [0u8; 6]);
    unsafe {
        assert_eq!(vm_sample_config(k, start.as_ptr(), 0.7, 42, a.as_mut_ptr()), VmStatus::Ok);
        assert_eq!(vm_sample_config(k, start.as_ptr(), 0.7, 42, b.as_mut_ptr()), VmStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(vm_sample_config(k, start.as_ptr(), 0.0, 1, a.as_mut_ptr()), VmStatus::Ok);
        assert_eq!(a, start);
        assert_eq!(vm_sample_stationary(k, 3, a.as_mut_ptr()), VmStatus::Ok);
        assert!(a.iter().all(|&x| x <= 1));
        assert_eq!(vm_sample_config(k, ptr::null(), 1.0, 1, a.as_mut_ptr()), VmStatus::NullPointer);
        vm_kernel_free(k);
    }
}

#[test]
fn scalar_functions() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(vm_hypercube_tv(1, 0.0, &mut x), VmStatus::Ok);
        assert_eq!(x, 1.0);
        assert!((vm_wilson_formula(1.0, 1.0, 1.0) - 0.7 * 2f64.exp() / (64.0 + 0.7 * 2f64.exp())).abs() < 1e-15);
        assert_eq!(vm_wilson_lower_bound(1 << 20, 1.0, 1.0, 1.0, &mut x), VmStatus::Ok);
        assert_eq!(x, vm_wilson_formula(1.0, 1.0, 1.0));
        // Vanishes as alpha grows.
        assert!(vm_dgm_limit(40.0) < 1e-16);
        assert_eq!(vm_upsilon_alpha(0.5, 0.2, 0.3, &mut x), VmStatus::Ok);
        assert!((0.0..=1.0).contains(&x));
        assert_eq!(vm_star_tv_from_all_ones(4, 0.0, &mut x), VmStatus::Ok);
        assert!(x > 0.5 && x <= 1.0);
        assert_eq!(vm_ising_discrepancy(6, 0.4, &mut x), VmStatus::Ok);
        assert!(x <= 1e-12);
    }
}

#[test]
fn header_is_current_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/votermix.h");
    let text = std::fs::read_to_string(&header).expect("generated header");
    for sym in [
        "vm_kernel_cycle",
        "vm_kernel_free",
        "vm_exact_evolve",
        "vm_last_error_message",
        "typedef struct VmKernel VmKernel",
        "VM_STATUS_OK = 0",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    // Syntax check with the system C compiler when one is present.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"votermix.h\"\nint main(void) { VmKernel *k = 0; VmStatus s = vm_kernel_cycle(5, &k); \
         vm_kernel_free(k); return (int)s; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}
