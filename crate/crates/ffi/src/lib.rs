//! C ABI over `votermix`.
//!
//! Every fallible function returns a [`VmStatus`]; results come back through
//! out-pointers. On failure a message is stored per thread and can be read
//! with [`vm_last_error_message`]. Kernels and exact generators are opaque
//! handles that must be released with their `_free` function.
//!
//! Spin configurations cross the boundary as `uint8_t` arrays of length
//! `n_sites`, one byte per site, nonzero meaning spin 1.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use votermix::analysis::{wilson_formula, wilson_lower_bound, WilsonBoundInput};
use votermix::channels::upsilon_alpha;
use votermix::exact::{dgm_limit, hypercube_tv_exact, t_mix_exact, MAX_EXACT_SITES};
use votermix::graphical::{perfect_stationary_sample, sample_config_at};
use votermix::ising::verify_equivalence;
use votermix::star::tv_from_all_ones;
use votermix::stationary::stationary_distribution;
use votermix::{ConfigGenerator, Error, ProbabilityVector, RateKernel, SpinConfiguration};

/// Status codes. `VM_STATUS_OK` is zero; everything else is an error.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSize = 3,
    Parse = 4,
    InvalidRate = 5,
    Reducible = 6,
    Capacity = 7,
    OutOfValidity = 8,
    BufferTooSmall = 9,
    Io = 10,
    Panic = 11,
    Other = 12,
}

/// Opaque voting mechanism.
pub struct VmKernel {
    inner: RateKernel,
}

/// Opaque generator of the noisy voter model on `{0,1}^S`.
pub struct VmExact {
    inner: ConfigGenerator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> VmStatus {
    match err {
        Error::InvalidSize(_) => VmStatus::InvalidSize,
        Error::Parse { .. } => VmStatus::Parse,
        Error::InvalidRate { .. } | Error::SelfRate(_) | Error::DuplicateRate(..) => VmStatus::InvalidRate,
        Error::SiteOutOfRange { .. } | Error::InvalidArgument(_) | Error::LengthMismatch { .. } => {
            VmStatus::InvalidArgument
        }
        Error::InvalidLabel(_) => VmStatus::InvalidArgument,
        Error::UnsupportedReducible | Error::NotStationary(_) => VmStatus::Reducible,
        Error::Capacity(_) => VmStatus::Capacity,
        Error::OutOfValidity(_) => VmStatus::OutOfValidity,
        Error::Io(_) => VmStatus::Io,
        _ => VmStatus::Other,
    }
}

struct Fail(VmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(VmStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> VmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            VmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            VmStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn kernel_ref<'a>(k: *const VmKernel) -> Result<&'a RateKernel, Fail> {
    k.as_ref().map(|k| &k.inner).ok_or_else(|| null("kernel"))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(VmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_slice(src: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err(Fail(
            VmStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn read_config(bits: *const u8, n: usize) -> Result<SpinConfiguration, Fail> {
    if bits.is_null() {
        return Err(null("configuration"));
    }
    let s = std::slice::from_raw_parts(bits, n);
    Ok(SpinConfiguration::from_bits(s.iter().map(|&b| b != 0)))
}

unsafe fn write_config(eta: &SpinConfiguration, out: *mut u8) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output configuration"));
    }
    let s = std::slice::from_raw_parts_mut(out, eta.len());
    for (dst, bit) in s.iter_mut().zip(eta.iter()) {
        *dst = bit as u8;
    }
    Ok(())
}

unsafe fn emit_kernel(k: RateKernel, out: *mut *mut VmKernel) -> Result<(), Fail> {
    let out = out_ref(out, "output handle")?;
    *out = Box::into_raw(Box::new(VmKernel { inner: k }));
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn vm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn vm_status_name(status: VmStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        VmStatus::Ok => b"ok\0",
        VmStatus::NullPointer => b"null pointer\0",
        VmStatus::InvalidArgument => b"invalid argument\0",
        VmStatus::InvalidSize => b"invalid size\0",
        VmStatus::Parse => b"parse error\0",
        VmStatus::InvalidRate => b"invalid rate\0",
        VmStatus::Reducible => b"reducible kernel\0",
        VmStatus::Capacity => b"capacity exceeded\0",
        VmStatus::OutOfValidity => b"outside validity range\0",
        VmStatus::BufferTooSmall => b"buffer too small\0",
        VmStatus::Io => b"i/o error\0",
        VmStatus::Panic => b"internal panic\0",
        VmStatus::Other => b"error\0",
    };
    s.as_ptr() as *const c_char
}

/// Cycle `Z_n` with rate 1/2 to each neighbor.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_cycle(n: usize, out: *mut *mut VmKernel) -> VmStatus {
    guard(|| emit_kernel(RateKernel::cycle(n)?, out))
}

/// Star with center 0 and leaves `1..=n`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_star(n: usize, out: *mut *mut VmKernel) -> VmStatus {
    guard(|| emit_kernel(RateKernel::star(n)?, out))
}

/// Complete graph on `n` sites.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_complete(n: usize, out: *mut *mut VmKernel) -> VmStatus {
    guard(|| emit_kernel(RateKernel::complete(n)?, out))
}

/// Kernel from parallel arrays of `(from, to, rate)` triples.
///
/// # Safety
/// `from`, `to` and `rate` must be valid for `len` reads; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_from_rates(
    n_sites: usize,
    from: *const usize,
    to: *const usize,
    rate: *const f64,
    len: usize,
    out: *mut *mut VmKernel,
) -> VmStatus {
    guard(|| {
        if len > 0 && (from.is_null() || to.is_null() || rate.is_null()) {
            return Err(null("rate arrays"));
        }
        let entries: Vec<(usize, usize, f64)> =
            (0..len).map(|i| (*from.add(i), *to.add(i), *rate.add(i))).collect();
        emit_kernel(RateKernel::from_rates(n_sites, entries)?, out)
    })
}

/// Kernel from the text format (`sites <n>`, then `rate <x> <y> <value>` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_parse(text: *const c_char, out: *mut *mut VmKernel) -> VmStatus {
    guard(|| emit_kernel(RateKernel::parse(c_str(text, "text")?)?, out))
}

/// Kernel read from a file in the text format.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_from_file(path: *const c_char, out: *mut *mut VmKernel) -> VmStatus {
    guard(|| emit_kernel(RateKernel::from_file(c_str(path, "path")?)?, out))
}

/// Releases a kernel. Null is a no-op.
///
/// # Safety
/// `kernel` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_free(kernel: *mut VmKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of sites; 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_n_sites(kernel: *const VmKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.inner.n_sites())
}

/// Largest exit rate.
///
/// # Safety
/// `kernel` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_q_max(kernel: *const VmKernel, out: *mut f64) -> VmStatus {
    guard(|| {
        *out_ref(out, "out")? = kernel_ref(kernel)?.q_max();
        Ok(())
    })
}

/// Stationary law of the kernel into `pi` (length at least `n_sites`) and
/// `pi_max / pi_min` into `rho` (either may be null).
///
/// # Safety
/// `kernel` must be a live handle; `pi` null or valid for `len` writes;
/// `rho` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_kernel_stationary(
    kernel: *const VmKernel,
    pi: *mut f64,
    len: usize,
    rho: *mut f64,
) -> VmStatus {
    guard(|| {
        let info = stationary_distribution(kernel_ref(kernel)?)?;
        if !pi.is_null() {
            write_slice(&info.pi, pi, len)?;
        }
        if let Some(r) = rho.as_mut() {
            *r = info.rho;
        }
        Ok(())
    })
}

/// `t_mix(eps)` of the noisy voter model, computed exactly.
///
/// # Safety
/// `kernel` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_t_mix_exact(kernel: *const VmKernel, eps: f64, out: *mut f64) -> VmStatus {
    guard(|| {
        *out_ref(out, "out")? = t_mix_exact(kernel_ref(kernel)?, eps)?;
        Ok(())
    })
}

/// Builds the generator on `{0,1}^S` (at most 20 sites).
///
/// # Safety
/// `kernel` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_exact_new(kernel: *const VmKernel, out: *mut *mut VmExact) -> VmStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if k.n_sites() > MAX_EXACT_SITES {
            return Err(Fail(
                VmStatus::Capacity,
                format!("exact generator supports at most {MAX_EXACT_SITES} sites"),
            ));
        }
        let gen = ConfigGenerator::new(k)?;
        *out_ref(out, "output handle")? = Box::into_raw(Box::new(VmExact { inner: gen }));
        Ok(())
    })
}

/// Releases a generator. Null is a no-op.
///
/// # Safety
/// `gen` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vm_exact_free(gen: *mut VmExact) {
    if !gen.is_null() {
        drop(Box::from_raw(gen));
    }
}

/// `2^n`; 0 for a null handle.
///
/// # Safety
/// `gen` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vm_exact_n_states(gen: *const VmExact) -> usize {
    gen.as_ref().map_or(0, |g| g.inner.n_states())
}

/// Time-`t` law started from the point mass at `start_index`.
///
/// # Safety
/// `gen` must be a live handle; `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vm_exact_evolve(
    gen: *const VmExact,
    start_index: usize,
    t: f64,
    out: *mut f64,
    len: usize,
) -> VmStatus {
    guard(|| {
        let g = &gen.as_ref().ok_or_else(|| null("generator"))?.inner;
        let n = g.n_states();
        if start_index >= n {
            return Err(Fail(VmStatus::InvalidArgument, format!("start index {start_index} >= {n}")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Fail(VmStatus::InvalidArgument, format!("time must be finite and >= 0, got {t}")));
        }
        let law = g.evolve(&ProbabilityVector::point_mass(n, start_index), t)?;
        write_slice(law.as_slice(), out, len)
    })
}

/// Stationary law of the generator.
///
/// # Safety
/// `gen` must be a live handle; `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vm_exact_stationary(gen: *const VmExact, out: *mut f64, len: usize) -> VmStatus {
    guard(|| {
        let g = &gen.as_ref().ok_or_else(|| null("generator"))?.inner;
        write_slice(g.stationary().as_slice(), out, len)
    })
}

/// One draw of the time-`t` configuration from `start` (graphical
/// construction, sampled lazily). Deterministic in `seed`.
///
/// # Safety
/// `kernel` must be a live handle; `start` and `out` valid for `n_sites`
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn vm_sample_config(
    kernel: *const VmKernel,
    start: *const u8,
    t: f64,
    seed: u64,
    out: *mut u8,
) -> VmStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Fail(VmStatus::InvalidArgument, format!("time must be finite and >= 0, got {t}")));
        }
        let eta0 = read_config(start, k.n_sites())?;
        write_config(&sample_config_at(k, &eta0, t, seed), out)
    })
}

/// One exact draw from the stationary law.
///
/// # Safety
/// `kernel` must be a live handle; `out` valid for `n_sites` bytes.
#[no_mangle]
pub unsafe extern "C" fn vm_sample_stationary(kernel: *const VmKernel, seed: u64, out: *mut u8) -> VmStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        write_config(&perfect_stationary_sample(k, seed), out)
    })
}

/// TV between all-ones and all-zeros started `q = 0` systems on `n` sites.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_hypercube_tv(n: usize, t: f64, out: *mut f64) -> VmStatus {
    guard(|| {
        if !(t >= 0.0) {
            return Err(Fail(VmStatus::InvalidArgument, format!("negative time {t}")));
        }
        *out_ref(out, "out")? = hypercube_tv_exact(n, t);
        Ok(())
    })
}

/// `(4/sqrt(pi)) int_0^{e^{-alpha}/sqrt 8} e^{-x^2} dx`.
#[no_mangle]
pub extern "C" fn vm_dgm_limit(alpha: f64) -> f64 {
    dgm_limit(alpha)
}

/// Lower bound formula with no validity checks.
#[no_mangle]
pub extern "C" fn vm_wilson_formula(q_max: f64, rho: f64, alpha: f64) -> f64 {
    wilson_formula(q_max, rho, alpha)
}

/// Lower bound on `d((1/2) ln n - alpha)`; `VM_STATUS_OUT_OF_VALIDITY`
/// when `alpha < 1` or the time is below 1.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_wilson_lower_bound(
    n_sites: usize,
    q_max: f64,
    rho: f64,
    alpha: f64,
    out: *mut f64,
) -> VmStatus {
    guard(|| {
        *out_ref(out, "out")? = wilson_lower_bound(WilsonBoundInput { n_sites, q_max, rho, alpha })?;
        Ok(())
    })
}

/// Mixing weight of the two-leaf channel, for flip probabilities in (0, 1/2].
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_upsilon_alpha(theta: f64, theta1: f64, theta2: f64, out: *mut f64) -> VmStatus {
    guard(|| {
        *out_ref(out, "out")? = upsilon_alpha(theta, theta1, theta2)?;
        Ok(())
    })
}

/// TV to stationarity from all-ones for the star with `n` leaves.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_star_tv_from_all_ones(n: usize, t: f64, out: *mut f64) -> VmStatus {
    guard(|| {
        *out_ref(out, "out")? = tv_from_all_ones(n, t)?;
        Ok(())
    })
}

/// Largest entrywise gap between the Ising generator on the `n`-cycle and
/// the time-changed noisy voter generator.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vm_ising_discrepancy(n: usize, beta: f64, out: *mut f64) -> VmStatus {
    guard(|| {
        *out_ref(out, "out")? = verify_equivalence(n, beta)?;
        Ok(())
    })
}
