use std::ffi::{CStr, CString};
use std::ptr;

use dcram_ffi::*;

fn last_error() -> String {
    let p = dcram_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn default_context_round_trip() {
    let ctx = dcram_context_new_default();
    let mut hash = ptr::null_mut();
    assert_eq!(unsafe { dcram_config_hash(ctx, &mut hash) }, DcramStatus::Ok);
    let h = unsafe { CStr::from_ptr(hash) }.to_str().unwrap().to_owned();
    assert_eq!(h.len(), 64);
    unsafe { dcram_string_free(hash) };

    let mut i = 0.0;
    assert_eq!(unsafe { dcram_tunnel_current(ctx, 0.0, &mut i) }, DcramStatus::Ok);
    assert_eq!(i, 0.0);
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        dcram_tunnel_current(ctx, 1.0, &mut a);
        dcram_tunnel_current(ctx, -1.0, &mut b);
    }
    assert!(a > 0.0 && (a + b).abs() <= 1e-12 * a.abs());
    unsafe { dcram_context_free(ctx) };
}

#[test]
fn toml_context_matches_default_hash() {
    let text = CString::new("defaults = \"paper\"\n").unwrap();
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { dcram_context_from_toml(text.as_ptr(), ptr::null(), &mut ctx) }, DcramStatus::Ok);
    let def = dcram_context_new_default();
    let (mut h1, mut h2) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        dcram_config_hash(ctx, &mut h1);
        dcram_config_hash(def, &mut h2);
        assert_eq!(CStr::from_ptr(h1), CStr::from_ptr(h2));
        dcram_string_free(h1);
        dcram_string_free(h2);
        dcram_context_free(ctx);
        dcram_context_free(def);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("defaults = \"paper\"\nbogus = 1\n").unwrap();
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { dcram_context_from_toml(bad.as_ptr(), ptr::null(), &mut ctx) }, DcramStatus::InvalidConfig);
    assert!(ctx.is_null());
    assert!(last_error().contains("bogus"));

    let mut x = 0.0;
    assert_eq!(unsafe { dcram_tunnel_current(ptr::null(), 0.1, &mut x) }, DcramStatus::NullPointer);
    let ctx = dcram_context_new_default();
    let (mut v, mut e) = (0.0, 0.0);
    assert_eq!(unsafe { dcram_write_bit(ctx, 0.0, 2, &mut v, &mut e) }, DcramStatus::InvalidArgument);
    assert_eq!(unsafe { dcram_storage_decay(ctx, 1.0, 1.0, 0, &mut v, &mut e) }, DcramStatus::BufferTooSmall);
    unsafe { dcram_context_free(ctx) };
}

#[test]
fn decay_and_speedup() {
    let ctx = dcram_context_new_default();
    let mut t = vec![0.0; 15];
    let mut v = vec![0.0; 15];
    assert_eq!(
        unsafe { dcram_storage_decay(ctx, 2.0, 1e6, 15, t.as_mut_ptr(), v.as_mut_ptr()) },
        DcramStatus::Ok
    );
    assert!(v.windows(2).all(|w| w[1].abs() <= w[0].abs()));
    assert!((t[14] - 1e6).abs() < 1e-3);
    let mut s = 0.0;
    assert_eq!(unsafe { dcram_speedup(ctx, 2.0, &mut s) }, DcramStatus::Ok);
    assert_eq!(s, 1024.0);
    unsafe { dcram_speedup(ctx, 1.0, &mut s) };
    assert_eq!(s, 512.0);
    unsafe { dcram_context_free(ctx) };
}

#[test]
fn write_then_read() {
    let ctx = dcram_context_new_default();
    let (mut ivd, mut e) = (0.0, 0.0);
    assert_eq!(unsafe { dcram_write_bit(ctx, 0.0, 0, &mut ivd, &mut e) }, DcramStatus::Ok);
    assert!(ivd < -0.3 && e > 0.0);
    let (mut bit, mut refreshed, mut er) = (-1, 0.0, 0.0);
    assert_eq!(unsafe { dcram_read_refresh(ctx, ivd, &mut bit, &mut refreshed, &mut er) }, DcramStatus::Ok);
    assert_eq!(bit, 0);
    assert!(refreshed < -0.3);
    unsafe { dcram_context_free(ctx) };
}
