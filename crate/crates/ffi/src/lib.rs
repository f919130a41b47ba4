//! C ABI over `mutum-core`.
//!
//! Every fallible function returns a [`MutumStatus`]; on failure the message
//! is kept per thread and can be read with [`mutum_last_error`]. Sessions are
//! opaque [`MutumSession`] handles created by [`mutum_session_new`] and
//! released by [`mutum_session_free`]. Strings cross the boundary as
//! NUL-terminated UTF-8; outputs are copied into caller buffers.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access their docs
//! describe: vectors are three `double`s, gradients nine, strings
//! NUL-terminated, and `(buf, len)` a writable region of `len` bytes. A
//! session handle must come from `mutum_session_new`, be freed at most once
//! and not be used from two threads at the same time.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Vector3;

use mutum_core::magnetics::{self, DipoleSource, MagneticsError};
use mutum_core::microrobot::{self, DesignKind, MicrorobotDesign};
use mutum_core::teleop::{parse_command, Session, SessionConfig, TeleopError};
use mutum_core::thermics::{self, MeltCurve, ThermicsError};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutumStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MalformedCommand = 3,
    OutOfDomain = 4,
    SingularPoint = 5,
    BufferTooSmall = 6,
    SimulationFault = 7,
    Internal = 8,
}

/// Stock robot designs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutumDesign {
    TopPorts = 0,
    SidePorts = 1,
    EndPorts = 2,
}

impl From<MutumDesign> for DesignKind {
    fn from(d: MutumDesign) -> Self {
        match d {
            MutumDesign::TopPorts => DesignKind::TopPorts,
            MutumDesign::SidePorts => DesignKind::SidePorts,
            MutumDesign::EndPorts => DesignKind::EndPorts,
        }
    }
}

/// Opaque teleoperation session.
pub struct MutumSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(status: MutumStatus, message: impl Into<String>) -> MutumStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn clear_error() -> MutumStatus {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
    MutumStatus::Ok
}

fn teleop_status(e: TeleopError) -> MutumStatus {
    let status = match &e {
        TeleopError::MalformedCommand(_) => MutumStatus::MalformedCommand,
        TeleopError::InvalidConfig(_) | TeleopError::Scene(_) => MutumStatus::InvalidArgument,
        TeleopError::Locomotion(_) | TeleopError::Thermics(_) => MutumStatus::SimulationFault,
        _ => MutumStatus::Internal,
    };
    set_error(status, e.to_string())
}

fn magnetics_status(e: MagneticsError) -> MutumStatus {
    let status = match e {
        MagneticsError::SingularPoint { .. } => MutumStatus::SingularPoint,
        _ => MutumStatus::InvalidArgument,
    };
    set_error(status, e.to_string())
}

/// Runs `f`, converting a panic into `Internal` rather than unwinding into C.
fn guard(f: impl FnOnce() -> MutumStatus) -> MutumStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => set_error(MutumStatus::Internal, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, MutumStatus> {
    if p.is_null() {
        return Err(set_error(MutumStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| set_error(MutumStatus::InvalidArgument, "string is not valid UTF-8"))
}

unsafe fn read_vec3(p: *const f64) -> Result<Vector3<f64>, MutumStatus> {
    if p.is_null() {
        return Err(set_error(MutumStatus::NullPointer, "null vector"));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Vector3::new(s[0], s[1], s[2]))
}

/// Copies `s` plus a NUL into `buf`. `needed` (optional) always receives the
/// required size including the terminator.
unsafe fn write_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> MutumStatus {
    let required = s.len() + 1;
    if !needed.is_null() {
        *needed = required;
    }
    if buf.is_null() || len < required {
        return set_error(
            MutumStatus::BufferTooSmall,
            format!("buffer holds {len} bytes, {required} needed"),
        );
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    clear_error()
}

/// Copies the calling thread's last error message into `buf` and returns the
/// size needed (including the NUL). Passing a null `buf` just queries the size.
#[no_mangle]
pub unsafe extern "C" fn mutum_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let required = e.len() + 1;
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        required
    })
}

/// Field (T) and row-major gradient (T/m) of a point dipole with moment
/// `moment` (A·m²) at `source`, evaluated at `point`. `grad_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn mutum_dipole_field(
    moment: *const f64,
    source: *const f64,
    point: *const f64,
    b_out: *mut f64,
    grad_out: *mut f64,
) -> MutumStatus {
    guard(|| {
        let (m, s, p) = match (read_vec3(moment), read_vec3(source), read_vec3(point)) {
            (Ok(m), Ok(s), Ok(p)) => (m, s, p),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        if b_out.is_null() {
            return set_error(MutumStatus::NullPointer, "null field output");
        }
        let src = match DipoleSource::from_moment(m, s) {
            Ok(src) => src,
            Err(e) => return magnetics_status(e),
        };
        let sample = match magnetics::dipole_field(&src, &p) {
            Ok(f) => f,
            Err(e) => return magnetics_status(e),
        };
        ptr::copy_nonoverlapping(sample.b.as_ptr(), b_out, 3);
        if !grad_out.is_null() {
            for i in 0..3 {
                for j in 0..3 {
                    *grad_out.add(3 * i + j) = sample.grad[(i, j)];
                }
            }
        }
        clear_error()
    })
}

/// Torque `m × B` in N·m.
#[no_mangle]
pub unsafe extern "C" fn mutum_torque(moment: *const f64, field: *const f64, torque_out: *mut f64) -> MutumStatus {
    guard(|| {
        let (m, b) = match (read_vec3(moment), read_vec3(field)) {
            (Ok(m), Ok(b)) => (m, b),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        if torque_out.is_null() {
            return set_error(MutumStatus::NullPointer, "null torque output");
        }
        let t = magnetics::magnetic_torque(&m, &b);
        ptr::copy_nonoverlapping(t.as_ptr(), torque_out, 3);
        clear_error()
    })
}

/// Distance travelled per field revolution by a stock design, in metres.
#[no_mangle]
pub unsafe extern "C" fn mutum_distance_per_revolution(design: MutumDesign, out: *mut f64) -> MutumStatus {
    guard(|| {
        if out.is_null() {
            return set_error(MutumStatus::NullPointer, "null output");
        }
        *out = microrobot::distance_per_revolution(&MicrorobotDesign::stock(design.into()));
        clear_error()
    })
}

/// Melt onset (°C) of a cap with mineral-oil mass fraction `w`, on the
/// default melt curve.
#[no_mangle]
pub unsafe extern "C" fn mutum_melt_onset(w: f64, out: *mut f64) -> MutumStatus {
    guard(|| {
        if out.is_null() {
            return set_error(MutumStatus::NullPointer, "null output");
        }
        match thermics::melt_onset(&MeltCurve::default(), w) {
            Ok(t) => {
                *out = t;
                clear_error()
            }
            Err(e @ ThermicsError::OutOfDomain { .. }) => set_error(MutumStatus::OutOfDomain, e.to_string()),
            Err(e) => set_error(MutumStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Creates a session. `config_json` may be null for defaults, or a JSON
/// object with any of `scene`, `design`, `tick_rate`, `substeps`,
/// `snapshot_rate`.
#[no_mangle]
pub unsafe extern "C" fn mutum_session_new(config_json: *const c_char, out: *mut *mut MutumSession) -> MutumStatus {
    guard(|| {
        if out.is_null() {
            return set_error(MutumStatus::NullPointer, "null handle output");
        }
        *out = ptr::null_mut();
        let config = if config_json.is_null() {
            SessionConfig::default()
        } else {
            let text = match read_str(config_json) {
                Ok(t) => t,
                Err(e) => return e,
            };
            match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => return set_error(MutumStatus::InvalidArgument, format!("session config: {e}")),
            }
        };
        match Session::new(config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MutumSession { inner }));
                clear_error()
            }
            Err(e) => teleop_status(e),
        }
    })
}

/// Releases a session. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mutum_session_free(session: *mut MutumSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

unsafe fn session_mut<'a>(session: *mut MutumSession) -> Result<&'a mut Session, MutumStatus> {
    session
        .as_mut()
        .map(|s| &mut s.inner)
        .ok_or_else(|| set_error(MutumStatus::NullPointer, "null session"))
}

/// Queues one JSON command; it takes effect at the next tick.
#[no_mangle]
pub unsafe extern "C" fn mutum_session_submit(session: *mut MutumSession, command_json: *const c_char) -> MutumStatus {
    guard(|| {
        let s = match session_mut(session) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let text = match read_str(command_json) {
            Ok(t) => t,
            Err(e) => return e,
        };
        match parse_command(text).and_then(|c| s.submit(c)) {
            Ok(()) => clear_error(),
            Err(e) => teleop_status(e),
        }
    })
}

/// Advances `ticks` control ticks. `snapshots_out` (optional) receives how
/// many snapshots fell due.
#[no_mangle]
pub unsafe extern "C" fn mutum_session_tick(
    session: *mut MutumSession,
    ticks: u32,
    snapshots_out: *mut u32,
) -> MutumStatus {
    guard(|| {
        let s = match session_mut(session) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let mut due = 0;
        for _ in 0..ticks {
            match s.tick() {
                Ok(Some(_)) => due += 1,
                Ok(None) => {}
                Err(e) => return teleop_status(e),
            }
        }
        if !snapshots_out.is_null() {
            *snapshots_out = due;
        }
        clear_error()
    })
}

/// Simulated time in seconds, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mutum_session_time(session: *const MutumSession) -> f64 {
    session.as_ref().map_or(f64::NAN, |s| s.inner.time())
}

/// Writes the current state snapshot as JSON.
#[no_mangle]
pub unsafe extern "C" fn mutum_session_snapshot(
    session: *const MutumSession,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> MutumStatus {
    guard(|| {
        let Some(s) = session.as_ref() else {
            return set_error(MutumStatus::NullPointer, "null session");
        };
        write_str(&s.inner.snapshot().to_json(), buf, len, needed)
    })
}
