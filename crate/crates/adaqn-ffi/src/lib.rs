//! C ABI for the adaqn optimizer.
//!
//! The surface is a classic opaque-handle design: `adaqn_create` builds an
//! optimizer behind an [`AdaqnOptimizer`] pointer, `adaqn_step` advances it
//! against a caller-supplied objective (a struct of C function pointers plus
//! a `user_data` context), and `adaqn_destroy` frees it. Every entry point
//! returns an [`AdaqnStatus`]; `ADAQN_OK` is zero so the codes test naturally
//! as booleans in C. Failures additionally record a human-readable message
//! retrievable with [`adaqn_last_error`].
//!
//! All functions catch Rust panics at the boundary and convert them to
//! `ADAQN_ERR_PANIC`; nothing unwinds into the caller.

use std::cell::RefCell;
use std::ffi::c_void;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use adaqn::problems::StochasticObjective;
use adaqn::{
    AcceptanceRule, AdaqnConfig, AdaqnState, CurvatureSource, CycleEvent, MonitoringSet,
    OptimError,
};

/// Status code returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaqnStatus {
    /// Success.
    AdaqnOk = 0,
    /// Invalid configuration or argument value.
    AdaqnErrConfig = 1,
    /// Numerical failure (non-finite quantity where one is required).
    AdaqnErrNumerical = 2,
    /// Buffer or vector length disagrees with the optimizer dimension.
    AdaqnErrDimension = 3,
    /// Curvature requested from an empty gradient FIFO.
    AdaqnErrEmptyFifo = 4,
    /// I/O or serialization failure.
    AdaqnErrIo = 5,
    /// A required pointer argument was null.
    AdaqnErrNullArgument = 6,
    /// The objective callback reported failure.
    AdaqnErrCallback = 7,
    /// A panic was caught at the FFI boundary.
    AdaqnErrPanic = 8,
}

/// Which acceptance rule `AdaqnSettings::gamma` parameterizes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaqnAcceptanceKind {
    /// Reject when `f_new > gamma * f_old`.
    AdaqnAcceptAbsoluteFactor = 0,
    /// Reject when `(f_new - f_old) / f_old > gamma`.
    AdaqnAcceptRelativeImprovement = 1,
}

/// Source of curvature-pair matrix-vector products.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaqnCurvatureKind {
    /// FIFO of recent stochastic gradients (accumulated Fisher).
    AdaqnCurvatureAccumulatedFisher = 0,
    /// Fresh per-example gradients on the monitoring set (empirical Fisher).
    AdaqnCurvatureEmpiricalFisher = 1,
}

/// Cycle-boundary event reported by [`adaqn_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaqnEvent {
    /// Ordinary iteration; no cycle boundary crossed.
    AdaqnEventPlain = 0,
    /// Cycle boundary: monitored loss accepted, curvature pair stored.
    AdaqnEventAccepted = 1,
    /// Cycle boundary: pair skipped for insufficient curvature.
    AdaqnEventSkipped = 2,
    /// Cycle boundary: step rejected, memory flushed, iterate rewound.
    AdaqnEventRejected = 3,
}

/// Plain-value optimizer configuration, mirror of the Rust `AdaqnConfig`
/// plus the RNG seed used for monitoring-set rotation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdaqnSettings {
    /// Step length alpha, constant for the run.
    pub alpha: f64,
    /// Aggregation cycle length L (iterations between update attempts).
    pub cycle_length: usize,
    /// Maximum stored curvature pairs m_L.
    pub memory_size: usize,
    /// Gradient FIFO capacity m_F.
    pub fifo_size: usize,
    /// Curvature admission threshold: store only if s'y > eps_skip * s's.
    pub eps_skip: f64,
    /// Shift inside the seed diagonal 1/sqrt(sums + eps_scale).
    pub eps_scale: f64,
    /// Mini-batch size b (also the monitoring-set size).
    pub batch_size: usize,
    /// Which acceptance rule `gamma` parameterizes.
    pub acceptance: AdaqnAcceptanceKind,
    /// Acceptance threshold: gamma (absolute) or gamma-tilde (relative).
    pub gamma: f64,
    /// Source of curvature matrix-vector products.
    pub curvature: AdaqnCurvatureKind,
    /// Nonzero: redraw the monitoring set at every cycle boundary.
    pub rotate_monitoring: i32,
    /// Seed for monitoring-set rotation draws.
    pub rng_seed: u64,
}

/// Iteration report written by [`adaqn_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdaqnStepReport {
    /// 1-based count of completed iterations.
    pub iteration: u64,
    /// Mini-batch loss at the pre-step iterate.
    pub loss: f64,
    /// Euclidean norm of the mini-batch gradient.
    pub grad_norm: f64,
    /// Stored curvature pairs after the step.
    pub memory_size: usize,
    /// Stored FIFO gradients after the step.
    pub fifo_size: usize,
    /// Cycle-boundary event.
    pub event: AdaqnEvent,
}

/// Caller-supplied objective: C function pointers over an opaque context.
///
/// Both callbacks receive the current parameters `w` (length `n`), the batch
/// of example indices, and out-pointers for the mean loss (and mean gradient,
/// length `n`, for `value_grad`). They return zero on success; any nonzero
/// return aborts the step with `ADAQN_ERR_CALLBACK`.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct AdaqnObjective {
    /// Opaque context passed back to every callback.
    pub user_data: *mut c_void,
    /// Parameter dimension n.
    pub dim: usize,
    /// Number of examples m in the finite sum.
    pub num_examples: usize,
    /// Mean loss over the batch.
    pub value: Option<
        unsafe extern "C" fn(
            user_data: *mut c_void,
            w: *const f64,
            n: usize,
            batch: *const usize,
            batch_len: usize,
            loss_out: *mut f64,
        ) -> i32,
    >,
    /// Mean loss and mean gradient over the batch.
    pub value_grad: Option<
        unsafe extern "C" fn(
            user_data: *mut c_void,
            w: *const f64,
            n: usize,
            batch: *const usize,
            batch_len: usize,
            loss_out: *mut f64,
            grad_out: *mut f64,
        ) -> i32,
    >,
}

/// Opaque optimizer handle. Allocate with [`adaqn_create`], free with
/// [`adaqn_destroy`]; never dereference from C.
pub struct AdaqnOptimizer {
    state: AdaqnState,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn record_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn status_of(err: &OptimError) -> AdaqnStatus {
    match err {
        OptimError::Config(_) => AdaqnStatus::AdaqnErrConfig,
        OptimError::Numerical { context, .. } if context.contains("objective callback") => {
            AdaqnStatus::AdaqnErrCallback
        }
        OptimError::Numerical { .. } => AdaqnStatus::AdaqnErrNumerical,
        OptimError::DimensionMismatch { .. } => AdaqnStatus::AdaqnErrDimension,
        OptimError::EmptyFifo => AdaqnStatus::AdaqnErrEmptyFifo,
        OptimError::Io(_) | OptimError::Serde(_) => AdaqnStatus::AdaqnErrIo,
    }
}

fn fail(err: &OptimError) -> AdaqnStatus {
    record_error(err.to_string());
    status_of(err)
}

/// Run `body` with panics converted to `ADAQN_ERR_PANIC`.
fn guarded(body: impl FnOnce() -> AdaqnStatus) -> AdaqnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic at FFI boundary".into());
            record_error(format!("panic: {msg}"));
            AdaqnStatus::AdaqnErrPanic
        }
    }
}

fn null_arg(name: &str) -> AdaqnStatus {
    record_error(format!("{name} must not be null"));
    AdaqnStatus::AdaqnErrNullArgument
}

/// Adapter exposing the C callback struct as a Rust objective.
struct CallbackObjective {
    raw: AdaqnObjective,
}

impl CallbackObjective {
    fn callback_err(which: &str, code: i32) -> OptimError {
        OptimError::numerical(format!("objective callback '{which}' returned {code}"))
    }
}

impl StochasticObjective for CallbackObjective {
    fn dim(&self) -> usize {
        self.raw.dim
    }

    fn num_examples(&self) -> usize {
        self.raw.num_examples
    }

    fn value(&self, w: &[f64], batch: &[usize]) -> adaqn::Result<f64> {
        let f = self
            .raw
            .value
            .ok_or_else(|| OptimError::Config("objective.value is null".into()))?;
        let mut loss = f64::NAN;
        // SAFETY: pointers come from live slices; the callback contract says
        // the C side only reads w/batch and writes loss_out.
        let code = unsafe {
            f(
                self.raw.user_data,
                w.as_ptr(),
                w.len(),
                batch.as_ptr(),
                batch.len(),
                &mut loss,
            )
        };
        if code != 0 {
            return Err(Self::callback_err("value", code));
        }
        Ok(loss)
    }

    fn value_grad(&self, w: &[f64], batch: &[usize]) -> adaqn::Result<(f64, Vec<f64>)> {
        let f = self
            .raw
            .value_grad
            .ok_or_else(|| OptimError::Config("objective.value_grad is null".into()))?;
        let mut loss = f64::NAN;
        let mut grad = vec![0.0; w.len()];
        // SAFETY: as in `value`; grad_out is a live buffer of length n.
        let code = unsafe {
            f(
                self.raw.user_data,
                w.as_ptr(),
                w.len(),
                batch.as_ptr(),
                batch.len(),
                &mut loss,
                grad.as_mut_ptr(),
            )
        };
        if code != 0 {
            return Err(Self::callback_err("value_grad", code));
        }
        Ok((loss, grad))
    }

    fn per_example_gradient(&self, w: &[f64], index: usize) -> adaqn::Result<Vec<f64>> {
        self.value_grad(w, &[index]).map(|(_, g)| g)
    }
}

fn settings_to_config(s: &AdaqnSettings) -> AdaqnConfig {
    AdaqnConfig {
        alpha: s.alpha,
        cycle_length: s.cycle_length,
        memory_size: s.memory_size,
        fifo_size: s.fifo_size,
        eps_skip: s.eps_skip,
        eps_scale: s.eps_scale,
        batch_size: s.batch_size,
        acceptance: match s.acceptance {
            AdaqnAcceptanceKind::AdaqnAcceptAbsoluteFactor => {
                AcceptanceRule::AbsoluteFactor { gamma: s.gamma }
            }
            AdaqnAcceptanceKind::AdaqnAcceptRelativeImprovement => {
                AcceptanceRule::RelativeImprovement {
                    gamma_tilde: s.gamma,
                }
            }
        },
        curvature: match s.curvature {
            AdaqnCurvatureKind::AdaqnCurvatureAccumulatedFisher => {
                CurvatureSource::AccumulatedFisher
            }
            AdaqnCurvatureKind::AdaqnCurvatureEmpiricalFisher => CurvatureSource::EmpiricalFisher,
        },
        rotate_monitoring: s.rotate_monitoring != 0,
    }
}

/// Fill `out` with the library's default settings (the Rust `AdaqnConfig`
/// defaults, seed 0).
///
/// # Safety
/// `out` must be a valid pointer to an `AdaqnSettings`.
#[no_mangle]
pub unsafe extern "C" fn adaqn_settings_default(out: *mut AdaqnSettings) -> AdaqnStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let d = AdaqnConfig::default();
        let (acceptance, gamma) = match d.acceptance {
            AcceptanceRule::AbsoluteFactor { gamma } => {
                (AdaqnAcceptanceKind::AdaqnAcceptAbsoluteFactor, gamma)
            }
            AcceptanceRule::RelativeImprovement { gamma_tilde } => (
                AdaqnAcceptanceKind::AdaqnAcceptRelativeImprovement,
                gamma_tilde,
            ),
        };
        // SAFETY: out checked non-null; caller guarantees validity.
        unsafe {
            *out = AdaqnSettings {
                alpha: d.alpha,
                cycle_length: d.cycle_length,
                memory_size: d.memory_size,
                fifo_size: d.fifo_size,
                eps_skip: d.eps_skip,
                eps_scale: d.eps_scale,
                batch_size: d.batch_size,
                acceptance,
                gamma,
                curvature: AdaqnCurvatureKind::AdaqnCurvatureAccumulatedFisher,
                rotate_monitoring: 0,
                rng_seed: 0,
            };
        }
        AdaqnStatus::AdaqnOk
    })
}

/// Create an optimizer from settings, an initial iterate `w0` of length `n`,
/// and a monitoring set of example indices. On success writes the handle to
/// `out`; the caller owns it and must free it with [`adaqn_destroy`].
///
/// # Safety
/// `settings`, `w0` (length `n`), `monitoring` (length `monitoring_len`), and
/// `out` must be valid pointers for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn adaqn_create(
    settings: *const AdaqnSettings,
    w0: *const f64,
    n: usize,
    monitoring: *const usize,
    monitoring_len: usize,
    out: *mut *mut AdaqnOptimizer,
) -> AdaqnStatus {
    guarded(|| {
        if settings.is_null() {
            return null_arg("settings");
        }
        if w0.is_null() {
            return null_arg("w0");
        }
        if monitoring.is_null() {
            return null_arg("monitoring");
        }
        if out.is_null() {
            return null_arg("out");
        }
        // SAFETY: all pointers checked non-null; caller guarantees lengths.
        let (settings, w0, monitoring) = unsafe {
            (
                &*settings,
                slice::from_raw_parts(w0, n),
                slice::from_raw_parts(monitoring, monitoring_len),
            )
        };
        let set = match MonitoringSet::new(monitoring.to_vec()) {
            Ok(set) => set,
            Err(e) => return fail(&e),
        };
        let state = match AdaqnState::new(
            w0.to_vec(),
            settings_to_config(settings),
            set,
            settings.rng_seed,
        ) {
            Ok(state) => state,
            Err(e) => return fail(&e),
        };
        let handle = Box::into_raw(Box::new(AdaqnOptimizer { state }));
        // SAFETY: out checked non-null.
        unsafe { *out = handle };
        AdaqnStatus::AdaqnOk
    })
}

/// Advance the optimizer one iteration on `batch`. Writes an iteration
/// report to `report` when it is non-null.
///
/// # Safety
/// `opt` must be a live handle from [`adaqn_create`]; `objective` must be a
/// valid pointer whose callbacks obey the [`AdaqnObjective`] contract;
/// `batch` must point to `batch_len` readable indices; `report` is either
/// null or a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn adaqn_step(
    opt: *mut AdaqnOptimizer,
    objective: *const AdaqnObjective,
    batch: *const usize,
    batch_len: usize,
    report: *mut AdaqnStepReport,
) -> AdaqnStatus {
    guarded(|| {
        if opt.is_null() {
            return null_arg("opt");
        }
        if objective.is_null() {
            return null_arg("objective");
        }
        if batch.is_null() {
            return null_arg("batch");
        }
        // SAFETY: pointers checked non-null; caller guarantees validity.
        let (opt, objective, batch) = unsafe {
            (
                &mut *opt,
                CallbackObjective { raw: *objective },
                slice::from_raw_parts(batch, batch_len),
            )
        };
        match opt.state.step(&objective, batch) {
            Ok(rep) => {
                if !report.is_null() {
                    // SAFETY: report checked non-null.
                    unsafe {
                        *report = AdaqnStepReport {
                            iteration: rep.iteration,
                            loss: rep.loss,
                            grad_norm: rep.grad_norm,
                            memory_size: rep.memory_size,
                            fifo_size: rep.fifo_size,
                            event: match rep.event {
                                CycleEvent::Plain => AdaqnEvent::AdaqnEventPlain,
                                CycleEvent::CycleAccepted => AdaqnEvent::AdaqnEventAccepted,
                                CycleEvent::CycleSkipped => AdaqnEvent::AdaqnEventSkipped,
                                CycleEvent::CycleRejected => AdaqnEvent::AdaqnEventRejected,
                            },
                        };
                    }
                }
                AdaqnStatus::AdaqnOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Copy the current iterate into `out` (length `n`, which must equal the
/// optimizer dimension).
///
/// # Safety
/// `opt` must be a live handle; `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn adaqn_params(
    opt: *const AdaqnOptimizer,
    out: *mut f64,
    n: usize,
) -> AdaqnStatus {
    guarded(|| {
        if opt.is_null() {
            return null_arg("opt");
        }
        if out.is_null() {
            return null_arg("out");
        }
        // SAFETY: opt checked non-null.
        let w = unsafe { &(*opt).state.w };
        if w.len() != n {
            let e = OptimError::DimensionMismatch {
                context: "adaqn_params",
                expected: w.len(),
                actual: n,
            };
            return fail(&e);
        }
        // SAFETY: out checked non-null; caller guarantees length n.
        unsafe { slice::from_raw_parts_mut(out, n) }.copy_from_slice(w);
        AdaqnStatus::AdaqnOk
    })
}

/// Write the optimizer's parameter dimension to `out`.
///
/// # Safety
/// `opt` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adaqn_dim(opt: *const AdaqnOptimizer, out: *mut usize) -> AdaqnStatus {
    guarded(|| {
        if opt.is_null() {
            return null_arg("opt");
        }
        if out.is_null() {
            return null_arg("out");
        }
        // SAFETY: both checked non-null.
        unsafe { *out = (*opt).state.w.len() };
        AdaqnStatus::AdaqnOk
    })
}

/// Free a handle created by [`adaqn_create`]. Null is a no-op.
///
/// # Safety
/// `opt` must be null or a live handle; the handle must not be used after.
#[no_mangle]
pub unsafe extern "C" fn adaqn_destroy(opt: *mut AdaqnOptimizer) {
    if !opt.is_null() {
        // SAFETY: caller guarantees this is an unfreed adaqn_create result.
        drop(unsafe { Box::from_raw(opt) });
    }
}

/// Copy the current thread's last error message (UTF-8, NUL-terminated) into
/// `buf` of capacity `buf_len`, truncating if needed. Returns the full
/// message length in bytes (excluding the NUL), or 0 when no error has been
/// recorded. `buf` may be null to query the length alone.
///
/// # Safety
/// `buf` must be null or point to `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn adaqn_last_error(buf: *mut u8, buf_len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        if !buf.is_null() && buf_len > 0 {
            let n = message.len().min(buf_len - 1);
            // SAFETY: buf checked non-null with room for n bytes plus NUL.
            unsafe {
                std::ptr::copy_nonoverlapping(message.as_ptr(), buf, n);
                *buf.add(n) = 0;
            }
        }
        message.len()
    })
}
