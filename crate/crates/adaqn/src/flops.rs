//! Thread-local counter for floating-point operations performed by the
//! optimizer-side vector kernels.
//!
//! Only the kernels in [`crate::vecmath`] are instrumented; objective
//! evaluations (forward/backward passes) are deliberately not counted, since
//! the per-iteration cost model treats the gradient computation as an opaque
//! O(n) term. Each thread owns its counter, so parallel grid cells do not
//! contaminate each other.

use std::cell::Cell;

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn add(n: u64) {
    FLOPS.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Current count for this thread.
pub fn current() -> u64 {
    FLOPS.with(|c| c.get())
}

/// Reset the counter to zero and return the previous value.
pub fn take() -> u64 {
    FLOPS.with(|c| c.replace(0))
}

pub fn reset() {
    FLOPS.with(|c| c.set(0));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn take_resets() {
        reset();
        add(7);
        add(5);
        assert_eq!(current(), 12);
        assert_eq!(take(), 12);
        assert_eq!(current(), 0);
    }
}
