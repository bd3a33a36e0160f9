//! Per-thread operation counters.
//!
//! The geometric kernels bump these whenever they take a square root or sort
//! an intersection list. Per-view tracing must leave both untouched, which
//! tests assert by snapshotting the counters around a trace.

use std::cell::Cell;

thread_local! {
    static SQRT_CALLS: Cell<u64> = const { Cell::new(0) };
    static SORT_CALLS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub sqrt_calls: u64,
    pub sort_calls: u64,
}

pub fn snapshot() -> Counters {
    Counters {
        sqrt_calls: SQRT_CALLS.with(Cell::get),
        sort_calls: SORT_CALLS.with(Cell::get),
    }
}

#[inline]
pub(crate) fn count_sqrt(n: u64) {
    SQRT_CALLS.with(|c| c.set(c.get() + n));
}

#[inline]
pub(crate) fn count_sort() {
    SORT_CALLS.with(|c| c.set(c.get() + 1));
}
