//! Per-thread counter of primitive graph operations.
//!
//! Every node expansion performed by a traversal (ancestor closure, c-component
//! search, d-separation reachability) bumps the counter. The scale tests read it
//! to bound the work a query performs as a function of graph size.

use std::cell::Cell;

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub(crate) fn tick(n: u64) {
    OPS.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Operations counted on this thread since the last [`reset`].
pub fn count() -> u64 {
    OPS.with(Cell::get)
}

pub fn reset() {
    OPS.with(|c| c.set(0));
}
