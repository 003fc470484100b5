use std::sync::atomic::{AtomicU64, Ordering};

/// Work counters for a single solve: system-operator applications (mvp),
/// global inner products (ddot) and vector updates (axpy). Counts only
/// move up while a solve runs.
#[derive(Debug, Default)]
pub struct CounterSet {
    mvp: AtomicU64,
    ddot: AtomicU64,
    axpy: AtomicU64,
}

impl CounterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inc_mvp(&self, n: u64) {
        self.mvp.fetch_add(n, Ordering::Relaxed);
    }

    pub fn inc_ddot(&self) {
        self.ddot.fetch_add(1, Ordering::Relaxed);
    }

    pub fn inc_axpy(&self) {
        self.axpy.fetch_add(1, Ordering::Relaxed);
    }

    pub fn mvp(&self) -> u64 {
        self.mvp.load(Ordering::Relaxed)
    }

    pub fn ddot(&self) -> u64 {
        self.ddot.load(Ordering::Relaxed)
    }

    pub fn axpy(&self) -> u64 {
        self.axpy.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.mvp.store(0, Ordering::Relaxed);
        self.ddot.store(0, Ordering::Relaxed);
        self.axpy.store(0, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> Counts {
        Counts {
            mvp: self.mvp(),
            ddot: self.ddot(),
            axpy: self.axpy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub mvp: u64,
    pub ddot: u64,
    pub axpy: u64,
}

impl std::ops::Sub for Counts {
    type Output = Counts;

    fn sub(self, rhs: Counts) -> Counts {
        Counts {
            mvp: self.mvp - rhs.mvp,
            ddot: self.ddot - rhs.ddot,
            axpy: self.axpy - rhs.axpy,
        }
    }
}
