//! Background worker bookkeeping.
//!
//! Every long-lived thread the library starts goes through [`spawn`], which
//! keeps a process-wide count of live workers. Shutdown tests compare the
//! census before and after a run to prove nothing was left behind.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

static LIVE_WORKERS: AtomicUsize = AtomicUsize::new(0);

/// Number of library worker threads currently alive.
pub fn live_workers() -> usize {
    LIVE_WORKERS.load(Ordering::SeqCst)
}

/// Polls the census until it drops to `baseline` or `timeout` expires.
pub fn wait_for_census(baseline: usize, timeout: Duration) -> bool {
    let deadline = Instant::now() + timeout;
    loop {
        if live_workers() <= baseline {
            return true;
        }
        if Instant::now() >= deadline {
            return false;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

struct CensusGuard;

impl Drop for CensusGuard {
    fn drop(&mut self) {
        LIVE_WORKERS.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Spawns a named, census-tracked thread.
pub fn spawn<F, T>(name: &str, f: F) -> std::io::Result<JoinHandle<T>>
where
    F: FnOnce() -> T + Send + 'static,
    T: Send + 'static,
{
    LIVE_WORKERS.fetch_add(1, Ordering::SeqCst);
    let result = std::thread::Builder::new().name(name.to_string()).spawn(move || {
        let _guard = CensusGuard;
        f()
    });
    if result.is_err() {
        LIVE_WORKERS.fetch_sub(1, Ordering::SeqCst);
    }
    result
}

/// Rayon pool whose threads count toward the census.
pub fn thread_pool(threads: usize, name: &str) -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let name = name.to_string();
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .spawn_handler(move |t| {
            let label = format!("{name}-{}", t.index());
            spawn(&label, move || t.run())?;
            Ok(())
        })
        .build()
}

/// Cooperative cancellation flag shared between a controller and workers.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_tracks_spawned_threads() {
        let token = CancelToken::new();
        let t2 = token.clone();
        let h = spawn("census-test", move || {
            while !t2.is_cancelled() {
                std::thread::sleep(Duration::from_millis(1));
            }
        })
        .unwrap();
        assert!(live_workers() >= 1);
        token.cancel();
        h.join().unwrap();
    }
}
