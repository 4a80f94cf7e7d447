use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::Clock;

const WINDOW: Duration = Duration::from_secs(60);

/// Per-provider admission control: at most `max_concurrent` requests in
/// flight and at most `requests_per_minute` dispatches in any 60 s window.
pub struct AdmissionGate {
    rpm: usize,
    max_concurrent: usize,
    clock: Arc<dyn Clock>,
    dispatched: Mutex<VecDeque<Duration>>,
    in_flight: Mutex<usize>,
    released: Condvar,
}

/// Held while a request is in flight.
pub struct Permit<'a> {
    gate: &'a AdmissionGate,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.gate.in_flight.lock().expect("gate lock");
        *n -= 1;
        self.gate.released.notify_one();
    }
}

impl AdmissionGate {
    pub fn new(requests_per_minute: u32, max_concurrent: usize, clock: Arc<dyn Clock>) -> Self {
        AdmissionGate {
            rpm: requests_per_minute.max(1) as usize,
            max_concurrent: max_concurrent.max(1),
            clock,
            dispatched: Mutex::new(VecDeque::new()),
            in_flight: Mutex::new(0),
            released: Condvar::new(),
        }
    }

    /// Blocks until a request may be dispatched, and records the dispatch time.
    pub fn acquire(&self) -> Permit<'_> {
        {
            let mut n = self.in_flight.lock().expect("gate lock");
            while *n >= self.max_concurrent {
                n = self.released.wait(n).expect("gate lock");
            }
            *n += 1;
        }
        let permit = Permit { gate: self };
        loop {
            let now = self.clock.now();
            let mut log = self.dispatched.lock().expect("gate lock");
            while log.front().is_some_and(|&t| t + WINDOW <= now) {
                log.pop_front();
            }
            if log.len() < self.rpm {
                log.push_back(now);
                return permit;
            }
            let wake = log[0] + WINDOW;
            drop(log);
            self.clock.sleep_until(wake);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::SimClock;

    #[test]
    fn third_dispatch_waits_for_window() {
        let clock = Arc::new(SimClock::new());
        let gate = AdmissionGate::new(2, 4, clock.clone());
        drop(gate.acquire());
        clock.advance(Duration::from_secs(10));
        drop(gate.acquire());
        drop(gate.acquire());
        assert_eq!(clock.now(), Duration::from_secs(60));
    }

    #[test]
    fn concurrency_limit_blocks_until_release() {
        let gate = Arc::new(AdmissionGate::new(1000, 1, Arc::new(SimClock::new())));
        let first = gate.acquire();
        let g2 = gate.clone();
        let handle = std::thread::spawn(move || {
            let _p = g2.acquire();
        });
        std::thread::sleep(Duration::from_millis(50));
        assert!(!handle.is_finished());
        drop(first);
        handle.join().unwrap();
    }
}
