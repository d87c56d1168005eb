use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overflow {
    /// A full queue evicts its oldest item to admit the new one.
    #[default]
    DropOldest,
    /// A full queue makes the producer wait.
    Block,
}

impl std::str::FromStr for Overflow {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.replace('-', "_").as_str() {
            "drop_oldest" => Ok(Overflow::DropOldest),
            "block" => Ok(Overflow::Block),
            other => Err(crate::Error::InvalidInput(format!("unknown overflow policy `{other}`"))),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Push<T> {
    Accepted,
    /// Accepted after evicting this item.
    Evicted(T),
    /// The queue is closed; the item is handed back.
    Closed(T),
}

struct State<T> {
    items: VecDeque<T>,
    closed: bool,
}

/// Fixed-capacity MPMC queue with a drop-oldest or blocking overflow rule.
pub struct BoundedQueue<T> {
    state: Mutex<State<T>>,
    not_empty: Condvar,
    not_full: Condvar,
    capacity: usize,
    overflow: Overflow,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize, overflow: Overflow) -> Self {
        assert!(capacity >= 1, "queue capacity must be >= 1");
        Self {
            state: Mutex::new(State {
                items: VecDeque::with_capacity(capacity),
                closed: false,
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
            capacity,
            overflow,
        }
    }

    pub fn push(&self, item: T) -> Push<T> {
        let mut st = self.state.lock().expect("queue lock");
        loop {
            if st.closed {
                return Push::Closed(item);
            }
            if st.items.len() < self.capacity {
                st.items.push_back(item);
                self.not_empty.notify_one();
                return Push::Accepted;
            }
            match self.overflow {
                Overflow::DropOldest => {
                    let old = st.items.pop_front().expect("full queue");
                    st.items.push_back(item);
                    self.not_empty.notify_one();
                    return Push::Evicted(old);
                }
                Overflow::Block => st = self.not_full.wait(st).expect("queue lock"),
            }
        }
    }

    /// Next item; `None` once the queue is closed and empty.
    pub fn pop(&self) -> Option<T> {
        let mut st = self.state.lock().expect("queue lock");
        loop {
            if let Some(item) = st.items.pop_front() {
                self.not_full.notify_one();
                return Some(item);
            }
            if st.closed {
                return None;
            }
            st = self.not_empty.wait(st).expect("queue lock");
        }
    }

    /// Rejects further pushes; queued items stay poppable.
    pub fn close(&self) {
        self.state.lock().expect("queue lock").closed = true;
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }

    /// Closes the queue and removes everything still in it.
    pub fn close_and_drain(&self) -> Vec<T> {
        let mut st = self.state.lock().expect("queue lock");
        st.closed = true;
        let out = st.items.drain(..).collect();
        self.not_empty.notify_all();
        self.not_full.notify_all();
        out
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("queue lock").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
