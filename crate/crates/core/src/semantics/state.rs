use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::Value;

/// Entry of a thread's all-addresses buffer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BufferEntry {
    Store { addr: Value, value: Value },
    Fence(Vec<Value>),
}

/// Per-address FIFO of one thread. Only non-empty queues are kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AddrQueue {
    pub addr: Value,
    pub values: VecDeque<Value>,
}

/// Program counters, valuation and buffer contents.
///
/// Registers of all threads live in one flat vector; each thread owns a
/// contiguous slice of it. `buf1[t]` is sorted by address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineState {
    pub pc: Vec<u32>,
    pub regs: Vec<Value>,
    pub mem: Vec<Value>,
    pub buf1: Vec<Vec<AddrQueue>>,
    pub buf2: Vec<VecDeque<BufferEntry>>,
}

impl MachineState {
    pub fn buffers_empty(&self) -> bool {
        self.buf1.iter().all(Vec::is_empty) && self.buf2.iter().all(VecDeque::is_empty)
    }

    pub fn thread_buffers_empty(&self, t: usize) -> bool {
        self.buf1[t].is_empty() && self.buf2[t].is_empty()
    }

    pub fn per_address(&self, t: usize, addr: Value) -> Option<&VecDeque<Value>> {
        self.buf1[t]
            .iter()
            .find(|q| q.addr == addr)
            .map(|q| &q.values)
    }

    pub(crate) fn per_address_len(&self, t: usize, addr: Value) -> usize {
        self.per_address(t, addr).map_or(0, VecDeque::len)
    }

    pub(crate) fn push_per_address(&mut self, t: usize, addr: Value, value: Value) {
        let queues = &mut self.buf1[t];
        match queues.binary_search_by_key(&addr, |q| q.addr) {
            Ok(i) => queues[i].values.push_back(value),
            Err(i) => queues.insert(
                i,
                AddrQueue {
                    addr,
                    values: VecDeque::from([value]),
                },
            ),
        }
    }

    pub(crate) fn pop_per_address(&mut self, t: usize, addr: Value) -> Option<Value> {
        let queues = &mut self.buf1[t];
        let i = queues.iter().position(|q| q.addr == addr)?;
        let v = queues[i].values.pop_front();
        if queues[i].values.is_empty() {
            queues.remove(i);
        }
        v
    }
}

impl fmt::Display for BufferEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BufferEntry::Store { addr, value } => write!(f, "{addr}<-{value}"),
            BufferEntry::Fence(addrs) => {
                let a: Vec<String> = addrs.iter().map(|a| a.to_string()).collect();
                write!(f, "fence[{}]", a.join(","))
            }
        }
    }
}
