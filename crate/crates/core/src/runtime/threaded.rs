use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{unbounded, Receiver, Select, Sender, TryRecvError};
use crossbeam_utils::CachePadded;

use super::partition::{owner, Control, Partition, Reply, TopoItem};
use crate::maxflow::Outgoing;
use crate::VertexId;

const MAX_BATCH: usize = 4096;

struct MsgBatch {
    from: usize,
    seq: u64,
    msgs: Vec<Outgoing>,
}

/// Work counters. Every unit of work is counted as sent before it becomes
/// visible to its consumer and as processed only after the consumer's own
/// outputs have been counted, so `processed == sent` read in that order
/// means nothing is in flight.
struct Counters {
    driver_sent: CachePadded<AtomicU64>,
    sent: Vec<CachePadded<AtomicU64>>,
    processed: Vec<CachePadded<AtomicU64>>,
    lifts: Vec<CachePadded<AtomicU64>>,
}

impl Counters {
    fn new(workers: usize) -> Self {
        let zeros = || (0..workers).map(|_| CachePadded::new(AtomicU64::new(0))).collect();
        Counters {
            driver_sent: CachePadded::new(AtomicU64::new(0)),
            sent: zeros(),
            processed: zeros(),
            lifts: zeros(),
        }
    }

    fn read(&self) -> (u64, u64) {
        let processed: u64 = self.processed.iter().map(|c| c.load(Ordering::SeqCst)).sum();
        let sent = self.driver_sent.load(Ordering::SeqCst)
            + self.sent.iter().map(|c| c.load(Ordering::SeqCst)).sum::<u64>();
        (processed, sent)
    }
}

struct Worker {
    id: usize,
    part: Partition,
    ctrl_rx: Receiver<Control>,
    topo_rx: Receiver<Vec<TopoItem>>,
    msg_rx: Receiver<MsgBatch>,
    msg_tx: Vec<Sender<MsgBatch>>,
    reply_tx: Sender<(usize, Reply)>,
    counters: Arc<Counters>,
    local: VecDeque<Outgoing>,
    outbound: Vec<Vec<Outgoing>>,
    seq_out: Vec<u64>,
    seq_in: Vec<u64>,
}

impl Worker {
    fn route(&mut self) {
        let workers = self.msg_tx.len();
        let mut local = 0u64;
        for o in self.part.out.drain(..) {
            let dest = owner(o.to, workers);
            if dest == self.id {
                self.local.push_back(o);
                local += 1;
            } else {
                self.outbound[dest].push(o);
            }
        }
        if local > 0 {
            self.counters.sent[self.id].fetch_add(local, Ordering::SeqCst);
        }
        for dest in 0..workers {
            if self.outbound[dest].is_empty() {
                continue;
            }
            let msgs = std::mem::take(&mut self.outbound[dest]);
            self.counters.sent[self.id].fetch_add(msgs.len() as u64, Ordering::SeqCst);
            self.seq_out[dest] += 1;
            let batch = MsgBatch {
                from: self.id,
                seq: self.seq_out[dest],
                msgs,
            };
            // a closed channel only happens during shutdown
            let _ = self.msg_tx[dest].send(batch);
        }
        self.counters.lifts[self.id].store(self.part.lifts, Ordering::Relaxed);
    }

    fn done(&self, n: usize) {
        self.counters.processed[self.id].fetch_add(n as u64, Ordering::SeqCst);
    }

    fn run(mut self) {
        loop {
            match self.ctrl_rx.try_recv() {
                Ok(Control::Shutdown) | Err(TryRecvError::Disconnected) => return,
                Ok(cmd) => {
                    let queued = self.local.len() + self.msg_rx.len() + self.topo_rx.len();
                    let reply = self.part.control(cmd, queued);
                    self.route();
                    if self.reply_tx.send((self.id, reply)).is_err() {
                        return;
                    }
                    continue;
                }
                Err(TryRecvError::Empty) => {}
            }

            if let Ok(items) = self.topo_rx.try_recv() {
                let n = items.len();
                for item in items {
                    self.part.apply_topology(item);
                }
                self.route();
                self.done(n);
                continue;
            }

            let mut batch: Vec<Outgoing> = Vec::new();
            while batch.len() < MAX_BATCH {
                match self.msg_rx.try_recv() {
                    Ok(b) => {
                        debug_assert!(b.seq > self.seq_in[b.from], "channel reordered");
                        self.seq_in[b.from] = b.seq;
                        batch.extend(b.msgs);
                    }
                    Err(_) => break,
                }
            }
            let room = MAX_BATCH.saturating_sub(batch.len()).max(1);
            let take = room.min(self.local.len());
            batch.extend(self.local.drain(..take));
            if !batch.is_empty() {
                let n = batch.len();
                self.part.apply_messages(&mut batch);
                self.route();
                self.done(n);
                continue;
            }

            let mut sel = Select::new();
            sel.recv(&self.ctrl_rx);
            sel.recv(&self.topo_rx);
            sel.recv(&self.msg_rx);
            sel.ready();
        }
    }
}

/// One OS thread per worker, connected by unbounded FIFO channels.
pub(crate) struct ThreadedBackend {
    topo_tx: Vec<Sender<Vec<TopoItem>>>,
    ctrl_tx: Vec<Sender<Control>>,
    reply_rx: Receiver<(usize, Reply)>,
    buffers: Vec<Vec<TopoItem>>,
    batch: usize,
    counters: Arc<Counters>,
    handles: Vec<JoinHandle<()>>,
}

impl ThreadedBackend {
    pub fn new(workers: usize, source: VertexId, sink: VertexId, n_projected: u64, batch: usize) -> Self {
        let counters = Arc::new(Counters::new(workers));
        let (reply_tx, reply_rx) = unbounded();
        let mut topo_tx = Vec::new();
        let mut ctrl_tx = Vec::new();
        let mut msg_tx = Vec::new();
        let mut receivers = Vec::new();
        for _ in 0..workers {
            let (tt, tr) = unbounded();
            let (ct, cr) = unbounded();
            let (mt, mr) = unbounded();
            topo_tx.push(tt);
            ctrl_tx.push(ct);
            msg_tx.push(mt);
            receivers.push((cr, tr, mr));
        }
        let handles = receivers
            .into_iter()
            .enumerate()
            .map(|(id, (ctrl_rx, topo_rx, msg_rx))| {
                let worker = Worker {
                    id,
                    part: Partition::new(id, workers, source, sink, n_projected),
                    ctrl_rx,
                    topo_rx,
                    msg_rx,
                    msg_tx: msg_tx.clone(),
                    reply_tx: reply_tx.clone(),
                    counters: Arc::clone(&counters),
                    local: VecDeque::new(),
                    outbound: (0..workers).map(|_| Vec::new()).collect(),
                    seq_out: vec![0; workers],
                    seq_in: vec![0; workers],
                };
                std::thread::Builder::new()
                    .name(format!("dynflow-worker-{id}"))
                    .spawn(move || worker.run())
                    .expect("failed to spawn worker thread")
            })
            .collect();
        ThreadedBackend {
            topo_tx,
            ctrl_tx,
            reply_rx,
            buffers: (0..workers).map(|_| Vec::new()).collect(),
            batch: batch.max(1),
            counters,
            handles,
        }
    }

    pub fn push_topology(&mut self, worker: usize, item: TopoItem) {
        self.buffers[worker].push(item);
        if self.buffers[worker].len() >= self.batch {
            self.flush_one(worker);
        }
    }

    fn flush_one(&mut self, worker: usize) {
        let items = std::mem::take(&mut self.buffers[worker]);
        if items.is_empty() {
            return;
        }
        self.counters
            .driver_sent
            .fetch_add(items.len() as u64, Ordering::SeqCst);
        self.topo_tx[worker].send(items).expect("worker thread exited");
    }

    pub fn flush(&mut self) {
        for w in 0..self.buffers.len() {
            self.flush_one(w);
        }
    }

    /// Two identical consecutive counter snapshots with nothing outstanding.
    pub fn is_quiescent(&self) -> bool {
        if self.buffers.iter().any(|b| !b.is_empty()) {
            return false;
        }
        let first = self.counters.read();
        if first.0 != first.1 {
            return false;
        }
        first == self.counters.read()
    }

    pub fn broadcast(&mut self, cmd: Control) -> Vec<Reply> {
        for tx in &self.ctrl_tx {
            tx.send(cmd).expect("worker thread exited");
        }
        let mut replies: Vec<(usize, Reply)> = (0..self.ctrl_tx.len())
            .map(|_| self.reply_rx.recv().expect("worker thread exited"))
            .collect();
        replies.sort_by_key(|(w, _)| *w);
        replies.into_iter().map(|(_, r)| r).collect()
    }

    pub fn total_lifts(&self) -> u64 {
        self.counters.lifts.iter().map(|c| c.load(Ordering::Relaxed)).sum()
    }
}

impl Drop for ThreadedBackend {
    fn drop(&mut self) {
        for tx in &self.ctrl_tx {
            let _ = tx.send(Control::Shutdown);
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}
