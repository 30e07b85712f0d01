//! Length-prefixed framing over reliable streams plus the non-blocking
//! outbound queue used to ship transition batches.
//!
//! The control loop never blocks on the network: payloads go into a bounded
//! queue with drop-oldest semantics (loop integrity outranks completeness;
//! drops are counted) and a background thread drains it onto the stream.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam::queue::ArrayQueue;

const MAX_FRAME: u32 = 256 * 1024 * 1024;

/// Writes one `u32`-length-prefixed frame.
pub fn write_frame<W: Write>(out: &mut W, payload: &[u8]) -> std::io::Result<()> {
    out.write_all(&(payload.len() as u32).to_le_bytes())?;
    out.write_all(payload)?;
    out.flush()
}

/// Reads one frame; `Ok(None)` on clean end-of-stream at a frame boundary.
pub fn read_frame<R: Read>(input: &mut R) -> std::io::Result<Option<Vec<u8>>> {
    let mut len_bytes = [0u8; 4];
    match input.read_exact(&mut len_bytes) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_le_bytes(len_bytes);
    if len > MAX_FRAME {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut payload = vec![0u8; len as usize];
    input.read_exact(&mut payload)?;
    Ok(Some(payload))
}

/// Bounded drop-oldest queue with a drop counter.
pub struct BoundedQueue {
    queue: Arc<ArrayQueue<Vec<u8>>>,
    dropped: Arc<AtomicU64>,
}

impl BoundedQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            queue: Arc::new(ArrayQueue::new(capacity)),
            dropped: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Enqueues without blocking; evicts the oldest entry when full.
    pub fn push(&self, payload: Vec<u8>) {
        if self.queue.force_push(payload).is_some() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn pop(&self) -> Option<Vec<u8>> {
        self.queue.pop()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    fn share(&self) -> (Arc<ArrayQueue<Vec<u8>>>, Arc<AtomicU64>) {
        (Arc::clone(&self.queue), Arc::clone(&self.dropped))
    }
}

/// Background sender: drains a [`BoundedQueue`] onto a writable stream.
pub struct Shipper {
    queue: BoundedQueue,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

impl Shipper {
    pub fn new<W: Write + Send + 'static>(mut sink: W, capacity: usize) -> Self {
        let queue = BoundedQueue::new(capacity);
        let (shared, _) = queue.share();
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || -> std::io::Result<()> {
            loop {
                if let Some(payload) = shared.pop() {
                    write_frame(&mut sink, &payload)?;
                } else if stop_flag.load(Ordering::Acquire) {
                    return Ok(());
                } else {
                    std::thread::sleep(std::time::Duration::from_micros(200));
                }
            }
        });
        Self {
            queue,
            stop,
            handle: Some(handle),
        }
    }

    /// Non-blocking send; oldest payload dropped (and counted) when full.
    pub fn ship(&self, payload: Vec<u8>) {
        self.queue.push(payload);
    }

    pub fn dropped(&self) -> u64 {
        self.queue.dropped()
    }

    /// Drains the queue and stops the sender thread.
    pub fn finish(mut self) -> std::io::Result<()> {
        self.stop.store(true, Ordering::Release);
        match self.handle.take() {
            Some(h) => h.join().expect("shipper thread panicked"),
            None => Ok(()),
        }
    }
}

impl Drop for Shipper {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
