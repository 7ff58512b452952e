use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{check_state, Backend, LogitMatrix};
use crate::diffusion::SequenceState;
use crate::{Error, Result};

/// Rows produced for reverse step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub t: usize,
    pub matrix: LogitMatrix,
}

/// Backend outputs of one run, in call order (`t = T-1` first).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogitTrace {
    vocab: usize,
    len: usize,
    frames: Vec<TraceFrame>,
}

impl LogitTrace {
    pub fn new(vocab: usize, len: usize) -> Self {
        Self {
            vocab,
            len,
            frames: Vec::new(),
        }
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn seq_len(&self) -> usize {
        self.len
    }

    pub fn frames(&self) -> &[TraceFrame] {
        &self.frames
    }

    pub fn push(&mut self, t: usize, matrix: LogitMatrix) -> Result<()> {
        if matrix.len() != self.len || matrix.vocab() != self.vocab {
            return Err(Error::Trace(format!(
                "frame shape {}×{} differs from trace shape {}×{}",
                matrix.len(),
                matrix.vocab(),
                self.len,
                self.vocab
            )));
        }
        if let Some(last) = self.frames.last() {
            if t >= last.t {
                return Err(Error::Trace(format!(
                    "frame for step {t} follows step {}; steps must decrease",
                    last.t
                )));
            }
        }
        self.frames.push(TraceFrame { t, matrix });
        Ok(())
    }
}

/// Replays recorded rows. Mask flags follow the live state, not the recording.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    trace: Arc<LogitTrace>,
    cursor: usize,
    current: LogitMatrix,
}

impl ReplayBackend {
    pub fn new(trace: Arc<LogitTrace>) -> Self {
        let current = LogitMatrix::broadcast(trace.len, &alloc::vec![0.0; trace.vocab]);
        Self {
            trace,
            cursor: 0,
            current,
        }
    }
}

impl Backend for ReplayBackend {
    fn vocab(&self) -> usize {
        self.trace.vocab
    }

    fn seq_len(&self) -> usize {
        self.trace.len
    }

    fn logits(&mut self, state: &SequenceState, _rng: &mut dyn RngCore) -> Result<&LogitMatrix> {
        check_state(state, self.trace.len, self.trace.vocab)
            .map_err(|e| Error::Replay(format!("{e}")))?;
        let Some(frame) = self.trace.frames.get(self.cursor) else {
            return Err(Error::Replay(format!(
                "trace exhausted after {} steps",
                self.trace.frames.len()
            )));
        };
        let want = state.step.checked_sub(1).ok_or_else(|| {
            Error::Replay("backend queried at step 0".into())
        })?;
        if frame.t != want {
            return Err(Error::Replay(format!(
                "trace frame {} is for step {}, sampler is at step {want}",
                self.cursor, frame.t
            )));
        }
        self.cursor += 1;
        self.current.clone_from(&frame.matrix);
        self.current.set_masks_from(state);
        Ok(&self.current)
    }
}

/// Wraps a backend and keeps a copy of every matrix it emits.
pub struct Recorder<B> {
    inner: B,
    trace: LogitTrace,
}

impl<B: Backend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        let trace = LogitTrace::new(inner.vocab(), inner.seq_len());
        Self { inner, trace }
    }

    pub fn into_trace(self) -> LogitTrace {
        self.trace
    }

    pub fn trace(&self) -> &LogitTrace {
        &self.trace
    }
}

impl<B: Backend> Backend for Recorder<B> {
    fn vocab(&self) -> usize {
        self.inner.vocab()
    }

    fn seq_len(&self) -> usize {
        self.inner.seq_len()
    }

    fn logits(&mut self, state: &SequenceState, rng: &mut dyn RngCore) -> Result<&LogitMatrix> {
        let t = state.step.saturating_sub(1);
        let m = self.inner.logits(state, rng)?;
        self.trace.push(t, m.clone())?;
        Ok(&self.trace.frames.last().expect("frame just pushed").matrix)
    }
}
