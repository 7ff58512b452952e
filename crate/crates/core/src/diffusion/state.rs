use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Data tokens are `0..size`; the mask symbol is stored as `size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    size: u32,
}

impl Vocabulary {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::config("vocabulary needs at least two data tokens"));
        }
        let size = u32::try_from(size).map_err(|_| Error::config("vocabulary too large"))?;
        if size == u32::MAX {
            return Err(Error::config("vocabulary too large"));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn mask_id(&self) -> u32 {
        self.size
    }

    pub fn contains(&self, token: u32) -> bool {
        token < self.size
    }
}

/// A partially masked sequence `x_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceState {
    tokens: Vec<u32>,
    vocab: Vocabulary,
    /// Reverse-time step index: `T` for the fully masked start, `0` at the end.
    pub step: usize,
}

impl SequenceState {
    pub fn fully_masked(vocab: Vocabulary, len: usize, step: usize) -> Self {
        Self {
            tokens: vec![vocab.mask_id(); len],
            vocab,
            step,
        }
    }

    /// A fully revealed sequence at step 0.
    pub fn from_tokens(vocab: Vocabulary, tokens: Vec<u32>) -> Result<Self> {
        if let Some(&bad) = tokens.iter().find(|&&t| !vocab.contains(t)) {
            return Err(Error::config(alloc::format!(
                "token {bad} outside vocabulary of size {}",
                vocab.size()
            )));
        }
        Ok(Self {
            tokens,
            vocab,
            step: 0,
        })
    }

    /// Builds a state from raw entries where `None` is the mask.
    pub fn from_partial(vocab: Vocabulary, entries: &[Option<u32>], step: usize) -> Result<Self> {
        let mut tokens = Vec::with_capacity(entries.len());
        for e in entries {
            match *e {
                Some(t) if vocab.contains(t) => tokens.push(t),
                Some(t) => {
                    return Err(Error::config(alloc::format!(
                        "token {t} outside vocabulary of size {}",
                        vocab.size()
                    )))
                }
                None => tokens.push(vocab.mask_id()),
            }
        }
        Ok(Self { tokens, vocab, step })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    pub fn get(&self, pos: usize) -> Option<u32> {
        let t = self.tokens[pos];
        (t != self.vocab.mask_id()).then_some(t)
    }

    pub fn is_masked(&self, pos: usize) -> bool {
        self.tokens[pos] == self.vocab.mask_id()
    }

    pub fn masked_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|&&t| t == self.vocab.mask_id())
            .count()
    }

    pub fn is_fully_unmasked(&self) -> bool {
        self.masked_count() == 0
    }

    /// Raw token slice; masked entries hold [`Vocabulary::mask_id`].
    pub fn raw(&self) -> &[u32] {
        &self.tokens
    }

    pub(crate) fn commit(&mut self, pos: usize, token: u32) {
        debug_assert!(self.is_masked(pos));
        self.tokens[pos] = token;
    }

    pub(crate) fn mask(&mut self, pos: usize) {
        self.tokens[pos] = self.vocab.mask_id();
    }
}
