//! Exact hit sequences for the doubling and tent maps from the binary expansion of x.
//!
//! With x = 0.b₁b₂b₃… the doubling map is the shift, so the leading bits of T^i x
//! are b_{i+1}b_{i+2}…; for the tent map they are b_{i+k} ⊕ b_i.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::dyadic::Decision;
use crate::error::{Error, Result};
use crate::targets::TargetSchedule;

use super::MapKind;

/// A stream of fair bits, most significant first.
pub trait BitSource {
    /// The next chunk as `(word, count)`: the `count` leading bits of `word` are valid
    /// and the rest are zero. `None` once the stream is exhausted.
    fn next_chunk(&mut self) -> Option<(u64, u32)>;
}

/// Unbounded bits from a random number generator, 64 per draw.
#[derive(Debug, Clone)]
pub struct RngBits<R>(pub R);

impl<R: RngCore> BitSource for RngBits<R> {
    fn next_chunk(&mut self) -> Option<(u64, u32)> {
        Some((self.0.next_u64(), 64))
    }
}

/// A finite bit string.
#[derive(Debug, Clone)]
pub struct WordBits {
    words: Vec<u64>,
    len: usize,
    pos: usize,
}

impl WordBits {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = alloc::vec![0u64; bits.len().div_ceil(64)];
        for (k, &b) in bits.iter().enumerate() {
            if b {
                words[k / 64] |= 1 << (63 - k % 64);
            }
        }
        WordBits { words, len: bits.len(), pos: 0 }
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(len <= words.len() * 64);
        WordBits { words, len, pos: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl BitSource for WordBits {
    fn next_chunk(&mut self) -> Option<(u64, u32)> {
        if self.pos >= self.len {
            return None;
        }
        let k = self.pos / 64;
        let count = (self.len - self.pos).min(64) as u32;
        self.pos += count as usize;
        let w = self.words[k];
        Some((if count == 64 { w } else { w & !(u64::MAX >> count) }, count))
    }
}

/// Bits read so far, packed most significant first.
struct Buffer<S> {
    src: S,
    words: Vec<u64>,
    len: usize,
    done: bool,
}

impl<S: BitSource> Buffer<S> {
    fn new(src: S) -> Self {
        Buffer { src, words: Vec::new(), len: 0, done: false }
    }

    /// Read until at least `n` bits are buffered; false if the source runs out first.
    fn ensure(&mut self, n: usize) -> bool {
        while self.len < n && !self.done {
            match self.src.next_chunk() {
                None => self.done = true,
                Some((w, c)) => {
                    let off = (self.len % 64) as u32;
                    if off == 0 {
                        self.words.push(w);
                    } else {
                        *self.words.last_mut().unwrap() |= w >> off;
                        if c + off > 64 {
                            self.words.push(w << (64 - off));
                        }
                    }
                    self.len += c as usize;
                }
            }
        }
        self.len >= n
    }

    fn bit(&self, k: usize) -> bool {
        k < self.len && (self.words[k / 64] >> (63 - k % 64)) & 1 == 1
    }

    /// 64 bits starting at position `start`, zero past the end of the buffer.
    fn window(&self, start: usize) -> u64 {
        let k = start / 64;
        let off = start % 64;
        let w0 = self.words.get(k).copied().unwrap_or(0);
        if off == 0 {
            return w0;
        }
        let w1 = self.words.get(k + 1).copied().unwrap_or(0);
        (w0 << off) | (w1 >> (64 - off))
    }
}

/// Bits scanned past a tied 64-bit window before the tail is taken to be zero. Only
/// a stream with this many consecutive equal bits can reach the limit.
const TAIL_SCAN: usize = 4096;

/// `indicator[k]` is 1 iff T^{k+1} x ∈ B_{k+1}, where x is the point whose binary
/// expansion is the bit stream. A finite stream is the dyadic point with zero tail.
pub fn exact_bit_orbit<S: BitSource>(source: S, schedule: &TargetSchedule, n: usize) -> Result<Vec<bool>> {
    let tent = match schedule.map().kind() {
        MapKind::Doubling => false,
        MapKind::Tent => true,
        _ => {
            return Err(Error::UnsupportedMap { op: "exact_bit_orbit", map: schedule.map().name() });
        }
    };
    if n > schedule.n_max() {
        return Err(Error::Index { index: n, len: schedule.n_max() });
    }
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let needed = n + schedule.arc(n)?.guard_width() as usize;
    let mut buf = Buffer::new(source);
    for i in 1..=n {
        let arc = schedule.arc(i)?;
        if arc.full {
            out.push(true);
            continue;
        }
        let w = arc.guard_width();
        if !buf.ensure(i + w as usize) {
            return Err(Error::InputExhausted { needed, available: buf.len });
        }
        let flip = if tent && buf.bit(i - 1) { u64::MAX } else { 0 };
        let top = u64::MAX << (64 - w);
        let hit = match arc.classify((buf.window(i) ^ flip) & top, w) {
            Decision::Hit => true,
            Decision::Miss => false,
            Decision::Undecided => {
                buf.ensure(i + 64);
                let v = buf.window(i) ^ flip;
                match arc.classify(v, 64) {
                    Decision::Hit => true,
                    Decision::Miss => false,
                    Decision::Undecided => {
                        let mut k = i + 64;
                        let tail = loop {
                            if !buf.ensure(k + 1) || k >= i + 64 + TAIL_SCAN {
                                break flip != 0;
                            }
                            if buf.bit(k) != (flip != 0) {
                                break true;
                            }
                            k += 1;
                        };
                        arc.contains(v, tail)
                    }
                }
            }
        };
        out.push(hit);
    }
    Ok(out)
}
