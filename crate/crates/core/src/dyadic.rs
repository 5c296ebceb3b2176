//! Arcs of the circle in 64-bit binary fixed point.
//!
//! A point `x` in [0, 1) is written `x = X·2^-64 + tail` with `X: u64`. An arc is
//! described by its left end `lo` and length `len` in units of 2^-64; the right
//! end is always open, the left end is open for metric balls and closed for
//! dyadic cylinders.

const TWO_64: f64 = 18_446_744_073_709_551_616.0;

/// Round `x` in [0, 1) to the nearest multiple of 2^-64, modulo 1.
pub fn to_fraction(x: f64) -> u64 {
    let y = libm::round(x * TWO_64);
    if y >= TWO_64 || y <= 0.0 {
        0
    } else {
        y as u64
    }
}

pub fn from_fraction(x: u64) -> f64 {
    x as f64 / TWO_64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicArc {
    pub lo: u64,
    pub len: u64,
    /// Covers the whole circle; `lo` and `len` are then ignored.
    pub full: bool,
    /// Left end belongs to the arc.
    pub closed: bool,
}

/// Outcome of testing a dyadic cell against an arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Hit,
    Miss,
    Undecided,
}

impl DyadicArc {
    pub const FULL: DyadicArc = DyadicArc { lo: 0, len: 0, full: true, closed: true };

    /// Open arc (center − radius, center + radius) with both ends rounded to 2^-64.
    pub fn ball(center: f64, radius: f64) -> Self {
        if radius >= 0.5 {
            return Self::FULL;
        }
        let r = to_fraction(radius);
        let c = to_fraction(center);
        DyadicArc { lo: c.wrapping_sub(r), len: r.wrapping_mul(2), full: false, closed: false }
    }

    /// Half-open cylinder [index·2^-depth, (index + 1)·2^-depth).
    pub fn cylinder(depth: u32, index: u64) -> Self {
        if depth == 0 {
            return Self::FULL;
        }
        assert!(depth < 64, "cylinder depth must be below 64");
        DyadicArc { lo: index << (64 - depth), len: 1u64 << (64 - depth), full: false, closed: true }
    }

    /// Lebesgue measure of the arc.
    pub fn measure(&self) -> f64 {
        if self.full {
            1.0
        } else {
            from_fraction(self.len)
        }
    }

    /// Membership of `X·2^-64 + tail`, where `tail_positive` says whether the tail is nonzero.
    #[inline]
    pub fn contains(&self, x: u64, tail_positive: bool) -> bool {
        if self.full {
            return true;
        }
        let t = x.wrapping_sub(self.lo);
        if t >= self.len {
            return false;
        }
        t > 0 || self.closed || tail_positive
    }

    /// Decide whether every point of the dyadic cell `[v, v + 2^-width)` lies inside
    /// (Hit) or outside (Miss) the arc. `v` carries the cell's leading `width` bits in
    /// its high bits and zeros below.
    #[inline]
    pub fn classify(&self, v: u64, width: u32) -> Decision {
        if self.full {
            return Decision::Hit;
        }
        let a = v.wrapping_sub(self.lo) as u128;
        let end = a + (1u128 << (64 - width));
        let len = self.len as u128;
        if end <= len && (a > 0 || self.closed) {
            Decision::Hit
        } else if a >= len && end <= 1u128 << 64 {
            Decision::Miss
        } else {
            Decision::Undecided
        }
    }

    /// Bits of resolution after which a cell of the given width is typically decisive.
    pub fn guard_width(&self) -> u32 {
        if self.full || self.len == 0 {
            return 2;
        }
        // ceil(log2(1/r)) + 2 with r = len/2 in units of 2^-64
        let r = (self.len >> 1).max(1);
        let bits = 64 - r.leading_zeros();
        (65 - bits + 2).clamp(1, 64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_round_trip() {
        assert_eq!(to_fraction(0.5), 1 << 63);
        assert_eq!(to_fraction(0.0), 0);
        assert_eq!(from_fraction(1 << 62), 0.25);
    }

    #[test]
    fn ball_wraps() {
        let b = DyadicArc::ball(0.0, 0.25);
        assert!(b.contains(to_fraction(0.9), false));
        assert!(b.contains(to_fraction(0.1), false));
        assert!(!b.contains(to_fraction(0.5), false));
        assert!(!b.contains(to_fraction(0.75), false));
        assert!(b.contains(to_fraction(0.75), true));
    }

    #[test]
    fn cylinder_is_half_open() {
        let c = DyadicArc::cylinder(2, 1);
        assert!(c.contains(1 << 62, false));
        assert!(!c.contains(1 << 63, false));
        assert_eq!(c.measure(), 0.25);
    }

    #[test]
    fn classify_cells() {
        let c = DyadicArc::cylinder(2, 1);
        assert_eq!(c.classify(1 << 62, 2), Decision::Hit);
        assert_eq!(c.classify(0, 2), Decision::Miss);
        assert_eq!(c.classify(0, 1), Decision::Undecided);
        let b = DyadicArc::ball(0.25, 0.125);
        assert_eq!(b.classify(1 << 61, 3), Decision::Undecided);
        assert_eq!(b.classify(1 << 61, 64), Decision::Undecided);
        assert_eq!(b.classify((1 << 61) + 1, 64), Decision::Hit);
    }

    #[test]
    fn guard_width_matches_log() {
        let b = DyadicArc::ball(0.3, 0.1);
        // ceil(log2(10)) + 2 = 6
        assert_eq!(b.guard_width(), 6);
        let b = DyadicArc::ball(0.3, 0.125);
        assert_eq!(b.guard_width(), 5);
    }
}
