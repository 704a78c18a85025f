//! Simulated time.
//!
//! Time is an integer tick count; Δ is a configurable number of ticks. Traces and scenario
//! files write times as reduced fractions of Δ (`2`, `5/2`), so they stay exact.

/// Default ticks per Δ.
pub const DEFAULT_DELTA: u64 = 1000;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `ticks` as a reduced fraction of `delta`.
pub fn format_time(ticks: u64, delta: u64) -> String {
    let g = gcd(ticks, delta).max(1);
    let (num, den) = (ticks / g, delta / g);
    if den == 1 {
        num.to_string()
    } else {
        format!("{num}/{den}")
    }
}

/// Parses `a` or `a/b` (in units of Δ) to ticks. Fails if the result is not a whole tick.
pub fn parse_time(s: &str, delta: u64) -> Option<u64> {
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim().parse::<u64>().ok()?, b.trim().parse::<u64>().ok()?),
        None => (s.trim().parse::<u64>().ok()?, 1),
    };
    if den == 0 {
        return None;
    }
    let scaled = num.checked_mul(delta)?;
    (scaled % den == 0).then_some(scaled / den)
}
