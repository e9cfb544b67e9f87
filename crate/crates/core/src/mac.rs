//! Channel access: traditional CSMA and link-quality-aware CSMA (LQ-CSMA).
//!
//! LQ-CSMA maps a sender's average link quality onto a point `val` of the
//! traditional backoff range `[t_min, t_max]` and draws the backoff from
//! the narrow window `[val - x, val + y]` around it. Better links map to
//! smaller `val`, so they win channel access earlier in expectation.
//!
//! All times here are milliseconds.

use rand::Rng;
use thiserror::Error;

use crate::simkernel::SimTime;

#[derive(Debug, Error, PartialEq)]
pub enum MacError {
    #[error("invalid LQ-CSMA parameters: {0}")]
    InvalidParams(String),
    #[error("channel access failed after {attempts} attempts")]
    ChannelAccessFailure { attempts: u32 },
}

/// Direction of the link-quality to backoff mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LqMapping {
    /// High link quality maps to a small backoff.
    #[default]
    Inverted,
    /// `val = t_min + (L - lq_min) / (lq_max - lq_min) * (t_max - t_min)` as
    /// written in the original algorithm listing; kept for reference checks.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqCsmaParams {
    pub lq_min: f64,
    pub lq_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Offset below `val` of the window's lower edge.
    pub x: f64,
    /// Offset of the window's upper edge relative to `val` (signed).
    pub y: f64,
    pub mapping: LqMapping,
}

impl Default for LqCsmaParams {
    fn default() -> Self {
        LqCsmaParams {
            lq_min: 0.0,
            lq_max: 1.0,
            t_min: 20.0,
            t_max: 640.0,
            x: 61.0,
            y: -30.0,
            mapping: LqMapping::Inverted,
        }
    }
}

impl LqCsmaParams {
    pub fn validate(&self) -> Result<(), MacError> {
        let bad = |m: String| Err(MacError::InvalidParams(m));
        if !(self.lq_min < self.lq_max) {
            return bad(format!("lq_min ({}) must be < lq_max ({})", self.lq_min, self.lq_max));
        }
        if !(self.t_min < self.t_max) {
            return bad(format!("t_min ({}) must be < t_max ({})", self.t_min, self.t_max));
        }
        if self.t_max < 1.0 {
            return bad("t_max must be at least 1 ms".into());
        }
        if [self.x, self.y, self.t_min, self.t_max, self.lq_min, self.lq_max].iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        Ok(())
    }

    /// The full traditional CSMA range `[t_min, t_max]`.
    pub fn traditional_window(&self) -> BackoffWindow {
        BackoffWindow { lower: self.t_min.max(1.0), upper: self.t_max }
    }

    /// The mapped point `val` for link quality `l` (clamped to the LQ range).
    pub fn map_point(&self, l: f64) -> f64 {
        let l = l.clamp(self.lq_min, self.lq_max);
        let span = self.lq_max - self.lq_min;
        let frac = match self.mapping {
            LqMapping::Inverted => (self.lq_max - l) / span,
            LqMapping::Literal => (l - self.lq_min) / span,
        };
        self.t_min + frac * (self.t_max - self.t_min)
    }

    /// Unclamped `[val - x, val + y]`.
    pub fn raw_window(&self, l: f64) -> (f64, f64) {
        let val = self.map_point(l);
        (val - self.x, val + self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffWindow {
    pub lower: f64,
    pub upper: f64,
}

impl BackoffWindow {
    pub fn new(lower: f64, upper: f64) -> Self {
        BackoffWindow { lower, upper }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Smallest and largest integer millisecond the window can yield.
    pub fn integer_bounds(&self) -> (u64, u64) {
        let lo = self.lower.ceil().max(0.0) as u64;
        let hi = self.upper.floor().max(0.0) as u64;
        if lo > hi {
            let r = self.lower.round().max(0.0) as u64;
            (r, r)
        } else {
            (lo, hi)
        }
    }
}

/// LQ-CSMA window for average link quality `l`, clamped into `[1, t_max]`.
pub fn select_window(l: f64, p: &LqCsmaParams) -> Result<BackoffWindow, MacError> {
    p.validate()?;
    let (raw_lo, raw_hi) = p.raw_window(l);
    let lower = raw_lo.max(1.0).min(p.t_max);
    let upper = raw_hi.max(lower).min(p.t_max);
    Ok(BackoffWindow { lower, upper })
}

/// Uniform integer-millisecond draw from `w`, inclusive on both ends.
pub fn sample_backoff<R: Rng + ?Sized>(w: &BackoffWindow, rng: &mut R) -> u64 {
    let (lo, hi) = w.integer_bounds();
    rng.gen_range(lo..=hi)
}

/// Outcome of one clear-channel assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsmaStep {
    /// Channel idle: transmit now.
    Transmit,
    /// Channel busy: assess again at the given time.
    Retry(SimTime),
    /// Gave up; the frame is dropped.
    Fail,
}

/// Per-frame non-persistent CSMA state. A busy assessment redraws from the
/// same window; there is no exponential widening.
#[derive(Debug, Clone)]
pub struct CsmaProcess {
    pub window: BackoffWindow,
    pub attempts: u32,
    pub max_attempts: u32,
    /// Total backoff drawn so far, in ms.
    pub backoff_ms: u64,
    /// First backoff draw, in ms.
    pub first_backoff_ms: u64,
}

impl CsmaProcess {
    pub const DEFAULT_MAX_ATTEMPTS: u32 = 16;

    /// Draws the first backoff and returns the process plus the time of the
    /// first assessment.
    pub fn start<R: Rng + ?Sized>(
        now: SimTime,
        window: BackoffWindow,
        max_attempts: u32,
        rng: &mut R,
    ) -> (Self, SimTime) {
        let b = sample_backoff(&window, rng);
        let p = CsmaProcess { window, attempts: 1, max_attempts, backoff_ms: b, first_backoff_ms: b };
        (p, now.plus_us(b * 1000))
    }

    pub fn on_assessment<R: Rng + ?Sized>(&mut self, now: SimTime, busy: bool, rng: &mut R) -> CsmaStep {
        if !busy {
            return CsmaStep::Transmit;
        }
        if self.attempts >= self.max_attempts {
            return CsmaStep::Fail;
        }
        self.attempts += 1;
        let b = sample_backoff(&self.window, rng);
        self.backoff_ms += b;
        CsmaStep::Retry(now.plus_us(b * 1000))
    }
}

/// Runs a full channel-access attempt against `channel_busy(t)` and returns
/// the time the frame is granted the channel.
pub fn csma_attempt<R, F>(
    now: SimTime,
    window: BackoffWindow,
    mut channel_busy: F,
    max_attempts: u32,
    rng: &mut R,
) -> Result<SimTime, MacError>
where
    R: Rng + ?Sized,
    F: FnMut(SimTime) -> bool,
{
    let (mut proc, mut t) = CsmaProcess::start(now, window, max_attempts, rng);
    loop {
        match proc.on_assessment(t, channel_busy(t), rng) {
            CsmaStep::Transmit => return Ok(t),
            CsmaStep::Retry(next) => t = next,
            CsmaStep::Fail => return Err(MacError::ChannelAccessFailure { attempts: proc.attempts }),
        }
    }
}
