//! Alternating timed interactions: the temporal weight of an editor pair.
//!
//! The two editors' edits are merged into one time-ordered sequence. Every adjacent
//! pair of events made by different editors no more than the threshold apart
//! contributes one unit of weight. Edits by third parties never enter the sequence.

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::ingest::{EditorId, RevisionRecord};

pub const DEFAULT_THRESHOLD_HOURS: f64 = 48.0;

#[derive(Debug, Error, PartialEq)]
pub enum AtiError {
    #[error("both sides of the pair are editor `{0}`")]
    InvalidPair(EditorId),
    #[error("edits on one side of the pair come from several editors")]
    MixedEditors,
    #[error("interaction threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtiParams {
    threshold_hours: f64,
}

impl AtiParams {
    pub fn new(threshold_hours: f64) -> Result<Self, AtiError> {
        if !(threshold_hours.is_finite() && threshold_hours > 0.0) {
            return Err(AtiError::InvalidThreshold(threshold_hours));
        }
        Ok(AtiParams { threshold_hours })
    }

    pub fn threshold_hours(&self) -> f64 {
        self.threshold_hours
    }

    pub fn threshold_seconds(&self) -> f64 {
        self.threshold_hours * 3600.0
    }

    /// Whether two instants are close enough to count as an interaction (inclusive).
    pub fn within(&self, a: DateTime<Utc>, b: DateTime<Utc>) -> bool {
        let gap = (b - a).num_seconds().unsigned_abs() as f64;
        gap <= self.threshold_seconds()
    }
}

impl Default for AtiParams {
    fn default() -> Self {
        AtiParams {
            threshold_hours: DEFAULT_THRESHOLD_HOURS,
        }
    }
}

/// Which editor of the pair made an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSide {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineEvent {
    pub timestamp: DateTime<Utc>,
    pub side: PairSide,
    pub revision_id: u64,
}

/// Merged edit sequence of one editor pair, ordered by `(timestamp, revision_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTimeline {
    pub first: Option<EditorId>,
    pub second: Option<EditorId>,
    pub events: Vec<TimelineEvent>,
}

impl PairTimeline {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn single_editor(edits: &[RevisionRecord]) -> Result<Option<EditorId>, AtiError> {
    let Some(first) = edits.first() else {
        return Ok(None);
    };
    if edits.iter().any(|r| r.editor != first.editor) {
        return Err(AtiError::MixedEditors);
    }
    Ok(Some(first.editor.clone()))
}

pub fn build_pair_timeline(edits_i: &[RevisionRecord], edits_j: &[RevisionRecord]) -> Result<PairTimeline, AtiError> {
    let first = single_editor(edits_i)?;
    let second = single_editor(edits_j)?;
    if let (Some(a), Some(b)) = (&first, &second) {
        if a == b {
            return Err(AtiError::InvalidPair(a.clone()));
        }
    }
    let tag = |side: PairSide| {
        move |r: &RevisionRecord| TimelineEvent {
            timestamp: r.timestamp,
            side,
            revision_id: r.revision_id,
        }
    };
    let mut events: Vec<TimelineEvent> = edits_i
        .iter()
        .map(tag(PairSide::First))
        .chain(edits_j.iter().map(tag(PairSide::Second)))
        .collect();
    events.sort_by_key(|e| (e.timestamp, e.revision_id));
    Ok(PairTimeline { first, second, events })
}

/// Number of adjacent events by different editors within the threshold.
pub fn ati_weight(timeline: &PairTimeline, params: &AtiParams) -> u64 {
    timeline
        .events
        .windows(2)
        .filter(|w| w[0].side != w[1].side && params.within(w[0].timestamp, w[1].timestamp))
        .count() as u64
}
