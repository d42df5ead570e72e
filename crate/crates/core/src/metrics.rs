//! Opponent-presence evaluation: geometric ground truth, pixel-exact
//! detection in rendered frames, and accuracy/precision/recall.
//!
//! An opponent counts as present for a viewer when it passes
//! [`is_visible`]: within `max_range`, inside the field of view, and in
//! line of sight. Labels exist only for ticks where both players are active.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Action;
use crate::geometry::{is_visible, ViewConfig};
use crate::observation::{
    palette_color, viewpoint_readout, Frame, ObservationBackend, ObservationContext, ObservationError, Rgb, DEFAULT_CONTEXT_FRAMES,
};
use crate::replay::{replay_visit, ReplayError, ReplayLog};
use crate::world::{PlayerId, Snapshot, WorldState};

/// (post-advance tick, viewer, opponent).
pub type PresenceKey = (u64, PlayerId, PlayerId);
pub type PresenceLabels = BTreeMap<PresenceKey, bool>;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label sets differ: {only_predicted} keys only predicted, {only_truth} only in truth")]
    KeyMismatch { only_predicted: usize, only_truth: usize },
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
}

/// Visibility of every active opponent from every active viewer.
pub fn labels_for_state(state: &WorldState, view: &ViewConfig) -> Vec<(PresenceKey, bool)> {
    let mut out = Vec::new();
    for viewer in state.active_players() {
        for target in state.active_players().filter(|p| p.id != viewer.id) {
            let seen = is_visible(state.map(), &viewer.pose, target.pose.position(), view.fov, view.max_range);
            out.push(((state.tick(), viewer.id.clone(), target.id.clone()), seen));
        }
    }
    out
}

/// Ground-truth labels over every post-advance state of a replayed log.
pub fn ground_truth_labels(log: &ReplayLog, view: &ViewConfig) -> Result<PresenceLabels, MetricsError> {
    let mut labels = PresenceLabels::new();
    replay_visit(log, |state, _, _| labels.extend(labels_for_state(state, view)))?;
    Ok(labels)
}

/// True iff some pixel equals `color` exactly.
pub fn frame_presence_detector(frame: &Frame, color: Rgb) -> bool {
    frame.contains_color(color)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PresenceScore {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Absent when there are no labels.
    pub accuracy: Option<f64>,
    /// Absent when nothing was predicted positive.
    pub precision: Option<f64>,
    /// Absent when nothing is truly positive.
    pub recall: Option<f64>,
}

impl PresenceScore {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Confusion counts of `predicted` against `truth`; keys must match exactly.
pub fn presence_score(predicted: &PresenceLabels, truth: &PresenceLabels) -> Result<PresenceScore, MetricsError> {
    let only_predicted = predicted.keys().filter(|k| !truth.contains_key(*k)).count();
    let only_truth = truth.keys().filter(|k| !predicted.contains_key(*k)).count();
    if only_predicted + only_truth > 0 {
        return Err(MetricsError::KeyMismatch {
            only_predicted,
            only_truth,
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (k, &p) in predicted {
        match (p, truth[k]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(PresenceScore::from_counts(tp, fp, tn, fn_))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Disagreement {
    pub tick: u64,
    pub viewer: PlayerId,
    pub opponent: PlayerId,
    pub predicted: bool,
    pub truth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub backend: String,
    pub ticks: usize,
    pub score: PresenceScore,
    pub disagreements: Vec<Disagreement>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let s = &self.score;
        let ratio = |r: Option<f64>| r.map_or_else(|| "absent".to_string(), |v| format!("{v:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "backend: {}", self.backend);
        let _ = writeln!(out, "ticks: {}", self.ticks);
        let _ = writeln!(out, "labels: {}", s.total());
        let _ = writeln!(out, "tp: {}\nfp: {}\ntn: {}\nfn: {}", s.tp, s.fp, s.tn, s.fn_);
        let _ = writeln!(out, "accuracy: {}", ratio(s.accuracy));
        let _ = writeln!(out, "precision: {}", ratio(s.precision));
        let _ = writeln!(out, "recall: {}", ratio(s.recall));
        let _ = writeln!(out, "disagreements: {}", self.disagreements.len());
        for d in &self.disagreements {
            let _ = writeln!(
                out,
                "  tick {} viewer {} opponent {} predicted {} truth {}",
                d.tick, d.viewer, d.opponent, d.predicted, d.truth
            );
        }
        out
    }
}

/// Replays `log`, renders each active viewer's frame with `backend`, detects
/// each active opponent by palette color and scores against ground truth.
pub fn evaluate_rollout(
    log: &ReplayLog,
    backend: &dyn ObservationBackend,
    width: usize,
    height: usize,
) -> Result<EvalReport, MetricsError> {
    let view = log.header.view;
    let mut states: Vec<(Snapshot, BTreeMap<PlayerId, Action>)> = Vec::new();
    replay_visit(log, |state, record, _| states.push((state.snapshot(), record.actions.clone())))?;

    let mut truth = PresenceLabels::new();
    let mut viewers = BTreeSet::new();
    for (s, _) in &states {
        truth.extend(labels_for_state(s, &view));
        viewers.extend(s.active_players().map(|p| p.id.clone()));
    }

    // Contexts are per viewer and sequential in time; viewers run in parallel.
    let per_viewer: Vec<Result<Vec<(PresenceKey, bool)>, MetricsError>> = viewers
        .into_par_iter()
        .map(|viewer| {
            let mut ctx = ObservationContext::new(DEFAULT_CONTEXT_FRAMES, width, height);
            let mut out = Vec::new();
            for (s, acts) in &states {
                if !s.player(&viewer).is_some_and(|p| p.is_active()) {
                    continue;
                }
                let readout = viewpoint_readout(s, &viewer, &view)?;
                let action = acts.get(&viewer).copied().unwrap_or_default();
                let frame = backend.observe(&ctx, &readout, &action, width, height)?;
                for opp in s.active_players().filter(|p| p.id != viewer) {
                    let seen = frame_presence_detector(&frame, palette_color(&opp.id));
                    out.push(((s.tick(), viewer.clone(), opp.id.clone()), seen));
                }
                ctx.push(frame)?;
            }
            Ok(out)
        })
        .collect();
    let mut predicted = PresenceLabels::new();
    for r in per_viewer {
        predicted.extend(r?);
    }

    let score = presence_score(&predicted, &truth)?;
    let disagreements = predicted
        .iter()
        .filter(|(k, p)| truth[*k] != **p)
        .map(|((tick, viewer, opponent), p)| Disagreement {
            tick: *tick,
            viewer: viewer.clone(),
            opponent: opponent.clone(),
            predicted: *p,
            truth: !*p,
        })
        .collect();
    Ok(EvalReport {
        backend: backend.name().to_string(),
        ticks: states.len(),
        score,
        disagreements,
    })
}
