use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::AlignCoeff;
use crate::error::{Error, Result};
use crate::stats::{median, percentile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileScope {
    Global,
    PerSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisionConfig {
    pub anchors: usize,
    /// Percentile of the per-frame deviations above which frames are flagged.
    pub percentile: f64,
    /// Deviations at or below this never flag a frame.
    pub min_deviation: f64,
    pub scope: PercentileScope,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig {
            anchors: 9,
            percentile: 90.0,
            min_deviation: 0.05,
            scope: PercentileScope::Global,
        }
    }
}

/// Transformed anchor values and their spread across frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorStats {
    /// Anchor depths in meters, strictly increasing.
    pub anchors: Vec<f64>,
    /// Aligned disparity of every anchor per frame.
    pub values: Vec<Vec<f64>>,
    /// Per-anchor median across frames.
    pub medians: Vec<f64>,
    /// Largest relative deviation from the medians per frame.
    pub max_deviation: Vec<f64>,
}

/// Evaluates every frame's transform at `q` depth anchors spread uniformly over `depth_range`.
pub fn anchor_stats(coeffs: &[AlignCoeff], depth_range: (f64, f64), q: usize) -> Result<AnchorStats> {
    let (lo, hi) = depth_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!(
            "depth range must satisfy 0 < min < max, got ({lo}, {hi})"
        )));
    }
    if q < 2 {
        return Err(Error::invalid("at least two anchors are required"));
    }
    let anchors: Vec<f64> = (0..q).map(|k| lo + (hi - lo) * k as f64 / (q - 1) as f64).collect();
    let values: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| anchors.iter().map(|a| c.disparity(1.0 / a)).collect())
        .collect();
    // frames without a fit do not shape the reference
    let usable: Vec<&Vec<f64>> = match values.iter().zip(coeffs).filter(|(_, c)| !c.fit_failed).count() {
        0 => values.iter().collect(),
        _ => values
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| !c.fit_failed)
            .map(|(v, _)| v)
            .collect(),
    };
    let medians: Vec<f64> = (0..q)
        .map(|k| median(&usable.iter().map(|v| v[k]).collect::<Vec<_>>()).unwrap_or(0.0))
        .collect();
    let max_deviation = values
        .iter()
        .map(|v| {
            v.iter()
                .zip(&medians)
                .map(|(x, m)| (x - m).abs() / m.abs().max(1e-12))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(AnchorStats {
        anchors,
        values,
        medians,
        max_deviation,
    })
}

/// Flags frames whose anchor deviation exceeds the configured percentile, together with frames
/// whose fit failed, replaces their
/// coefficients with those of the nearest unflagged frame of the same sequence and marks
/// sequences in which every frame is flagged as discarded.
///
/// `sequences[i]` is the sequence of `coeffs[i]`; the frame distance is `|frame_i - frame_j|`
/// with ties going to the earlier frame.
pub fn detect_and_revise_outliers(
    coeffs: &[AlignCoeff],
    depth_range: (f64, f64),
    sequences: &[usize],
    cfg: &RevisionConfig,
) -> Result<(Vec<AlignCoeff>, AnchorStats)> {
    if coeffs.len() < 2 {
        return Err(Error::invalid(format!(
            "outlier revision needs at least 2 frames, got {}",
            coeffs.len()
        )));
    }
    if sequences.len() != coeffs.len() {
        return Err(Error::dims(coeffs.len(), sequences.len()));
    }
    let stats = anchor_stats(coeffs, depth_range, cfg.anchors)?;
    let dev = &stats.max_deviation;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in sequences.iter().enumerate() {
        groups.entry(*s).or_default().push(i);
    }
    let fitted_devs = |members: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        members.filter(|&i| !coeffs[i].fit_failed).map(|i| dev[i]).collect()
    };
    let mut threshold = vec![f64::INFINITY; coeffs.len()];
    match cfg.scope {
        PercentileScope::Global => {
            if let Some(t) = percentile(&fitted_devs(&mut (0..coeffs.len())), cfg.percentile) {
                threshold.iter_mut().for_each(|x| *x = t);
            }
        }
        PercentileScope::PerSequence => {
            for members in groups.values() {
                if let Some(t) = percentile(&fitted_devs(&mut members.iter().copied()), cfg.percentile) {
                    for &i in members {
                        threshold[i] = t;
                    }
                }
            }
        }
    }
    let flagged: Vec<bool> = (0..coeffs.len())
        .map(|i| coeffs[i].fit_failed || (dev[i] > threshold[i] && dev[i] > cfg.min_deviation))
        .collect();
    let mut out: Vec<AlignCoeff> = coeffs.to_vec();
    for (i, c) in out.iter_mut().enumerate() {
        c.sequence = sequences[i];
        c.flagged = flagged[i];
    }
    for members in groups.values() {
        let all_flagged = members.iter().all(|&i| flagged[i]);
        for &i in members {
            if all_flagged {
                out[i].discarded_sequence = true;
                continue;
            }
            if !flagged[i] {
                continue;
            }
            let fi = coeffs[i].frame as i64;
            let src = members
                .iter()
                .copied()
                .filter(|&j| !flagged[j])
                .min_by_key(|&j| ((coeffs[j].frame as i64 - fi).abs(), coeffs[j].frame))
                .expect("sequence has an unflagged frame");
            out[i].gamma = coeffs[src].gamma;
            out[i].beta = coeffs[src].beta;
            out[i].revised_from = Some(coeffs[src].frame);
        }
    }
    Ok((out, stats))
}
