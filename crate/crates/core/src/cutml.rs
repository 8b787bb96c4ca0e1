//! Cut-performance data pipeline: sampling with a modified decomposition
//! loop that prices each cut individually, the relative bound-improvement
//! metrics, threshold ladders of decreasing strictness, and labeled
//! datasets for classifier training.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benders::{
    extract_features, relative_gap, solve_all_subproblems, upper_bound, PrevIteration,
    LB_FEATURE_NAMES, UB_FEATURE_NAMES,
};
use crate::instance::Instance;
use crate::master::{build_master, MasterProblem};
use crate::subproblem::{build_operation_lp, CutData, OperationLp};

#[derive(Debug, Error)]
pub enum CutmlError {
    #[error("cut performance metric undefined: {0} must be positive")]
    NonPositiveDenominator(f64),
    #[error("degenerate cut performance metrics ({0}); sample more iterations")]
    Degenerate(String),
    #[error(transparent)]
    Benders(#[from] crate::benders::BendersError),
    #[error(transparent)]
    Master(#[from] crate::master::MasterError),
    #[error(transparent)]
    Subproblem(#[from] crate::subproblem::SubproblemError),
}

/// Which bound defines a cut's usefulness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpiKind {
    Lb,
    Ub,
}

impl CpiKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CpiKind::Lb => "LB",
            CpiKind::Ub => "UB",
        }
    }

    pub fn feature_names(&self) -> &'static [&'static str] {
        match self {
            CpiKind::Lb => &LB_FEATURE_NAMES,
            CpiKind::Ub => &UB_FEATURE_NAMES,
        }
    }
}

impl std::fmt::Display for CpiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feature vector of one cut for one indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cpi: CpiKind,
    pub values: Vec<f64>,
}

/// Relative lower-bound improvement attributed to one cut.
pub fn cpm_lb(lb_before: f64, lb_after: f64) -> Result<f64, CutmlError> {
    if lb_after <= 0.0 {
        return Err(CutmlError::NonPositiveDenominator(lb_after));
    }
    Ok((lb_after - lb_before) / lb_after)
}

/// Relative upper-bound change over one iteration; negative is improvement.
pub fn cpm_ub(ub_before: f64, ub_after: f64) -> Result<f64, CutmlError> {
    if ub_after <= 0.0 {
        return Err(CutmlError::NonPositiveDenominator(ub_after));
    }
    Ok((ub_after - ub_before) / ub_after)
}

/// One sampled cut: identity, both performance metrics once known, and the
/// feature vectors extracted at generation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpmSample {
    pub node: usize,
    pub block: usize,
    pub iteration: usize,
    pub cpm_lb: Option<f64>,
    pub cpm_ub: Option<f64>,
    pub lb_features: Vec<f64>,
    pub ub_features: Vec<f64>,
    /// Master objective of the single-cut re-solve, kept for verification.
    pub single_cut_objective: Option<f64>,
    /// Proven master bound the re-solve was measured against.
    pub lb_before: Option<f64>,
}

impl CpmSample {
    pub fn features(&self, cpi: CpiKind) -> &[f64] {
        match cpi {
            CpiKind::Lb => &self.lb_features,
            CpiKind::Ub => &self.ub_features,
        }
    }

    pub fn cpm(&self, cpi: CpiKind) -> Option<f64> {
        match cpi {
            CpiKind::Lb => self.cpm_lb,
            CpiKind::Ub => self.cpm_ub,
        }
    }
}

/// Labeling thresholds ordered from strictest to most permissive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLadder {
    pub cpi: CpiKind,
    pub thresholds: Vec<f64>,
}

/// Uniform threshold ladder over the observed metrics.
///
/// Lower-bound indicator: strictly inside the open interval between the
/// extremes, decreasing. Upper-bound indicator: from the most negative
/// observation up to and including zero, increasing; the strictest
/// threshold comes first in both cases.
pub fn derive_thresholds(
    cpms: &[f64],
    cpi: CpiKind,
    n_zeta: usize,
) -> Result<ThresholdLadder, CutmlError> {
    if n_zeta < 2 {
        return Err(CutmlError::Degenerate(format!(
            "need at least 2 thresholds, got {n_zeta}"
        )));
    }
    let min = cpms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = cpms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() || (max - min).abs() < 1e-15 {
        return Err(CutmlError::Degenerate(format!(
            "observed metrics span [{min}, {max}]"
        )));
    }
    let thresholds = match cpi {
        CpiKind::Lb => {
            let n = n_zeta as f64;
            (1..=n_zeta)
                .map(|i| min + (n + 1.0 - i as f64) * (max - min) / (n + 1.0))
                .collect()
        }
        CpiKind::Ub => {
            if min >= 0.0 {
                return Err(CutmlError::Degenerate(format!(
                    "no upper-bound improvement observed (min metric {min} >= 0)"
                )));
            }
            (0..n_zeta)
                .map(|i| min + i as f64 * (0.0 - min) / (n_zeta as f64 - 1.0))
                .collect()
        }
    };
    Ok(ThresholdLadder { cpi, thresholds })
}

impl ThresholdLadder {
    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    /// Label of a metric against threshold index `i` (0-based, strictest
    /// first): effective cuts improve at least as much as the threshold.
    pub fn label(&self, cpm: f64, i: usize) -> bool {
        match self.cpi {
            CpiKind::Lb => cpm >= self.thresholds[i],
            CpiKind::Ub => cpm <= self.thresholds[i],
        }
    }
}

/// Feature rows with binary labels for one (indicator, threshold) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub cpi: CpiKind,
    /// 1-based threshold position in the ladder.
    pub threshold_index: usize,
    pub threshold: f64,
    pub rows: Vec<(Vec<f64>, bool)>,
}

impl LabeledDataset {
    pub fn n_positive(&self) -> usize {
        self.rows.iter().filter(|(_, l)| *l).count()
    }

    pub fn n_negative(&self) -> usize {
        self.rows.len() - self.n_positive()
    }

    /// CSV with feature names and a trailing binary label column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names = self.cpi.feature_names();
        writeln!(w, "{},label", names.join(","))?;
        for (features, label) in &self.rows {
            let vals: Vec<String> = features.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", vals.join(","), u8::from(*label))?;
        }
        Ok(())
    }
}

/// One dataset per ladder threshold; only cuts with a known metric for the
/// ladder's indicator become rows.
pub fn label_datasets(samples: &[CpmSample], ladder: &ThresholdLadder) -> Vec<LabeledDataset> {
    (0..ladder.n())
        .map(|i| {
            let rows = samples
                .iter()
                .filter_map(|s| {
                    s.cpm(ladder.cpi)
                        .map(|cpm| (s.features(ladder.cpi).to_vec(), ladder.label(cpm, i)))
                })
                .collect();
            LabeledDataset {
                cpi: ladder.cpi,
                threshold_index: i + 1,
                threshold: ladder.thresholds[i],
                rows,
            }
        })
        .collect()
}

/// Sidecar metadata written next to exported datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingMetadata {
    pub schema: u32,
    pub instance: String,
    pub iterations_sampled: usize,
    pub converged: bool,
    pub lb_thresholds: Vec<f64>,
    pub ub_thresholds: Vec<f64>,
    pub produced_by: String,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub eps_bd: f64,
    pub mip_gap: f64,
    pub parallel_sp: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            eps_bd: 0.01,
            mip_gap: crate::tol::MIP_GAP,
            parallel_sp: false,
        }
    }
}

/// Resumable state of the modified decomposition sampler.
pub struct SamplerState {
    master: MasterProblem,
    ops: Vec<OperationLp>,
    pub samples: Vec<CpmSample>,
    /// Every cut generated so far, aligned with `samples`.
    pub cut_history: Vec<CutData>,
    /// Indices into `samples` of the most recent iteration's cuts.
    pending: Vec<usize>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Master solves performed per iteration (single-cut re-solves plus one).
    pub mp_solves_per_iteration: Vec<usize>,
    /// Full-master objective per iteration.
    pub master_objectives: Vec<f64>,
    prev_master_bound: f64,
    prev_ub: Option<f64>,
    best_ub: f64,
    prev: Option<PrevIteration>,
}

impl SamplerState {
    /// Samples that already carry a lower-bound metric.
    pub fn finalized_lb_cpms(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.cpm_lb).collect()
    }

    pub fn finalized_ub_cpms(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.cpm_ub).collect()
    }
}

/// Run the modified decomposition for `n_s` further iterations, pricing
/// every fresh cut with a single-cut master re-solve before appending all
/// of them. Returns early when the underlying decomposition converges.
pub fn sample_modified_mbd(
    instance: &Instance,
    n_s: usize,
    state: Option<SamplerState>,
    config: &SamplerConfig,
) -> Result<SamplerState, CutmlError> {
    let mut st = match state {
        Some(st) => st,
        None => {
            let mut master = build_master(instance);
            master.mip_gap = config.mip_gap;
            let layout = master.layout.clone();
            let ops = layout
                .pairs
                .iter()
                .map(|&(m, b)| build_operation_lp(instance, &layout, m, b))
                .collect();
            SamplerState {
                master,
                ops,
                samples: Vec::new(),
                cut_history: Vec::new(),
                pending: Vec::new(),
                iterations_run: 0,
                converged: false,
                mp_solves_per_iteration: Vec::new(),
                master_objectives: Vec::new(),
                prev_master_bound: 0.0,
                prev_ub: None,
                best_ub: f64::INFINITY,
                prev: None,
            }
        }
    };
    if st.converged {
        return Ok(st);
    }

    let layout = st.master.layout.clone();
    let target = st.iterations_run + n_s;
    while st.iterations_run < target {
        let k = st.iterations_run + 1;
        let mut mp_solves = 0usize;

        // Price each pending cut alone on top of the pool through k-2.
        if !st.pending.is_empty() {
            for &idx in &st.pending {
                let cut = st.cut_history[idx].clone();
                let sol = st.master.solve_with_extra_cut(&cut)?;
                mp_solves += 1;
                st.samples[idx].single_cut_objective = Some(sol.objective);
                st.samples[idx].lb_before = Some(st.prev_master_bound);
                // Measured against the proven bound of the previous master,
                // the single-cut incumbent can never be lower.
                if sol.objective > 0.0 {
                    st.samples[idx].cpm_lb =
                        Some(cpm_lb(st.prev_master_bound, sol.objective)?);
                }
            }
            let pending_cuts: Vec<CutData> =
                st.pending.iter().map(|&i| st.cut_history[i].clone()).collect();
            st.master.append_cuts(&pending_cuts);
        }

        let master_sol = st.master.solve()?;
        mp_solves += 1;
        st.master_objectives.push(master_sol.objective);

        let cuts = solve_all_subproblems(&st.ops, &master_sol.investments, k, config.parallel_sp)?;
        let sp_objs: Vec<((usize, usize), f64)> = layout
            .pairs
            .iter()
            .cloned()
            .zip(cuts.iter().map(|c| c.sp_objective))
            .collect();
        let ub = upper_bound(instance, &layout, &master_sol.investments, &sp_objs);
        if ub < st.best_ub {
            st.best_ub = ub;
        }

        // The upper-bound metric of iteration k-1's cuts is the aggregate
        // change over this iteration, shared by all of them.
        if let Some(prev_ub) = st.prev_ub {
            if prev_ub.is_finite() && ub > 0.0 {
                let cpm = cpm_ub(prev_ub, ub)?;
                for &idx in &st.pending {
                    st.samples[idx].cpm_ub = Some(cpm);
                }
            }
        }

        // Record fresh cuts with features extracted at generation time.
        let mut new_pending = Vec::with_capacity(cuts.len());
        for (pos, cut) in cuts.iter().enumerate() {
            let (lbf, ubf) = extract_features(
                &layout,
                k,
                cut,
                &st.ops[pos],
                &master_sol.investments,
                master_sol.alphas[pos],
                st.prev.as_ref(),
            );
            st.samples.push(CpmSample {
                node: cut.node,
                block: cut.block,
                iteration: k,
                cpm_lb: None,
                cpm_ub: None,
                lb_features: lbf,
                ub_features: ubf,
                single_cut_objective: None,
                lb_before: None,
            });
            st.cut_history.push(cut.clone());
            new_pending.push(st.samples.len() - 1);
        }

        st.prev = Some(PrevIteration {
            x: master_sol.investments.clone(),
            cuts,
        });
        st.pending = new_pending;
        st.prev_master_bound = master_sol.bound;
        st.prev_ub = Some(ub);
        st.mp_solves_per_iteration.push(mp_solves);
        st.iterations_run = k;

        if relative_gap(st.best_ub, master_sol.bound) <= config.eps_bd {
            st.converged = true;
            break;
        }
    }
    Ok(st)
}

/// Convenience wrapper used by tests: the lower-bound trajectory of the
/// sampler must match the plain driver exactly.
pub fn sampler_master_objectives(
    instance: &Instance,
    n_s: usize,
    config: &SamplerConfig,
) -> Result<Vec<f64>, CutmlError> {
    let st = sample_modified_mbd(instance, n_s, None, config)?;
    Ok(st.master_objectives)
}
