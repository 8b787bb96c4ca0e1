//! Learning-enhanced decomposition: every iteration, the previous cuts are
//! classified by a ladder of models from strictest to most permissive; the
//! first model that finds any effective cut decides what the master
//! receives, and an empty sweep falls back to appending everything.

use thiserror::Error;

use crate::benders::{
    run_decomposition, BendersConfig, BendersError, CutSelector, RunTrace, Selection,
    SelectionContext,
};
use crate::cutml::CpiKind;
use crate::forest::{ClassifierEnsemble, ForestError};
use crate::instance::Instance;
use crate::tol;

#[derive(Debug, Error)]
pub enum MlMbdError {
    #[error("variant {0:?} requires a {1} ensemble")]
    MissingEnsemble(MlVariant, &'static str),
    #[error("{cpi} ensemble expects {expected} features, driver produces {produced}")]
    FeatureWidth {
        cpi: &'static str,
        expected: usize,
        produced: usize,
    },
    #[error(transparent)]
    Benders(#[from] BendersError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlVariant {
    L,
    U,
    C,
}

impl MlVariant {
    pub fn method_tag(&self) -> &'static str {
        match self {
            MlVariant::L => "ml-mbd-l",
            MlVariant::U => "ml-mbd-u",
            MlVariant::C => "ml-mbd-c",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlMbdConfig {
    pub variant: MlVariant,
    pub eps_bd: f64,
    pub max_iterations: usize,
    /// Switch threshold on the trailing upper-bound movement (variant C).
    pub eps_ub: f64,
    /// Trailing window of the upper-bound movement average.
    pub window: usize,
    pub mip_gap: f64,
    pub parallel_sp: bool,
    pub lb_ensemble: Option<ClassifierEnsemble>,
    pub ub_ensemble: Option<ClassifierEnsemble>,
}

impl MlMbdConfig {
    pub fn new(variant: MlVariant) -> Self {
        MlMbdConfig {
            variant,
            eps_bd: 0.01,
            max_iterations: 1000,
            eps_ub: 0.002,
            window: 10,
            mip_gap: tol::MIP_GAP,
            parallel_sp: false,
            lb_ensemble: None,
            ub_ensemble: None,
        }
    }

    fn validate(&self) -> Result<(), MlMbdError> {
        let need_lb = matches!(self.variant, MlVariant::L | MlVariant::C);
        let need_ub = matches!(self.variant, MlVariant::U | MlVariant::C);
        if need_lb && self.lb_ensemble.is_none() {
            return Err(MlMbdError::MissingEnsemble(self.variant, "LB"));
        }
        if need_ub && self.ub_ensemble.is_none() {
            return Err(MlMbdError::MissingEnsemble(self.variant, "UB"));
        }
        for (ens, cpi) in [(&self.lb_ensemble, CpiKind::Lb), (&self.ub_ensemble, CpiKind::Ub)] {
            if let Some(ens) = ens {
                let produced = cpi.feature_names().len();
                for c in &ens.classifiers {
                    if c.n_features != produced {
                        return Err(MlMbdError::FeatureWidth {
                            cpi: cpi.as_str(),
                            expected: c.n_features,
                            produced,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Outcome of one cascade sweep over an iteration's cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeDecision {
    pub iteration: usize,
    /// 1-based index of the deciding classifier; None means fallback.
    pub classifier_index: Option<usize>,
    /// Label per cut under the deciding classifier (all true on fallback).
    pub labels: Vec<bool>,
    pub kept: usize,
    pub discarded: usize,
}

/// Sweep the ladder strictest-first; the first classifier that marks at
/// least one cut effective wins. An empty sweep keeps every cut.
pub fn cascade_select(
    ensemble: &ClassifierEnsemble,
    features: &[Vec<f64>],
    iteration: usize,
) -> Result<(Vec<usize>, CascadeDecision), ForestError> {
    for (pos, classifier) in ensemble.classifiers.iter().enumerate() {
        let mut labels = Vec::with_capacity(features.len());
        for f in features {
            labels.push(classifier.classify(f)?.0);
        }
        let keep: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(i, _)| i)
            .collect();
        if !keep.is_empty() {
            let decision = CascadeDecision {
                iteration,
                classifier_index: Some(pos + 1),
                kept: keep.len(),
                discarded: features.len() - keep.len(),
                labels,
            };
            return Ok((keep, decision));
        }
    }
    let keep: Vec<usize> = (0..features.len()).collect();
    let decision = CascadeDecision {
        iteration,
        classifier_index: None,
        labels: vec![true; features.len()],
        kept: features.len(),
        discarded: 0,
    };
    Ok((keep, decision))
}

/// Trailing mean of the per-iteration upper-bound movement; None before any
/// value exists.
pub fn delta_ub(cpm_ub_values: &[f64], window: usize) -> Option<f64> {
    if cpm_ub_values.is_empty() || window == 0 {
        return None;
    }
    let n = cpm_ub_values.len().min(window);
    let tail = &cpm_ub_values[cpm_ub_values.len() - n..];
    Some(tail.iter().sum::<f64>() / n as f64)
}

struct MlSelector {
    variant: MlVariant,
    cpi: CpiKind,
    eps_ub: f64,
    window: usize,
    lb_ensemble: Option<ClassifierEnsemble>,
    ub_ensemble: Option<ClassifierEnsemble>,
    pub decisions: Vec<CascadeDecision>,
    switch_iteration: Option<usize>,
    error: Option<ForestError>,
}

impl MlSelector {
    fn new(config: &MlMbdConfig) -> Self {
        let cpi = match config.variant {
            MlVariant::L => CpiKind::Lb,
            MlVariant::U | MlVariant::C => CpiKind::Ub,
        };
        MlSelector {
            variant: config.variant,
            cpi,
            eps_ub: config.eps_ub,
            window: config.window,
            lb_ensemble: config.lb_ensemble.clone(),
            ub_ensemble: config.ub_ensemble.clone(),
            decisions: Vec::new(),
            switch_iteration: None,
            error: None,
        }
    }

    fn active_ensemble(&self) -> &ClassifierEnsemble {
        match self.cpi {
            CpiKind::Lb => self.lb_ensemble.as_ref().expect("validated"),
            CpiKind::Ub => self.ub_ensemble.as_ref().expect("validated"),
        }
    }
}

impl CutSelector for MlSelector {
    fn wants_features(&self) -> bool {
        true
    }

    fn select(&mut self, ctx: &SelectionContext<'_>) -> Selection {
        let features = match self.cpi {
            CpiKind::Lb => ctx.lb_features,
            CpiKind::Ub => ctx.ub_features,
        };
        let cpi_str = self.cpi.as_str();
        let (keep, decision) = match cascade_select(self.active_ensemble(), features, ctx.iteration)
        {
            Ok(done) => done,
            Err(e) => {
                // Surface the error to the driver by keeping everything;
                // the run fails afterwards with the stored cause.
                self.error = Some(e);
                ((0..ctx.cuts.len()).collect(), CascadeDecision {
                    iteration: ctx.iteration,
                    classifier_index: None,
                    labels: vec![true; ctx.cuts.len()],
                    kept: ctx.cuts.len(),
                    discarded: 0,
                })
            }
        };
        let cascade_index = match decision.classifier_index {
            Some(i) => i as i32,
            None => -1,
        };
        self.decisions.push(decision);

        let delta = delta_ub(ctx.cpm_ub_history, self.window);
        // Variant C: one-way indicator switch once the trailing upper-bound
        // movement settles. Checked after classification, so it takes effect
        // from the next iteration.
        if self.variant == MlVariant::C && self.cpi == CpiKind::Ub {
            if let Some(d) = delta {
                if d.abs() < self.eps_ub {
                    self.cpi = CpiKind::Lb;
                    self.switch_iteration = Some(ctx.iteration);
                }
            }
        }

        Selection {
            keep,
            cascade_index: Some(cascade_index),
            cpi_active: Some(cpi_str),
            delta_ub: delta,
        }
    }
}

/// Learning-enhanced decomposition run. Identical to the plain driver
/// except that the append step passes through the cascade.
pub fn mlmbd_solve(instance: &Instance, config: &MlMbdConfig) -> Result<RunTrace, MlMbdError> {
    Ok(mlmbd_solve_detailed(instance, config)?.0)
}

/// Like [`mlmbd_solve`], additionally returning the final master with its
/// cut pool.
pub fn mlmbd_solve_detailed(
    instance: &Instance,
    config: &MlMbdConfig,
) -> Result<(RunTrace, crate::master::MasterProblem), MlMbdError> {
    config.validate()?;
    let bconfig = BendersConfig {
        eps_bd: config.eps_bd,
        max_iterations: config.max_iterations,
        mip_gap: config.mip_gap,
        parallel_sp: config.parallel_sp,
    };
    let mut selector = MlSelector::new(config);
    let (trace, master) =
        run_decomposition(instance, &bconfig, &mut selector, config.variant.method_tag())?;
    if let Some(e) = selector.error {
        return Err(MlMbdError::Forest(e));
    }
    Ok((trace, master))
}

/// Ensemble whose classifiers all emit a constant score; handy for
/// equivalence checks (always-accept and always-reject filters).
pub fn constant_ensemble(cpi: CpiKind, n: usize, p1: f64) -> ClassifierEnsemble {
    use crate::cutml::ThresholdLadder;
    use crate::forest::{BinaryClassifier, ForestParams, Tree, TreeNode};
    let width = cpi.feature_names().len();
    let classifiers = (0..n)
        .map(|_| BinaryClassifier {
            trees: vec![Tree {
                nodes: vec![TreeNode::Leaf { p1 }],
            }],
            params: ForestParams::default(),
            seed: 0,
            n_features: width,
        })
        .collect();
    ClassifierEnsemble {
        cpi,
        ladder: ThresholdLadder {
            cpi,
            thresholds: (1..=n).map(|i| 1.0 / i as f64).collect(),
        },
        feature_names: cpi.feature_names().iter().map(|s| s.to_string()).collect(),
        classifiers,
        metrics: vec![(1.0, 1.0); n],
    }
}
