//! Offline pipeline: sample with the modified decomposition, label against
//! the threshold ladders, under-sample, and train the classifier ladders
//! behind the quality gate, resuming the sampler when the gate fails.

use std::fmt::Write as _;

use bendml_core::cutml::{
    derive_thresholds, label_datasets, sample_modified_mbd, CpiKind, LabeledDataset,
    SamplerConfig, SamplerState, SamplingMetadata,
};
use bendml_core::forest::{
    save_ensemble, train_ensemble, undersample, ClassifierEnsemble, ForestParams, TrainOutcome,
};

use crate::{exit_code, log_info, read_instance, CliError, CommonSolveArgs};

pub struct TrainArgs {
    pub common: CommonSolveArgs,
    pub n_s: usize,
    pub n_zeta: usize,
    pub gate_roc: f64,
    pub gate_pr: f64,
    pub max_resample: usize,
    pub seed: u64,
    pub params: ForestParams,
}

fn prepare_datasets(
    state: &SamplerState,
    cpi: CpiKind,
    n_zeta: usize,
    seed: u64,
) -> Result<Option<(bendml_core::cutml::ThresholdLadder, Vec<LabeledDataset>)>, CliError> {
    let cpms: Vec<f64> = state.samples.iter().filter_map(|s| s.cpm(cpi)).collect();
    let ladder = match derive_thresholds(&cpms, cpi, n_zeta) {
        Ok(ladder) => ladder,
        Err(_) => return Ok(None), // not enough spread yet
    };
    let labeled = label_datasets(&state.samples, &ladder);
    let mut balanced = Vec::with_capacity(labeled.len());
    for (i, ds) in labeled.iter().enumerate() {
        match undersample(ds, seed.wrapping_add(i as u64)) {
            Ok(b) => balanced.push(b),
            Err(_) => return Ok(None), // single-class threshold
        }
    }
    Ok(Some((ladder, balanced)))
}

pub fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let instance = read_instance(&args.common.instance)?;
    std::fs::create_dir_all(&args.common.out)?;
    let sampler_config = SamplerConfig {
        eps_bd: args.common.eps_bd,
        parallel_sp: args.common.parallel_sp,
        ..SamplerConfig::default()
    };
    let produced = format!(
        "bendml train --instance {} --n-s {} --n-zeta {} --gate-roc {} --gate-pr {} --seed {} --eps-bd {}",
        args.common.instance.display(),
        args.n_s,
        args.n_zeta,
        args.gate_roc,
        args.gate_pr,
        args.seed,
        args.common.eps_bd,
    );

    let mut state: Option<SamplerState> = None;
    let mut outcome: Option<(ClassifierEnsemble, ClassifierEnsemble)> = None;
    let mut last_reason = String::from("no usable metrics sampled");
    for round in 1..=args.max_resample {
        let st = sample_modified_mbd(&instance, args.n_s, state.take(), &sampler_config)
            .map_err(|e| CliError::new(exit_code::SOLVER, e.to_string()))?;
        log_info(&format!(
            "sampling round {round}: {} iterations total, {} samples ({} LB metrics, {} UB metrics)",
            st.iterations_run,
            st.samples.len(),
            st.finalized_lb_cpms().len(),
            st.finalized_ub_cpms().len()
        ));

        let lb_ready = prepare_datasets(&st, CpiKind::Lb, args.n_zeta, args.seed)?;
        let ub_ready = prepare_datasets(&st, CpiKind::Ub, args.n_zeta, args.seed)?;
        if let (Some((lb_ladder, lb_sets)), Some((ub_ladder, ub_sets))) = (lb_ready, ub_ready) {
            let lb_out = train_ensemble(
                &lb_sets,
                &lb_ladder,
                args.gate_roc,
                args.gate_pr,
                &args.params,
                args.seed,
            )
            .map_err(|e| CliError::new(exit_code::SOLVER, e.to_string()))?;
            let ub_out = train_ensemble(
                &ub_sets,
                &ub_ladder,
                args.gate_roc,
                args.gate_pr,
                &args.params,
                args.seed,
            )
            .map_err(|e| CliError::new(exit_code::SOLVER, e.to_string()))?;
            match (lb_out, ub_out) {
                (TrainOutcome::Passed(lb), TrainOutcome::Passed(ub)) => {
                    write_artifacts(&args, &instance, &st, &lb, &ub, &produced)?;
                    outcome = Some((lb, ub));
                    break;
                }
                (lb_out, ub_out) => {
                    for (tag, out) in [("LB", &lb_out), ("UB", &ub_out)] {
                        if let TrainOutcome::GateFailed { reason, .. } = out {
                            last_reason = format!("{tag}: {reason}");
                            log_info(&format!("gate failed ({tag}): {reason}"));
                        }
                    }
                }
            }
        } else {
            last_reason = "metrics degenerate or single-class at some threshold".into();
            log_info(&last_reason);
        }

        if st.converged {
            last_reason = format!("{last_reason}; sampler converged, nothing more to sample");
            break;
        }
        state = Some(st);
    }

    if outcome.is_none() {
        return Err(CliError::new(
            exit_code::TRAINING_GATE,
            format!("gate failed, resume sampling: {last_reason}"),
        ));
    }
    log_info("training gate passed; models written");
    Ok(())
}

fn write_artifacts(
    args: &TrainArgs,
    instance: &bendml_core::Instance,
    state: &SamplerState,
    lb: &ClassifierEnsemble,
    ub: &ClassifierEnsemble,
    produced: &str,
) -> Result<(), CliError> {
    let out = &args.common.out;
    // Labeled datasets as sampled (before balancing), one per threshold.
    for cpi in [CpiKind::Lb, CpiKind::Ub] {
        let ladder = match cpi {
            CpiKind::Lb => &lb.ladder,
            CpiKind::Ub => &ub.ladder,
        };
        for ds in label_datasets(&state.samples, ladder) {
            let name = format!(
                "theta_{}_{}.csv",
                ds.cpi.as_str().to_ascii_lowercase(),
                ds.threshold_index
            );
            let file = std::fs::File::create(out.join(&name))?;
            ds.write_csv(file)?;
        }
    }
    let meta = SamplingMetadata {
        schema: 1,
        instance: instance.name.clone(),
        iterations_sampled: state.iterations_run,
        converged: state.converged,
        lb_thresholds: lb.ladder.thresholds.clone(),
        ub_thresholds: ub.ladder.thresholds.clone(),
        produced_by: produced.to_string(),
    };
    std::fs::write(
        out.join("sampling_meta.json"),
        serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;

    save_ensemble(lb, produced, out.join("model_lb.json"))
        .map_err(|e| CliError::new(exit_code::IO, e.to_string()))?;
    save_ensemble(ub, produced, out.join("model_ub.json"))
        .map_err(|e| CliError::new(exit_code::IO, e.to_string()))?;

    let mut report = String::from("cpi,threshold_index,threshold,held_out_roc,held_out_pr\n");
    for ens in [lb, ub] {
        for (i, &(roc, pr)) in ens.metrics.iter().enumerate() {
            let _ = writeln!(
                report,
                "{},{},{},{roc},{pr}",
                ens.cpi.as_str(),
                i + 1,
                ens.ladder.thresholds[i]
            );
        }
    }
    std::fs::write(out.join("training_report.csv"), report)?;
    Ok(())
}
