//! Experiment orchestration for the superheat-control testbed.
//!
//! The pipeline turns one [`config::ExperimentConfig`] into a tree of
//! artifacts under a run directory:
//!
//! ```text
//! run/
//!   collect/    dataset.csv                   closed-loop PI data
//!   surrogate/  surrogate.ckpt, report.csv,   trained dynamics model and
//!               freerun_<seed>.csv            paired free-run diagnostics
//!   pretrain/   policy.ckpt, policy_seed*.ckpt, curve_seed*.csv
//!   finetune/   policy.ckpt, policy_seed*.ckpt, curve_seed*.csv
//!   scratch/    curve_seed*.csv, transfer_metrics.csv
//!   evaluate/   drl_scenario*.csv, pi_scenario*.csv, summary.csv
//!   sweep/      curve_sigma*_seed*.csv, results.csv
//!   simulate/   trace.csv
//! ```
//!
//! Stages only read artifacts from earlier stages and only write inside
//! their own subdirectory. Every output file carries the config hash and
//! the seed that produced it, and reruns with the same config are
//! byte-identical.

pub mod collect;
pub mod config;
pub mod curves;
pub mod error;
pub mod evaluate;
pub mod pretrain;
pub mod provenance;
pub mod simulate;
pub mod surrogate;
pub mod sweep;
pub mod transfer;

pub use collect::{run_collect, CollectSummary};
pub use config::ExperimentConfig;
pub use error::{PipelineError, Result};
pub use evaluate::{run_evaluate, EvaluateSummary};
pub use pretrain::{run_pretrain, PretrainSummary};
pub use provenance::{read_table, write_table, Table};
pub use simulate::{run_simulate, SimulateSummary};
pub use surrogate::{run_surrogate, SurrogateSummary};
pub use sweep::{run_sweep, SweepSummary};
pub use transfer::{run_finetune, run_scratch, TransferSummary};

use std::path::{Path, PathBuf};

/// Canonical layout of a run directory. Stages never invent paths; they ask
/// this type so producers and consumers cannot drift apart.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("collect").join("dataset.csv")
    }

    pub fn surrogate_ckpt(&self) -> PathBuf {
        self.root.join("surrogate").join("surrogate.ckpt")
    }

    pub fn surrogate_report(&self) -> PathBuf {
        self.root.join("surrogate").join("report.csv")
    }

    pub fn freerun(&self, seed: u64) -> PathBuf {
        self.root.join("surrogate").join(format!("freerun_{seed}.csv"))
    }

    /// The canonical pre-trained policy later stages start from.
    pub fn pretrain_policy(&self) -> PathBuf {
        self.root.join("pretrain").join("policy.ckpt")
    }

    pub fn pretrain_ckpt(&self, seed: u64) -> PathBuf {
        self.root.join("pretrain").join(format!("policy_seed{seed}.ckpt"))
    }

    pub fn pretrain_curve(&self, seed: u64) -> PathBuf {
        self.root.join("pretrain").join(format!("curve_seed{seed}.csv"))
    }

    /// The canonical fine-tuned policy evaluation runs against.
    pub fn finetune_policy(&self) -> PathBuf {
        self.root.join("finetune").join("policy.ckpt")
    }

    pub fn finetune_ckpt(&self, seed: u64) -> PathBuf {
        self.root.join("finetune").join(format!("policy_seed{seed}.ckpt"))
    }

    pub fn finetune_curve(&self, seed: u64) -> PathBuf {
        self.root.join("finetune").join(format!("curve_seed{seed}.csv"))
    }

    pub fn scratch_curve(&self, seed: u64) -> PathBuf {
        self.root.join("scratch").join(format!("curve_seed{seed}.csv"))
    }

    pub fn transfer_metrics(&self) -> PathBuf {
        self.root.join("scratch").join("transfer_metrics.csv")
    }

    pub fn eval_trace(&self, controller: &str, scenario: usize) -> PathBuf {
        self.root.join("evaluate").join(format!("{controller}_scenario{scenario}.csv"))
    }

    pub fn eval_summary(&self) -> PathBuf {
        self.root.join("evaluate").join("summary.csv")
    }

    pub fn sweep_curve(&self, sigma: f64, seed: u64) -> PathBuf {
        self.root.join("sweep").join(format!("curve_sigma{sigma}_seed{seed}.csv"))
    }

    pub fn sweep_results(&self) -> PathBuf {
        self.root.join("sweep").join("results.csv")
    }

    pub fn simulate_trace(&self) -> PathBuf {
        self.root.join("simulate").join("trace.csv")
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }
}

/// Guard for stage inputs: turns a missing artifact into an actionable
/// error naming the stage that produces it.
pub(crate) fn require_input(stage: &'static str, path: &Path, hint: &'static str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput { stage, path: path.to_path_buf(), hint })
    }
}
