use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::Result;
use crate::tasks::{evaluate_qml, evaluate_vqe, QmlConfig, QmlTask, TfimProblem, VqeConfig};

/// Full evaluation of one circuit on a task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Final metric of every restart (energies for VQE, accuracy for QML).
    pub restart_metrics: Vec<f64>,
    pub best: f64,
    pub std: f64,
    /// Training label derived from `best` (error ratio or accuracy).
    pub label: f64,
}

/// Scores circuits on a task. Implementations must be deterministic in `(circuit, seed)`.
pub trait Evaluator: Sync {
    /// Short task identifier stored in every record.
    fn task_id(&self) -> String;

    fn qubits(&self) -> usize;

    /// Whether smaller labels are better (error ratio) or larger (accuracy).
    fn lower_is_better(&self) -> bool;

    fn label_of(&self, best: f64) -> f64;

    fn evaluate(&self, circuit: &Circuit, seed: u64) -> Result<Evaluation>;
}

/// Multi-restart VQE on the Ising ring; label is the error ratio.
pub struct TfimEvaluator {
    pub problem: TfimProblem,
    pub config: VqeConfig,
}

impl TfimEvaluator {
    pub fn new(n: usize, config: VqeConfig) -> Result<Self> {
        Ok(TfimEvaluator {
            problem: TfimProblem::new(n)?,
            config,
        })
    }
}

impl Evaluator for TfimEvaluator {
    fn task_id(&self) -> String {
        format!("tfim-{}", self.problem.n)
    }

    fn qubits(&self) -> usize {
        self.problem.n
    }

    fn lower_is_better(&self) -> bool {
        true
    }

    fn label_of(&self, best: f64) -> f64 {
        self.problem.error_ratio(best)
    }

    fn evaluate(&self, circuit: &Circuit, seed: u64) -> Result<Evaluation> {
        let r = evaluate_vqe(circuit, &self.problem, &self.config, seed)?;
        Ok(Evaluation {
            restart_metrics: r.energies,
            best: r.best,
            std: r.std,
            label: r.eps,
        })
    }
}

/// Single training run of the hybrid classifier; label is validation accuracy.
pub struct QmlEvaluator {
    pub task: QmlTask,
    pub config: QmlConfig,
}

impl Evaluator for QmlEvaluator {
    fn task_id(&self) -> String {
        format!("qml-{}", self.task.n)
    }

    fn qubits(&self) -> usize {
        self.task.n
    }

    fn lower_is_better(&self) -> bool {
        false
    }

    fn label_of(&self, best: f64) -> f64 {
        best
    }

    fn evaluate(&self, circuit: &Circuit, seed: u64) -> Result<Evaluation> {
        let r = evaluate_qml(circuit, &self.task, &self.config, seed)?;
        Ok(Evaluation {
            restart_metrics: vec![r.accuracy],
            best: r.accuracy,
            std: 0.0,
            label: r.accuracy,
        })
    }
}
