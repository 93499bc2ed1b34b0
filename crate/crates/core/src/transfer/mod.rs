//! Moving a layerwise ansatz to a larger ring: fill every half-layer in, then prune
//! half-layers by beam search, each candidate inheriting its parent's angles.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Coverage, GateSet, LayerEntry, LayeredSpec, Provenance};
use crate::error::{Error, Result};
use crate::tasks::{descend, evaluate_vqe, TfimProblem, VqeConfig};

/// Promotes every half-layer to a full layer on `n_target` qubits.
pub fn fill_in(spec: &LayeredSpec, n_target: usize) -> Result<LayeredSpec> {
    if n_target % 2 == 1 || n_target < spec.n {
        return Err(Error::InvalidArgument(format!(
            "fill-in target must be even and at least {}, got {n_target}",
            spec.n
        )));
    }
    let layers = spec
        .layers
        .iter()
        .map(|l| LayerEntry::new(l.kind, Coverage::All))
        .collect();
    Ok(LayeredSpec::new(n_target, layers))
}

/// Fill-in of a circuit that must come from the layerwise pipeline.
pub fn fill_in_circuit(circuit: &Circuit, n_target: usize) -> Result<LayeredSpec> {
    match (&circuit.layered, circuit.provenance) {
        (Some(spec), Provenance::Layerwise | Provenance::Manual) => fill_in(spec, n_target),
        _ => Err(Error::InvalidArgument(
            "fill-in needs a circuit from the layerwise pipeline".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Drop a half layer entirely.
    Remove,
    /// Drop the odd half of a full layer.
    KeepEven,
    /// Drop the even half of a full layer.
    KeepOdd,
}

/// One half-layer reduction; `layer` indexes the current spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reduction {
    pub layer: usize,
    pub action: Action,
}

impl Reduction {
    pub fn apply(&self, spec: &LayeredSpec) -> Result<LayeredSpec> {
        let entry = *spec
            .layers
            .get(self.layer)
            .ok_or_else(|| Error::InvalidArgument(format!("no layer {}", self.layer)))?;
        let mut out = spec.clone();
        out.gate_limit = None;
        match (self.action, entry.coverage) {
            (Action::Remove, c) if c.is_half() => {
                out.layers.remove(self.layer);
            }
            (Action::KeepEven, Coverage::All) => out.layers[self.layer].coverage = Coverage::Even,
            (Action::KeepOdd, Coverage::All) => out.layers[self.layer].coverage = Coverage::Odd,
            (a, c) => {
                return Err(Error::InvalidArgument(format!(
                    "{a:?} does not apply to a layer with coverage {c}"
                )))
            }
        }
        Ok(out)
    }
}

/// Every single half-layer reduction of `spec`, in layer order: a full layer gives
/// two children (even half kept, odd half kept), a half layer one (removed).
pub fn enumerate_reductions(spec: &LayeredSpec) -> Vec<(Reduction, LayeredSpec)> {
    let mut out = Vec::new();
    for (i, l) in spec.layers.iter().enumerate() {
        let actions: &[Action] = if l.coverage.is_half() {
            &[Action::Remove]
        } else {
            &[Action::KeepEven, Action::KeepOdd]
        };
        for &action in actions {
            let r = Reduction { layer: i, action };
            out.push((r, r.apply(spec).expect("enumerated reductions apply")));
        }
    }
    out
}

/// A candidate in the beam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub spec: LayeredSpec,
    /// Root-layer index of each current layer.
    pub origin: Vec<usize>,
    /// Angles of the expanded circuit's parameterized gates, in gate order.
    pub params: Vec<f64>,
    /// Post-fine-tune metric; lower is better.
    pub fitness: f64,
    /// Reductions from the root as `(root layer, action)`.
    pub lineage: Vec<(usize, Action)>,
}

impl BeamState {
    pub fn gate_count(&self) -> usize {
        self.spec.gate_count().unwrap_or(0)
    }

    /// `(fitness, gate count, lineage)` order used for selection and ties.
    pub fn rank_cmp(&self, other: &BeamState) -> std::cmp::Ordering {
        self.fitness
            .total_cmp(&other.fitness)
            .then(self.gate_count().cmp(&other.gate_count()))
            .then_with(|| self.lineage.cmp(&other.lineage))
    }

    /// Identity of the structure: (root layer, coverage) of every remaining layer.
    pub fn key(&self) -> Vec<(usize, Coverage)> {
        self.origin
            .iter()
            .zip(&self.spec.layers)
            .map(|(&o, l)| (o, l.coverage))
            .collect()
    }
}

/// Angle of each parameterized placement keyed by `(root layer, anchor)`.
fn angle_map(spec: &LayeredSpec, origin: &[usize], params: &[f64]) -> Result<HashMap<(usize, usize), f64>> {
    let mut map = HashMap::new();
    let mut it = params.iter();
    for (l, &o) in spec.layers.iter().zip(origin) {
        if !l.kind.is_parameterized() {
            continue;
        }
        for a in l.anchors(spec.n)? {
            let v = it
                .next()
                .ok_or_else(|| Error::Dimension("fewer angles than parameterized gates".into()))?;
            map.insert((o, a), *v);
        }
    }
    if it.next().is_some() {
        return Err(Error::Dimension("more angles than parameterized gates".into()));
    }
    Ok(map)
}

/// Child angles: surviving placements keep the parent's angle, removed ones are dropped.
pub fn inherit_params(
    parent: &BeamState,
    child: &LayeredSpec,
    child_origin: &[usize],
) -> Result<Vec<f64>> {
    let map = angle_map(&parent.spec, &parent.origin, &parent.params)?;
    let mut out = Vec::new();
    for (l, &o) in child.layers.iter().zip(child_origin) {
        if !l.kind.is_parameterized() {
            continue;
        }
        for a in l.anchors(child.n)? {
            out.push(*map.get(&(o, a)).ok_or_else(|| {
                Error::Dimension(format!(
                    "child placement ({o}, {a}) is not in the parent; specs are misaligned"
                ))
            })?);
        }
    }
    Ok(out)
}

/// Fitness of a layered ansatz after a short refinement from given angles.
pub trait FineTune: Sync {
    /// Returns (fitness, refined angles); lower fitness is better.
    fn finetune(&self, spec: &LayeredSpec, init: &[f64], steps: usize) -> Result<(f64, Vec<f64>)>;
}

/// Adam refinement of the Ising energy.
pub struct TfimFineTune {
    pub problem: TfimProblem,
    pub gate_set: GateSet,
    pub lr: f64,
}

impl FineTune for TfimFineTune {
    fn finetune(&self, spec: &LayeredSpec, init: &[f64], steps: usize) -> Result<(f64, Vec<f64>)> {
        let c = spec.expand(&self.gate_set, Provenance::Layerwise)?;
        let d = descend(&c, &self.problem, init.to_vec(), self.lr, steps, 0, 0.0)?;
        Ok((d.energy, d.params))
    }
}

/// Builds the child state for `reduction` of `parent` and fine-tunes it.
pub fn inherit_and_finetune(
    parent: &BeamState,
    reduction: Reduction,
    evaluator: &dyn FineTune,
    steps: usize,
) -> Result<BeamState> {
    let spec = reduction.apply(&parent.spec)?;
    let mut origin = parent.origin.clone();
    if reduction.action == Action::Remove {
        origin.remove(reduction.layer);
    }
    let init = inherit_params(parent, &spec, &origin)?;
    let (fitness, params) = evaluator.finetune(&spec, &init, steps)?;
    let mut lineage = parent.lineage.clone();
    lineage.push((parent.origin[reduction.layer], reduction.action));
    Ok(BeamState {
        spec,
        origin,
        params,
        fitness,
        lineage,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamRound {
    pub round: usize,
    pub evaluated: usize,
    pub passed: usize,
    /// States kept after selection, best first.
    pub kept: Vec<BeamState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamResult {
    /// Most-reduced passing states, best first.
    pub finals: Vec<BeamState>,
    pub rounds: Vec<BeamRound>,
}

/// Iterative reduce / evaluate / select with beam width `q`. States whose fitness exceeds
/// `threshold` are discarded; the search stops when no child passes, the queue empties,
/// or `max_rounds` is reached.
pub fn beam_search(
    root: BeamState,
    q: usize,
    threshold: f64,
    evaluator: &dyn FineTune,
    steps: usize,
    max_rounds: Option<usize>,
) -> Result<BeamResult> {
    beam_search_ordered(root, q, threshold, evaluator, steps, max_rounds, |_| {})
}

pub(crate) fn beam_search_ordered(
    root: BeamState,
    q: usize,
    threshold: f64,
    evaluator: &dyn FineTune,
    steps: usize,
    max_rounds: Option<usize>,
    reorder: impl Fn(&mut Vec<(usize, Reduction)>),
) -> Result<BeamResult> {
    if q == 0 {
        return Err(Error::Beam("beam width must be at least 1".into()));
    }
    if !(root.fitness <= threshold) {
        return Err(Error::Beam(format!(
            "root fails threshold: fitness {} above {threshold}",
            root.fitness
        )));
    }
    let mut queue = vec![root];
    let mut rounds = Vec::new();
    for round in 0.. {
        if max_rounds.is_some_and(|m| round >= m) {
            break;
        }
        // (parent rank, reduction) pairs; one child per distinct structure, taken from
        // the best-ranked parent that produces it
        let mut jobs: Vec<(usize, Reduction)> = queue
            .iter()
            .enumerate()
            .flat_map(|(p, s)| enumerate_reductions(&s.spec).into_iter().map(move |(r, _)| (p, r)))
            .collect();
        reorder(&mut jobs);
        let mut by_key: BTreeMap<Vec<(usize, Coverage)>, (usize, Reduction)> = BTreeMap::new();
        for (p, r) in jobs {
            let parent = &queue[p];
            let spec = r.apply(&parent.spec)?;
            let mut origin = parent.origin.clone();
            if r.action == Action::Remove {
                origin.remove(r.layer);
            }
            let key: Vec<(usize, Coverage)> = origin
                .iter()
                .zip(&spec.layers)
                .map(|(&o, l)| (o, l.coverage))
                .collect();
            by_key
                .entry(key)
                .and_modify(|e| {
                    if (p, r) < *e {
                        *e = (p, r)
                    }
                })
                .or_insert((p, r));
        }
        if by_key.is_empty() {
            break;
        }
        let jobs: Vec<(usize, Reduction)> = by_key.into_values().collect();
        let children: Vec<BeamState> = jobs
            .par_iter()
            .map(|&(p, r)| inherit_and_finetune(&queue[p], r, evaluator, steps))
            .collect::<Result<_>>()?;
        let evaluated = children.len();
        let mut passing: Vec<BeamState> = children.into_iter().filter(|c| c.fitness <= threshold).collect();
        log::info!("beam round {round}: {evaluated} children, {} pass", passing.len());
        if passing.is_empty() {
            break;
        }
        passing.sort_by(|a, b| a.rank_cmp(b));
        let n_pass = passing.len();
        passing.truncate(q);
        rounds.push(BeamRound {
            round,
            evaluated,
            passed: n_pass,
            kept: passing.clone(),
        });
        queue = passing;
    }
    Ok(BeamResult {
        finals: queue,
        rounds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    pub n_target: usize,
    pub q: usize,
    /// Relative slack on the root fitness: threshold = root + delta * |root|.
    pub delta: f64,
    /// Absolute threshold overriding `delta`.
    pub threshold: Option<f64>,
    pub finetune_steps: usize,
    pub lr: f64,
    pub max_rounds: Option<usize>,
    /// Optimization of the filled-in root.
    pub root: VqeConfig,
    /// Full optimization of the final states.
    pub finals: VqeConfig,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            n_target: 10,
            q: 2,
            delta: 0.005,
            threshold: None,
            finetune_steps: 100,
            lr: 0.02,
            max_rounds: None,
            root: VqeConfig::thorough(),
            finals: VqeConfig::thorough(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalAnsatz {
    pub notation: String,
    pub gate_count: usize,
    pub num_params: usize,
    /// Fitness at the end of the beam search.
    pub beam_fitness: f64,
    /// Best of a multi-restart run and a long run from the inherited angles.
    pub energy: f64,
    pub restart_best: f64,
    pub inherited_run: f64,
    pub lineage: Vec<(usize, Action)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub root_notation: String,
    pub root_energy: f64,
    pub threshold: f64,
    pub e0: f64,
    pub beam: BeamResult,
    pub finals: Vec<FinalAnsatz>,
}

/// Fill-in, root optimization, beam search and final optimization on the Ising ring.
pub fn transfer_tfim(spec: &LayeredSpec, cfg: &TransferConfig) -> Result<TransferOutcome> {
    let root_spec = fill_in(spec, cfg.n_target)?;
    let problem = TfimProblem::new(cfg.n_target)?;
    let gate_set = GateSet::vqe();
    let root_circuit = root_spec.expand(&gate_set, Provenance::Layerwise)?;
    let root_fit = evaluate_vqe(&root_circuit, &problem, &cfg.root, cfg.seed)?;
    log::info!("fill-in root {} reaches {:.6}", root_spec, root_fit.best);
    let threshold = cfg
        .threshold
        .unwrap_or(root_fit.best + cfg.delta * root_fit.best.abs());
    let root_energy = root_fit.best;
    let root = BeamState {
        origin: (0..root_spec.layers.len()).collect(),
        spec: root_spec.clone(),
        params: root_fit.best_params,
        fitness: root_fit.best,
        lineage: Vec::new(),
    };
    let tuner = TfimFineTune {
        problem: problem.clone(),
        gate_set: gate_set.clone(),
        lr: cfg.lr,
    };
    let beam = beam_search(root, cfg.q, threshold, &tuner, cfg.finetune_steps, cfg.max_rounds)?;
    let finals = beam
        .finals
        .iter()
        .map(|s| finalize(s, &problem, &gate_set, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferOutcome {
        root_notation: root_spec.notation(),
        root_energy,
        threshold,
        e0: problem.e0,
        beam,
        finals,
    })
}

fn finalize(
    s: &BeamState,
    problem: &TfimProblem,
    gate_set: &GateSet,
    cfg: &TransferConfig,
) -> Result<FinalAnsatz> {
    let c = s.spec.expand(gate_set, Provenance::Layerwise)?;
    let restarts = evaluate_vqe(&c, problem, &cfg.finals, cfg.seed)?;
    let f = &cfg.finals;
    let inherited = descend(&c, problem, s.params.clone(), f.lr, f.max_steps, f.plateau_window, f.plateau_tol)?;
    Ok(FinalAnsatz {
        notation: s.spec.notation(),
        gate_count: c.len(),
        num_params: c.num_params(),
        beam_fitness: s.fitness,
        energy: restarts.best.min(inherited.energy),
        restart_best: restarts.best,
        inherited_run: inherited.energy,
        lineage: s.lineage.clone(),
    })
}

#[cfg(test)]
mod tests;
