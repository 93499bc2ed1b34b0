use super::pauli::{expectation, PauliObservable};
use super::state::{apply_circuit, check_run, StateVector};
use crate::circuit::Circuit;
use crate::error::Result;

/// Energy and its gradient with respect to every circuit parameter, by reverse-mode adjoint sweep.
///
/// Cost is a single forward pass plus one backward pass over the gate list.
pub fn energy_and_gradient(
    circuit: &Circuit,
    params: &[f64],
    init: &StateVector,
    obs: &PauliObservable,
) -> Result<(f64, Vec<f64>)> {
    check_run(circuit, params, init)?;
    let mut psi = init.clone();
    apply_circuit(&mut psi, circuit, params);
    let energy = expectation(&psi, obs)?;
    let lambda = obs.apply(&psi);
    let grad = backprop(circuit, params, psi, lambda);
    Ok((energy, grad))
}

/// Reverse sweep from the output state `psi` and the cotangent `lambda = dL/d<psi|`.
///
/// For `L = <psi|O|psi>` pass `lambda = O|psi>`; returns `dL/dθ_k = Im <λ_k|G_k|ψ_k>` per parameter.
pub(crate) fn backprop(
    circuit: &Circuit,
    params: &[f64],
    mut psi: StateVector,
    mut lambda: StateVector,
) -> Vec<f64> {
    let mut grad = vec![0.0; params.len()];
    let mut p = params.len();
    for g in circuit.gates.iter().rev() {
        if g.kind.is_parameterized() {
            p -= 1;
            let gpsi = psi.generator_applied(g);
            grad[p] = lambda.inner(&gpsi).im;
            psi.apply_inverse(g, params[p]);
            lambda.apply_inverse(g, params[p]);
        } else {
            psi.apply(g, 0.0);
            lambda.apply(g, 0.0);
        }
    }
    grad
}

/// Central finite-difference gradient, used as an independent check.
pub fn finite_difference_gradient(
    circuit: &Circuit,
    params: &[f64],
    init: &StateVector,
    obs: &PauliObservable,
    h: f64,
) -> Result<Vec<f64>> {
    check_run(circuit, params, init)?;
    let mut work = params.to_vec();
    let eval = |w: &[f64]| -> Result<f64> {
        let mut s = init.clone();
        apply_circuit(&mut s, circuit, w);
        expectation(&s, obs)
    };
    let mut out = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = work[k];
        work[k] = orig + h;
        let plus = eval(&work)?;
        work[k] = orig - h;
        let minus = eval(&work)?;
        work[k] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Parameter-shift gradient; exact for gates whose generator has eigenvalues ±1.
pub fn parameter_shift_gradient(
    circuit: &Circuit,
    params: &[f64],
    init: &StateVector,
    obs: &PauliObservable,
) -> Result<Vec<f64>> {
    use crate::circuit::GateKind;
    check_run(circuit, params, init)?;
    let mut work = params.to_vec();
    let eval = |w: &[f64]| -> Result<f64> {
        let mut s = init.clone();
        apply_circuit(&mut s, circuit, w);
        expectation(&s, obs)
    };
    let kinds: Vec<GateKind> = circuit
        .gates
        .iter()
        .filter(|g| g.kind.is_parameterized())
        .map(|g| g.kind)
        .collect();
    let mut out = Vec::with_capacity(params.len());
    let shift = std::f64::consts::FRAC_PI_2;
    for k in 0..params.len() {
        let orig = work[k];
        let g = if kinds[k] == GateKind::SwapP {
            // exp(-iθ SWAP): eigenvalues ±1 of SWAP give the shift rule at π/4 with factor 1
            let s = shift / 2.0;
            work[k] = orig + s;
            let plus = eval(&work)?;
            work[k] = orig - s;
            let minus = eval(&work)?;
            plus - minus
        } else {
            work[k] = orig + shift;
            let plus = eval(&work)?;
            work[k] = orig - shift;
            let minus = eval(&work)?;
            (plus - minus) / 2.0
        };
        work[k] = orig;
        out.push(g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Gate, GateKind::*, GateSet};
    use crate::sim::PauliWord;

    fn obs4() -> PauliObservable {
        let mut terms: Vec<(f64, PauliWord)> = Vec::new();
        for i in 0..4 {
            let j = (i + 1) % 4;
            terms.push((1.0, PauliWord::from_factors(&[(i, 'Z'), (j, 'Z')]).unwrap()));
            terms.push((0.7, PauliWord::from_factors(&[(i, 'X')]).unwrap()));
        }
        terms.push((0.4, PauliWord::from_factors(&[(1, 'Y'), (2, 'X')]).unwrap()));
        PauliObservable::new(4, terms).unwrap()
    }

    fn mixed_circuit() -> Circuit {
        let set = GateSet::custom(crate::circuit::GateKind::ALL.to_vec()).unwrap();
        Circuit::with_gates(
            4,
            set,
            vec![
                Gate::single(H, 0),
                Gate::single(Rx, 1),
                Gate::pair(XX, 1, 2),
                Gate::single(Ry, 3),
                Gate::pair(SwapP, 3, 0),
                Gate::pair(YY, 0, 1),
                Gate::single(H, 2),
                Gate::pair(ZZ, 2, 3),
                Gate::single(Rz, 1),
                Gate::pair(SwapP, 1, 2),
                Gate::single(Rx, 0),
            ],
        )
    }

    #[test]
    fn adjoint_matches_finite_difference() {
        let c = mixed_circuit();
        let params: Vec<f64> = (0..c.num_params()).map(|k| 0.3 + 0.41 * k as f64).collect();
        let init = StateVector::zero(4);
        let (_, adj) = energy_and_gradient(&c, &params, &init, &obs4()).unwrap();
        let fd = finite_difference_gradient(&c, &params, &init, &obs4(), 1e-5).unwrap();
        for (a, b) in adj.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7, "adjoint {a} vs fd {b}");
        }
    }

    #[test]
    fn adjoint_matches_parameter_shift() {
        let c = mixed_circuit();
        let params: Vec<f64> = (0..c.num_params()).map(|k| -0.8 + 0.23 * k as f64).collect();
        let init = StateVector::zero(4);
        let (_, adj) = energy_and_gradient(&c, &params, &init, &obs4()).unwrap();
        let ps = parameter_shift_gradient(&c, &params, &init, &obs4()).unwrap();
        for (a, b) in adj.iter().zip(&ps) {
            assert!((a - b).abs() < 1e-10, "adjoint {a} vs shift {b}");
        }
    }

    #[test]
    fn no_parameters_gives_empty_gradient() {
        let c = Circuit::with_gates(2, GateSet::vqe(), vec![Gate::single(H, 0)]);
        let obs = PauliObservable::x(0);
        let (e, g) = energy_and_gradient(&c, &[], &StateVector::zero(2), &obs).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(g.is_empty());
    }
}
