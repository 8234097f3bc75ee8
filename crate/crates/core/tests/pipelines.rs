use torkam_core::diophantine::{best_constant, check, DiophantineCert};
use torkam_core::kam_classical::{
    egorov_density, kam_conjugate, transport_unitary, unitarity_defect, verify_egorov, ClassicalOptions,
    TorusVectorField,
};
use torkam_core::kam_quantum::{assemble_unitary, conjugation_residual, run, KamConstants, KamOptions};
use torkam_core::quantize::TorusBasis;
use torkam_core::symbols::{Lattice, NormParams, SemiclassicalScale, Transport, Truncation, Wave};
use torkam_core::wigner::{measure_diagnostics, Eigenstate, Prediction, StateVector};

fn golden() -> Vec<f64> {
    vec![1.0, (1.0 + 5f64.sqrt()) / 2.0]
}

fn golden_cert() -> DiophantineCert {
    let w = golden();
    check(&w, 2.0, best_constant(&w, 2.0, 200).unwrap(), 200).unwrap()
}

#[test]
fn quantum_run_respects_every_step_bound() {
    let l = Lattice::new(2, 1.0).unwrap();
    let v = l
        .cos(Wave::new(&[1, 0], &[1, 0]), 2e-4)
        .add(&l.cos(Wave::new(&[0, 1], &[0, -1]), 1e-4))
        .unwrap()
        .add(&l.cos(Wave::action(&[1, 1]), 1e-4))
        .unwrap();
    let p = NormParams::new(1.0, 1.0).unwrap();
    let cert = golden_cert();
    let scale = SemiclassicalScale::equal(0.1).unwrap();
    let opts = KamOptions { trunc: Truncation::EXACT, n_max: 4, stop_tol: 0.0, ..KamOptions::default() };
    let out = run(&v, &cert, p, scale, &opts).unwrap();
    assert!(out.state.smallness.holds);
    assert!(out.monotone);
    let alpha = KamConstants::default().alpha;
    for step in &out.state.ledger {
        assert!(step.ratio <= alpha, "step {} ratio {}", step.n, step.ratio);
        assert!(step.f_norm <= step.f_bound);
        assert!(step.r_norm <= step.r_bound);
    }
    for r in &out.state.counterterms {
        assert!(r.is_action_only());
        assert!(r.reality_defect() <= 1e-15);
    }
    assert!(out.r_total_norm <= out.r_total_bound);
}

#[test]
fn renormalized_operator_is_conjugated_to_the_transport() {
    let l = Lattice::new(2, 1.0).unwrap();
    let v = l.cos(Wave::new(&[1, 0], &[1, 0]), 2e-4).add(&l.cos(Wave::new(&[1, -1], &[0, 1]), 1e-4)).unwrap();
    let p = NormParams::new(1.0, 1.0).unwrap();
    let w = golden();
    let scale = SemiclassicalScale::equal(0.1).unwrap();
    let opts = KamOptions { trunc: Truncation::EXACT, n_max: 4, stop_tol: 0.0, ..KamOptions::default() };
    let out = run(&v, &golden_cert(), p, scale, &opts).unwrap();
    let (n, margin) = (8, 4);
    let lw = Transport::new(&w).unwrap();
    let mut previous = f64::INFINITY;
    for m in [1, out.state.generators.len()] {
        let gens = &out.state.generators[..m];
        let r: Vec<_> = out.state.counterterms[..m].to_vec();
        let r_total = r.iter().try_fold(l.zero(), |acc, x| acc.add(x)).unwrap();
        let u = assemble_unitary(gens, scale, 2, n, margin).unwrap();
        let res = conjugation_residual(&u, &v, &r_total, &lw, scale, margin).unwrap();
        // the residual is ε‖Op(V_{m+1})‖, bounded by ε times its mass
        let bound = scale.eps() * out.state.ledger[m - 1].v_next_norm;
        assert!(res <= bound * (1.0 + 1e-6) + 1e-13, "m = {m}: {res} > {bound}");
        assert!(res <= previous + 1e-13);
        previous = res;
    }
}

#[test]
fn generators_compose_in_order() {
    let l = Lattice::new(1, 1.0).unwrap();
    let scale = SemiclassicalScale::equal(0.2).unwrap();
    let f1 = l.cos(Wave::new(&[1], &[1]), 0.5);
    let f2 = l.sin(Wave::new(&[2], &[-1]), 0.5);
    let u12 = assemble_unitary(&[f1.clone(), f2.clone()], scale, 1, 16, 6).unwrap();
    let u21 = assemble_unitary(&[f2, f1], scale, 1, 16, 6).unwrap();
    assert!(unitarity_defect(&u12, 6) < 1e-12);
    assert!(unitarity_defect(&u21, 6) < 1e-12);
    assert!(u12.sub(&u21).unwrap().interior_norm(6).unwrap() > 1e-3);
}

#[test]
fn zero_perturbation_needs_no_steps() {
    let l = Lattice::new(2, 1.0).unwrap();
    let p = NormParams::new(1.0, 1.0).unwrap();
    let out = run(&l.zero(), &golden_cert(), p, SemiclassicalScale::equal(0.1).unwrap(), &KamOptions::default()).unwrap();
    assert!(out.state.ledger.is_empty());
    assert!(out.r_total.is_empty());
    assert!(out.converged);
}

#[test]
fn classical_conjugacy_on_the_circle_is_explicit() {
    // ẋ = φ + a sin x rotates with frequency √(φ² − a²), so ω = 1 needs φ = √(1 + a²)
    let a = 0.01;
    let v = TorusVectorField::sin(&[1], &[a]).unwrap();
    let cert = check(&[1.0], 2.0, 1.0, 100).unwrap();
    let opts = ClassicalOptions { n_max: 12, tol: 1e-13, cutoff: 32, min_det: 1e-6 };
    let kam = kam_conjugate(&v, &[1.0], &cert, &opts).unwrap();
    assert!(kam.converged);
    assert!(kam.residual < 1e-11);
    let want = (1.0 + a * a).sqrt();
    assert!((kam.frequency.phi[0] - want).abs() < 1e-12, "{:?} vs {want}", kam.frequency.phi);
}

#[test]
fn transport_unitary_pushes_densities_forward() {
    let v = TorusVectorField::sin(&[1, 0], &[1e-3, 0.0]).unwrap().add(&TorusVectorField::cos(&[1, 1], &[0.0, 1e-3]).unwrap()).unwrap();
    let w = golden();
    let cert = golden_cert();
    let kam = kam_conjugate(&v, &w, &cert, &ClassicalOptions::default()).unwrap();
    assert!(kam.converged);
    let (n, margin) = (24, 12);
    let u = transport_unitary(&kam.theta, n).unwrap();
    assert!(unitarity_defect(&u, margin) < 1e-12);
    let rep = verify_egorov(&u, &w, &kam.frequency.phi, &v, 0.1, margin).unwrap();
    assert!(rep.residual < 1e-10, "egorov residual {}", rep.residual);
    let l = Lattice::new(2, 1.0).unwrap();
    let b = l.cos(Wave::angle(&[1, 0]), 1.0).add(&l.sin(Wave::angle(&[1, 1]), 0.5)).unwrap();
    for k in [[0, 0], [2, -1], [-3, 1]] {
        let (lhs, rhs) = egorov_density(&u, &kam.theta, &k, &b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12, "k = {k:?}: {lhs} vs {rhs}");
    }
}

#[test]
fn unperturbed_eigenstates_equidistribute_exactly() {
    let l = Lattice::new(2, 0.5).unwrap();
    let symbols = vec![
        l.cos(Wave::new(&[1, 0], &[1, 0]), 1.0),
        l.cos(Wave::action(&[2, -1]), 1.0).add(&l.constant(0.5)).unwrap(),
    ];
    let mut states = Vec::new();
    for hbar in [0.2, 0.1] {
        let basis = TorusBasis::new(2, 6).unwrap();
        for k in [[0, 0], [3, -2], [-1, 4]] {
            states.push(Eigenstate {
                hbar,
                state: StateVector::basis_state(basis, hbar, &k).unwrap(),
                eigenvalue: hbar * (k[0] as f64 + golden()[1] * k[1] as f64),
                label: k.to_vec(),
            });
        }
    }
    let rep = measure_diagnostics(&states, &symbols, Prediction::Haar).unwrap();
    assert!(rep.max_deviation < 1e-15);
    assert_eq!(rep.samples.len(), 12);
}
