mod common;

use cadapt_core::training::{ca_objective, direction_penalty, Objective, ObjectiveKind};
use cadapt_core::{Exec, LinearModel};
use common::*;

const H: f64 = 1e-5;

fn central_difference(f: impl Fn(&[f64]) -> f64, p: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|k| {
            let (mut a, mut b) = (p.to_vec(), p.to_vec());
            a[k] += H;
            b[k] -= H;
            (f(&a) - f(&b)) / (2.0 * H)
        })
        .collect()
}

fn check_kind(kind: ObjectiveKind, seed: u64) {
    let mut r = rng(seed);
    let (data, model) = gradient_dataset(&mut r);
    let obj = Objective::new(kind, &data, &model, 1e-2);
    let mut checked = 0;
    while checked < 20 {
        let p = random_vec(&mut r, data.d() + 1, 0.7);
        if near_kink(&data, &model, &p) {
            continue;
        }
        let v = obj.evaluate(&p).unwrap();
        let fd = central_difference(|q| obj.evaluate(q).unwrap().loss, &p);
        let err = max_rel_err(&v.gradient, &fd);
        assert!(err <= 1e-4, "{kind:?}: relative error {err} at {p:?}");
        let oracle = naive_loss(kind, &data, &model, 1e-2, &p);
        assert!((v.loss - oracle).abs() <= 1e-10, "{kind:?}: value {} vs oracle {oracle}", v.loss);
        checked += 1;
    }
}

#[test]
fn static_gradient() {
    check_kind(ObjectiveKind::Static, 1);
}

#[test]
fn manipulation_proof_gradient() {
    check_kind(ObjectiveKind::ManipulationProof, 2);
}

#[test]
fn ca_gradient_without_penalty() {
    check_kind(ObjectiveKind::ConstructiveAdaptation { lambda: 2.5, eta: 0.0 }, 3);
}

#[test]
fn ca_gradient_with_penalty() {
    check_kind(ObjectiveKind::ConstructiveAdaptation { lambda: 0.3, eta: 5.0 }, 4);
}

#[test]
fn penalty_subgradient_on_smooth_pieces() {
    let mut r = rng(5);
    let (data, model) = gradient_dataset(&mut r);
    let tax = data.taxonomy().clone();
    let (mut checked, mut active) = (0, 0);
    while checked < 20 {
        let p = random_vec(&mut r, data.d() + 1, 0.7);
        if near_kink(&data, &model, &p) {
            continue;
        }
        let w = LinearModel::from_params(&p);
        let v = direction_penalty(&w, &data, &model, &tax).unwrap();
        let fd = central_difference(
            |q| direction_penalty(&LinearModel::from_params(q), &data, &model, &tax).unwrap().loss,
            &p,
        );
        assert!(max_rel_err(&v.gradient, &fd) <= 1e-4);
        active += usize::from(v.loss > 0.0);
        checked += 1;
    }
    assert!(active > 0, "penalty never active on the sampled points");
}

#[test]
fn ca_objective_matches_bound_objective() {
    let mut r = rng(6);
    let (data, model) = gradient_dataset(&mut r);
    let p = random_vec(&mut r, data.d() + 1, 0.7);
    let kind = ObjectiveKind::ConstructiveAdaptation { lambda: 1.5, eta: 0.25 };
    let a = Objective::new(kind, &data, &model, 1e-3).evaluate(&p).unwrap();
    let b = ca_objective(&LinearModel::from_params(&p), &data, &model, 1.5, 0.25, 1e-3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sequential_and_parallel_sums_are_bitwise_equal() {
    let mut r = rng(7);
    let tax = taxonomy(3, 3, 1);
    let n = 3000;
    let x = random_vec(&mut r, n * tax.dim(), 1.0);
    let y = (0..n).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
    let data = cadapt_core::Dataset::new("big", x, y, tax).unwrap();
    let model = random_model(&mut r, 3, 3);
    let p = random_vec(&mut r, data.d() + 1, 0.5);
    for kind in [
        ObjectiveKind::Static,
        ObjectiveKind::ManipulationProof,
        ObjectiveKind::ConstructiveAdaptation { lambda: 1.0, eta: 0.0 },
    ] {
        let seq = Objective::new(kind, &data, &model, 1e-3).with_exec(Exec::Sequential).evaluate(&p).unwrap();
        let par = Objective::new(kind, &data, &model, 1e-3).with_exec(Exec::Parallel).evaluate(&p).unwrap();
        assert_eq!(seq.loss.to_bits(), par.loss.to_bits());
        assert!(seq.gradient.iter().zip(&par.gradient).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
