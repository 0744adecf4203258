use rand::rngs::StdRng;
use rand::SeedableRng;

use tdid::deploy::{collapse_copies, deploy, deploy_unpruned, DeployedDid};
use tdid::generate::{random_model, shuffle_declarations, Limits};
use tdid::model::{parse, CondensedTdid};
use tdid::solve::{brute_force, evaluate_policy, policies_agree, policy_count, solve, DEFAULT_ORACLE_CAP};

const TOL: f64 = 1e-9;
// Keeps the exhaustive oracle fast; larger policy spaces are skipped.
const SWEEP_POLICY_LIMIT: u128 = 1 << 12;

fn corpus(seed: u64, size: usize) -> Vec<(CondensedTdid, DeployedDid)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let model = random_model(&mut rng, &Limits::default());
        let did = deploy(&model).unwrap();
        if !did.decision_order.is_empty() && policy_count(&did).is_some_and(|c| c <= SWEEP_POLICY_LIMIT) {
            out.push((model, did));
        }
    }
    out
}

#[test]
fn exact_solver_matches_exhaustive_oracle() {
    for (k, (_, did)) in corpus(11, 200).iter().enumerate() {
        let ours = solve(did).unwrap();
        let oracle = brute_force(did, DEFAULT_ORACLE_CAP).unwrap();
        assert!((ours.meu - oracle.meu).abs() <= TOL, "model {k}: {} vs {}", ours.meu, oracle.meu);
        assert!((evaluate_policy(did, &ours).unwrap() - ours.meu).abs() <= TOL, "model {k}");
        assert!(policies_agree(did, &ours, &oracle, TOL).unwrap(), "model {k}");
    }
}

#[test]
fn barren_elimination_and_copy_collapse_keep_meu() {
    for (k, (model, did)) in corpus(12, 60).iter().enumerate() {
        let meu = solve(did).unwrap().meu;
        let unpruned = deploy_unpruned(model).unwrap();
        if policy_count(&unpruned).is_some_and(|c| c <= SWEEP_POLICY_LIMIT) {
            let full = brute_force(&unpruned, DEFAULT_ORACLE_CAP).unwrap().meu;
            assert!((full - meu).abs() <= TOL, "model {k}: unpruned {full} vs {meu}");
        }
        let collapsed = solve(&collapse_copies(did)).unwrap().meu;
        assert!((collapsed - meu).abs() <= TOL, "model {k}: collapsed {collapsed} vs {meu}");
    }
}

#[test]
fn declaration_order_does_not_matter() {
    let mut rng = StdRng::seed_from_u64(99);
    for (k, (model, did)) in corpus(13, 60).iter().enumerate() {
        let meu = solve(did).unwrap().meu;
        let shuffled = deploy(&shuffle_declarations(model, &mut rng)).unwrap();
        let other = solve(&shuffled).unwrap().meu;
        assert!((other - meu).abs() <= TOL, "model {k}: {other} vs {meu}");
    }
}

#[test]
fn shifting_one_utility_shifts_meu() {
    for (k, (_, did)) in corpus(14, 60).iter().enumerate() {
        let before = solve(did).unwrap();
        for shift in [-3.5, 10.0] {
            let mut shifted = did.clone();
            let u = shifted.super_value[0];
            shifted.nodes[u].table.iter_mut().for_each(|x| *x += shift);
            let after = solve(&shifted).unwrap();
            assert!((after.meu - (before.meu + shift)).abs() <= TOL, "model {k}");
            assert!(policies_agree(did, &before, &after, TOL).unwrap(), "model {k}");
        }
    }
}

#[test]
fn cardiac_fixture_agrees_with_oracle() {
    let model = parse(include_str!("../../../fixtures/cardiac.tdid")).unwrap();
    let did = deploy(&model).unwrap();
    let ours = solve(&did).unwrap();
    let oracle = brute_force(&did, DEFAULT_ORACLE_CAP).unwrap();
    assert!((ours.meu - oracle.meu).abs() <= TOL);
    assert!(policies_agree(&did, &ours, &oracle, TOL).unwrap());
}
