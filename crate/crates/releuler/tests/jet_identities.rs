//! Exact verification of every identity on formal solution jets, plus the
//! negative control on unconstrained jets.

use releuler::identities::Identity;
use releuler::jet::{eval_identity, random_constrained_jet, random_unconstrained_jet, rotate_jet_z90};

fn worst_over_seeds(id: Identity, order: usize, count: u64, amplitude: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let jet = random_constrained_jet(1000 + seed, order, amplitude, 2.0).unwrap();
        let r = eval_identity(&jet, id, seed).unwrap();
        worst = worst.max(r);
    }
    worst
}

#[test]
fn survey_all_identities_order4() {
    // diagnostic: prints the residual landscape (kept cheap)
    for id in Identity::ALL {
        let jet = random_constrained_jet(42, 4, 0.1, 2.0).unwrap();
        let r = eval_identity(&jet, id, 7).unwrap();
        println!("{:>12}: {:.3e}", id.name(), r);
    }
}

#[test]
fn order2_identities_tight() {
    for id in [
        Identity::WteH,
        Identity::WteU,
        Identity::Ceq,
        Identity::Ceq0,
        Identity::HDe,
        Identity::Oe00,
        Identity::Cr04,
        Identity::Cra0,
        Identity::Cra1,
        Identity::FdUmLocal,
        Identity::OEe,
    ] {
        let w = worst_over_seeds(id, 2, 10, 0.1);
        assert!(w <= 1e-9, "{}: worst rel residual {w:.3e}", id.name());
    }
}

#[test]
fn order3_identities_tight() {
    for id in [Identity::Ceq1, Identity::C2, Identity::D5] {
        let w = worst_over_seeds(id, 3, 10, 0.1);
        assert!(w <= 1e-8, "{}: worst rel residual {w:.3e}", id.name());
    }
}

#[test]
fn order4_sde_tight() {
    let w = worst_over_seeds(Identity::SDe, 4, 5, 0.1);
    assert!(w <= 1e-7, "SDe: worst rel residual {w:.3e}");
}

#[test]
fn negative_control_nonsolution_jets() {
    for id in Identity::ALL {
        if !id.needs_solution() {
            continue; // these hold for any normalized u
        }
        let mut rels: Vec<f64> = (0..9)
            .map(|seed| {
                let jet = random_unconstrained_jet(seed, id.required_order().max(2), 0.1, 2.0);
                eval_identity(&jet, id, seed).unwrap()
            })
            .collect();
        rels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rels[rels.len() / 2];
        assert!(
            median >= 1e-3,
            "{}: negative control median {median:.3e} suspiciously small",
            id.name()
        );
    }
}

#[test]
fn rotation_commutes_for_covariant_identities() {
    for id in [Identity::Ceq, Identity::WteH] {
        let jet = random_constrained_jet(77, 2, 0.1, 2.0).unwrap();
        let rot = rotate_jet_z90(&jet);
        let a = eval_identity(&jet, id, 3).unwrap();
        let b = eval_identity(&rot, id, 3).unwrap();
        assert!(
            (a - b).abs() <= 1e-10 * (1.0 + a.abs()),
            "{}: residual changed under rotation: {a:.3e} vs {b:.3e}",
            id.name()
        );
    }
}
