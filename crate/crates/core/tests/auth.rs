use canoa::auth::*;
use canoa::canproto::{SaDerivation, SourceAddress, SourceAddressMap};
use canoa::learn::{Platt, SvmModel, TrainMeta};
use canoa::sigfeat::{NormStats, PcaBasis, Tau, TukeyParams};
use proptest::prelude::*;

const SAS: [(u8, usize); 4] = [(0, 0), (15, 0), (11, 1), (20, 2)];

fn bundle(delta: f64) -> ModelBundle<f64> {
    let mut map = SourceAddressMap::new(SaDerivation::LowByteOfId);
    let entries = SAS
        .iter()
        .map(|&(sa, ecu)| {
            map.assign(SourceAddress(sa), ecu).unwrap();
            SaModel {
                sa: SourceAddress(sa),
                ecu,
                model: SvmModel {
                    w: vec![1.0],
                    b: 0.0,
                    platt: Platt { a: -1.0, b: 0.0 },
                    meta: TrainMeta {
                        iterations: 1,
                        final_loss: 0.0,
                        epsilon: 1e-4,
                        converged: true,
                    },
                },
                basis: PcaBasis {
                    mean: vec![0.0],
                    components: vec![vec![1.0]],
                    explained_variance: vec![1.0],
                    total_variance: 1.0,
                },
                stats: NormStats { mean: 0.0, std: 1.0 },
            }
        })
        .collect();
    ModelBundle::new(entries, Tau::new(1e-3).unwrap(), 1, TukeyParams::default(), delta, map).unwrap()
}

/// Attribution of a frame claiming `claimed` with probabilities in SA order
/// 0, 11, 15, 20.
fn attribution(b: &ModelBundle<f64>, claimed: u8, p: [f64; 4]) -> Attribution<f64> {
    let sas: Vec<SourceAddress> = b.entries.iter().map(|e| e.sa).collect();
    let max = p.iter().copied().fold(f64::MIN, f64::max);
    let best = p.iter().position(|&v| max - v <= TIE_TOLERANCE).unwrap();
    Attribution {
        t: 0.0,
        claimed_sa: SourceAddress(claimed),
        purported_ecu: b.entry(SourceAddress(claimed)).unwrap().ecu,
        softmax: softmax(&p),
        winner: (p[best] > b.delta).then_some(sas[best]),
        tie: p.iter().filter(|&&v| max - v <= TIE_TOLERANCE).count() > 1,
        sas,
        p_tx: p.to_vec(),
    }
}

#[test]
fn owner_transmitting_is_authentic() {
    let b = bundle(0.5);
    let v = detect_attack(attribution(&b, 11, [0.01, 0.97, 0.02, 0.01]), &b);
    assert_eq!(v.decision, Decision::Authentic);
    assert_eq!(v.flagged_compromised, None);
}

#[test]
fn sibling_address_winning_stays_authentic() {
    let b = bundle(0.5);
    // claims 15, but the model of sibling SA 0 on the same ECU scores higher
    let v = detect_attack(attribution(&b, 15, [0.9, 0.01, 0.6, 0.02]), &b);
    assert_eq!(v.decision, Decision::Authentic);
    assert_eq!(v.winner(), Some(SourceAddress(0)));
}

#[test]
fn other_ecu_winning_is_impersonation() {
    let b = bundle(0.5);
    let v = detect_attack(attribution(&b, 0, [0.02, 0.95, 0.03, 0.01]), &b);
    assert_eq!(
        v.decision,
        Decision::Impersonation {
            ecu: 1,
            sa: SourceAddress(11)
        }
    );
    assert_eq!(v.flagged_compromised, Some(1));
    assert!(!v.multiple_positive);
}

#[test]
fn nothing_above_delta_is_an_added_module() {
    let b = bundle(0.5);
    let v = detect_attack(attribution(&b, 0, [0.1, 0.2, 0.3, 0.05]), &b);
    assert_eq!(v.decision, Decision::AddedModule);
    assert_eq!(v.winner(), None);
    assert!(v.decision.is_attack());
}

#[test]
fn several_positive_ecus_flag_the_lowest() {
    let b = bundle(0.5);
    let v = detect_attack(attribution(&b, 0, [0.01, 0.8, 0.02, 0.9]), &b);
    assert_eq!(v.flagged_compromised, Some(1));
    assert!(v.multiple_positive);
}

#[test]
fn ties_go_to_the_lowest_address() {
    let b = bundle(0.5);
    let a = attribution(&b, 11, [0.9, 0.9, 0.1, 0.1]);
    assert!(a.tie);
    assert_eq!(a.winner, Some(SourceAddress(0)));
}

#[test]
fn bundle_validation_rejects_bad_delta_and_coverage() {
    let b = bundle(0.5);
    assert!(b.clone().with_delta(1.0).is_err());
    assert!(b.clone().with_delta(0.0).is_err());
    let mut missing = b.clone();
    missing.entries.pop();
    assert!(matches!(missing.validate(), Err(AuthError::InvalidBundle(_))));
    let mut wrong_owner = b;
    wrong_owner.entries[0].ecu = 2;
    assert!(wrong_owner.validate().is_err());
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-700.0f64..700.0, 1..20), shift in -100.0f64..100.0) {
        let s = softmax(&v);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(s.iter().all(|&p| (0.0..=1.0).contains(&p)));
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        for (a, b) in s.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] > v[j] {
                    prop_assert!(s[i] >= s[j]);
                }
            }
        }
    }

    #[test]
    fn decision_follows_the_rules(
        p in prop::array::uniform4(0.0f64..1.0),
        claimed in prop::sample::select(vec![0u8, 11, 15, 20]),
        delta in 0.05f64..0.95,
    ) {
        let b = bundle(delta);
        let a = attribution(&b, claimed, p);
        let owner = |sa: SourceAddress| b.entry(sa).unwrap().ecu;
        let purported = a.purported_ecu;
        let winner = a.winner;
        let others_positive = b.entries.iter().zip(&p).any(|(e, &pi)| e.ecu != purported && pi > delta);
        let v = detect_attack(a, &b);
        match v.decision {
            Decision::Authentic => prop_assert_eq!(winner.map(owner), Some(purported)),
            Decision::Impersonation { ecu, sa } => {
                prop_assert_ne!(ecu, purported);
                prop_assert_eq!(owner(sa), ecu);
                prop_assert!(p[b.entries.iter().position(|e| e.sa == sa).unwrap()] > delta);
                prop_assert_eq!(v.flagged_compromised, Some(ecu));
            }
            Decision::AddedModule => {
                prop_assert!(!others_positive);
                prop_assert_ne!(winner.map(owner), Some(purported));
            }
        }
    }
}
