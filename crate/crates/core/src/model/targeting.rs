use crate::model::instance::PersuasionInstance;
use crate::model::policy::{PlatformPolicy, Posterior, Segment};
use crate::model::utility::greedy_best_response;

fn targets_lowest(inst: &PersuasionInstance, x: &Posterior) -> bool {
    greedy_best_response(inst, x).index == x.min_support()
}

/// True iff the greedy sender targets the lowest supported type on every
/// non-truthful segment, so that every user buys.
pub fn is_lowest_type_targeting(inst: &PersuasionInstance, policy: &PlatformPolicy) -> bool {
    policy
        .segments()
        .iter()
        .enumerate()
        .filter(|(i, _)| !policy.is_truthful(*i))
        .all(|(_, s)| targets_lowest(inst, &s.posterior))
}

/// Result of [`improve_counting`].
#[derive(Debug, Clone)]
pub struct Improvement {
    pub policy: PlatformPolicy,
    pub splits: usize,
}

/// Splits every non-truthful segment whose greedy target `j` is above its
/// lowest supported type into the upper tail (types `>= j`, weight `F_j`)
/// and the lower remainder, repeating until every segment is
/// lowest-type-targeting.
pub fn improve_to_lowest_type_targeting(
    inst: &PersuasionInstance,
    policy: &PlatformPolicy,
) -> PlatformPolicy {
    improve_counting(inst, policy).policy
}

pub fn improve_counting(inst: &PersuasionInstance, policy: &PlatformPolicy) -> Improvement {
    let mut out = Vec::with_capacity(policy.len());
    let mut truthful = None;
    let mut splits = 0;
    for (i, seg) in policy.segments().iter().enumerate() {
        if policy.is_truthful(i) {
            truthful = Some(out.len());
            out.push(seg.clone());
        } else {
            settle(inst, seg.clone(), &mut out, &mut splits);
        }
    }
    Improvement {
        policy: PlatformPolicy::from_parts(out, truthful),
        splits,
    }
}

fn settle(inst: &PersuasionInstance, seg: Segment, out: &mut Vec<Segment>, splits: &mut usize) {
    let j = greedy_best_response(inst, &seg.posterior).index;
    let lowest = seg.posterior.min_support();
    if j <= lowest {
        out.push(seg);
        return;
    }
    let w = seg.posterior.weights();
    let upper: f64 = w[j..].iter().sum();
    let lower: f64 = w[..j].iter().sum();
    let mut y = vec![0.0; w.len()];
    y[j..].copy_from_slice(&w[j..]);
    let mut z = vec![0.0; w.len()];
    z[..j].copy_from_slice(&w[..j]);
    *splits += 1;
    // both halves carry positive mass: j is the greedy target and lowest < j
    let y = Posterior::from_masses(&y).expect("greedy target has positive mass");
    let z = Posterior::from_masses(&z).expect("lowest supported type lies below the target");
    let total = upper + lower;
    settle(
        inst,
        Segment {
            weight: seg.weight * upper / total,
            posterior: y,
        },
        out,
        splits,
    );
    settle(
        inst,
        Segment {
            weight: seg.weight * lower / total,
            posterior: z,
        },
        out,
        splits,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{policy_utilities, SenderPolicy};

    fn instance_a() -> PersuasionInstance {
        PersuasionInstance::new(vec![0.2, 0.8], vec![0.2, 0.8], 0.5).unwrap()
    }

    #[test]
    fn classification_examples() {
        let a = instance_a();
        let split = PlatformPolicy::new(
            &a,
            vec![
                (0.6, Posterior::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap()),
                (0.4, Posterior::new(vec![0.0, 1.0]).unwrap()),
            ],
            None,
        )
        .unwrap();
        assert!(is_lowest_type_targeting(&a, &split));
        assert!(!is_lowest_type_targeting(&a, &PlatformPolicy::uninformative(&a)));
        assert!(is_lowest_type_targeting(&a, &PlatformPolicy::full_revelation(&a)));
    }

    #[test]
    fn splits_aggregate_of_instance_a() {
        let a = instance_a();
        let start = PlatformPolicy::uninformative(&a);
        let imp = improve_counting(&a, &start);
        assert_eq!(imp.splits, 1);
        let segs = imp.policy.segments();
        assert_eq!(segs.len(), 2);
        assert!((segs[0].weight - 0.8).abs() < 1e-12);
        assert_eq!(segs[0].posterior.weights(), &[0.0, 1.0]);
        assert!((segs[1].weight - 0.2).abs() < 1e-12);
        assert_eq!(segs[1].posterior.weights(), &[1.0, 0.0]);

        let before = policy_utilities(&a, &start, &SenderPolicy::truthful(&a, &start)).unwrap();
        let after = policy_utilities(&a, &imp.policy, &SenderPolicy::truthful(&a, &imp.policy))
            .unwrap();
        assert!((before.sender - 0.72).abs() < 1e-12);
        assert!((after.sender - 0.84).abs() < 1e-12);
        assert!(after.platform.abs() < 1e-12);
    }

    #[test]
    fn fixpoint_is_unchanged() {
        let a = instance_a();
        let full = PlatformPolicy::full_revelation(&a);
        let imp = improve_counting(&a, &full);
        assert_eq!(imp.splits, 0);
        assert_eq!(imp.policy, full);
    }

    #[test]
    fn truthful_segment_is_left_alone() {
        let a = instance_a();
        let policy = PlatformPolicy::new(
            &a,
            vec![
                (0.5, Posterior::new(vec![0.2, 0.8]).unwrap()),
                (0.5, Posterior::new(vec![0.2, 0.8]).unwrap()),
            ],
            Some(0),
        )
        .unwrap();
        let out = improve_to_lowest_type_targeting(&a, &policy);
        assert_eq!(out.truthful_index(), Some(0));
        assert_eq!(out.segments()[0], policy.segments()[0]);
        assert_eq!(out.len(), 3);
        assert!(is_lowest_type_targeting(&a, &out));
    }
}
