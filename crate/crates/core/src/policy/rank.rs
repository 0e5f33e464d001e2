use super::{PolicyError, UtilityParameters};

/// Index of the candidate with the lowest expected time if shown. With
/// writing after reject slower than editing after accept this is the
/// candidate most likely to be accepted; ties go to the earliest index.
pub fn rank_suggestions(p_accept: &[f64], params: &UtilityParameters) -> Result<usize, PolicyError> {
    params.validate()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in p_accept.iter().enumerate() {
        let t = params.expected_time_shown(p)?;
        if best.is_none_or(|(_, bt)| t < bt) {
            best = Some((i, t));
        }
    }
    let (idx, _) = best.ok_or(PolicyError::NoCandidates)?;
    debug_assert!(p_accept.iter().all(|&p| p <= p_accept[idx]));
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> UtilityParameters {
        UtilityParameters::new(4.0, 6.0, 20.0, 20.0, 0.5).unwrap()
    }

    #[test]
    fn picks_most_likely() {
        assert_eq!(rank_suggestions(&[0.2, 0.7, 0.5], &params()).unwrap(), 1);
        assert_eq!(rank_suggestions(&[0.4], &params()).unwrap(), 0);
        assert_eq!(rank_suggestions(&[0.6, 0.6], &params()).unwrap(), 0);
        assert!(matches!(rank_suggestions(&[], &params()), Err(PolicyError::NoCandidates)));
        assert!(rank_suggestions(&[0.1, 2.0], &params()).is_err());
    }

    proptest! {
        #[test]
        fn order_invariant_up_to_ties(ps in proptest::collection::vec(0.0..=1.0f64, 1..20), rot in 0usize..20) {
            let best = rank_suggestions(&ps, &params()).unwrap();
            let max = ps.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(ps[best], max);
            prop_assert_eq!(ps.iter().position(|&p| p == max).unwrap(), best);
            let mut rotated = ps.clone();
            rotated.rotate_left(rot % ps.len());
            let b2 = rank_suggestions(&rotated, &params()).unwrap();
            prop_assert_eq!(rotated[b2], max);
        }
    }
}
