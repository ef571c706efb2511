use super::RandomStream;

/// One symmetric random-walk Metropolis step. Returns the new state and
/// whether the proposal was accepted.
pub fn rw_mh_step(
    current: f64,
    log_density: impl Fn(f64) -> f64,
    step_sd: f64,
    stream: &mut RandomStream,
) -> (f64, bool) {
    debug_assert!(step_sd > 0.0);
    let proposal = current + step_sd * stream.normal();
    let delta = log_density(proposal) - log_density(current);
    if delta.is_nan() {
        return (current, false);
    }
    if delta >= 0.0 || stream.uniform().ln() < delta {
        (proposal, true)
    } else {
        (current, false)
    }
}
