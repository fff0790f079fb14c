use crate::error::{Error, Result};
use crate::{State, C64};

/// States on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<State>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<State>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Internal(format!(
                "trajectory has {} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Internal("trajectory must have at least one point".into()));
        }
        if times.len() > 2 {
            let h = times[1] - times[0];
            let span = (times[times.len() - 1] - times[0]).abs().max(1.0);
            for w in times.windows(2) {
                if !((w[1] - w[0]) - h).abs().le(&(1e-12 * span)) || !(w[1] > w[0]) {
                    return Err(Error::Internal("trajectory times are not uniformly spaced".into()));
                }
            }
        }
        Ok(Self { times, states })
    }

    /// Grid `t0 + i·h`, one time per state.
    pub fn uniform(t0: f64, h: f64, states: Vec<State>) -> Self {
        let times = (0..states.len()).map(|i| t0 + i as f64 * h).collect();
        Self { times, states }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn into_states(self) -> Vec<State> {
        self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Values of one component along the grid.
    pub fn component(&self, j: usize) -> Vec<C64> {
        self.states.iter().map(|s| s[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid() {
        let t = Trajectory::uniform(1.0, 0.5, vec![vec![C64::new(0.0, 0.0)]; 3]);
        assert_eq!(t.times(), &[1.0, 1.5, 2.0]);
        assert_eq!(t.final_time(), 2.0);
    }

    #[test]
    fn rejects_bad_grids() {
        let s = vec![vec![C64::new(0.0, 0.0)]; 3];
        assert!(Trajectory::new(vec![0.0, 1.0], s.clone()).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0, 3.0], s.clone()).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0, 2.0], s).is_ok());
    }
}
