//! Sailing gridworld: navigate to the bottom-right corner under a shifting
//! wind. The state is (cell, wind direction); eight move actions, with action
//! 0 pointing north (directly away from the goal, so an untrained greedy
//! policy starts badly). Sailing into a headwind stalls, any other move
//! succeeds up to a seeded slip probability, and the wind drifts at random.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Compass deltas (dx, dy), index 0 = North. y grows southward.
const DIRS: [(i64, i64); 8] = [
    (0, -1),  // N
    (1, -1),  // NE
    (1, 0),   // E
    (1, 1),   // SE
    (0, 1),   // S
    (-1, 1),  // SW
    (-1, 0),  // W
    (-1, -1), // NW
];

pub const NUM_ACTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SailingInstance {
    pub width: usize,
    pub height: usize,
    /// Number of wind directions folded into the state (1..=8).
    pub wind_count: usize,
    /// Probability the wind switches to a different direction each step.
    pub wind_change: f64,
    pub gamma: f64,
}

impl SailingInstance {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidConfig("grid must be at least 2x2".into()));
        }
        if !(1..=NUM_ACTIONS).contains(&self.wind_count) {
            return Err(Error::InvalidConfig(format!(
                "wind_count must lie in 1..=8, got {}",
                self.wind_count
            )));
        }
        if !(0.0..=1.0).contains(&self.wind_change) {
            return Err(Error::InvalidConfig(format!(
                "wind_change must lie in [0,1], got {}",
                self.wind_change
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidGamma(self.gamma));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height * self.wind_count
    }

    pub fn state_of(&self, x: usize, y: usize, wind: usize) -> usize {
        (y * self.width + x) * self.wind_count + wind
    }

    /// (x, y, wind) of a state index.
    pub fn unpack(&self, s: usize) -> (usize, usize, usize) {
        let wind = s % self.wind_count;
        let cell = s / self.wind_count;
        (cell % self.width, cell / self.width, wind)
    }

    /// Goal cell: bottom-right corner.
    pub fn goal_cell(&self) -> (usize, usize) {
        (self.width - 1, self.height - 1)
    }

    /// Compass direction the wind blows from, spread over the 8 compass
    /// points.
    fn wind_dir(&self, wind: usize) -> usize {
        wind * NUM_ACTIONS / self.wind_count
    }
}

/// Build the sailing MDP. Slip probabilities are seeded per (cell, wind,
/// action) in [0, 0.2]; identical seeds give identical models.
pub fn make_sailing(inst: &SailingInstance, seed: u64) -> Result<Mdp> {
    inst.validate()?;
    let n = inst.num_states();
    let (gx, gy) = inst.goal_cell();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut transition = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    for s in 0..n {
        let (x, y, wind) = inst.unpack(s);
        let at_goal = (x, y) == (gx, gy);
        let mut t_rows = Vec::with_capacity(NUM_ACTIONS);
        let mut r_rows = Vec::with_capacity(NUM_ACTIONS);
        for a in 0..NUM_ACTIONS {
            // advance the RNG uniformly so the layout is stable per seed
            let slip: f64 = rng.random::<f64>() * 0.2;
            let mut t = vec![0.0; n];
            let mut r = vec![0.0; n];
            if at_goal {
                t[s] = 1.0;
            } else {
                // sailing straight at the direction the wind blows from stalls
                let headwind = a == inst.wind_dir(wind);
                let (dx, dy) = DIRS[a];
                let nx = (x as i64 + dx).clamp(0, inst.width as i64 - 1) as usize;
                let ny = (y as i64 + dy).clamp(0, inst.height as i64 - 1) as usize;
                let (tx, ty) = if headwind { (x, y) } else { (nx, ny) };
                let move_p = if (tx, ty) == (x, y) { 0.0 } else { 1.0 - slip };
                for w2 in 0..inst.wind_count {
                    let pw = if inst.wind_count == 1 {
                        1.0
                    } else if w2 == wind {
                        1.0 - inst.wind_change
                    } else {
                        inst.wind_change / (inst.wind_count - 1) as f64
                    };
                    if pw == 0.0 {
                        continue;
                    }
                    t[inst.state_of(tx, ty, w2)] += pw * move_p;
                    t[inst.state_of(x, y, w2)] += pw * (1.0 - move_p);
                }
                if (tx, ty) == (gx, gy) {
                    for w2 in 0..inst.wind_count {
                        r[inst.state_of(tx, ty, w2)] = 1.0;
                    }
                }
            }
            let resid = 1.0 - t.iter().sum::<f64>();
            if resid != 0.0 {
                let imax = (0..n).max_by(|&i, &j| t[i].total_cmp(&t[j])).unwrap();
                t[imax] += resid;
            }
            t_rows.push(t);
            r_rows.push(r);
        }
        transition.push(t_rows);
        reward.push(r_rows);
    }
    Mdp::new(inst.gamma, transition, reward)
}
