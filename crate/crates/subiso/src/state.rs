//! Mutable state of one rounding walk.

/// The walk's current point `x in [0,1]^n` with alive/frozen bookkeeping.
///
/// Invariants maintained by construction:
/// - every coordinate not in `alive` is exactly 0.0 or 1.0 and recorded in
///   `frozen_values`;
/// - every alive coordinate lies strictly inside
///   `(integrality_tol, 1 - integrality_tol)`;
/// - the alive set only shrinks.
#[derive(Debug, Clone)]
pub struct FractionalState {
    x: Vec<f64>,
    alive: Vec<usize>,
    frozen_values: Vec<Option<bool>>,
    iteration: usize,
    integrality_tol: f64,
}

impl FractionalState {
    /// Start a walk at `x0`, snapping coordinates within `integrality_tol`
    /// of 0 or 1 and freezing them.
    pub fn new(x0: &[f64], integrality_tol: f64) -> Self {
        assert!(x0.iter().all(|v| v.is_finite()), "x0 must be finite");
        let mut state = Self {
            x: x0.to_vec(),
            alive: Vec::new(),
            frozen_values: vec![None; x0.len()],
            iteration: 0,
            integrality_tol,
        };
        for i in 0..x0.len() {
            let v = state.x[i];
            assert!(
                (-integrality_tol..=1.0 + integrality_tol).contains(&v),
                "x0[{i}] = {v} outside [0,1]"
            );
            if v <= integrality_tol {
                state.x[i] = 0.0;
                state.frozen_values[i] = Some(false);
            } else if v >= 1.0 - integrality_tol {
                state.x[i] = 1.0;
                state.frozen_values[i] = Some(true);
            } else {
                state.alive.push(i);
            }
        }
        state
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Number of alive (fractional) coordinates, `n_k`.
    pub fn n_alive(&self) -> usize {
        self.alive.len()
    }

    /// Alive coordinate indices, ascending.
    pub fn alive(&self) -> &[usize] {
        &self.alive
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.frozen_values[i].is_none()
    }

    /// Current full vector; frozen entries are exactly 0.0 or 1.0.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Current values of the alive coordinates, in alive order.
    pub fn alive_x(&self) -> Vec<f64> {
        self.alive.iter().map(|&i| self.x[i]).collect()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn integrality_tol(&self) -> f64 {
        self.integrality_tol
    }

    pub fn bump_iteration(&mut self) {
        self.iteration += 1;
    }

    /// Frozen value of coordinate `i`, if frozen.
    pub fn frozen_value(&self, i: usize) -> Option<bool> {
        self.frozen_values[i]
    }

    /// Force an alive coordinate to exactly 0 and freeze it.
    pub fn force_zero(&mut self, i: usize) {
        assert!(self.is_alive(i), "force_zero on non-alive coordinate {i}");
        self.x[i] = 0.0;
        self.frozen_values[i] = Some(false);
        self.alive.retain(|&j| j != i);
    }

    /// Move the alive coordinates by `gamma * dir` (with `dir` given in alive
    /// order), snap anything that reached a boundary, and return the newly
    /// frozen coordinates as `(index, value)` pairs.
    ///
    /// Panics if the step leaves `[0,1]` by more than the snapping tolerance;
    /// callers are responsible for choosing a legal `gamma`.
    pub fn apply_step(&mut self, dir: &[f64], gamma: f64) -> Vec<(usize, bool)> {
        assert_eq!(dir.len(), self.alive.len());
        let tol = self.integrality_tol;
        for (k, &i) in self.alive.iter().enumerate() {
            let v = self.x[i] + gamma * dir[k];
            assert!(
                (-tol..=1.0 + tol).contains(&v),
                "step left the cube at coordinate {i}: {v}"
            );
            self.x[i] = v;
        }
        let mut frozen = Vec::new();
        self.alive.retain(|&i| {
            let v = self.x[i];
            if v <= tol {
                self.x[i] = 0.0;
                self.frozen_values[i] = Some(false);
                frozen.push((i, false));
                false
            } else if v >= 1.0 - tol {
                self.x[i] = 1.0;
                self.frozen_values[i] = Some(true);
                frozen.push((i, true));
                false
            } else {
                true
            }
        });
        frozen
    }

    /// Final 0-1 vector. Panics if any coordinate is still alive.
    pub fn integral_solution(&self) -> Vec<u8> {
        assert!(self.alive.is_empty(), "solution still has alive coordinates");
        self.frozen_values
            .iter()
            .map(|v| match v {
                Some(true) => 1,
                Some(false) => 0,
                None => unreachable!(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snaps_near_integral_coordinates() {
        let s = FractionalState::new(&[0.0, 1.0, 0.5, 1e-12, 1.0 - 1e-12], 1e-9);
        assert_eq!(s.alive(), &[2]);
        assert_eq!(s.x()[3], 0.0);
        assert_eq!(s.x()[4], 1.0);
        assert_eq!(s.frozen_value(1), Some(true));
        assert_eq!(s.frozen_value(3), Some(false));
    }

    #[test]
    fn apply_step_freezes_boundary_hits() {
        let mut s = FractionalState::new(&[0.5, 0.25], 1e-9);
        let frozen = s.apply_step(&[1.0, -0.5], 0.5);
        assert_eq!(frozen, vec![(0, true), (1, false)]);
        assert_eq!(s.x()[0], 1.0);
        assert_eq!(s.x()[1], 0.0);
        assert_eq!(s.n_alive(), 0);
        assert_eq!(s.integral_solution(), vec![1, 0]);
    }

    #[test]
    fn force_zero_freezes() {
        let mut s = FractionalState::new(&[0.5, 0.5], 1e-9);
        s.force_zero(1);
        assert_eq!(s.alive(), &[0]);
        assert_eq!(s.frozen_value(1), Some(false));
        assert_eq!(s.x()[1], 0.0);
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn rejects_out_of_range_input() {
        let _ = FractionalState::new(&[1.5], 1e-9);
    }
}
