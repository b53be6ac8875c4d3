/// Adamax: Adam with the second moment replaced by an exponentially
/// weighted infinity norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Adamax {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

impl Adamax {
    pub fn new(shapes: &[usize]) -> Self {
        Adamax {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            u: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every tensor in `params` with the matching gradient.
    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: &[&[f64]], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "tensor count changed");
        self.step += 1;
        let bias = 1.0 - self.beta1.powi(self.step as i32);
        let rate = lr / bias;
        for (((p, g), m), u) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.u) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                u[i] = (self.beta2 * u[i]).max(g[i].abs());
                p[i] -= rate * m[i] / (u[i] + self.eps);
            }
        }
    }
}

/// Linear warmup to `base`, then a constant rate scaled by every decay
/// applied so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup_steps: usize,
    pub factor: f64,
}

impl LrSchedule {
    pub fn new(base: f64, warmup_steps: usize) -> Self {
        LrSchedule {
            base,
            warmup_steps,
            factor: 1.0,
        }
    }

    /// Rate for the 1-based optimizer step `step`.
    pub fn rate(&self, step: usize) -> f64 {
        let warm = if self.warmup_steps == 0 || step >= self.warmup_steps {
            1.0
        } else {
            step as f64 / self.warmup_steps as f64
        };
        self.base * self.factor * warm
    }

    pub fn decay(&mut self, by: f64) {
        self.factor *= by;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_moves_by_lr() {
        // with bias correction, the first step is lr * sign(g)
        let mut opt = Adamax::new(&[3]);
        let mut p = [1.0, 1.0, 1.0];
        opt.update(vec![&mut p[..]], &[&[0.5, -2.0, 0.0]], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] - 1.1).abs() < 1e-6);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn minimises_quadratic() {
        let mut opt = Adamax::new(&[2]);
        let mut p = vec![3.0, -4.0];
        for _ in 0..2000 {
            let g = [2.0 * p[0], 2.0 * p[1]];
            opt.update(vec![&mut p[..]], &[&g], 0.01);
        }
        assert!(p[0].abs() < 0.05 && p[1].abs() < 0.05, "{p:?}");
    }

    proptest! {
        #[test]
        fn warmup_is_linear(base in 1e-6f64..1.0, warm in 1usize..500, s in 0usize..500) {
            let sched = LrSchedule::new(base, warm);
            let s = s.min(warm);
            prop_assert!((sched.rate(s) - base * s as f64 / warm as f64).abs() <= 1e-15 * base.max(1.0));
        }
    }

    #[test]
    fn decay_compounds() {
        let mut s = LrSchedule::new(1.0, 0);
        s.decay(0.4);
        s.decay(0.4);
        assert!((s.rate(10) - 0.16).abs() < 1e-15);
    }
}
