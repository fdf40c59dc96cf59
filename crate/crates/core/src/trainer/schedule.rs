/// A value as a function of the global timestep `t` over a horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `clamp(start + slope * t / T, min, max)`.
    Linear { start: f64, slope: f64, min: f64, max: f64 },
}

impl Schedule {
    pub fn value(&self, t: u64, horizon: u64) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Linear {
                start,
                slope,
                min,
                max,
            } => {
                let progress = if horizon == 0 { 0.0 } else { t as f64 / horizon as f64 };
                (start + slope * progress).clamp(min, max)
            }
        }
    }
}

/// The four time-varying factors of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub horizon: u64,
    pub epsilon: Schedule,
    pub alpha: Schedule,
    pub beta: Schedule,
    pub gamma: Schedule,
}

impl Schedules {
    pub fn epsilon(&self, t: u64) -> f64 {
        self.epsilon.value(t, self.horizon)
    }

    pub fn alpha(&self, t: u64) -> f64 {
        self.alpha.value(t, self.horizon)
    }

    pub fn beta(&self, t: u64) -> f64 {
        self.beta.value(t, self.horizon)
    }

    pub fn gamma(&self, t: u64) -> f64 {
        self.gamma.value(t, self.horizon)
    }
}
