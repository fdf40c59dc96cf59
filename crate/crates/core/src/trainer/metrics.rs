use std::collections::VecDeque;

/// Episodes in the running mean.
pub const WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode number.
    pub episode: usize,
    /// Global timestep of the episode's last step.
    pub end_step: u64,
    pub ret: f64,
    pub length: u64,
    /// Mean return over the last (up to) 100 episodes, this one included.
    pub mean100: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub timestep: u64,
    pub mean100: Option<f64>,
    pub epsilon: f64,
    pub priority_min: f64,
    pub priority_mean: f64,
    pub priority_max: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecycleStats {
    pub stages: u64,
    pub recycled: u64,
    pub skipped: u64,
    /// Recycle-due steps that fell back to common replacement.
    pub fallbacks: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub eval_returns: Vec<f64>,
    /// Mean greedy evaluation return; absent when nothing was run.
    pub final_eval: Option<f64>,
    /// Greedy action of the final network at the first observation of a
    /// fresh episode.
    pub final_first_action: Option<usize>,
    pub train_steps: u64,
    pub recycle: RecycleStats,
}

impl RunMetrics {
    /// Episodes whose running mean covers a full window.
    fn full_windows(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter().filter(|e| e.episode >= WINDOW)
    }

    /// Best 100-episode mean; absent before the first full window.
    pub fn best_mean100(&self) -> Option<f64> {
        self.full_windows().map(|e| e.mean100).reduce(f64::max)
    }

    /// First episode end at which a full 100-episode mean reaches `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<u64> {
        self.full_windows().find(|e| e.mean100 >= threshold).map(|e| e.end_step)
    }

    pub fn episode_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.ret).collect()
    }

    /// Learning curve, one row per finished episode.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("timestep,episode,return,mean100,epsilon\n");
        for e in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.end_step, e.episode, e.ret, e.mean100, e.epsilon
            ));
        }
        out
    }
}

/// Running mean over the last `WINDOW` values.
#[derive(Debug, Default, Clone)]
pub(crate) struct Window {
    values: VecDeque<f64>,
}

impl Window {
    pub(crate) fn push(&mut self, v: f64) -> f64 {
        if self.values.len() == WINDOW {
            self.values.pop_front();
        }
        self.values.push_back(v);
        self.mean().expect("non-empty after push")
    }

    pub(crate) fn mean(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.values.iter().sum::<f64>() / self.values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(episode: usize, end_step: u64, ret: f64, mean100: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            end_step,
            ret,
            length: 1,
            mean100,
            epsilon: 0.5,
        }
    }

    #[test]
    fn window_keeps_last_hundred() {
        let mut w = Window::default();
        assert_eq!(w.mean(), None);
        for i in 0..150 {
            w.push(i as f64);
        }
        assert_eq!(w.mean(), Some((50..150).sum::<i32>() as f64 / 100.0));
    }

    #[test]
    fn threshold_and_best() {
        let m = RunMetrics {
            episodes: vec![
                record(1, 10, 50.0, 50.0),
                record(100, 20, 5.0, 5.0),
                record(101, 30, 20.0, 12.5),
                record(102, 35, 2.0, 9.0),
            ],
            ..RunMetrics::default()
        };
        // The partial window of episode 1 never counts.
        assert_eq!(m.steps_to_threshold(12.0), Some(30));
        assert_eq!(m.steps_to_threshold(13.0), None);
        assert_eq!(m.best_mean100(), Some(12.5));
        let csv = m.curve_csv();
        assert!(csv.starts_with("timestep,episode,return,mean100,epsilon\n10,1,50,50,0.5\n"));
        assert_eq!(RunMetrics::default().best_mean100(), None);
    }
}
