use std::path::Path;

use super::config::{parse_config, ExperimentConfig};

/// Canned experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Demo {
    /// Quadratic minimax, kappa = 10, PDGM against GDA.
    Fig1,
    /// l2-regularized least squares under the base dynamics on [1, 30].
    Fig2,
}

impl Demo {
    pub fn config_text(self, full_scale: bool, out_dir: &Path) -> String {
        let body = match (self, full_scale) {
            (Demo::Fig1, false) => "kind = quadratic-discrete\nn = 50\nm = 60\n",
            (Demo::Fig1, true) => "kind = quadratic-discrete\nn = 500\nm = 600\n",
            // already small in its original setting
            (Demo::Fig2, _) => "kind = l2-continuous\nn = 50\nm = 30\n",
        };
        let tail = match self {
            Demo::Fig1 => "kappa = 10\nseed = 1\nmethods = pdgm, gda\n",
            Demo::Fig2 => "mu = 2\nseed = 1\ndynamics = base\nt0 = 1\nt_end = 30\ntol = 1e-9\n",
        };
        format!("{body}{tail}out_dir = {}\n", out_dir.display())
    }

    pub fn config(self, full_scale: bool, out_dir: &Path) -> ExperimentConfig {
        parse_config(&self.config_text(full_scale, out_dir)).expect("demo configs are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demos_parse() {
        let cfg = Demo::Fig1.config(false, Path::new("o"));
        assert_eq!((cfg.n, cfg.m, cfg.kappa, cfg.seed), (50, 60, 10.0, 1));
        assert_eq!(Demo::Fig1.config(true, Path::new("o")).n, 500);
        let cfg = Demo::Fig2.config(false, Path::new("o"));
        assert_eq!(
            (cfg.n, cfg.m, cfg.mu, cfg.t0, cfg.t_end),
            (50, 30, 2.0, 1.0, 30.0)
        );
    }
}
