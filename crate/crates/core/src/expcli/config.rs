use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ValidateKernels,
    ValidateGirsanov,
    MaxLaw,
    TailFit,
    ConstantTwoRoute,
    QuotientMoments,
    ZetaScaling,
    PerturbedG,
    LocalityGap,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::ValidateKernels,
        Experiment::ValidateGirsanov,
        Experiment::MaxLaw,
        Experiment::TailFit,
        Experiment::ConstantTwoRoute,
        Experiment::QuotientMoments,
        Experiment::ZetaScaling,
        Experiment::PerturbedG,
        Experiment::LocalityGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ValidateKernels => "validate-kernels",
            Experiment::ValidateGirsanov => "validate-girsanov",
            Experiment::MaxLaw => "max-law",
            Experiment::TailFit => "tail-fit",
            Experiment::ConstantTwoRoute => "constant-two-route",
            Experiment::QuotientMoments => "quotient-moments",
            Experiment::ZetaScaling => "zeta-scaling",
            Experiment::PerturbedG => "perturbed-g",
            Experiment::LocalityGap => "locality-gap",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_bulk: usize,
    pub n_bdy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSpec {
    pub t_max: f64,
    pub ds: f64,
    pub n_theta: usize,
    pub eps: f64,
}

/// Experiment-specific knobs; every experiment reads only its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Couplings for the multi-γ checks (Girsanov, maximum law, prefactor).
    pub gammas: Vec<f64>,
    /// Ratios `t / C` for the prefactor identity.
    pub prefactor_ratios: Vec<f64>,
    /// Minimal tilted exceedances at the top of the fit window.
    pub min_exceedances: usize,
    /// Allowed `|fitted exponent − 2/γ²|`.
    pub exponent_tol: f64,
    /// Allowed relative gap between the two constants.
    pub constant_tol: f64,
    /// Radius and moment order of the radial-vs-grid law check.
    pub law_rho: f64,
    pub law_moment: f64,
    pub law_grid: GridSpec,
    pub law_tol: f64,
    /// Grid replicas for the law check.
    pub law_n: usize,
    /// Relative tolerance on the neglected radial tail.
    pub trunc_tol: f64,
    /// Quotient `bulk^p / bdy^q` orders.
    pub quotient_p: f64,
    pub quotient_q: f64,
    /// Cut-offs `x` for the supremum over `I(x)`.
    pub cutoffs: Vec<f64>,
    pub rhos: Vec<f64>,
    pub slope_tol: f64,
    /// Constant `g ≡ c` of the perturbed kernel.
    pub perturbation_c: f64,
    pub ratio_tol: f64,
    /// Localization point and radius (as a fraction of `r`) of the gap.
    pub v: f64,
    pub gap_rho_frac: f64,
    pub gap_quantiles: Vec<f64>,
    /// Couplings for the feasibility witnesses.
    pub feasibility_gammas: Vec<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            gammas: vec![1.0, 1.5],
            prefactor_ratios: vec![2.0, 10.0],
            min_exceedances: 50,
            exponent_tol: 0.15,
            constant_tol: 0.3,
            law_rho: 0.25,
            law_moment: 0.3,
            law_grid: GridSpec { n_bulk: 32, n_bdy: 64 },
            law_tol: 0.15,
            law_n: 20_000,
            trunc_tol: 0.1,
            quotient_p: 1.0,
            quotient_q: 1.0,
            cutoffs: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            rhos: vec![0.05, 0.1, 0.2, 0.4],
            slope_tol: 0.2,
            perturbation_c: 0.5,
            ratio_tol: 0.25,
            v: 0.0,
            gap_rho_frac: 0.25,
            gap_quantiles: vec![0.5, 0.9, 0.99],
            feasibility_gammas: vec![0.5, 1.0, std::f64::consts::SQRT_2, 1.8],
        }
    }
}

/// Everything an experiment reads. Serialized in full into every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub gamma: f64,
    pub r: f64,
    pub grid: GridSpec,
    pub radial: RadialSpec,
    /// Replicas (grid) or joint samples (radial).
    pub n: usize,
    pub seed: u64,
    /// Thresholds for survival curves; empty means a log grid chosen from a
    /// pilot run.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub options: Options,
}

impl ExperimentConfig {
    /// Defaults sized for a desk run of `experiment`.
    pub fn default_for(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            gamma: 1.0,
            r: 0.5,
            grid: GridSpec { n_bulk: 16, n_bdy: 32 },
            radial: RadialSpec { t_max: 30.0, ds: 0.1, n_theta: 32, eps: 1e-3 },
            n: 100_000,
            seed: 1,
            t_grid: Vec::new(),
            output_dir: PathBuf::from("out").join(experiment.name()),
            options: Options::default(),
        };
        match experiment {
            Experiment::ValidateGirsanov => c.grid = GridSpec { n_bulk: 6, n_bdy: 12 },
            Experiment::MaxLaw => {
                c.n = 1_000_000;
                c.options.gammas = vec![1.0, std::f64::consts::SQRT_2];
            }
            Experiment::QuotientMoments => c.n = 20_000,
            _ => {}
        }
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return bad(format!("gamma must lie in (0, 2), got {}", self.gamma));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r must be positive, got {}", self.r));
        }
        if self.grid.n_bulk == 0 || self.grid.n_bdy == 0 {
            return bad("grid resolutions must be positive".into());
        }
        let rs = &self.radial;
        if !(rs.ds > 0.0 && rs.t_max >= rs.ds && rs.eps > 0.0 && rs.n_theta >= 2) {
            return bad(format!("bad radial discretization {rs:?}"));
        }
        if self.n < 2 {
            return bad("n must be at least 2".into());
        }
        if self.t_grid.iter().any(|&t| !(t > 0.0)) || self.t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("t_grid must be positive and increasing".into());
        }
        let o = &self.options;
        if o.gammas.iter().chain(&o.feasibility_gammas).any(|&g| !(g > 0.0 && g < 2.0)) {
            return bad("all couplings must lie in (0, 2)".into());
        }
        if o.rhos.iter().any(|&r| !(r > 0.0)) || !(o.law_rho > 0.0 && o.law_rho < 1.0) {
            return bad("radii must be positive (law_rho below 1)".into());
        }
        if o.law_n < 2 {
            return bad("law_n must be at least 2".into());
        }
        if o.gap_quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return bad("gap quantiles must lie in (0, 1)".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("tail".parse::<Experiment>().is_err());
    }

    #[test]
    fn toml_round_trip() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::default_for(e);
            let s = c.to_toml_string().unwrap();
            let back = ExperimentConfig::from_toml_str(&s).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn partial_options_take_defaults() {
        let mut c = ExperimentConfig::default_for(Experiment::TailFit);
        let mut s = c.to_toml_string().unwrap();
        let cut = s.find("[options]").unwrap();
        s.truncate(cut);
        s.push_str("[options]\nexponent_tol = 0.2\n");
        c.options.exponent_tol = 0.2;
        assert_eq!(ExperimentConfig::from_toml_str(&s).unwrap(), c);
    }

    #[test]
    fn invalid_configs() {
        let mut c = ExperimentConfig::default_for(Experiment::TailFit);
        c.gamma = 2.0;
        assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))));
        let s = "experiment = \"nope\"";
        assert!(matches!(ExperimentConfig::from_toml_str(s), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default_for(Experiment::TailFit);
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
