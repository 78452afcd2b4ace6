//! Experiment configuration, read from a single JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use upca_core::{
    DpcpConfig, Error, OutlierModel, RestorationMethod, RestoreOptions, Result, Snr, Stage1Method,
};

/// Noise level of a grid: a finite dB value or the string `"noiseless"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrSetting(pub Snr);

impl Serialize for SnrSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Snr::Noiseless => s.serialize_str("noiseless"),
            Snr::Db(db) => s.serialize_f64(db),
        }
    }
}

impl<'de> Deserialize<'de> for SnrSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Db(f64),
            Label(String),
        }
        match Option::<Raw>::deserialize(d)? {
            None => Ok(SnrSetting(Snr::Noiseless)),
            Some(Raw::Db(db)) => Ok(SnrSetting(Snr::Db(db))),
            Some(Raw::Label(s)) if s.eq_ignore_ascii_case("noiseless") => {
                Ok(SnrSetting(Snr::Noiseless))
            }
            Some(Raw::Label(s)) => Err(serde::de::Error::custom(format!(
                "snr_db must be a number or \"noiseless\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub m: usize,
    pub n: usize,
    pub ranks: Vec<usize>,
    pub outlier_ratios: Vec<f64>,
    pub alphas: Vec<f64>,
    pub snr_db: SnrSetting,
    pub trials: u32,
    pub master_seed: u64,
    pub stage1_method: Stage1Method,
    pub stage2_method: RestorationMethod,
    pub outputs: PathBuf,
    pub outlier_model: OutlierModel,
    /// Write measured wall times; `false` writes 0 so reruns are byte-identical.
    pub record_timing: bool,
    /// Also render one PGM heatmap of mean θ_max per alpha.
    pub heatmap: bool,
    pub dpcp: DpcpConfig,
    pub stage2: RestoreOptions,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            m: 50,
            n: 500,
            ranks: vec![1, 5, 10, 25, 40, 49],
            outlier_ratios: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            alphas: vec![0.1],
            snr_db: SnrSetting(Snr::Noiseless),
            trials: 10,
            master_seed: 0,
            stage1_method: Stage1Method::DpcpIrls,
            stage2_method: RestorationMethod::Lsrf,
            outputs: PathBuf::from("out"),
            outlier_model: OutlierModel::Permuted,
            record_timing: true,
            heatmap: false,
            dpcp: DpcpConfig::default(),
            stage2: RestoreOptions::default(),
        }
    }
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Self = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m < 2 || self.n == 0 {
            return bad(format!(
                "need m >= 2 and n >= 1, got m = {}, n = {}",
                self.m, self.n
            ));
        }
        if self.ranks.is_empty() || self.outlier_ratios.is_empty() || self.alphas.is_empty() {
            return bad("ranks, outlier_ratios and alphas must be nonempty".into());
        }
        if let Some(r) = self.ranks.iter().find(|&&r| r == 0 || r >= self.m) {
            return bad(format!("rank {r} outside [1, m)"));
        }
        if let Some(p) = self
            .outlier_ratios
            .iter()
            .find(|p| !(0.0..1.0).contains(*p))
        {
            return bad(format!("outlier ratio {p} outside [0, 1)"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        self.dpcp.validate()
    }

    pub fn n_out(&self, ratio: f64) -> usize {
        (ratio * self.n as f64).round() as usize
    }

    pub fn cell_count(&self) -> usize {
        self.ranks.len() * self.outlier_ratios.len() * self.alphas.len() * self.trials as usize
    }
}
