use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, AttackKind};
use crate::cluster::Metric;
use crate::data::{load_idx, synth_dataset, Dataset};
use crate::defenses::{MarsParams, Selection};
use crate::energy::LayerPolicy;
use crate::error::{Error, Result};
use crate::nn::{Architecture, TrainConfig};
use crate::rng::{derive, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Seeded synthetic grid patterns; the test split uses its own stream.
    Synth {
        classes: usize,
        per_class: usize,
        test_per_class: usize,
        height: usize,
        width: usize,
    },
    /// IDX files, e.g. MNIST.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synth {
            classes: 10,
            per_class: 300,
            test_per_class: 100,
            height: 16,
            width: 16,
        }
    }
}

impl DatasetSpec {
    /// `(train, test)`.
    pub fn load(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSpec::Synth {
                classes,
                per_class,
                test_per_class,
                height,
                width,
            } => Ok((
                synth_dataset(derive(seed, &[stream::DATA, 0]), *classes, *per_class, *height, *width)?,
                synth_dataset(
                    derive(seed, &[stream::DATA, 1]),
                    *classes,
                    *test_per_class,
                    *height,
                    *width,
                )?,
            )),
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => Ok((
                load_idx(train_images, train_labels)?,
                load_idx(test_images, test_labels)?,
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    FedAvg,
    #[default]
    Mars,
    /// MARS with majority cluster selection.
    MarsStar,
    MultiKrum,
    NormClip,
    FedClp,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::FedAvg => "fed_avg",
            DefenseKind::Mars => "mars",
            DefenseKind::MarsStar => "mars_star",
            DefenseKind::MultiKrum => "multi_krum",
            DefenseKind::NormClip => "norm_clip",
            DefenseKind::FedClp => "fed_clp",
        }
    }

    /// Whether the rule excludes clients, i.e. whether detection rates mean
    /// anything for it.
    pub fn selects(self) -> bool {
        matches!(self, DefenseKind::Mars | DefenseKind::MarsStar | DefenseKind::MultiKrum)
    }
}

impl fmt::Display for DefenseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefenseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fed_avg" => Ok(DefenseKind::FedAvg),
            "mars" => Ok(DefenseKind::Mars),
            "mars_star" => Ok(DefenseKind::MarsStar),
            "multi_krum" => Ok(DefenseKind::MultiKrum),
            "norm_clip" => Ok(DefenseKind::NormClip),
            "fed_clp" => Ok(DefenseKind::FedClp),
            other => Err(Error::Config(format!("unknown defense '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub kind: DefenseKind,
    pub kappa: f64,
    pub epsilon: f64,
    pub layer_policy: LayerPolicy,
    pub metric: Metric,
    /// Multi-Krum's assumed attacker count; defaults to attackers per round.
    pub krum_f: Option<usize>,
    /// Multi-Krum's accepted count; defaults to `n − f`.
    pub krum_m: Option<usize>,
    /// Norm-clipping bound; calibrated from an attack-free round when unset.
    pub clip_bound: Option<f64>,
    /// FedCLP prunes channels above `mean + u·std`.
    pub clp_threshold: f64,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            kind: DefenseKind::Mars,
            kappa: 5.0,
            epsilon: 0.03,
            layer_policy: LayerPolicy::ConvBnOnly,
            metric: Metric::Wasserstein,
            krum_f: None,
            krum_m: None,
            clip_bound: None,
            clp_threshold: 3.0,
        }
    }
}

impl DefenseConfig {
    pub fn mars_params(&self) -> MarsParams {
        MarsParams {
            kappa: self.kappa,
            epsilon: self.epsilon,
            layer_policy: self.layer_policy,
            selection: if self.kind == DefenseKind::MarsStar {
                Selection::Majority
            } else {
                Selection::CenterNorm
            },
            metric: self.metric,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub total_clients: usize,
    pub attackers_total: usize,
    pub clients_per_round: usize,
    pub attackers_per_round: usize,
    pub rounds: usize,
    /// Dirichlet concentration of the client split.
    pub alpha: f64,
    pub dataset: DatasetSpec,
    pub architecture: Architecture,
    pub local_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
    /// Where `rounds.csv` and `report.json` go.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_clients: 100,
            attackers_total: 20,
            clients_per_round: 20,
            attackers_per_round: 4,
            rounds: 15,
            alpha: 0.9,
            dataset: DatasetSpec::default(),
            architecture: Architecture::CnnSmall,
            local_epochs: 2,
            lr: 0.02,
            batch_size: 4,
            attack: AttackConfig::default(),
            defense: DefenseConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// The small recipe used throughout the tests: synthetic 16×16 data,
    /// cnn-small, 20 clients of which 4 attack, all participating each round.
    pub fn desk_scale() -> Self {
        Self {
            total_clients: 20,
            attackers_total: 4,
            clients_per_round: 20,
            attackers_per_round: 4,
            ..Self::default()
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.local_epochs,
            lr: self.lr,
            batch_size: self.batch_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.total_clients == 0 || self.clients_per_round == 0 {
            return fail("client counts must be positive".into());
        }
        if self.clients_per_round > self.total_clients {
            return fail(format!(
                "clients_per_round {} exceeds total_clients {}",
                self.clients_per_round, self.total_clients
            ));
        }
        if self.attackers_total > self.total_clients {
            return fail(format!(
                "attackers_total {} exceeds total_clients {}",
                self.attackers_total, self.total_clients
            ));
        }
        if self.attackers_per_round > self.attackers_total.min(self.clients_per_round) {
            return fail(format!(
                "attackers_per_round {} exceeds min(attackers_total, clients_per_round) = {}",
                self.attackers_per_round,
                self.attackers_total.min(self.clients_per_round)
            ));
        }
        let benign_total = self.total_clients - self.attackers_total;
        if self.clients_per_round - self.attackers_per_round > benign_total {
            return fail(format!(
                "a round needs {} benign clients but only {benign_total} exist",
                self.clients_per_round - self.attackers_per_round
            ));
        }
        if self.attack.kind != AttackKind::None && self.attackers_per_round == 0 {
            return fail(format!("attack {} with zero attackers per round", self.attack.kind));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        self.train_config().validate()?;
        self.attack.validate()?;
        let d = &self.defense;
        if !(d.kappa > 0.0 && d.kappa <= 100.0) {
            return fail(format!("kappa must lie in (0, 100], got {}", d.kappa));
        }
        if !(d.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", d.epsilon));
        }
        if !(d.clp_threshold > 0.0) {
            return fail(format!("clp_threshold must be positive, got {}", d.clp_threshold));
        }
        if let Some(c) = d.clip_bound {
            if !(c > 0.0) {
                return fail(format!("clip_bound must be positive, got {c}"));
            }
        }
        if d.kind == DefenseKind::MultiKrum {
            let f = d.krum_f.unwrap_or(self.attackers_per_round);
            let m = d.krum_m.unwrap_or(self.clients_per_round.saturating_sub(f));
            if self.clients_per_round < f + 3 || m == 0 || m > self.clients_per_round {
                return fail(format!(
                    "multi-krum needs n - f - 2 >= 1 and 1 <= m <= n, got n = {}, f = {f}, m = {m}",
                    self.clients_per_round
                ));
            }
        }
        if let DatasetSpec::Synth { classes, .. } = self.dataset {
            self.attack
                .trigger
                .validate(usize::MAX, usize::MAX, classes)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Sets one field from its command-line spelling. Accepts the CLI
    /// override names plus the count and training fields.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(name: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for {name}")))
        }
        match name {
            "seed" => self.seed = parse(name, value)?,
            "rounds" => self.rounds = parse(name, value)?,
            "alpha" => self.alpha = parse(name, value)?,
            "total_clients" => self.total_clients = parse(name, value)?,
            "attackers_total" => self.attackers_total = parse(name, value)?,
            "clients_per_round" => self.clients_per_round = parse(name, value)?,
            "attackers_per_round" => self.attackers_per_round = parse(name, value)?,
            "local_epochs" => self.local_epochs = parse(name, value)?,
            "lr" => self.lr = parse(name, value)?,
            "batch_size" => self.batch_size = parse(name, value)?,
            "architecture" => self.architecture = value.parse()?,
            "defense" => self.defense.kind = value.parse()?,
            "kappa" => self.defense.kappa = parse(name, value)?,
            "epsilon" => self.defense.epsilon = parse(name, value)?,
            "layer_policy" => self.defense.layer_policy = value.parse()?,
            "metric" => self.defense.metric = value.parse()?,
            "attack" => self.attack.kind = value.parse()?,
            "lambda" => self.attack.lambda = parse(name, value)?,
            "poison_fraction" => self.attack.poison_fraction = parse(name, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
        }
        Ok(())
    }
}
