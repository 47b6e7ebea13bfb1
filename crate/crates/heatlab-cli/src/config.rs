//! Flat key = value configuration files for the experiment runner.
//!
//! Grammar: one `key = value` pair per line, `#` starts a comment, values
//! are scalars, names, or comma-separated lists. Unknown keys are rejected
//! so typos fail fast. The full key set is documented in the README.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("field `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("missing required field `{0}`")]
    Missing(String),

    #[error("unknown field `{0}`")]
    Unknown(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    KernelValidate,
    HjSweep,
    Contraction,
    Varadhan,
    SetLdp,
    VaradhanLemma,
    GammaDirac,
    TubeLdp,
    SchrodingerSweep,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::KernelValidate => "kernel_validate",
            Experiment::HjSweep => "hj_sweep",
            Experiment::Contraction => "contraction",
            Experiment::Varadhan => "varadhan",
            Experiment::SetLdp => "set_ldp",
            Experiment::VaradhanLemma => "varadhan_lemma",
            Experiment::GammaDirac => "gamma_dirac",
            Experiment::TubeLdp => "tube_ldp",
            Experiment::SchrodingerSweep => "schrodinger_sweep",
        }
    }

    pub fn parse(name: &str) -> Result<Experiment, ConfigError> {
        Ok(match name {
            "kernel_validate" => Experiment::KernelValidate,
            "hj_sweep" => Experiment::HjSweep,
            "contraction" => Experiment::Contraction,
            "varadhan" => Experiment::Varadhan,
            "set_ldp" => Experiment::SetLdp,
            "varadhan_lemma" => Experiment::VaradhanLemma,
            "gamma_dirac" => Experiment::GammaDirac,
            "tube_ldp" => Experiment::TubeLdp,
            "schrodinger_sweep" => Experiment::SchrodingerSweep,
            other => return Err(ConfigError::UnknownExperiment(other.to_string())),
        })
    }
}

#[derive(Debug, Clone)]
pub enum SpaceSpec {
    Interval {
        n: usize,
        length: f64,
    },
    Circle {
        n: usize,
        circumference: f64,
    },
    Graph {
        node_weights: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
        k_lower: f64,
    },
}

/// Field selector from the named catalogue.
#[derive(Debug, Clone)]
pub enum PhiSpec {
    Sin,
    Coordinate,
    /// well of the given depth at the given coordinate
    Well {
        at: f64,
        depth: f64,
    },
    /// explicit value table
    Table(Vec<f64>),
    Constant(f64),
}

/// Gaussian bump with a strictly positive floor: center, width, floor.
#[derive(Debug, Clone, Copy)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    pub floor: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub space: SpaceSpec,
    pub seed: u64,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub eps_list: Option<Vec<f64>>,
    pub phi: Option<PhiSpec>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub set_lo: Option<f64>,
    pub set_hi: Option<f64>,
    pub partition: Option<Vec<f64>>,
    pub path: Option<Vec<f64>>,
    pub r_mesh_multiple: Option<f64>,
    pub delta_frac: Option<f64>,
    pub bump0: Option<BumpSpec>,
    pub bump1: Option<BumpSpec>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub ck_times: Option<(f64, f64)>,
    pub oracle_times: Option<Vec<f64>>,
    /// canonicalized text for the bundle echo
    pub echo: String,
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(field: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim()
        .parse::<f64>()
        .map_err(|e| invalid(field, format!("not a number ({e})")))
}

fn parse_usize(field: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse::<usize>()
        .map_err(|e| invalid(field, format!("not a non-negative integer ({e})")))
}

fn parse_list(field: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|s| parse_f64(field, s))
        .collect::<Result<Vec<_>, _>>()
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "kind",
    "n",
    "length",
    "circumference",
    "node_weights",
    "edges",
    "k_lower",
    "seed",
    "t",
    "t_grid",
    "eps_list",
    "phi",
    "x",
    "y",
    "z",
    "set_lo",
    "set_hi",
    "partition",
    "path",
    "r_mesh_multiple",
    "delta_frac",
    "bump0",
    "bump1",
    "tol",
    "max_iter",
    "ck_s",
    "ck_t",
    "oracle_times",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            let key = k.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Unknown(key));
            }
            map.insert(key, v.trim().to_string());
        }

        let get = |key: &str| -> Option<&String> { map.get(key) };
        let require = |key: &str| -> Result<&String, ConfigError> {
            map.get(key).ok_or_else(|| ConfigError::Missing(key.into()))
        };

        let experiment = Experiment::parse(require("experiment")?)?;

        let kind = require("kind")?.as_str();
        let space = match kind {
            "interval" => SpaceSpec::Interval {
                n: parse_usize("n", require("n")?)?,
                length: parse_f64("length", require("length")?)?,
            },
            "circle" => SpaceSpec::Circle {
                n: parse_usize("n", require("n")?)?,
                circumference: parse_f64("circumference", require("circumference")?)?,
            },
            "graph" => {
                let node_weights = parse_list("node_weights", require("node_weights")?)?;
                let edges = require("edges")?
                    .split(',')
                    .map(|e| -> Result<(usize, usize, f64), ConfigError> {
                        // a-b:len
                        let (pair, len) = e
                            .trim()
                            .split_once(':')
                            .ok_or_else(|| invalid("edges", "expected `a-b:length`"))?;
                        let (a, b) = pair
                            .split_once('-')
                            .ok_or_else(|| invalid("edges", "expected `a-b:length`"))?;
                        Ok((
                            parse_usize("edges", a)?,
                            parse_usize("edges", b)?,
                            parse_f64("edges", len)?,
                        ))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                SpaceSpec::Graph {
                    node_weights,
                    edges,
                    k_lower: parse_f64("k_lower", require("k_lower")?)?,
                }
            }
            other => return Err(invalid("kind", format!("unknown space kind `{other}`"))),
        };

        let phi = match get("phi") {
            None => None,
            Some(v) => Some(match v.as_str() {
                "sin" => PhiSpec::Sin,
                "coordinate" => PhiSpec::Coordinate,
                w if w.starts_with("well:") => {
                    let rest = &w["well:".len()..];
                    let (at, depth) = rest
                        .split_once(',')
                        .ok_or_else(|| invalid("phi", "expected `well:at,depth`"))?;
                    PhiSpec::Well {
                        at: parse_f64("phi", at)?,
                        depth: parse_f64("phi", depth)?,
                    }
                }
                w if w.starts_with("table:") => {
                    PhiSpec::Table(parse_list("phi", &w["table:".len()..])?)
                }
                w if w.starts_with("constant:") => {
                    PhiSpec::Constant(parse_f64("phi", &w["constant:".len()..])?)
                }
                other => {
                    return Err(invalid(
                        "phi",
                        format!("unknown field selector `{other}` (sin | coordinate | well:at,depth | table:v0,v1,... | constant:c)"),
                    ))
                }
            }),
        };

        let parse_bump = |field: &str, v: &String| -> Result<BumpSpec, ConfigError> {
            let parts = parse_list(field, v)?;
            if parts.len() != 3 {
                return Err(invalid(field, "expected `center, width, floor`"));
            }
            Ok(BumpSpec {
                center: parts[0],
                width: parts[1],
                floor: parts[2],
            })
        };

        let config = ExperimentConfig {
            experiment,
            space,
            seed: match get("seed") {
                Some(v) => v
                    .parse::<u64>()
                    .map_err(|e| invalid("seed", format!("not a u64 ({e})")))?,
                None => 0,
            },
            t: get("t").map(|v| parse_f64("t", v)).transpose()?,
            t_grid: get("t_grid").map(|v| parse_list("t_grid", v)).transpose()?,
            eps_list: get("eps_list")
                .map(|v| parse_list("eps_list", v))
                .transpose()?,
            phi,
            x: get("x").map(|v| parse_f64("x", v)).transpose()?,
            y: get("y").map(|v| parse_f64("y", v)).transpose()?,
            z: get("z").map(|v| parse_f64("z", v)).transpose()?,
            set_lo: get("set_lo").map(|v| parse_f64("set_lo", v)).transpose()?,
            set_hi: get("set_hi").map(|v| parse_f64("set_hi", v)).transpose()?,
            partition: get("partition")
                .map(|v| parse_list("partition", v))
                .transpose()?,
            path: get("path").map(|v| parse_list("path", v)).transpose()?,
            r_mesh_multiple: get("r_mesh_multiple")
                .map(|v| parse_f64("r_mesh_multiple", v))
                .transpose()?,
            delta_frac: get("delta_frac")
                .map(|v| parse_f64("delta_frac", v))
                .transpose()?,
            bump0: get("bump0").map(|v| parse_bump("bump0", v)).transpose()?,
            bump1: get("bump1").map(|v| parse_bump("bump1", v)).transpose()?,
            tol: get("tol").map(|v| parse_f64("tol", v)).transpose()?,
            max_iter: get("max_iter")
                .map(|v| parse_usize("max_iter", v))
                .transpose()?,
            ck_times: match (get("ck_s"), get("ck_t")) {
                (Some(s), Some(t)) => Some((parse_f64("ck_s", s)?, parse_f64("ck_t", t)?)),
                (None, None) => None,
                _ => {
                    return Err(invalid(
                        "ck_s/ck_t",
                        "both or neither of ck_s, ck_t must be given",
                    ))
                }
            },
            oracle_times: get("oracle_times")
                .map(|v| parse_list("oracle_times", v))
                .transpose()?,
            echo: map
                .iter()
                .map(|(k, v)| format!("{k} = {v}\n"))
                .collect::<String>(),
        };

        // cheap validation that fails before any compute
        if let Some(t) = config.t {
            if !(t > 0.0) {
                return Err(invalid("t", "must be positive"));
            }
        }
        if let Some(grid) = &config.t_grid {
            if grid.len() < 3
                || grid.windows(2).any(|w| !(w[1] < w[0]))
                || grid[grid.len() - 1] <= 0.0
            {
                return Err(invalid(
                    "t_grid",
                    "need at least 3 strictly decreasing positive times",
                ));
            }
        }
        if let Some(eps) = &config.eps_list {
            if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) || eps[eps.len() - 1] <= 0.0
            {
                return Err(invalid(
                    "eps_list",
                    "need a strictly decreasing positive list",
                ));
            }
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_varadhan_config() {
        let cfg = ExperimentConfig::parse(
            "# comment\nexperiment = varadhan\nkind = interval\nn = 400\nlength = 1.0\n\
             x = 0.2\ny = 0.8  # target\nt_grid = 2e-2, 1e-2, 5e-3, 2.5e-3\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Varadhan);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.t_grid.unwrap().len(), 4);
        assert!(matches!(cfg.space, SpaceSpec::Interval { n: 400, .. }));
    }

    #[test]
    fn rejects_malformed_configs() {
        // t <= 0 names the field
        let err = ExperimentConfig::parse(
            "experiment = hj_sweep\nkind = circle\nn = 16\ncircumference = 6.28\nt = 0.0\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "t"));

        assert!(matches!(
            ExperimentConfig::parse("experiment = nope\nkind = interval\nn = 4\nlength = 1\n"),
            Err(ConfigError::UnknownExperiment(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = varadhan\nkind = interval\nn = 4\n"),
            Err(ConfigError::Missing(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse(
                "experiment = varadhan\nbogus_key = 1\nkind = interval\nn = 4\nlength = 1\n"
            ),
            Err(ConfigError::Unknown(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = varadhan\nkind = interval\nn = 4\nlength = 1\nt_grid = 1e-3, 2e-3, 3e-3\n"),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn parses_graph_and_phi_variants() {
        let cfg = ExperimentConfig::parse(
            "experiment = kernel_validate\nkind = graph\nnode_weights = 1.0, 1.0\n\
             edges = 0-1:1.0\nk_lower = 0.0\nphi = well:0.5,2.0\n",
        )
        .unwrap();
        match cfg.space {
            SpaceSpec::Graph { ref edges, .. } => assert_eq!(edges[0], (0, 1, 1.0)),
            _ => panic!(),
        }
        assert!(matches!(cfg.phi, Some(PhiSpec::Well { .. })));

        let cfg = ExperimentConfig::parse(
            "experiment = hj_sweep\nkind = circle\nn = 8\ncircumference = 1\nphi = table: 0,1,2,3,4,5,6,7\n",
        )
        .unwrap();
        assert!(matches!(cfg.phi, Some(PhiSpec::Table(ref v)) if v.len() == 8));
    }

    #[test]
    fn echo_is_canonical() {
        let a = ExperimentConfig::parse(
            "seed = 3\nexperiment = varadhan\nkind = interval\nn = 4\nlength = 1\n",
        )
        .unwrap();
        let b = ExperimentConfig::parse(
            "experiment = varadhan\nkind = interval\n# hi\nlength = 1\nn = 4\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(a.echo, b.echo);
    }
}
