//! JSON experiment configuration.
//!
//! Parsing is strict: unknown keys are rejected, and parse failures carry a
//! JSON pointer to the offending key. Scalars promote to 1x1 matrices (or
//! 1-vectors) so scalar teams read naturally; proper matrices are written as
//! row-major nested arrays; a per-stage sequence is written as
//! `{"varying": [stage1, stage2, ...]}`.

use nalgebra::{DMatrix, DVector};
use serde::de::value::MapAccessDeserializer;
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer};

use crate::linalg::from_nested;
use crate::model::{
    CostModel, Dist, Horizon, InitialState, MatSeq, NoiseModel, SystemModel,
};
use crate::{Error, Result};

/// A fully validated experiment: structurally sound model and cost plus run
/// parameters. Assumption checks still go through [`crate::model::validate`].
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: SystemModel,
    pub cost: CostModel,
    pub seed: u64,
    pub num_runs: usize,
}

/// Parse and structurally validate a JSON experiment description.
pub fn parse_config(json: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    raw.build()
}

/// Parse a config file from disk.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            serde_path_to_error::Segment::Map { key } => {
                out.push('/');
                out.push_str(key);
            }
            serde_path_to_error::Segment::Seq { index } => {
                out.push('/');
                out.push_str(&index.to_string());
            }
            serde_path_to_error::Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            // A lone unknown segment means the error has no usable path
            // (e.g. a syntax error before any field was entered).
            serde_path_to_error::Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    cost: RawCost,
    n: usize,
    horizon: RawHorizon,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_num_runs")]
    num_runs: usize,
}

fn default_num_runs() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "A0")]
    a0: MatrixSpec,
    #[serde(rename = "B0")]
    b0: MatrixSpec,
    #[serde(rename = "D0")]
    d0: MatrixSpec,
    #[serde(rename = "A")]
    a: MatrixSpec,
    #[serde(rename = "B")]
    b: MatrixSpec,
    #[serde(rename = "D")]
    d: MatrixSpec,
    #[serde(rename = "E")]
    e: MatrixSpec,
    noise: RawNoise,
    x0_init: InitSpec,
    follower_init: DistSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    leader: DistSpec,
    follower: DistSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    #[serde(rename = "Q0")]
    q0: MatrixSpec,
    #[serde(rename = "R0")]
    r0: MatrixSpec,
    #[serde(rename = "Q")]
    q: MatrixSpec,
    #[serde(rename = "P")]
    p: MatrixSpec,
    #[serde(rename = "R")]
    r: MatrixSpec,
    #[serde(rename = "H")]
    h: MatrixSpec,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawHorizon {
    Finite {
        #[serde(rename = "T")]
        t: usize,
    },
    Infinite {
        #[serde(default = "default_beta")]
        beta: f64,
    },
}

fn default_beta() -> f64 {
    1.0
}

/// Matrix field: scalar, row-major nested rows, or a per-stage sequence.
enum MatrixSpec {
    Scalar(f64),
    Dense(Vec<Vec<f64>>),
    Varying(Vec<MatrixSpec>),
}

impl MatrixSpec {
    fn to_matrix(&self, name: &'static str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            MatrixSpec::Dense(rows) => from_nested(name, rows),
            MatrixSpec::Varying(_) => Err(Error::Config {
                pointer: name.to_string(),
                message: "nested \"varying\" sequences are not allowed".into(),
            }),
        }
    }

    fn to_matseq(&self, name: &'static str) -> Result<MatSeq> {
        match self {
            MatrixSpec::Varying(stages) => {
                let mats: Result<Vec<_>> = stages.iter().map(|s| s.to_matrix(name)).collect();
                let mats = mats?;
                if mats.is_empty() {
                    return Err(Error::Config {
                        pointer: name.to_string(),
                        message: "\"varying\" needs at least one stage".into(),
                    });
                }
                Ok(MatSeq::Varying(mats))
            }
            other => Ok(MatSeq::Constant(other.to_matrix(name)?)),
        }
    }
}

impl<'de> Deserialize<'de> for MatrixSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = MatrixSpec;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str(
                    "a number, row-major nested arrays, or {\"varying\": [stages...]}",
                )
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<MatrixSpec, E> {
                Ok(MatrixSpec::Scalar(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<MatrixSpec, E> {
                Ok(MatrixSpec::Scalar(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<MatrixSpec, E> {
                Ok(MatrixSpec::Scalar(v as f64))
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<MatrixSpec, A::Error> {
                let mut rows = Vec::new();
                while let Some(row) = seq.next_element::<Vec<f64>>()? {
                    rows.push(row);
                }
                Ok(MatrixSpec::Dense(rows))
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<MatrixSpec, A::Error> {
                let Some(key) = map.next_key::<String>()? else {
                    return Err(de::Error::missing_field("varying"));
                };
                if key != "varying" {
                    return Err(de::Error::unknown_field(&key, &["varying"]));
                }
                let stages: Vec<MatrixSpec> = map.next_value()?;
                if let Some(extra) = map.next_key::<String>()? {
                    return Err(de::Error::unknown_field(&extra, &["varying"]));
                }
                Ok(MatrixSpec::Varying(stages))
            }
        }
        d.deserialize_any(V)
    }
}

/// Vector field: scalar or flat array.
enum VectorSpec {
    Values(Vec<f64>),
}

impl VectorSpec {
    fn to_vector(&self) -> DVector<f64> {
        let VectorSpec::Values(v) = self;
        DVector::from_row_slice(v)
    }
}

impl<'de> Deserialize<'de> for VectorSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = VectorSpec;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or an array of numbers")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<VectorSpec, E> {
                Ok(VectorSpec::Values(vec![v]))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<VectorSpec, E> {
                Ok(VectorSpec::Values(vec![v as f64]))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<VectorSpec, E> {
                Ok(VectorSpec::Values(vec![v as f64]))
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<VectorSpec, A::Error> {
                let mut vals = Vec::new();
                while let Some(v) = seq.next_element::<f64>()? {
                    vals.push(v);
                }
                Ok(VectorSpec::Values(vals))
            }
        }
        d.deserialize_any(V)
    }
}

/// Distribution field, tagged by `kind`. Gaussian distributions are always
/// zero-mean; uniform bounds are per-coordinate.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DistSpec {
    Zero,
    Gaussian { cov: MatrixSpec },
    Uniform { low: VectorSpec, high: VectorSpec },
}

impl DistSpec {
    fn to_dist(&self, name: &'static str) -> Result<Dist> {
        match self {
            DistSpec::Zero => Ok(Dist::Zero),
            DistSpec::Gaussian { cov } => Dist::gaussian(name, cov.to_matrix(name)?),
            DistSpec::Uniform { low, high } => {
                Dist::uniform(name, low.to_vector(), high.to_vector())
            }
        }
    }
}

/// Leader initial state: a fixed vector or a distribution object.
enum InitSpec {
    Constant(Vec<f64>),
    Dist(DistSpec),
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = InitSpec;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number, an array of numbers, or a distribution object")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<InitSpec, E> {
                Ok(InitSpec::Constant(vec![v]))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<InitSpec, E> {
                Ok(InitSpec::Constant(vec![v as f64]))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<InitSpec, E> {
                Ok(InitSpec::Constant(vec![v as f64]))
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<InitSpec, A::Error> {
                let mut vals = Vec::new();
                while let Some(v) = seq.next_element::<f64>()? {
                    vals.push(v);
                }
                Ok(InitSpec::Constant(vals))
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                map: A,
            ) -> std::result::Result<InitSpec, A::Error> {
                Ok(InitSpec::Dist(DistSpec::deserialize(
                    MapAccessDeserializer::new(map),
                )?))
            }
        }
        d.deserialize_any(V)
    }
}

impl RawConfig {
    fn build(self) -> Result<ExperimentConfig> {
        let horizon = match self.horizon {
            RawHorizon::Finite { t } => Horizon::Finite { t },
            RawHorizon::Infinite { beta } => Horizon::Infinite { beta },
        };
        let t_horizon = match horizon {
            Horizon::Finite { t } => Some(t),
            Horizon::Infinite { .. } => None,
        };

        let noise = NoiseModel::new(
            self.model.noise.leader.to_dist("/model/noise/leader")?,
            self.model.noise.follower.to_dist("/model/noise/follower")?,
            self.seed,
        )?;
        let x0_init = match self.model.x0_init {
            InitSpec::Constant(v) => InitialState::Constant(DVector::from_row_slice(&v)),
            InitSpec::Dist(spec) => InitialState::Random(spec.to_dist("/model/x0_init")?),
        };
        let follower_init = self.model.follower_init.to_dist("/model/follower_init")?;

        let model = SystemModel::new(
            self.n,
            t_horizon,
            self.model.a0.to_matseq("A0")?,
            self.model.b0.to_matseq("B0")?,
            self.model.d0.to_matseq("D0")?,
            self.model.a.to_matseq("A")?,
            self.model.b.to_matseq("B")?,
            self.model.d.to_matseq("D")?,
            self.model.e.to_matseq("E")?,
            noise,
            x0_init,
            follower_init,
        )?;
        let cost = CostModel::new(
            model.dims.d_x,
            model.dims.d_u,
            self.cost.q0.to_matseq("Q0")?,
            self.cost.r0.to_matseq("R0")?,
            self.cost.q.to_matseq("Q")?,
            self.cost.p.to_matseq("P")?,
            self.cost.r.to_matseq("R")?,
            self.cost.h.to_matseq("H")?,
            horizon,
        )?;
        if self.num_runs == 0 {
            return Err(Error::Config {
                pointer: "/num_runs".into(),
                message: "at least one run is required".into(),
            });
        }
        Ok(ExperimentConfig {
            model,
            cost,
            seed: self.seed,
            num_runs: self.num_runs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Horizon;

    const EXAMPLE: &str = include_str!("../configs/example1.json");

    #[test]
    fn bundled_example_parses_with_expected_shape() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.model.dims.d_x, 1);
        assert_eq!(cfg.model.dims.d_u, 1);
        assert_eq!(cfg.model.dims.n, 100);
        assert_eq!(cfg.model.dims.t_horizon, Some(80));
        assert_eq!(cfg.cost.horizon, Horizon::Finite { t: 80 });
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.num_runs, 1);
        assert_eq!(cfg.model.a0.at(1)[(0, 0)], 1.0);
        assert_eq!(cfg.cost.r0.at(1)[(0, 0)], 100.0);
        match &cfg.model.follower_init {
            Dist::Uniform { low, high } => {
                assert_eq!(low[0], 0.0);
                assert_eq!(high[0], 20.0);
            }
            other => panic!("unexpected init {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_pointer() {
        let bad = EXAMPLE.replacen("\"A0\"", "\"A0_typo\"", 1);
        let err = parse_config(&bad).unwrap_err();
        match err {
            Error::Config { pointer, message } => {
                assert!(pointer.starts_with("/model"), "{pointer}");
                assert!(message.contains("A0_typo"), "{message}");
            }
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn bad_distribution_kind_points_at_the_field() {
        let bad = EXAMPLE.replace("\"kind\": \"gaussian\"", "\"kind\": \"gauss\"");
        let err = parse_config(&bad).unwrap_err();
        match err {
            Error::Config { pointer, message } => {
                assert!(pointer.contains("/noise"), "{pointer}");
                assert!(message.contains("gauss"), "{message}");
            }
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn matrices_parse_from_nested_rows_and_varying_sequences() {
        let json = r#"{
            "model": {
                "A0": [[1.0, 0.1], [0.0, 1.0]],
                "B0": [[0.5], [0.0]],
                "D0": [[0.0, 0.0], [0.0, 0.0]],
                "A": {"varying": [[[1.0, 0.0], [0.0, 1.0]], [[0.9, 0.0], [0.0, 0.9]]]},
                "B": [[0.0], [1.0]],
                "D": [[0.0, 0.0], [0.0, 0.0]],
                "E": [[0.0, 0.0], [0.0, 0.0]],
                "noise": {"leader": {"kind": "zero"}, "follower": {"kind": "zero"}},
                "x0_init": [1.0, 2.0],
                "follower_init": {"kind": "zero"}
            },
            "cost": {
                "Q0": [[1.0, 0.0], [0.0, 1.0]],
                "R0": 1.0,
                "Q": [[1.0, 0.0], [0.0, 1.0]],
                "P": [[0.0, 0.0], [0.0, 0.0]],
                "R": 2.0,
                "H": [[0.0, 0.0], [0.0, 0.0]]
            },
            "n": 3,
            "horizon": {"kind": "finite", "T": 2}
        }"#;
        // A stray key anywhere is rejected...
        let bad = json.replace("\"R\": 2.0,", "\"R\": 2.0, \"R_extra\": 2.0,");
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        // ...while the clean version parses, with the varying A honored per stage.
        let cfg = parse_config(json).unwrap();
        assert_eq!(cfg.model.dims.d_x, 2);
        assert_eq!(cfg.model.dims.d_u, 1);
        assert_eq!(cfg.model.a.at(2)[(0, 0)], 0.9);
        match &cfg.model.x0_init {
            InitialState::Constant(v) => assert_eq!(v.len(), 2),
            other => panic!("unexpected init {other:?}"),
        }
    }

    #[test]
    fn x0_init_accepts_a_distribution_object() {
        let cfg_json = EXAMPLE.replace(
            "\"x0_init\": 30.0",
            "\"x0_init\": {\"kind\": \"gaussian\", \"cov\": 2.0}",
        );
        let cfg = parse_config(&cfg_json).unwrap();
        match &cfg.model.x0_init {
            InitialState::Random(Dist::Gaussian { cov, .. }) => {
                assert_eq!(cov[(0, 0)], 2.0);
            }
            other => panic!("unexpected init {other:?}"),
        }
    }

    #[test]
    fn skewed_uniform_noise_is_rejected() {
        let bad = EXAMPLE.replace(
            "\"follower\": {\"kind\": \"gaussian\", \"cov\": 0.2}",
            "\"follower\": {\"kind\": \"uniform\", \"low\": -0.1, \"high\": 0.3}",
        );
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn infinite_horizon_defaults_beta_to_one_and_rejects_out_of_range() {
        let inf = EXAMPLE.replace(
            "{\"kind\": \"finite\", \"T\": 80}",
            "{\"kind\": \"infinite\"}",
        );
        let cfg = parse_config(&inf).unwrap();
        assert_eq!(cfg.cost.horizon, Horizon::Infinite { beta: 1.0 });

        let bad = EXAMPLE.replace(
            "{\"kind\": \"finite\", \"T\": 80}",
            "{\"kind\": \"infinite\", \"beta\": 1.5}",
        );
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }
}
