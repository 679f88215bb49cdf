use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Header};
use crate::net::branch::BranchNet;
use crate::net::mlp::{Activation, Mlp, Normalizer};
use crate::net::train::{DecayUnit, OutputScaling, TrainConfig, TrainReport};

pub const FORMAT: &str = "hyperfe-branch-1";
pub const HEADER_FILE: &str = "branch.hdr";
pub const PARAMS_FILE: &str = "branch.bin";
pub const HISTORY_FILE: &str = "loss_history.csv";

/// Trained branch network plus everything needed to audit and reuse it.
///
/// `branch.bin` holds the parameters as little-endian f64, layer by layer:
/// the `n_out x n_in` weights in row-major order, then the `n_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: BranchNet,
    pub config: TrainConfig,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub best_epoch: usize,
    pub pod_hash: String,
}

#[derive(Serialize, Deserialize)]
struct HistoryRow {
    epoch: usize,
    learning_rate: f64,
    train_loss: f64,
    val_loss: Option<f64>,
}

fn unit_name(u: DecayUnit) -> &'static str {
    match u {
        DecayUnit::Step => "step",
        DecayUnit::Epoch => "epoch",
    }
}

fn scaling_name(s: OutputScaling) -> &'static str {
    match s {
        OutputScaling::Uniform => "uniform",
        OutputScaling::PerFeature => "per_feature",
    }
}

impl Checkpoint {
    pub fn from_report(report: &TrainReport, config: &TrainConfig, pod_hash: &str) -> Self {
        Self {
            net: report.net.clone(),
            config: config.clone(),
            train_loss: report.train_loss.clone(),
            val_loss: report.val_loss.clone(),
            learning_rate: report.learning_rate.clone(),
            best_epoch: report.best_epoch,
            pod_hash: pod_hash.to_string(),
        }
    }

    pub fn params_hash(&self) -> String {
        io::hash_f64s("branch-params", &self.net.mlp.params)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_f64s(&dir.join(PARAMS_FILE), &self.net.mlp.params)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for (e, tl) in self.train_loss.iter().enumerate() {
            w.serialize(HistoryRow {
                epoch: e,
                learning_rate: self.learning_rate[e],
                train_loss: *tl,
                val_loss: self.val_loss.get(e).copied(),
            })?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        io::write_atomic(&dir.join(HISTORY_FILE), &bytes)?;

        let widths: Vec<usize> = self.net.mlp.widths.clone();
        let c = &self.config;
        let mut h = Header::new();
        h.set("format", FORMAT)
            .set("widths", io::join_usizes(&widths))
            .set("hidden_activation", self.net.mlp.hidden.name())
            .set("output_activation", "identity")
            .set("p", self.net.p())
            .set("input_mean", io::join_f64s(&self.net.input_norm.mean))
            .set("input_scale", io::join_f64s(&self.net.input_norm.scale))
            .set("output_mean", io::join_f64s(&self.net.output_norm.mean))
            .set("output_scale", io::join_f64s(&self.net.output_norm.scale))
            .set(
                "anchor",
                self.net.anchor.as_ref().map_or("none".to_string(), |a| io::join_f64s(a)),
            )
            .set(
                "slope",
                self.net.slope.as_ref().map_or("none".to_string(), |a| io::join_f64s(a)),
            )
            .set("pod_hash", &self.pod_hash)
            .set("params_hash", self.params_hash())
            .set("lr0", c.lr0)
            .set("decay_step", c.decay_step)
            .set("decay_rate", c.decay_rate)
            .set("decay_unit", unit_name(c.decay_unit))
            .set("output_scaling", scaling_name(c.output_scaling))
            .set("batches_per_epoch", c.batches_per_epoch)
            .set("epochs", c.epochs)
            .set("validation_fraction", c.validation_fraction)
            .set("seed", c.seed)
            .set("zero_anchor", c.zero_anchor)
            .set("linear_prior", c.linear_prior)
            .set("best_epoch", self.best_epoch)
            .set("final_train_loss", self.train_loss.last().copied().unwrap_or(f64::NAN))
            .set(
                "best_val_loss",
                self.val_loss.get(self.best_epoch).copied().unwrap_or(f64::NAN),
            );
        h.write(&dir.join(HEADER_FILE))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let hpath = dir.join(HEADER_FILE);
        let h = Header::read(&hpath)?;
        let format = h.require("format", &hpath)?;
        if format != FORMAT {
            return Err(Error::Format {
                path: hpath,
                detail: format!("unsupported format '{format}'"),
            });
        }
        let bad = |detail: String| Error::Format {
            path: hpath.clone(),
            detail,
        };
        let widths = io::split_usizes(h.require("widths", &hpath)?, &hpath)?;
        let hidden = Activation::parse(h.require("hidden_activation", &hpath)?)?;
        let mut mlp = Mlp::zeros(&widths, hidden)?;
        mlp.params = io::read_f64s(&dir.join(PARAMS_FILE), Some(mlp.params.len()))?;
        let floats = |key: &str| io::split_f64s(h.require(key, &hpath)?, &hpath);
        let net = BranchNet::new(
            mlp,
            Normalizer {
                mean: floats("input_mean")?,
                scale: floats("input_scale")?,
            },
            Normalizer {
                mean: floats("output_mean")?,
                scale: floats("output_scale")?,
            },
        )?;
        let net = match h.require("anchor", &hpath)? {
            "none" => net,
            text => net.with_anchor(io::split_f64s(text, &hpath)?)?,
        };
        let net = match h.require("slope", &hpath)? {
            "none" => net,
            text => net.with_slope(io::split_f64s(text, &hpath)?)?,
        };
        let config = TrainConfig {
            lr0: h.parse_value("lr0", &hpath)?,
            decay_step: h.parse_value("decay_step", &hpath)?,
            decay_rate: h.parse_value("decay_rate", &hpath)?,
            decay_unit: match h.require("decay_unit", &hpath)? {
                "step" => DecayUnit::Step,
                "epoch" => DecayUnit::Epoch,
                other => return Err(bad(format!("unknown decay_unit '{other}'"))),
            },
            output_scaling: match h.require("output_scaling", &hpath)? {
                "uniform" => OutputScaling::Uniform,
                "per_feature" => OutputScaling::PerFeature,
                other => return Err(bad(format!("unknown output_scaling '{other}'"))),
            },
            batches_per_epoch: h.parse_value("batches_per_epoch", &hpath)?,
            epochs: h.parse_value("epochs", &hpath)?,
            validation_fraction: h.parse_value("validation_fraction", &hpath)?,
            seed: h.parse_value("seed", &hpath)?,
            zero_anchor: h.parse_value("zero_anchor", &hpath)?,
            linear_prior: h.parse_value("linear_prior", &hpath)?,
        };
        let mut ck = Self {
            net,
            config,
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            learning_rate: Vec::new(),
            best_epoch: h.parse_value("best_epoch", &hpath)?,
            pod_hash: h.require("pod_hash", &hpath)?.to_string(),
        };
        let stored = h.require("params_hash", &hpath)?;
        if stored != ck.params_hash() {
            return Err(Error::Provenance {
                what: "branch parameters".into(),
                expected: stored.to_string(),
                found: ck.params_hash(),
            });
        }
        let mut r = csv::Reader::from_path(dir.join(HISTORY_FILE))?;
        for row in r.deserialize::<HistoryRow>() {
            let row = row?;
            ck.train_loss.push(row.train_loss);
            ck.learning_rate.push(row.learning_rate);
            if let Some(v) = row.val_loss {
                ck.val_loss.push(v);
            }
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::Strain2D;
    use crate::net::train::train;

    #[test]
    fn round_trip_reproduces_outputs_bit_for_bit() {
        let xs: Vec<Strain2D> = (0..20)
            .map(|i| Strain2D::new(0.002 * i as f64 - 0.02, 0.01, -0.001 * i as f64))
            .collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|e| vec![e.eps_xx * 3.0, e.gamma_xy, 0.5]).collect();
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let rep = train(&xs, &ys, &cfg, BranchNet::initialize(3, 2).unwrap()).unwrap();
        let ck = Checkpoint::from_report(&rep, &cfg, "abc");
        let dir = tempfile::tempdir().unwrap();
        ck.write(dir.path()).unwrap();
        let back = Checkpoint::read(dir.path()).unwrap();
        assert_eq!(back, ck);
        let e = Strain2D::new(0.013, -0.007, 0.02);
        let a = ck.net.forward(&e).unwrap();
        let b = back.net.forward(&e).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );

        let mut params = ck.net.mlp.params.clone();
        params[7] = 0.5;
        io::write_f64s(&dir.path().join(PARAMS_FILE), &params).unwrap();
        assert!(matches!(Checkpoint::read(dir.path()), Err(Error::Provenance { .. })));
    }
}
