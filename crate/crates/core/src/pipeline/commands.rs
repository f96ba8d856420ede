//! Dataset export and stand-alone probe training.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::probe::{accuracy, train_probe, write_checkpoint, EncoderStub, ProbeShape, TrainSpec};
use crate::scenario::{build_dataset, derive_seed, netpbm::save_clip, DatasetEntry};

use super::e2e::{encoder_window, ENCODER_STREAM, TRAIN_STREAM};

#[derive(Serialize)]
struct IndexRow<'a> {
    id: usize,
    split: &'a str,
    label: &'a str,
    frames: usize,
    collision_frame: Option<usize>,
    layout: &'a str,
    seed: u64,
    dir: String,
}

/// Generates the configured dataset and saves every clip under
/// `out/{train,test}/clip_NNNN` with an `index.csv` at the top.
pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<usize> {
    let data = build_dataset(&cfg.world, &cfg.clip, &cfg.dataset, cfg.seed)?;
    let mut all: Vec<(&str, &DatasetEntry)> = data
        .train
        .iter()
        .map(|e| ("train", e))
        .chain(data.test.iter().map(|e| ("test", e)))
        .collect();
    all.sort_by_key(|(_, e)| e.id);
    let dir_of = |split: &str, id: usize| format!("{split}/clip_{id:04}");
    all.par_iter()
        .map(|(split, e)| save_clip(out.join(dir_of(split, e.id)), &e.clip))
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for (split, e) in &all {
        w.serialize(IndexRow {
            id: e.id,
            split,
            label: e.clip.label.name(),
            frames: e.clip.len(),
            collision_frame: e.clip.collision_frame,
            layout: e.clip.layout.name(),
            seed: e.clip.seed,
            dir: dir_of(split, e.id),
        })
        .expect("in-memory write");
    }
    let path = out.join("index.csv");
    fs::write(&path, w.into_inner().expect("in-memory flush")).map_err(|e| Error::io(&path, e))?;
    Ok(all.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub loss_history: Vec<f64>,
}

/// Trains a probe on the configured dataset (its post-processing and gap)
/// and writes `probe.ckpt` and `loss.csv` into `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainSummary> {
    let data = build_dataset(&cfg.world, &cfg.clip, &cfg.dataset, cfg.seed)?;
    let stub = EncoderStub::new(
        &cfg.tokenizer,
        cfg.clip.channels as usize,
        cfg.encoder.embed_dim as usize,
        derive_seed(cfg.seed, ENCODER_STREAM),
    )?;
    let encode = |entries: &[DatasetEntry]| {
        entries
            .par_iter()
            .map(|e| {
                let window = encoder_window(&e.clip, cfg, cfg.dataset.gap)?;
                Ok((stub.encode(&window.frames)?, e.clip.label.index()))
            })
            .collect::<Result<Vec<_>>>()
    };
    let train = encode(&data.train)?;
    let test = encode(&data.test)?;
    let shape = ProbeShape {
        dim: cfg.encoder.embed_dim as usize,
        hidden: cfg.probe_hidden_dim(),
        classes: cfg.probe.n_classes as usize,
        activation: cfg.probe.activation,
    };
    let spec = TrainSpec {
        seed: derive_seed(cfg.seed, TRAIN_STREAM.wrapping_add(cfg.train.seed)),
        ..cfg.train.clone()
    };
    let trained = train_probe(&train, shape, &spec)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_checkpoint(out.join("probe.ckpt"), &trained.params)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss"]).expect("in-memory write");
    for (i, l) in trained.loss_history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])
            .expect("in-memory write");
    }
    let path = out.join("loss.csv");
    fs::write(&path, w.into_inner().expect("in-memory flush")).map_err(|e| Error::io(&path, e))?;

    Ok(TrainSummary {
        n_train: train.len(),
        n_test: test.len(),
        train_accuracy: accuracy(&trained.params, &train)?,
        test_accuracy: if test.is_empty() {
            f64::NAN
        } else {
            accuracy(&trained.params, &test)?
        },
        loss_history: trained.loss_history,
    })
}
