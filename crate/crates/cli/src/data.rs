use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ecg_gaf::gaf::{encode_batch, EncoderConfig};
use ecg_gaf::nn::Tensor;
use ecg_gaf::signal_io::{
    class_histogram, load_csv, load_ptb, stratified_split, stratified_subsample, Dataset,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::manifest::DatasetEntry;
use crate::DataArgs;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Checksum of the record contents actually used, after subsampling.
pub fn dataset_sha256(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for r in ds.records() {
        for v in r.samples() {
            h.update(v.to_le_bytes());
        }
        h.update((r.label() as u64).to_le_bytes());
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

pub struct Loaded {
    pub dataset: Dataset,
    pub entry: DatasetEntry,
}

/// Resolves the requested split of the configured input. With the two PTB
/// files the split comes from a seeded stratified division; otherwise the
/// train or test CSV is read directly. The subsample fraction applies last.
pub fn load(args: &DataArgs, role: Role, num_classes: usize, seed: u64) -> Result<Loaded> {
    let (ds, sources) = match (&args.ptb_normal, &args.ptb_abnormal) {
        (Some(normal), Some(abnormal)) => {
            if num_classes != 2 {
                bail!("the PTB files define 2 classes, got --num-classes {num_classes}");
            }
            let all = load_ptb(normal, abnormal)?;
            let (train, test) = stratified_split(&all, args.ptb_test_fraction, seed)?;
            let part = match role {
                Role::Train => train,
                Role::Test => test,
            };
            (part, vec![normal.clone(), abnormal.clone()])
        }
        (None, None) => {
            let path = match role {
                Role::Train => args.train_csv.as_ref(),
                Role::Test => args.test_csv.as_ref(),
            }
            .with_context(|| format!("no {} input: pass --{}-csv", role.as_str(), role.as_str()))?;
            (load_csv(path, num_classes)?, vec![path.clone()])
        }
        _ => bail!("--ptb-normal and --ptb-abnormal must be given together"),
    };
    let ds = if args.subsample_fraction < 1.0 {
        stratified_subsample(&ds, args.subsample_fraction, seed)?
    } else if args.subsample_fraction == 1.0 {
        ds
    } else {
        bail!(
            "--subsample-fraction must be in (0, 1], got {}",
            args.subsample_fraction
        );
    };
    let files = sources
        .iter()
        .map(|p| Ok((p.clone(), file_sha256(p)?)))
        .collect::<Result<Vec<(PathBuf, String)>>>()?;
    let entry = DatasetEntry {
        role,
        files,
        records: ds.len(),
        class_histogram: class_histogram(&ds),
        content_sha256: dataset_sha256(&ds),
    };
    log::info!(
        "{} set: {} records, histogram {:?}",
        role.as_str(),
        entry.records,
        entry.class_histogram
    );
    Ok(Loaded { dataset: ds, entry })
}

/// Encodes a dataset, reusing `<cache_dir>/<key>.gaf` when present. The key
/// hashes the record contents together with the encoder settings.
pub fn encode_cached(
    loaded: &Loaded,
    cfg: &EncoderConfig,
    cache_dir: Option<&Path>,
) -> Result<(Tensor, bool)> {
    let ds = &loaded.dataset;
    let expected = [ds.len(), cfg.target_size, cfg.target_size, cfg.channels];
    let Some(dir) = cache_dir else {
        return Ok((encode_batch(ds.records(), cfg)?, false));
    };
    let mut h = Sha256::new();
    h.update(loaded.entry.content_sha256.as_bytes());
    h.update(serde_json::to_vec(cfg)?);
    let path = dir.join(format!("{}.gaf", hex(&h.finalize())));
    if path.is_file() {
        match Tensor::load(&path) {
            Ok(t) if t.dims() == expected => {
                log::info!("using cached encoding {}", path.display());
                return Ok((t, true));
            }
            Ok(t) => log::warn!("ignoring cache {} with dims {:?}", path.display(), t.dims()),
            Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
        }
    }
    let t = encode_batch(ds.records(), cfg)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    // write then rename so an interrupted run never leaves a torn cache file
    let tmp = path.with_extension("tmp");
    t.save(&tmp)?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok((t, false))
}
