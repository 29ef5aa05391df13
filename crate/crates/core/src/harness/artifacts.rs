//! Model files on disk. Training metadata lives next to the model in
//! `<model>.meta.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::denoiser::{load_model, save_model, TrainedModel, TrainingMeta};
use crate::error::Result;

pub fn meta_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn save_model_file(model: &TrainedModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save_model(model, &mut w)?;
    w.flush()?;
    if let Some(meta) = &model.meta {
        let mut m = BufWriter::new(File::create(meta_path(path))?);
        serde_json::to_writer_pretty(&mut m, meta)?;
        m.write_all(b"\n")?;
        m.flush()?;
    }
    Ok(())
}

/// Loads a model and, when present, its metadata sidecar.
pub fn load_model_file(path: &Path) -> Result<TrainedModel> {
    let mut model = load_model(BufReader::new(File::open(path)?))?;
    let mp = meta_path(path);
    if mp.exists() {
        let meta: TrainingMeta = serde_json::from_reader(BufReader::new(File::open(mp)?))?;
        model.meta = Some(meta);
    }
    Ok(model)
}
