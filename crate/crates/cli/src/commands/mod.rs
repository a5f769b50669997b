//! One module per subcommand plus the shared run context.

mod eval;
mod importance;
mod simulate;
mod stats;
mod synth;
mod train;

pub use eval::{eval, EvalArgs};
pub use importance::{importance, ImportanceArgs};
pub use simulate::{simulate, SimulateArgs};
pub use stats::{stats, StatsArgs};
pub use synth::{synth_data, SynthDataArgs};
pub use train::{train, TrainArgs};

use crate::config::RunConfig;
use anyhow::{Context as _, Result};
use clap::ValueEnum;
use handover_core::dataio::{load_corpus, Corpus};
use std::fs;
use std::path::{Path, PathBuf};

/// Resolved configuration plus the output root every command writes under.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    /// Corpus directory: explicit flag or `<out>/corpus`.
    pub fn corpus_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| self.out.join("corpus"))
    }

    /// Load a corpus directory and map it into the canonical hip frame,
    /// which feature extraction expects.
    pub fn load_normalized_corpus(&self, flag: Option<&Path>) -> Result<Corpus> {
        let dir = self.corpus_dir(flag);
        let corpus = load_corpus(&dir).with_context(|| {
            format!(
                "cannot load corpus at {} (generate one with `handover synth-data`)",
                dir.display()
            )
        })?;
        Ok(corpus.normalized()?)
    }

    /// Default checkpoint path for a model kind.
    pub fn checkpoint_path(&self, flag: Option<&Path>, kind: ModelKind) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| self.out.join(format!("{}.ckpt.json", kind.label())))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Svae,
    Rot,
    Timing,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Svae => "svae",
            ModelKind::Rot => "rot",
            ModelKind::Timing => "timing",
        }
    }
}

/// Write a file, creating parent directories, and log where it went.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
