use std::path::{Path, PathBuf};

use motionfactor_core::lexicon::{Lexicon, LexiconError};

#[derive(Debug, thiserror::Error)]
pub enum LexiconFileError {
    #[error("cannot read lexicon {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: LexiconError },
}

/// Reads a tab-separated lexicon file (`lemma class category hint`).
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LexiconFileError::Io { path: path.into(), source })?;
    Lexicon::parse(&text).map_err(|source| LexiconFileError::Parse { path: path.into(), source })
}

/// The given file, or the built-in lexicon when `path` is `None`.
pub fn lexicon_or_builtin(path: Option<&Path>) -> Result<Lexicon, LexiconFileError> {
    path.map_or_else(|| Ok(Lexicon::builtin()), load_lexicon)
}
