use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use joint_cws::treebank::{read_corpus, Corpus};
use joint_cws::Error;

use crate::error::{CliError, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Missing {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?)
        .map_err(|_| CliError::invalid(path, Error::Input("file is not valid UTF-8".into())))
}

pub fn read_corpus_file(path: &Path) -> Result<Corpus> {
    read_corpus(&read_text(path)?).map_err(|e| CliError::invalid(path, e))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    match fs::create_dir_all(path) {
        Err(e) if e.kind() != ErrorKind::AlreadyExists => Err(CliError::Write {
            path: path.to_path_buf(),
            source: e,
        }),
        _ => Ok(()),
    }
}
