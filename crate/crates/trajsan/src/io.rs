//! Plain-text trajectory files: one record per line, tokens separated by
//! spaces or tabs. Universe files hold one token per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use trajsan_core::{LocationUniverse, TrajectoryDb};

use crate::error::{CliError, Result};

/// How tokens missing from a supplied universe are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownTokens {
    Reject,
    /// Intern them, extending the universe.
    Extend,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn is_sep(c: char) -> bool {
    c == ' ' || c == '\t'
}

pub fn load_universe(path: &Path) -> Result<LocationUniverse> {
    let mut tokens = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let token = line.trim_matches(is_sep);
        let bad = |reason: &str| CliError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            reason: reason.to_string(),
        };
        if token.is_empty() {
            return Err(bad("empty line in universe file"));
        }
        if token.contains(is_sep) {
            return Err(bad("universe lines hold a single token"));
        }
        tokens.push(token.to_string());
    }
    LocationUniverse::from_tokens(tokens).map_err(|dup| CliError::Format {
        path: path.to_path_buf(),
        line: 0,
        reason: format!("duplicate universe token `{dup}`"),
    })
}

/// Parses trajectory lines into `universe`, interning new tokens only under
/// [`UnknownTokens::Extend`].
pub fn read_db<R: BufRead>(
    reader: R,
    path: &Path,
    universe: &mut LocationUniverse,
    unknown: UnknownTokens,
) -> Result<TrajectoryDb> {
    let mut db = TrajectoryDb::new();
    let mut buf = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        buf.clear();
        for token in line.split(is_sep).filter(|t| !t.is_empty()) {
            let id = match (universe.get(token), unknown) {
                (Some(id), _) => id,
                (None, UnknownTokens::Extend) => universe.intern(token),
                (None, UnknownTokens::Reject) => {
                    return Err(CliError::Universe {
                        path: path.to_path_buf(),
                        line: i + 1,
                        token: token.to_string(),
                    })
                }
            };
            buf.push(id);
        }
        if buf.is_empty() {
            return Err(CliError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "empty trajectory".into(),
            });
        }
        db.push_n(&buf, 1);
    }
    Ok(db)
}

/// Loads a database. With a universe file every token must belong to it;
/// without one the universe is the distinct tokens in order of first
/// appearance, which leaks information about the input and is warned about.
pub fn load_db(path: &Path, universe: Option<&Path>) -> Result<(TrajectoryDb, LocationUniverse)> {
    match universe {
        Some(u) => {
            let mut universe = load_universe(u)?;
            let db = read_db(open(path)?, path, &mut universe, UnknownTokens::Reject)?;
            Ok((db, universe))
        }
        None => {
            log::warn!(
                "no universe file given; deriving locations from {} makes the output domain data-dependent",
                path.display()
            );
            load_db_derived(path)
        }
    }
}

/// [`load_db`] without a universe file, for uses that release nothing.
pub fn load_db_derived(path: &Path) -> Result<(TrajectoryDb, LocationUniverse)> {
    let mut universe = LocationUniverse::new();
    let db = read_db(open(path)?, path, &mut universe, UnknownTokens::Extend)?;
    Ok((db, universe))
}

/// Loads a second database against an existing universe.
pub fn load_db_into(path: &Path, universe: &mut LocationUniverse, unknown: UnknownTokens) -> Result<TrajectoryDb> {
    read_db(open(path)?, path, universe, unknown)
}

/// Writes one line per record, expanding multiplicities, in database order.
pub fn write_db_to<W: Write>(db: &TrajectoryDb, universe: &LocationUniverse, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for (t, n) in db.runs() {
        let mut line = String::new();
        for (i, l) in t.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let token = universe.token(*l).ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("location id {} has no token", l.0))
            })?;
            line.push_str(token);
        }
        line.push('\n');
        for _ in 0..n {
            out.write_all(line.as_bytes())?;
        }
    }
    out.flush()
}

pub fn write_db(db: &TrajectoryDb, universe: &LocationUniverse, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_db_to(db, universe, file).map_err(|e| CliError::io(path, e))
}

pub fn write_universe(universe: &LocationUniverse, path: &Path) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for token in universe.tokens() {
        writeln!(out, "{token}").map_err(io)?;
    }
    out.flush().map_err(io)
}
