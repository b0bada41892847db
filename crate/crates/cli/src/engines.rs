//! Execution targets addressed by connection string.
//!
//! Two engines ship built in:
//!
//! - `sqlite:<path>` (or `sqlite::memory:`) runs statements on an embedded
//!   SQLite database. SELECT result sets are drained completely so the
//!   measured time covers result delivery.
//! - `grammar:` validates each statement against the workload grammar
//!   without touching any database. It is the target of choice where no
//!   engine with CUBE/ROLLUP support is available, and doubles as a fast
//!   syntax check over generated workloads.

use anyhow::{bail, Result};
use dwbench_core::exec::{GrammarSession, SessionError, SqlSession};
use rusqlite::Connection;

/// Opens a session for a `kind:target` connection string.
pub fn open_session(connection: &str) -> Result<Box<dyn SqlSession>> {
    let (kind, target) = connection.split_once(':').unwrap_or((connection, ""));
    match kind {
        "grammar" => Ok(Box::new(GrammarSession)),
        "sqlite" => Ok(Box::new(SqliteSession::open(target)?)),
        other => bail!("unknown engine {other}; expected sqlite:<path> or grammar:"),
    }
}

/// Embedded SQLite execution target.
pub struct SqliteSession {
    connection: Connection,
}

impl SqliteSession {
    /// Opens a database file, or an in-memory database for `:memory:` or an
    /// empty target.
    pub fn open(target: &str) -> Result<Self> {
        let connection = if target.is_empty() || target == ":memory:" {
            Connection::open_in_memory()?
        } else {
            Connection::open(target)?
        };
        Ok(Self { connection })
    }
}

impl SqlSession for SqliteSession {
    fn execute(&mut self, statement: &str) -> Result<u64, SessionError> {
        let failed = |e: rusqlite::Error| SessionError::Statement(e.to_string());
        if statement
            .trim_start()
            .get(..6)
            .is_some_and(|s| s.eq_ignore_ascii_case("select"))
        {
            let mut prepared = self.connection.prepare(statement).map_err(failed)?;
            let mut rows = prepared.query([]).map_err(failed)?;
            let mut count = 0u64;
            while rows.next().map_err(failed)?.is_some() {
                count += 1;
            }
            Ok(count)
        } else {
            // DDL and data loads arrive as multi-statement scripts.
            self.connection.execute_batch(statement).map_err(failed)?;
            Ok(0)
        }
    }
}
