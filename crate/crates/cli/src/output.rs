use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// CSV file with a `#`-prefixed provenance block.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(dir: &Path, command: &str, hash: &str, seed: u64, notes: &[String], columns: &[&str]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let path = dir.join(format!("{command}.csv"));
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut raw = BufWriter::new(file);
        writeln!(raw, "# drainage {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(raw, "# command: {command}")?;
        writeln!(raw, "# config_sha256: {hash}")?;
        writeln!(raw, "# seed: {seed}")?;
        for note in notes {
            writeln!(raw, "# {note}")?;
        }
        let mut writer = csv::Writer::from_writer(raw);
        writer.write_record(columns)?;
        Ok(Self { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Maps `f` over `items` on scoped threads, keeping input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}
