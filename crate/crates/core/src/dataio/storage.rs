//! On-disk layout of a prepared dataset:
//!
//! ```text
//! <dir>/manifest            text: format line, then `key = value` lines
//! <dir>/users.tsv           row-index \t token
//! <dir>/domain_{a,b}/items.tsv
//! <dir>/domain_{a,b}/train.bin   per user: u32 count, count × u32 item ids
//! <dir>/domain_{a,b}/eval.bin    per user: u32 val, u32 test,
//!                                n × u32 val negatives, n × u32 test negatives
//! ```
//!
//! All integers are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dataio::pairing::InteractionMatrix;
use crate::dataio::split::{DatasetMeta, Domain, DomainData, PairedDataset};
use crate::error::{Error, Result};
use crate::numerics::SparseRow;

pub const DATASET_MAGIC: &str = "etl-dataset";
pub const DATASET_VERSION: u32 = 1;

pub fn save_dataset(ds: &PairedDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut manifest = format!("{DATASET_MAGIC} {DATASET_VERSION}\n");
    manifest.push_str(&format!("seed = {}\n", ds.meta.seed));
    manifest.push_str(&format!("users = {}\n", ds.n_users()));
    manifest.push_str(&format!("min_count = {}\n", ds.meta.min_count));
    manifest.push_str(&format!("n_negatives = {}\n", ds.meta.n_negatives));
    for d in Domain::BOTH {
        let dd = ds.domain(d);
        manifest.push_str(&format!("domain_{d}.items = {}\n", dd.n_items()));
        manifest.push_str(&format!(
            "domain_{d}.train_interactions = {}\n",
            dd.train.nnz()
        ));
    }
    write_file(&dir.join("manifest"), manifest.as_bytes())?;
    write_file(&dir.join("users.tsv"), tsv(&ds.users)?.as_bytes())?;

    for d in Domain::BOTH {
        let dd = ds.domain(d);
        let sub = dir.join(format!("domain_{d}"));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        write_file(
            &sub.join("items.tsv"),
            tsv(dd.train.item_tokens())?.as_bytes(),
        )?;

        let mut train = Vec::new();
        for row in dd.train.rows() {
            put_u32(&mut train, row.nnz() as u32);
            for &j in row.indices() {
                put_u32(&mut train, j);
            }
        }
        write_file(&sub.join("train.bin"), &train)?;

        let mut eval = Vec::new();
        for u in 0..ds.n_users() {
            put_u32(&mut eval, dd.val_item[u]);
            put_u32(&mut eval, dd.test_item[u]);
            if dd.val_negatives[u].len() != ds.meta.n_negatives
                || dd.test_negatives[u].len() != ds.meta.n_negatives
            {
                return Err(Error::Format(format!(
                    "user {u} has a negative set of the wrong size"
                )));
            }
            for &j in dd.val_negatives[u].iter().chain(&dd.test_negatives[u]) {
                put_u32(&mut eval, j);
            }
        }
        write_file(&sub.join("eval.bin"), &eval)?;
    }
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<PairedDataset> {
    let dir = dir.as_ref();
    let manifest = read_text(&dir.join("manifest"))?;
    let fields = parse_manifest(&manifest)?;
    let get = |k: &str| -> Result<u64> {
        fields
            .get(k)
            .ok_or_else(|| Error::Format(format!("manifest lacks `{k}`")))?
            .parse::<u64>()
            .map_err(|_| Error::Format(format!("manifest field `{k}` is not an integer")))
    };
    let meta = DatasetMeta {
        seed: get("seed")?,
        min_count: get("min_count")? as usize,
        n_negatives: get("n_negatives")? as usize,
    };
    let n_users = get("users")? as usize;
    let users = parse_tsv(&read_text(&dir.join("users.tsv"))?, "users.tsv")?;
    if users.len() != n_users {
        return Err(Error::Format(format!(
            "manifest says {n_users} users, users.tsv has {}",
            users.len()
        )));
    }

    let mut domains = Vec::with_capacity(2);
    for d in Domain::BOTH {
        let sub = dir.join(format!("domain_{d}"));
        let items = parse_tsv(&read_text(&sub.join("items.tsv"))?, "items.tsv")?;
        if items.len() as u64 != get(&format!("domain_{d}.items"))? {
            return Err(Error::Format(format!(
                "domain {d}: item count disagrees with manifest"
            )));
        }
        let n_items = items.len();

        let train = read_bytes(&sub.join("train.bin"))?;
        let mut cur = Cursor::new(&train, "train.bin");
        let mut rows = Vec::with_capacity(n_users);
        for _ in 0..n_users {
            let count = cur.u32()? as usize;
            let idx = (0..count).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
            rows.push(SparseRow::binary(n_items, idx).map_err(|e| Error::Format(e.to_string()))?);
        }
        cur.finish()?;

        let eval = read_bytes(&sub.join("eval.bin"))?;
        let mut cur = Cursor::new(&eval, "eval.bin");
        let k = meta.n_negatives;
        let mut dd = DomainData {
            train: InteractionMatrix::new(users.clone(), items, rows)?,
            val_item: Vec::with_capacity(n_users),
            test_item: Vec::with_capacity(n_users),
            val_negatives: Vec::with_capacity(n_users),
            test_negatives: Vec::with_capacity(n_users),
        };
        for _ in 0..n_users {
            dd.val_item.push(cur.u32()?);
            dd.test_item.push(cur.u32()?);
            dd.val_negatives
                .push((0..k).map(|_| cur.u32()).collect::<Result<_>>()?);
            dd.test_negatives
                .push((0..k).map(|_| cur.u32()).collect::<Result<_>>()?);
        }
        cur.finish()?;
        let out_of_range = dd
            .val_item
            .iter()
            .chain(&dd.test_item)
            .chain(dd.val_negatives.iter().flatten())
            .chain(dd.test_negatives.iter().flatten())
            .any(|&j| j as usize >= n_items);
        if out_of_range {
            return Err(Error::Format(format!(
                "domain {d}: item id out of range in eval.bin"
            )));
        }
        domains.push(dd);
    }
    let b = domains.pop().unwrap();
    let a = domains.pop().unwrap();
    Ok(PairedDataset {
        users,
        domains: [a, b],
        meta,
    })
}

fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut parts = header.split_whitespace();
    if parts.next() != Some(DATASET_MAGIC) {
        return Err(Error::Format("dataset manifest has a bad header".into()));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("dataset manifest lacks a version".into()))?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "dataset format version {version}, expected {DATASET_VERSION}"
        )));
    }
    let mut out = BTreeMap::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad manifest line `{line}`")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn tsv(tokens: &[String]) -> Result<String> {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.contains(['\t', '\n', '\r']) {
            return Err(Error::Format(format!(
                "token `{t}` contains a tab or newline"
            )));
        }
        s.push_str(&format!("{i}\t{t}\n"));
    }
    Ok(s)
}

fn parse_tsv(text: &str, what: &str) -> Result<Vec<String>> {
    text.lines()
        .enumerate()
        .map(|(expected, line)| {
            let (i, tok) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("{what}: malformed line `{line}`")))?;
            if i.parse::<usize>().ok() != Some(expected) {
                return Err(Error::Format(format!(
                    "{what}: rows out of order at {expected}"
                )));
            }
            Ok(tok.to_string())
        })
        .collect()
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Cursor { buf, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "{}: unexpected end of file",
                self.what
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_bits(self.u32()?))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.remaining()
            )));
        }
        Ok(())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::pairing::InteractionMatrix;
    use crate::dataio::split::{loo_split, SplitOptions};

    fn toy() -> PairedDataset {
        let users: Vec<String> = (0..10).map(|u| format!("user{u}")).collect();
        let items: Vec<String> = (0..120).map(|i| format!("item{i}")).collect();
        let rows = |shift: u32| {
            (0..10u32)
                .map(|u| SparseRow::binary(120, (u + shift..u + shift + 6).collect()).unwrap())
                .collect::<Vec<_>>()
        };
        let a = InteractionMatrix::new(users.clone(), items.clone(), rows(0)).unwrap();
        let b = InteractionMatrix::new(users, items, rows(30)).unwrap();
        loo_split(
            &a,
            &b,
            &SplitOptions {
                seed: 3,
                ..SplitOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join("manifest");
        let text = fs::read_to_string(&path)
            .unwrap()
            .replacen("etl-dataset", "etl-dataszt", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch_is_format_error() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join("manifest");
        let text = fs::read_to_string(&path)
            .unwrap()
            .replacen("etl-dataset 1", "etl-dataset 9", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_train_file_is_format_error() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join("domain_a").join("train.bin");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Format(_))));
    }
}
