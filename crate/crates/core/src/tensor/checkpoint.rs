//! `MGNN-CKPT v1` parameter files.
//!
//! ```text
//! MGNN-CKPT v1\n
//! param <name> <rank> <dim_0> ... <dim_{rank-1}>\n
//! <u64 LE value count><value count × f64 LE, row-major>
//! param ...
//! ```
//!
//! Only parameter values are stored; optimizer moments are not.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CKPT_MAGIC: &str = "MGNN-CKPT v1";

pub fn write_checkpoint<W: Write>(store: &ParamStore, mut w: W) -> Result<()> {
    writeln!(w, "{CKPT_MAGIC}")?;
    for (_, p) in store.iter() {
        let v = p.value();
        writeln!(w, "param {} 2 {} {}", p.name(), v.rows(), v.cols())?;
        w.write_all(&(v.len() as u64).to_le_bytes())?;
        for x in v.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a checkpoint into a fresh store, in file order.
pub fn read_checkpoint<R: Read>(r: R) -> Result<ParamStore> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.strip_suffix(b"\n") != Some(CKPT_MAGIC.as_bytes()) {
        return Err(Error::Checkpoint("missing MGNN-CKPT v1 header".into()));
    }
    let mut store = ParamStore::new();
    loop {
        line.clear();
        if r.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        let text = std::str::from_utf8(&line)
            .map_err(|_| Error::Checkpoint("parameter header is not UTF-8".into()))?
            .trim_end_matches('\n');
        let fields: Vec<&str> = text.split(' ').collect();
        let bad = || Error::Checkpoint(format!("bad parameter header {text:?}"));
        if fields.len() < 3 || fields[0] != "param" {
            return Err(bad());
        }
        let rank: usize = fields[2].parse().map_err(|_| bad())?;
        if fields.len() != 3 + rank || rank == 0 {
            return Err(bad());
        }
        let dims = fields[3..]
            .iter()
            .map(|d| d.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = dims.iter().product();
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        if u64::from_le_bytes(len) != numel as u64 {
            return Err(Error::Checkpoint(format!("{} declares {numel} values, block holds {}", fields[1], u64::from_le_bytes(len))));
        }
        let mut bytes = vec![0u8; numel * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let (rows, cols) = match dims.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => (dims[..rank - 1].iter().product(), dims[rank - 1]),
        };
        store.add(fields[1], Tensor::new(rows, cols, data)?)?;
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<()> {
    write_checkpoint(store, BufWriter::new(File::create(path)?))
}

/// Loads values into an existing store; names and shapes must match exactly.
pub fn load_checkpoint(store: &mut ParamStore, path: &Path) -> Result<()> {
    let loaded = read_checkpoint(File::open(path)?)?;
    if loaded.len() != store.len() {
        return Err(Error::Checkpoint(format!("{} parameters in file, model has {}", loaded.len(), store.len())));
    }
    for (_, p) in loaded.iter() {
        let id = store
            .id(p.name())
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {}", p.name())))?;
        store.set_value(id, p.value().clone())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(-1e6f64..1e6, 1..24), cols in 1usize..4) {
            let rows = values.len() / cols;
            prop_assume!(rows > 0);
            let mut store = ParamStore::new();
            store.add("a.w", Tensor::new(rows, cols, values[..rows * cols].to_vec()).unwrap()).unwrap();
            store.add("b", Tensor::scalar(values[0])).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&store, &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            let mut buf2 = Vec::new();
            write_checkpoint(&back, &mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
            prop_assert_eq!(back.len(), 2);
        }
    }

    #[test]
    fn layout_is_little_endian() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::new(1, 2, vec![1.0, -2.5]).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&store, &mut buf).unwrap();
        let header = b"MGNN-CKPT v1\nparam w 2 1 2\n";
        assert_eq!(&buf[..header.len()], header);
        let rest = &buf[header.len()..];
        assert_eq!(&rest[..8], &2u64.to_le_bytes());
        assert_eq!(&rest[8..16], &1.0f64.to_le_bytes());
        assert_eq!(&rest[16..24], &(-2.5f64).to_le_bytes());
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOPE\n"[..]).is_err());
        let mut buf = b"MGNN-CKPT v1\nparam w 2 1 2\n".to_vec();
        buf.extend_from_slice(&3u64.to_le_bytes());
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
