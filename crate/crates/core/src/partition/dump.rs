//! Text dump of refined partitions.

use std::io::{self, Write};

use crate::precise;

use super::refine::RefinedAtom;

pub const DUMP_HEADER: &str = "level\tinterval_lo\tinterval_hi\tanchor_id\tdepth\treturn_times\treturn_depths";

fn join(xs: impl Iterator<Item = u32>) -> String {
    xs.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// One row per atom: ends with 17 significant digits, the anchor and depth
/// of the latest return (`-1` for an anchorless escape interval) and the
/// full return record.
pub fn write_atom<W: Write>(mut w: W, level: usize, a: &RefinedAtom) -> io::Result<()> {
    let (anchor, depth) = a.return_depths.last().copied().unwrap_or((u32::MAX, 0));
    let anchor = if anchor == u32::MAX { -1 } else { anchor as i64 };
    writeln!(
        w,
        "{level}\t{:.16e}\t{:.16e}\t{anchor}\t{depth}\t{}\t{}",
        precise::to_f64(a.lo),
        precise::to_f64(a.hi),
        join(a.return_times.iter().copied()),
        join(a.return_depths.iter().map(|d| d.1)),
    )
}

pub fn write_level<W: Write>(mut w: W, level: usize, atoms: &[RefinedAtom]) -> io::Result<()> {
    for a in atoms {
        write_atom(&mut w, level, a)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precise::dd;

    #[test]
    fn row_format() {
        let a = RefinedAtom {
            lo: dd(0.1),
            hi: dd(0.25),
            image_lo: dd(0.0),
            image_hi: dd(1.0),
            path: vec![0, 1],
            reversed: false,
            return_times: vec![0, 2],
            return_depths: vec![(0, 3), (1, 40)],
            return_cells: vec![2, 7],
            hosts: vec![None, None],
        };
        let mut out = Vec::new();
        write_atom(&mut out, 2, &a).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "2\t1.0000000000000001e-1\t2.5000000000000000e-1\t1\t40\t0;2\t3;40\n");
        let cols: Vec<&str> = s.trim_end().split('\t').collect();
        assert_eq!(cols.len(), DUMP_HEADER.split('\t').count());
        assert_eq!(cols[1].parse::<f64>().unwrap(), 0.1);
    }
}
