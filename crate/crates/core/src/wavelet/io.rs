//! Flat binary container (little endian) and CSV export for kernel tables.
//!
//! Binary layout, version 1:
//! `b"MBMKTAB\0"`, `u32` version, `u8` kind (0 synthesis, 1 dual), `u8` m, `u8` n, `u8` 0,
//! `f64` dy, `u64` ny_half, `f64` theta_lo, `f64` theta_hi, `u64` theta_count,
//! `f64` tail_constant, `f64` imag_residue, `f64` periodization_bound,
//! `theta_count` left tail coefficients, `theta_count` right tail coefficients,
//! then `(2 ny_half + 1) * theta_count` values in row-major order (`y` outer).

use std::io::{Read, Write};

use super::kernel::{KernelKind, KernelTable, ThetaGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MBMKTAB\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_table<W: Write>(t: &KernelTable, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let kind = match t.which {
        KernelKind::Synthesis => 0u8,
        KernelKind::Dual => 1u8,
    };
    w.write_all(&[kind, t.dy_order as u8, t.dtheta_order as u8, 0])?;
    w.write_all(&t.dy.to_le_bytes())?;
    w.write_all(&(t.ny_half as u64).to_le_bytes())?;
    put_f64s(&mut w, &[t.theta.lo, t.theta.hi])?;
    w.write_all(&(t.theta.count as u64).to_le_bytes())?;
    put_f64s(&mut w, &[t.tail_constant, t.imag_residue, t.periodization_bound])?;
    put_f64s(&mut w, &t.tail_left)?;
    put_f64s(&mut w, &t.tail_right)?;
    put_f64s(&mut w, &t.values)?;
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated table: {e}")))?;
        Ok(b)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn read_table<R: Read>(r: R) -> Result<KernelTable> {
    let mut rd = Reader { inner: r };
    if &rd.bytes::<8>()? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(rd.bytes::<4>()?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported table version {version}")));
    }
    let [kind, m, n, _] = rd.bytes::<4>()?;
    let which = match kind {
        0 => KernelKind::Synthesis,
        1 => KernelKind::Dual,
        other => return Err(Error::Format(format!("unknown kernel kind {other}"))),
    };
    let dy = rd.f64()?;
    let ny_half = rd.u64()? as usize;
    let (lo, hi) = (rd.f64()?, rd.f64()?);
    let count = rd.u64()? as usize;
    let theta = ThetaGrid { lo, hi, count };
    theta.validate()?;
    if ny_half == 0 || ny_half > (1 << 24) || !(dy > 0.0) {
        return Err(Error::Format(format!("implausible y grid: dy {dy}, ny_half {ny_half}")));
    }
    let tail_constant = rd.f64()?;
    let imag_residue = rd.f64()?;
    let periodization_bound = rd.f64()?;
    let tail_left = rd.f64s(count)?;
    let tail_right = rd.f64s(count)?;
    let values = rd.f64s((2 * ny_half + 1) * count)?;
    Ok(KernelTable {
        which,
        dy_order: m as usize,
        dtheta_order: n as usize,
        dy,
        ny_half,
        theta,
        values,
        tail_constant,
        imag_residue,
        periodization_bound,
        tail_left,
        tail_right,
    })
}

/// CSV with header `y,theta,value`, one row per node.
pub fn write_table_csv<W: Write>(t: &KernelTable, mut w: W) -> Result<()> {
    writeln!(w, "y,theta,value")?;
    for iy in 0..t.ny() {
        let y = t.node_y(iy);
        for it in 0..t.theta.count {
            writeln!(w, "{y:.10},{:.10},{:.17e}", t.theta.node(it), t.value(iy, it))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> KernelTable {
        let theta = ThetaGrid { lo: 0.1, hi: 0.9, count: 4 };
        KernelTable {
            which: KernelKind::Dual,
            dy_order: 1,
            dtheta_order: 2,
            dy: 0.5,
            ny_half: 2,
            theta,
            values: (0..20).map(|i| i as f64 * 0.1 - 1.0).collect(),
            tail_constant: 3.0,
            imag_residue: 1e-17,
            periodization_bound: 1e-12,
            tail_left: vec![0.1, 0.2, 0.3, 0.4],
            tail_right: vec![-0.1, -0.2, -0.3, -0.4],
        }
    }

    #[test]
    fn binary_round_trip() {
        let t = small();
        let mut buf = Vec::new();
        write_table(&t, &mut buf).unwrap();
        let r = read_table(buf.as_slice()).unwrap();
        assert_eq!(r.values, t.values);
        assert_eq!((r.which, r.dy_order, r.dtheta_order, r.ny_half), (t.which, 1, 2, 2));
        assert_eq!(r.tail_left, t.tail_left);
        assert_eq!(r.eval(0.3, 0.5).unwrap(), t.eval(0.3, 0.5).unwrap());
    }

    #[test]
    fn rejects_corrupt_input() {
        let mut buf = Vec::new();
        write_table(&small(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_table(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(read_table(bad.as_slice()).is_err());
        assert!(read_table(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut out = Vec::new();
        write_table_csv(&small(), &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().next(), Some("y,theta,value"));
        assert_eq!(s.lines().count(), 21);
    }
}
