//! Plain-text channel dump.
//!
//! ```text
//! M N K
//! k m n eps re_1 im_1 ... re_N im_N
//! ...
//! ```
//!
//! Indices are 0-based, one record per `(k, m, n)`, numbers written with 17
//! significant digits so that a dump round-trips bit-exactly. Blank lines and
//! lines starting with `#` are ignored. The true channels, when present, go to
//! a second file with the same layout.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{ChannelSet, PackingLayout};
use crate::error::{Error, Result};

/// Upper bound on complex entries accepted from a dump header.
const MAX_ENTRIES: usize = 1 << 24;

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_one(layout: &PackingLayout, h: &[Complex64], radii: &[f64]) -> String {
    let mut s = format!("{} {} {}\n", layout.cells, layout.antennas, layout.users);
    for m in 0..layout.cells {
        for n in 0..layout.cells {
            for k in 0..layout.users {
                let b = layout.block(m, n, k);
                let _ = write!(s, "{k} {m} {n} {}", fmt_f64(radii[b]));
                for c in &h[b * layout.antennas..][..layout.antennas] {
                    let _ = write!(s, " {} {}", fmt_f64(c.re), fmt_f64(c.im));
                }
                s.push('\n');
            }
        }
    }
    s
}

/// Renders the estimate file and, when true channels are present, the
/// parallel truth file.
pub fn write_channel_dump(ch: &ChannelSet) -> (String, Option<String>) {
    let est = write_one(&ch.layout, &ch.h_est, &ch.radii);
    let truth = ch
        .h_true
        .as_ref()
        .map(|t| write_one(&ch.layout, t, &ch.radii));
    (est, truth)
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    let x = tok
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))?;
    if !x.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what} '{tok}'")));
    }
    Ok(x)
}

/// Parses one dump file into `(layout, coefficients, radii)`.
pub fn parse_channel_dump(text: &str) -> Result<(PackingLayout, Vec<Complex64>, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hl, header) = lines.next().ok_or_else(|| Error::parse(0, "empty channel dump"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(Error::parse(hl, "header must be 'M N K'"));
    }
    let m = parse_usize(toks[0], hl, "M")?;
    let n = parse_usize(toks[1], hl, "N")?;
    let k = parse_usize(toks[2], hl, "K")?;
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::parse(hl, "dimensions must be positive"));
    }
    let total = m
        .checked_mul(m)
        .and_then(|x| x.checked_mul(n))
        .and_then(|x| x.checked_mul(k))
        .filter(|x| *x <= MAX_ENTRIES)
        .ok_or_else(|| Error::parse(hl, "dimensions too large"))?;
    let layout = PackingLayout::new(m, n, k);

    let mut h = vec![Complex64::new(0.0, 0.0); total];
    let mut radii = vec![0.0; layout.num_blocks()];
    let mut seen = vec![false; layout.num_blocks()];
    let mut count = 0usize;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 + 2 * n {
            return Err(Error::parse(
                ln,
                format!("expected {} fields, found {}", 4 + 2 * n, toks.len()),
            ));
        }
        let kk = parse_usize(toks[0], ln, "k")?;
        let mm = parse_usize(toks[1], ln, "m")?;
        let nn = parse_usize(toks[2], ln, "n")?;
        if kk >= k || mm >= m || nn >= m {
            return Err(Error::parse(ln, format!("index ({kk}, {mm}, {nn}) out of range")));
        }
        let b = layout.block(mm, nn, kk);
        if std::mem::replace(&mut seen[b], true) {
            return Err(Error::parse(ln, format!("duplicate record ({kk}, {mm}, {nn})")));
        }
        let eps = parse_f64(toks[3], ln, "radius")?;
        if eps < 0.0 {
            return Err(Error::parse(ln, "negative radius"));
        }
        radii[b] = eps;
        for j in 0..n {
            let re = parse_f64(toks[4 + 2 * j], ln, "real part")?;
            let im = parse_f64(toks[5 + 2 * j], ln, "imaginary part")?;
            h[b * n + j] = Complex64::new(re, im);
        }
        count += 1;
    }
    if count != layout.num_blocks() {
        return Err(Error::parse(
            0,
            format!("expected {} records, found {count}", layout.num_blocks()),
        ));
    }
    Ok((layout, h, radii))
}

/// Reads an estimate dump and an optional truth dump into a [`ChannelSet`].
pub fn read_channel_dump(est: &str, truth: Option<&str>) -> Result<ChannelSet> {
    let (layout, h_est, radii) = parse_channel_dump(est)?;
    let h_true = match truth {
        Some(t) => {
            let (lt, ht, _) = parse_channel_dump(t)?;
            if lt != layout {
                return Err(Error::parse(0, "truth dump dimensions differ from estimate dump"));
            }
            Some(ht)
        }
        None => None,
    };
    ChannelSet::new(layout, h_est, radii, h_true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_rayleigh_channels, uniform_radii, NetworkConfig};

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = NetworkConfig::uniform(2, 3, 2, 1.0);
        let ch = generate_rayleigh_channels(&cfg, &uniform_radii(&cfg, 0.1), 5).unwrap();
        let (est, truth) = write_channel_dump(&ch);
        let back = read_channel_dump(&est, truth.as_deref()).unwrap();
        assert_eq!(back, ch);
        for (a, b) in back.h_est.iter().zip(&ch.h_est) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_channel_dump("").is_err());
        assert!(parse_channel_dump("1 1").is_err());
        assert!(parse_channel_dump("1 1 1\n0 0 0 0.1 1.0").is_err());
        assert!(parse_channel_dump("1 1 1\n0 0 1 0.1 1.0 0.0").is_err());
        assert!(parse_channel_dump("1 1 1\n0 0 0 -0.1 1.0 0.0").is_err());
        assert!(parse_channel_dump("1 1 1\n0 0 0 0.1 NaN 0.0").is_err());
        assert!(parse_channel_dump("1 1 1\n0 0 0 0.1 1 0\n0 0 0 0.1 1 0").is_err());
        assert!(parse_channel_dump("100000 100000 100000").is_err());
        let ok = parse_channel_dump("# comment\n1 1 1\n\n0 0 0 0.1 1.5 -2\n").unwrap();
        assert_eq!(ok.1, vec![Complex64::new(1.5, -2.0)]);
    }
}
