//! Text form of cuts, one per line:
//!
//! ```text
//! <id> <origin> <kappa> | <a_1> ... <a_p> | <b_1> ... <b_q>
//! ```
//!
//! `origin` is `power:<m>`, `g` or `received:<node>`. Numbers use 17
//! significant digits. An empty `b` section stands for an all-zero block.

use std::fmt::Write as _;

use super::{CutOrigin, CuttingPlane};
use crate::error::{Error, Result};
use crate::model::PackingLayout;

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn origin_token(o: CutOrigin) -> String {
    match o {
        CutOrigin::Power(m) => format!("power:{m}"),
        CutOrigin::G => "g".to_string(),
        CutOrigin::Received(n) => format!("received:{n}"),
    }
}

fn parse_origin(tok: &str, line: usize) -> Result<CutOrigin> {
    if tok == "g" {
        return Ok(CutOrigin::G);
    }
    let (kind, idx) = tok
        .split_once(':')
        .ok_or_else(|| Error::parse(line, format!("unknown cut origin '{tok}'")))?;
    let idx: usize = idx
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid origin index in '{tok}'")))?;
    match kind {
        "power" => Ok(CutOrigin::Power(idx)),
        "received" => Ok(CutOrigin::Received(idx)),
        _ => Err(Error::parse(line, format!("unknown cut origin '{tok}'"))),
    }
}

pub fn format_cut(cp: &CuttingPlane) -> String {
    let mut s = format!("{} {} {} |", cp.id, origin_token(cp.origin), fmt_num(cp.kappa));
    for x in &cp.a {
        let _ = write!(s, " {}", fmt_num(*x));
    }
    s.push_str(" |");
    for x in &cp.b {
        let _ = write!(s, " {}", fmt_num(*x));
    }
    s
}

pub fn write_cuts<'a>(cuts: impl IntoIterator<Item = &'a CuttingPlane>) -> String {
    let mut s = String::new();
    for cp in cuts {
        s.push_str(&format_cut(cp));
        s.push('\n');
    }
    s
}

fn parse_nums(sec: &str, line: usize) -> Result<Vec<f64>> {
    sec.split_whitespace()
        .map(|t| {
            let x: f64 = t
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid number '{t}'")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::parse(line, format!("non-finite number '{t}'")))
            }
        })
        .collect()
}

/// Parses a single cut line. With a layout, block lengths are checked.
pub fn parse_cut(text: &str, line: usize, layout: Option<&PackingLayout>) -> Result<CuttingPlane> {
    let mut secs = text.split('|');
    let head = secs.next().unwrap_or("");
    let a = secs
        .next()
        .ok_or_else(|| Error::parse(line, "missing a-section"))?;
    let b = secs
        .next()
        .ok_or_else(|| Error::parse(line, "missing b-section"))?;
    if secs.next().is_some() {
        return Err(Error::parse(line, "too many '|' separators"));
    }
    let head: Vec<&str> = head.split_whitespace().collect();
    if head.len() != 3 {
        return Err(Error::parse(line, "header must be '<id> <origin> <kappa>'"));
    }
    let id: u64 = head[0]
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid cut id '{}'", head[0])))?;
    let origin = parse_origin(head[1], line)?;
    let kappa = parse_nums(head[2], line)?[0];
    let a = parse_nums(a, line)?;
    let b = parse_nums(b, line)?;
    if let Some(l) = layout {
        if a.len() != l.v_len() {
            return Err(Error::parse(line, format!("a has {} entries, expected {}", a.len(), l.v_len())));
        }
        if !b.is_empty() && b.len() != l.delta_len() {
            return Err(Error::parse(
                line,
                format!("b has {} entries, expected 0 or {}", b.len(), l.delta_len()),
            ));
        }
    }
    CuttingPlane::new(id, origin, a, b, kappa).map_err(|e| Error::parse(line, e.to_string()))
}

/// Parses a cut file; blank lines and `#` comments are skipped.
pub fn parse_cuts(text: &str, layout: Option<&PackingLayout>) -> Result<Vec<CuttingPlane>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_cut(l, i + 1, layout))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bits() {
        let cp = CuttingPlane::new(
            (3 << 40) | 7,
            CutOrigin::Received(3),
            vec![0.1, -1.0 / 3.0, 2.5e-300],
            vec![std::f64::consts::PI, 0.0],
            -1e10 / 7.0,
        )
        .unwrap();
        let back = parse_cut(&format_cut(&cp), 1, None).unwrap();
        assert_eq!(back, cp);
        assert_eq!(back.kappa.to_bits(), cp.kappa.to_bits());

        let pc = CuttingPlane::new(1, CutOrigin::Power(0), vec![4.0, 0.0], vec![], -5.0).unwrap();
        let s = write_cuts([&cp, &pc]);
        assert_eq!(parse_cuts(&s, None).unwrap(), vec![cp, pc]);
    }

    #[test]
    fn rejects_bad_lines() {
        for bad in [
            "",
            "1 g 0.0",
            "1 g 0.0 | 1.0",
            "1 g 0.0 | 1.0 | | ",
            "x g 0.0 | 1.0 |",
            "1 power 0.0 | 1.0 |",
            "1 power:x 0.0 | 1.0 |",
            "1 bogus:1 0.0 | 1.0 |",
            "1 g inf | 1.0 |",
            "1 g 0.0 | 0.0 |",
            "1 g 0.0 1 | 1.0 |",
        ] {
            assert!(parse_cut(bad, 1, None).is_err(), "{bad:?}");
        }
        let l = PackingLayout::new(1, 1, 1);
        assert!(parse_cut("1 g 0.0 | 1.0 |", 1, Some(&l)).is_err());
        assert!(parse_cut("1 g 0.0 | 1.0 0.0 | 1.0", 1, Some(&l)).is_err());
        assert!(parse_cut("1 g 0.0 | 1.0 0.0 | 1.0 0.0", 1, Some(&l)).is_ok());
    }
}
