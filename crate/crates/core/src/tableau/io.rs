//! Plain-text tableau files.
//!
//! ```text
//! # comment
//! name = savgl5
//! s = 2
//! r = 1
//! d11 = 0.4166666666666667, -0.08333333333333333; 0.75, 0.25
//! d12 = 1; 1
//! d21 = 0.75, 0.25
//! d22 = 1
//! c = 0.3333333333333333, 1
//! w = 1, 0, 0, 0
//! nu = 3
//! ```
//!
//! Matrix rows are separated by `;`, entries by `,`. Required keys are `s`,
//! `r`, `d11`, `d12`, `d21`, `d22`, `c`, `w` and `nu`. Optional keys are
//! `name`, `p` (defaults to the column count of `w` minus one), `q`, `q_hat`,
//! `extrapolation` (`two_point <current> <previous>`, `stages` or
//! `stages_with_start`) and the certificate weights `g`, `h`, `h_tilde`,
//! which must appear together.
//!
//! Numbers are written in shortest round-trip form, so store followed by
//! load reproduces every entry bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{CertificateWeights, Extrapolation, GltdTableau, TableauParts};
use crate::error::{Error, Result};

struct Entry {
    line: usize,
    value: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_real(line: usize, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("`{}` is not a real number", text.trim())))
}

fn parse_matrix(entry: &Entry, rows: usize, cols: usize, key: &str) -> Result<DMatrix<f64>> {
    let parsed: Vec<Vec<f64>> = entry
        .value
        .split(';')
        .map(|row| row.split(',').map(|v| parse_real(entry.line, v)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    if parsed.len() != rows || parsed.iter().any(|r| r.len() != cols) {
        let shape: Vec<usize> = parsed.iter().map(Vec::len).collect();
        return Err(parse_err(entry.line, format!("{key} must be {rows}x{cols}, found row lengths {shape:?}")));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| parsed[i][j]))
}

fn parse_vector(entry: &Entry, len: usize, key: &str) -> Result<DVector<f64>> {
    let values = entry
        .value
        .split(',')
        .map(|v| parse_real(entry.line, v))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != len {
        return Err(parse_err(entry.line, format!("{key} must have {len} entries, found {}", values.len())));
    }
    Ok(DVector::from_vec(values))
}

fn parse_usize(entry: &Entry, key: &str) -> Result<usize> {
    match entry.value.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(parse_err(entry.line, format!("{key} must be a positive integer"))),
    }
}

fn parse_extrapolation(entry: &Entry) -> Result<Extrapolation> {
    let words: Vec<&str> = entry.value.split_whitespace().collect();
    match words.as_slice() {
        ["two_point", a, b] => Ok(Extrapolation::TwoPoint {
            current: parse_real(entry.line, a)?,
            previous: parse_real(entry.line, b)?,
        }),
        ["stages"] => Ok(Extrapolation::PreviousStages { include_step_start: false }),
        ["stages_with_start"] => Ok(Extrapolation::PreviousStages { include_step_start: true }),
        _ => Err(parse_err(entry.line, format!("unknown extrapolation rule `{}`", entry.value))),
    }
}

const KNOWN_KEYS: [&str; 17] = [
    "name", "s", "r", "p", "q", "q_hat", "nu", "d11", "d12", "d21", "d22", "c", "w", "extrapolation", "g", "h",
    "h_tilde",
];

pub fn parse_tableau(text: &str) -> Result<GltdTableau> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
        let key = key.trim().to_ascii_lowercase();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(parse_err(line, format!("unknown key `{key}`")));
        }
        if entries.contains_key(&key) {
            return Err(parse_err(line, format!("duplicate key `{key}`")));
        }
        entries.insert(key, Entry { line, value: value.trim().to_string() });
    }
    let last_line = text.lines().count();
    let need = |key: &str| entries.get(key).ok_or_else(|| parse_err(last_line, format!("missing required key `{key}`")));

    let s = parse_usize(need("s")?, "s")?;
    let r = parse_usize(need("r")?, "r")?;
    let nu = parse_usize(need("nu")?, "nu")?;
    let d11 = parse_matrix(need("d11")?, s, s, "d11")?;
    let d12 = parse_matrix(need("d12")?, s, r, "d12")?;
    let d21 = parse_matrix(need("d21")?, r, s, "d21")?;
    let d22 = parse_matrix(need("d22")?, r, r, "d22")?;
    let c = parse_vector(need("c")?, s, "c")?;

    let w_entry = need("w")?;
    let w_cols = w_entry.value.split(';').next().map_or(0, |row| row.split(',').count());
    let p = match entries.get("p") {
        Some(e) => parse_usize(e, "p")?,
        None => w_cols.saturating_sub(1).max(1),
    };
    let w = parse_matrix(w_entry, r, p + 1, "w")?;
    let q = entries.get("q").map(|e| parse_usize(e, "q")).transpose()?.unwrap_or(1);
    let q_hat = entries.get("q_hat").map(|e| parse_usize(e, "q_hat")).transpose()?.unwrap_or(q);

    let extrapolation = match entries.get("extrapolation") {
        Some(e) => parse_extrapolation(e)?,
        None if s == 1 => Extrapolation::TwoPoint { current: 1.0 + c[0], previous: -c[0] },
        None => Extrapolation::PreviousStages { include_step_start: nu == s + 1 },
    };

    let certificate = match (entries.get("g"), entries.get("h"), entries.get("h_tilde")) {
        (None, None, None) => None,
        (Some(g), Some(h), Some(ht)) => Some(CertificateWeights {
            g: parse_matrix(g, r, r, "g")?,
            h: parse_vector(h, s, "h")?,
            h_tilde: parse_vector(ht, s, "h_tilde")?,
        }),
        _ => {
            let line = ["g", "h", "h_tilde"].iter().find_map(|k| entries.get(*k)).map_or(last_line, |e| e.line);
            return Err(parse_err(line, "g, h and h_tilde must be given together"));
        }
    };

    let name = entries.get("name").map_or_else(|| "custom".to_string(), |e| e.value.clone());
    GltdTableau::from_parts(TableauParts {
        name,
        p,
        q,
        q_hat,
        nu,
        d11,
        d12,
        d21,
        d22,
        c,
        w,
        extrapolation,
        certificate,
    })
}

fn push_matrix(out: &mut String, key: &str, m: &DMatrix<f64>) {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect::<Vec<_>>().join(", "))
        .collect();
    let _ = writeln!(out, "{key} = {}", rows.join("; "));
}

fn push_vector(out: &mut String, key: &str, v: &DVector<f64>) {
    let items: Vec<String> = v.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "{key} = {}", items.join(", "));
}

pub fn write_tableau(t: &GltdTableau) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name = {}", t.name());
    for (key, v) in [("s", t.s()), ("r", t.r()), ("p", t.p()), ("q", t.q()), ("q_hat", t.q_hat()), ("nu", t.nu())] {
        let _ = writeln!(out, "{key} = {v}");
    }
    push_matrix(&mut out, "d11", t.d11());
    push_matrix(&mut out, "d12", t.d12());
    push_matrix(&mut out, "d21", t.d21());
    push_matrix(&mut out, "d22", t.d22());
    push_vector(&mut out, "c", t.c());
    push_matrix(&mut out, "w", t.w());
    let rule = match t.extrapolation() {
        Extrapolation::TwoPoint { current, previous } => format!("two_point {current} {previous}"),
        Extrapolation::PreviousStages { include_step_start: false } => "stages".into(),
        Extrapolation::PreviousStages { include_step_start: true } => "stages_with_start".into(),
    };
    let _ = writeln!(out, "extrapolation = {rule}");
    if let Some(cert) = t.certificate() {
        push_matrix(&mut out, "g", &cert.g);
        push_vector(&mut out, "h", &cert.h);
        push_vector(&mut out, "h_tilde", &cert.h_tilde);
    }
    out
}
