//! Line-based input formats: structure, curve and generator files,
//! points and grid specs, plus the built-in structure registry.
//!
//! Files are UTF-8 with `[section]` headers, `key = value` lines and `#`
//! comments.

use std::fmt::Write as _;

use srkilling_core::expr::{parse_expression, Expr, ParseError, Rational};
use srkilling_core::frame::{FrameError, RawStructure};
use srkilling_core::killing::{ExprCurve, Generator, Grid};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("line {line}: expression `{text}`: {source}")]
    Expression {
        line: usize,
        text: String,
        source: ParseError,
    },
    #[error("{0}")]
    Dimension(String),
    #[error("unknown built-in structure `{0}`")]
    UnknownBuiltin(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

fn syntax(line: usize, message: impl Into<String>) -> InputError {
    InputError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, section: &'static str, key: &'static str) -> Result<&Entry, InputError> {
        self.get(key).ok_or(InputError::MissingKey { section, key })
    }
}

/// Splits a file into sections. Keys may contain spaces (`c 1 2 3`).
pub fn sections(text: &str) -> Result<Vec<Section>, InputError> {
    let mut out: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, "unterminated section header"))?;
            out.push(Section {
                name: name.trim().to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let section = out.last_mut().ok_or_else(|| syntax(line, "entry outside of a section"))?;
        let key = key.split_whitespace().collect::<Vec<_>>().join(" ");
        if section.get(&key).is_some() {
            return Err(syntax(line, format!("duplicate key `{key}`")));
        }
        section.entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

fn find<'a>(secs: &'a [Section], name: &'static str) -> Result<&'a Section, InputError> {
    secs.iter().find(|s| s.name == name).ok_or(InputError::MissingSection(name))
}

fn expression(text: &str, vars: &[String], line: usize) -> Result<Expr, InputError> {
    parse_expression(text, vars).map_err(|source| InputError::Expression {
        line,
        text: text.to_string(),
        source,
    })
}

/// Parses `p`, `-p` or `p/q` with integer `p`, `q`.
pub fn rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim().parse::<i64>().ok()?, b.trim().parse::<i64>().ok()?),
        None => (t.parse::<i64>().ok()?, 1),
    };
    (den != 0).then(|| Rational::new(num, den))
}

/// A real number, written either as a decimal or as a fraction.
pub fn real(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (a, b) = t.split_once('/')?;
    let v = a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?;
    v.is_finite().then_some(v)
}

fn split_list(text: &str) -> Vec<&str> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a structure file into raw frame data.
pub fn parse_structure(text: &str) -> Result<RawStructure, InputError> {
    let secs = sections(text)?;
    let m = find(&secs, "manifold")?;
    let mode = m.require("manifold", "mode")?;
    let n_entry = m.require("manifold", "n")?;
    let n: usize = n_entry
        .value
        .parse()
        .map_err(|_| syntax(n_entry.line, "n must be a positive integer"))?;
    if n == 0 {
        return Err(syntax(n_entry.line, "n must be a positive integer"));
    }
    let dim = 2 * n + 1;
    match mode.value.as_str() {
        "chart" => {
            let c = m.require("manifold", "coords")?;
            let coords: Vec<String> = split_list(&c.value).into_iter().map(str::to_string).collect();
            if coords.len() != dim {
                return Err(InputError::Dimension(format!(
                    "line {}: {} coordinates given, n = {n} needs {dim}",
                    c.line,
                    coords.len()
                )));
            }
            let f = find(&secs, "frame")?;
            if f.entries.len() != 2 * n {
                return Err(InputError::Dimension(format!(
                    "[frame] has {} fields, n = {n} needs {}",
                    f.entries.len(),
                    2 * n
                )));
            }
            let mut frame = Vec::new();
            for e in &f.entries {
                let comps: Vec<&str> = e.value.split(',').collect();
                if comps.len() != dim {
                    return Err(InputError::Dimension(format!(
                        "line {}: field {} has {} components, expected {dim}",
                        e.line,
                        e.key,
                        comps.len()
                    )));
                }
                frame.push(
                    comps
                        .iter()
                        .map(|s| expression(s, &coords, e.line))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            Ok(RawStructure::chart(n, coords, frame)?)
        }
        "lie" => {
            let b = find(&secs, "brackets")?;
            let mut consts = Vec::new();
            for e in &b.entries {
                let parts: Vec<&str> = e.key.split(' ').collect();
                let idx: Option<Vec<usize>> = match parts.as_slice() {
                    ["c", rest @ ..] if rest.len() == 3 => rest.iter().map(|s| s.parse().ok()).collect(),
                    _ => None,
                };
                let idx = idx.ok_or_else(|| syntax(e.line, "expected `c <i> <j> <k> = <rational>`"))?;
                if idx.iter().any(|&i| i == 0 || i > dim) || idx[0] >= idx[1] {
                    return Err(syntax(e.line, format!("indices must satisfy 1 <= i < j <= {dim}, 1 <= k <= {dim}")));
                }
                let v = rational(&e.value).ok_or_else(|| syntax(e.line, "bracket constant must be rational"))?;
                consts.push((idx[0] - 1, idx[1] - 1, idx[2] - 1, v));
            }
            Ok(RawStructure::lie(n, &consts)?)
        }
        other => Err(syntax(mode.line, format!("mode must be chart or lie, got `{other}`"))),
    }
}

/// Definition text of `heisenberg:<n>`. Coordinates are `x, y, z` for
/// `n = 1` and `x1..xn, y1..yn, z` otherwise; the frame is ordered
/// `X1, Y1, X2, Y2, ...`.
pub fn heisenberg_text(n: usize) -> String {
    if n == 1 {
        return HEISENBERG1.to_string();
    }
    let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let ys: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
    let dim = 2 * n + 1;
    let mut t = format!("# Heisenberg group, n = {n}\n[manifold]\nmode = chart\nn = {n}\ncoords = ");
    t += &xs.iter().chain(&ys).map(String::as_str).chain(["z"]).collect::<Vec<_>>().join(" ");
    t += "\n\n[frame]\n";
    let mut label = 1;
    for i in 0..n {
        for (slot, z) in [(i, format!("-{}/2", ys[i])), (n + i, format!("{}/2", xs[i]))] {
            let mut comps = vec!["0".to_string(); dim];
            comps[slot] = "1".into();
            comps[dim - 1] = z;
            let _ = writeln!(t, "X{label} = {}", comps.join(", "));
            label += 1;
        }
    }
    t
}

const HEISENBERG1: &str = include_str!("../structures/heisenberg1.toml");
const SU2: &str = include_str!("../structures/su2.toml");
const SU2_CHART: &str = include_str!("../structures/su2_chart.toml");

/// Names accepted by [`builtin`].
pub const BUILTINS: &str = "heisenberg:<n>, su2, su2:chart";

/// Definition text of a built-in structure.
pub fn builtin(name: &str) -> Option<String> {
    match name {
        "su2" => Some(SU2.to_string()),
        "su2:chart" => Some(SU2_CHART.to_string()),
        _ => {
            let n: usize = name.strip_prefix("heisenberg:")?.parse().ok()?;
            (n >= 1).then(|| heisenberg_text(n))
        }
    }
}

/// Resolves a structure argument: a built-in name or a file path.
/// Returns the definition text.
pub fn load_structure_text(arg: &str) -> Result<String, InputError> {
    if let Some(t) = builtin(arg) {
        return Ok(t);
    }
    if arg.starts_with("heisenberg:") || arg.starts_with("su2") {
        return Err(InputError::UnknownBuiltin(arg.to_string()));
    }
    read(arg)
}

pub fn read(path: &str) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_string(),
        source,
    })
}

/// `x=0,y=0,z=0` or a comma list in coordinate order.
pub fn parse_point(text: &str, coords: &[String]) -> Result<Vec<f64>, InputError> {
    let bad = |m: String| InputError::Dimension(format!("point `{text}`: {m}"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.iter().any(|p| p.contains('=')) {
        let mut out = vec![None; coords.len()];
        for p in &parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad(format!("mixed named and positional entry `{p}`")))?;
            let i = coords
                .iter()
                .position(|c| c == k.trim())
                .ok_or_else(|| bad(format!("unknown coordinate `{}`", k.trim())))?;
            out[i] = Some(real(v).ok_or_else(|| bad(format!("not a number: `{v}`")))?);
        }
        return out
            .iter()
            .zip(coords)
            .map(|(v, c)| v.ok_or_else(|| bad(format!("missing coordinate `{c}`"))))
            .collect();
    }
    if parts.len() != coords.len() {
        return Err(bad(format!("{} values given, expected {}", parts.len(), coords.len())));
    }
    parts
        .iter()
        .map(|p| real(p).ok_or_else(|| bad(format!("not a number: `{p}`"))))
        .collect()
}

/// `x:-1:1:5,y:-1:1:5,z:-1:1:5`; every coordinate must appear once.
pub fn parse_grid(text: &str, coords: &[String]) -> Result<Grid, InputError> {
    let bad = |m: String| InputError::Dimension(format!("grid `{text}`: {m}"));
    let mut spec = vec![None; coords.len()];
    for part in text.split(',') {
        let f: Vec<&str> = part.trim().split(':').collect();
        if f.len() != 4 {
            return Err(bad(format!("`{part}` is not name:lo:hi:count")));
        }
        let i = coords
            .iter()
            .position(|c| c == f[0])
            .ok_or_else(|| bad(format!("unknown coordinate `{}`", f[0])))?;
        let lo = real(f[1]).ok_or_else(|| bad(format!("not a number: `{}`", f[1])))?;
        let hi = real(f[2]).ok_or_else(|| bad(format!("not a number: `{}`", f[2])))?;
        let count: usize = f[3].parse().map_err(|_| bad(format!("bad count `{}`", f[3])))?;
        if count == 0 || hi < lo {
            return Err(bad(format!("axis `{}` needs count >= 1 and lo <= hi", f[0])));
        }
        if spec[i].replace((lo, hi, count)).is_some() {
            return Err(bad(format!("coordinate `{}` given twice", f[0])));
        }
    }
    let spec = spec
        .iter()
        .zip(coords)
        .map(|(s, c)| s.ok_or_else(|| bad(format!("missing coordinate `{c}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Grid::uniform(&spec))
}

/// Curve file: `[curve]` with `t_range = t0 t1` and `gamma = e1, e2, ...`.
pub fn parse_curve(text: &str, dim: usize) -> Result<ExprCurve, InputError> {
    let secs = sections(text)?;
    let c = find(&secs, "curve")?;
    let r = c.require("curve", "t_range")?;
    let ends: Vec<f64> = split_list(&r.value).iter().filter_map(|s| real(s)).collect();
    if ends.len() != 2 || split_list(&r.value).len() != 2 {
        return Err(syntax(r.line, "t_range needs two numbers"));
    }
    let g = c.require("curve", "gamma")?;
    let t = ["t".to_string()];
    let gamma = g
        .value
        .split(',')
        .map(|s| expression(s, &t, g.line))
        .collect::<Result<Vec<_>, _>>()?;
    if gamma.len() != dim {
        return Err(InputError::Dimension(format!(
            "line {}: curve has {} components, structure has dimension {dim}",
            g.line,
            gamma.len()
        )));
    }
    Ok(ExprCurve::new(gamma, ends[0], ends[1]))
}

/// Generator file: `[generator]` with `X`, `A` (strictly lower triangle,
/// rows separated by `;`), `c` and `at`.
pub fn parse_generator(text: &str, rank: usize, coords: &[String]) -> Result<Generator, InputError> {
    let secs = sections(text)?;
    let g = find(&secs, "generator")?;
    let xe = g.require("generator", "X")?;
    let x: Vec<f64> = split_list(&xe.value)
        .iter()
        .map(|s| real(s).ok_or_else(|| syntax(xe.line, format!("not a number: `{s}`"))))
        .collect::<Result<_, _>>()?;
    if x.len() != rank {
        return Err(InputError::Dimension(format!(
            "line {}: X has {} entries, expected {rank}",
            xe.line,
            x.len()
        )));
    }
    let ae = g.require("generator", "A")?;
    let rows: Vec<&str> = ae.value.split(';').collect();
    if rows.len() != rank - 1 {
        return Err(InputError::Dimension(format!(
            "line {}: A has {} rows, expected {}",
            ae.line,
            rows.len(),
            rank - 1
        )));
    }
    let mut v = x;
    for (k, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = split_list(row)
            .iter()
            .map(|s| real(s).ok_or_else(|| syntax(ae.line, format!("not a number: `{s}`"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != k + 1 {
            return Err(InputError::Dimension(format!(
                "line {}: row {} of A has {} entries, expected {}",
                ae.line,
                k + 2,
                vals.len(),
                k + 1
            )));
        }
        v.extend(vals);
    }
    let ce = g.require("generator", "c")?;
    v.push(real(&ce.value).ok_or_else(|| syntax(ce.line, "c must be a number"))?);
    let q = match g.get("at") {
        Some(e) => parse_point(&e.value, coords)?,
        None if coords.is_empty() => Vec::new(),
        None => return Err(InputError::MissingKey { section: "generator", key: "at" }),
    };
    Ok(Generator::from_vector(rank, &v, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xyz() -> Vec<String> {
        ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sections_and_comments() {
        let s = sections("# c\n[a]\nk = 1 # tail\nc 1  2 3 = -1\n\n[b]\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].entries[1].key, "c 1 2 3");
        assert_eq!(s[0].entries[1].value, "-1");
        assert!(matches!(sections("k = 1"), Err(InputError::Syntax { line: 1, .. })));
        assert!(matches!(sections("[a]\nk = 1\nk = 2"), Err(InputError::Syntax { line: 3, .. })));
        assert!(matches!(sections("[a]\nnonsense"), Err(InputError::Syntax { line: 2, .. })));
    }

    #[test]
    fn builtins_parse() {
        for name in ["heisenberg:1", "heisenberg:2", "heisenberg:3", "su2", "su2:chart"] {
            let raw = parse_structure(&builtin(name).unwrap()).unwrap();
            assert_eq!(raw.dim(), if name == "heisenberg:2" { 5 } else if name == "heisenberg:3" { 7 } else { 3 });
        }
        assert!(builtin("heisenberg:0").is_none());
        assert!(matches!(load_structure_text("heisenberg:x"), Err(InputError::UnknownBuiltin(_))));
        assert!(matches!(load_structure_text("/no/such/file.toml"), Err(InputError::Io { .. })));
    }

    #[test]
    fn structure_errors() {
        let head = "[manifold]\nmode = chart\nn = 1\ncoords = x y z\n[frame]\n";
        let e = parse_structure(&format!("{head}X1 = 1, 0\nX2 = 0, 1, x/2\n")).unwrap_err();
        assert!(matches!(e, InputError::Dimension(_)));
        let e = parse_structure(&format!("{head}X1 = 1, 0, w\nX2 = 0, 1, x/2\n")).unwrap_err();
        assert!(matches!(e, InputError::Expression { line: 6, .. }));
        let e = parse_structure("[manifold]\nmode = lie\nn = 1\n[brackets]\nc 2 1 3 = 1\n").unwrap_err();
        assert!(matches!(e, InputError::Syntax { line: 5, .. }));
        let e = parse_structure("[manifold]\nmode = lie\nn = 1\n[brackets]\nc 1 2 3 = 0.5\n").unwrap_err();
        assert!(matches!(e, InputError::Syntax { .. }));
        assert!(matches!(parse_structure("[frame]\n"), Err(InputError::MissingSection("manifold"))));
    }

    #[test]
    fn points_and_grids() {
        let c = xyz();
        assert_eq!(parse_point("0, 1/2, -1", &c).unwrap(), vec![0.0, 0.5, -1.0]);
        assert_eq!(parse_point("z=3,x=1,y=2", &c).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_point("x=1,y=2", &c).is_err());
        assert!(parse_point("1,2", &c).is_err());
        let g = parse_grid("z:0:1:2,x:-1:1:5,y:-1:1:5", &c).unwrap();
        assert_eq!(g.shape(), vec![5, 5, 2]);
        assert!(parse_grid("x:-1:1:5,y:-1:1:5", &c).is_err());
        assert!(parse_grid("x:1:-1:5,y:-1:1:5,z:0:0:1", &c).is_err());
    }

    #[test]
    fn generator_file() {
        let g = parse_generator("[generator]\nX = 1 0\nA = -1\nc = 0\nat = 0,0,0\n", 2, &xyz()).unwrap();
        assert_eq!(g.a, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let t = "[generator]\nX = 0 0 0 0\nA = 1; 0 0; 0 0 2\nc = 1/2\nat = 0,0,0,0,0\n";
        let names: Vec<String> = ["x1", "x2", "y1", "y2", "z"].iter().map(|s| s.to_string()).collect();
        let g = parse_generator(t, 4, &names).unwrap();
        assert_eq!((g.a[1][0], g.a[3][2], g.a[2][3], g.c), (1.0, 2.0, -2.0, 0.5));
        assert!(parse_generator("[generator]\nX = 0 0\nA = 1 2\nc = 0\nat = 0,0,0\n", 2, &xyz()).is_err());
    }

    #[test]
    fn curve_file() {
        let c = parse_curve("[curve]\nt_range = 0 1\ngamma = 0, t, 0\n", 3).unwrap();
        assert_eq!((c.t0, c.t1), (0.0, 1.0));
        assert!(parse_curve("[curve]\nt_range = 0 1\ngamma = 0, t\n", 3).is_err());
        assert!(parse_curve("[curve]\nt_range = 0\ngamma = 0, t, 0\n", 3).is_err());
    }
}
