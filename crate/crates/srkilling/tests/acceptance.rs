//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if
//! any criterion fails. Tolerances are pinned here and nowhere else.

#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use srkilling::cli::{self, Outcome};
use srkilling::formats;
use srkilling_core::connection::{Connection, Curvature};
use srkilling_core::expr::{parse_expression, Expr, Rational};
use srkilling_core::frame::ContactStructure;
use srkilling_core::killing::{
    self, a_z_matrix, generator_space, ExprCurve, Generator, Order, RankOptions, TransportOptions,
};
use srkilling_core::tensor::NTensor;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn run(args: &[&str]) -> (Outcome, Duration) {
    let t = Instant::now();
    let out = cli::run(std::iter::once("srkilling").chain(args.iter().copied()));
    (out, t.elapsed())
}

fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

fn checks(v: &Value) -> Vec<(String, f64, bool)> {
    v["checks"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|c| (c["name"].as_str().unwrap_or("").to_string(), f(c, "max_residual"), c["pass"] == true))
                .collect()
        })
        .unwrap_or_default()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn load(name: &str) -> Curvature {
    let raw = formats::parse_structure(&formats::builtin(name).unwrap()).unwrap();
    let pts = vec![vec![0.1; raw.dim()], vec![-0.4; raw.dim()]];
    let s = ContactStructure::new(raw, &pts).unwrap();
    let pts = s.sample_points(&pts);
    Curvature::new(Connection::new(s, &pts, 1e-9).unwrap())
}

fn xyz() -> Vec<String> {
    ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
}

fn field(s: &str) -> Vec<Expr> {
    s.split(',').map(|e| parse_expression(e, &xyz()).unwrap()).collect()
}

/// Rank by Gaussian elimination with partial pivoting.
fn gauss_rank(mut rows: Vec<Vec<f64>>, rel: f64) -> usize {
    let scale = rows.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let cols = rows[0].len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs())) else {
            break;
        };
        if rows[p][c].abs() <= rel * scale {
            continue;
        }
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank {
                let k = rows[r][c] / rows[rank][c];
                for j in c..cols {
                    rows[r][j] -= k * rows[rank][j];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Independent assembly of the stacked derivation matrix up to order `m`:
/// for each unknown, `X^d T_{..d..} + c T_xi + A.T` on every family.
fn oracle_matrix(curv: &mut Curvature, q: &[f64], m: usize) -> Vec<Vec<f64>> {
    let r = curv.structure().rank();
    let n_unk = r + r * (r - 1) / 2 + 1;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); n_unk];
    for i in 0..=m {
        let now = curv.values(i, q).unwrap();
        let next = curv.values(i + 1, q).unwrap();
        for (e, col) in cols.iter_mut().enumerate() {
            let (mut x, mut a, mut c) = (vec![0.0; r], vec![vec![0.0; r]; r], 0.0);
            if e < r {
                x[e] = 1.0;
            } else if e == n_unk - 1 {
                c = 1.0;
            } else {
                let mut idx = r;
                for k in 1..r {
                    for l in 0..k {
                        if idx == e {
                            a[k][l] = 1.0;
                            a[l][k] = -1.0;
                        }
                        idx += 1;
                    }
                }
            }
            for (t, dt, txi) in [(&now.r, &next.r, &now.r_xi), (&now.da, &next.da, &now.da_xi)] {
                col.extend(derivation(t, dt, txi, &x, &a, c));
            }
        }
    }
    let rows = cols[0].len();
    (0..rows).map(|i| cols.iter().map(|col| col[i]).collect()).collect()
}

fn derivation(t: &NTensor, dt: &NTensor, txi: &NTensor, x: &[f64], a: &[Vec<f64>], c: f64) -> Vec<f64> {
    let (dim, rank, up) = (t.dim, t.rank(), t.upper);
    let total = dim.pow(rank as u32);
    let mut out = vec![0.0; total];
    for (flat, o) in out.iter_mut().enumerate() {
        let idx = t.index(flat);
        let mut s = c * txi.data[flat];
        for (d, xd) in x.iter().enumerate() {
            let mut full = idx[..up].to_vec();
            full.push(d);
            full.extend_from_slice(&idx[up..]);
            s += xd * dt.get(&full);
        }
        for slot in 0..rank {
            for mm in 0..dim {
                let mut j = idx.clone();
                j[slot] = mm;
                let coeff = if slot < up { a[idx[slot]][mm] } else { -a[mm][idx[slot]] };
                s += coeff * t.get(&j);
            }
        }
        *o = s;
    }
    out
}

fn c1() -> Verdict {
    let (out, time) = run(&["curvature", "heisenberg:1"]);
    let v = &out.json;
    ensure(out.code == 0, format!("exit {}", out.code))?;
    ensure(v["identically_zero"] == true, "R not identically zero")?;
    ensure(v["points"] == 100, "expected 100 points")?;
    ensure(f(v, "max_abs") < 1e-12, format!("max |R| = {}", f(v, "max_abs")))?;
    ensure(time < Duration::from_secs(5), format!("runtime {time:?}"))?;
    // oracle: horizontal brackets by finite differences have no horizontal part
    let s = load("heisenberg:1");
    let s = s.structure();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ev = |fld: &[Expr], p: &[f64]| -> Vec<f64> { fld.iter().map(|e| e.evaluate(p).unwrap()).collect() };
        let (e1, e2) = (&s.frame()[0], &s.frame()[1]);
        let dir = |fld: &[Expr], along: &[f64]| -> Vec<f64> {
            let pp: Vec<f64> = p.iter().zip(along).map(|(a, b)| a + h * b).collect();
            let pm: Vec<f64> = p.iter().zip(along).map(|(a, b)| a - h * b).collect();
            ev(fld, &pp).iter().zip(ev(fld, &pm)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        let br: Vec<f64> = dir(e2, &ev(e1, &p)).iter().zip(dir(e1, &ev(e2, &p))).map(|(a, b)| a - b).collect();
        // [X1, X2] = d/dz, which is vertical: no horizontal coordinate part
        worst = worst.max(br[0].abs()).max(br[1].abs()).max((br[2] - 1.0).abs());
    }
    ensure(worst < 1e-8, format!("finite-difference bracket off by {worst:e}"))?;
    Ok(format!("max|R| = {:e} at 100 points, {time:.2?}", f(v, "max_abs")))
}

fn c2() -> Verdict {
    let (out, time) = run(&["dim", "heisenberg:1", "--at", "0,0,0"]);
    let v = &out.json;
    ensure(out.code == 0, format!("exit {}", out.code))?;
    ensure(v["dim_i"] == 4 && v["certified"] == true, format!("dims {}", v["dims"]))?;
    let m_used = v["m_used"].as_u64().unwrap_or(99);
    ensure(m_used <= 2, format!("stabilized at m = {m_used}"))?;
    ensure(v["dim_i"] == (1 + 1) * (1 + 1), "not equal to (n+1)^2")?;
    ensure(time < Duration::from_secs(10), format!("runtime {time:?}"))?;
    let mut curv = load("heisenberg:1");
    let q = [0.0; 3];
    let sp = generator_space(&mut curv, &q, Order::Auto, RankOptions::default()).unwrap();
    let mut worst = 0.0f64;
    let mut vecs = Vec::new();
    for z in ["0,0,-1", "1,0,y/2", "0,1,-x/2", "-y,x,0"] {
        let (g, contact) = a_z_matrix(&curv, &field(z), &q).unwrap();
        ensure(contact == 0.0, format!("{z} not contact"))?;
        worst = worst.max(sp.membership_residual(&g));
        vecs.push(g.to_vector());
    }
    ensure(worst < 1e-8, format!("membership residual {worst:e}"))?;
    let rank = gauss_rank(vecs, 1e-12);
    ensure(rank == 4, format!("Killing fields span rank {rank}"))?;
    Ok(format!("dims {} certified, Killing fields span with residual {worst:e}, {time:.2?}", v["dims"]))
}

fn c3() -> Verdict {
    let (out, _) = run(&["dim", "su2", "--at", "0,0,0"]);
    ensure(out.code == 0, format!("exit {}", out.code))?;
    ensure(
        out.output.starts_with(r#"{"dims":[4,4,4],"dim_i":4,"certified":true"#),
        format!("unexpected output {}", &out.output[..out.output.len().min(80)]),
    )?;
    let mut curv = load("su2");
    let r = curv.r(0).clone();
    let exact = |idx: &[usize]| r.get(idx).as_const();
    // R(e1,e2)e1 = -e2 and R(e1,e2)e2 = e1, layout [k][a][b][j]
    ensure(exact(&[1, 0, 1, 0]) == Some(Rational::from_integer(-1)), "R(e1,e2)e1 != -e2")?;
    ensure(exact(&[0, 0, 1, 0]) == Some(Rational::from_integer(0)), "R(e1,e2)e1 has an e1 part")?;
    ensure(exact(&[0, 0, 1, 1]) == Some(Rational::from_integer(1)), "R(e1,e2)e2 != e1")?;
    ensure(exact(&[1, 0, 1, 1]) == Some(Rational::from_integer(0)), "R(e1,e2)e2 has an e2 part")?;
    let (vg, _) = run(&["verify-geometry", "su2", "--tol", "1e-12"]);
    ensure(vg.code == 0, format!("verify-geometry exit {}", vg.code))?;
    let worst = checks(&vg.json).iter().map(|c| c.1).fold(0.0, f64::max);
    ensure(worst < 1e-12, format!("geometry residual {worst:e}"))?;
    // oracle: independent assembly and elimination, here and on a case with nonzero rank
    let ker = 4 - gauss_rank(oracle_matrix(&mut curv, &[], 2), 1e-9);
    ensure(ker == 4, format!("oracle kernel dimension {ker}"))?;
    let mut h2 = load("heisenberg:2");
    let q2 = [0.3, -0.2, 0.1, 0.5, -0.4];
    let ker2 = 11 - gauss_rank(oracle_matrix(&mut h2, &q2, 2), 1e-9);
    let sp2 = generator_space(&mut h2, &q2, Order::Fixed(2), RankOptions::default()).unwrap();
    ensure(ker2 == 9 && sp2.dim() == 9, format!("heisenberg:2 oracle {ker2} vs {}", sp2.dim()))?;
    Ok(format!("dim 4 certified, exact R, geometry residual {worst:e}, elimination oracle agrees"))
}

fn c4() -> Verdict {
    let mut summary = Vec::new();
    for name in ["heisenberg:1", "su2"] {
        let (out, _) = run(&["verify-geometry", name, "--tol", "1e-10"]);
        let cs = checks(&out.json);
        let names: Vec<&str> = cs.iter().map(|c| c.0.as_str()).collect();
        for want in [
            "metricity",
            "torsion",
            "first_bianchi",
            "second_bianchi",
            "reeb_curvature",
            "curvature_skewness",
            "d_alpha_bianchi",
        ] {
            ensure(names.contains(&want), format!("{name}: missing check {want}"))?;
        }
        ensure(out.code == 0, format!("{name}: exit {} {cs:?}", out.code))?;
        let worst = cs.iter().map(|c| c.1).fold(0.0, f64::max);
        ensure(worst < 1e-10, format!("{name}: residual {worst:e}"))?;
        summary.push(format!("{name} {worst:e}"));
    }
    // fault injection: a corrupted Christoffel symbol must fail
    let pts = cli::random_points(3, 100, 0);
    for name in ["heisenberg:1", "su2"] {
        let curv = load(name);
        let s = curv.structure();
        let pts = s.sample_points(&pts);
        let bad = curv.connection().perturbed(0, 1, 0, Rational::new(1, 3));
        let mut bad = Curvature::new(bad);
        let cs = bad.verify_geometry(&pts, 1e-10).unwrap();
        let worst = cs.iter().map(|c| c.max_residual).fold(0.0, f64::max);
        ensure(worst >= 1e-1 && cs.iter().any(|c| !c.pass), format!("{name}: corruption not detected ({worst:e})"))?;
        summary.push(format!("corrupted {name} fails at {worst:.3}"));
    }
    Ok(summary.join(", "))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn c5() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let curve = write(dir.path(), "curve.txt", "[curve]\nt_range = 0 1\ngamma = 0, t, 0\n");
    let y1 = write(dir.path(), "y1.txt", "[generator]\nX = 1 0\nA = 0\nc = 0\nat = 0,0,0\n");
    let (out, _) = run(&["prolong", "heisenberg:1", "--curve", &curve, "--gen", &y1, "--step", "1e-3"]);
    ensure(out.code == 0, format!("exit {}", out.code))?;
    let end = &out.json["end"];
    let x: Vec<f64> = end["X"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let a = end["A"][1][0].as_f64().unwrap();
    let c = f(end, "c");
    let err = (x[0] - 1.0).abs().max(x[1].abs()).max(a.abs()).max((c + 1.0).abs());
    ensure(err < 1e-8, format!("endpoint error {err:e}"))?;
    let mut trivial = 0.0f64;
    for (gen, want_c) in [("X = 0 0\nA = 0\nc = 0", 0.0), ("X = 0 0\nA = 0\nc = 1", 1.0)] {
        let path = write(dir.path(), "g.txt", &format!("[generator]\n{gen}\nat = 0,0,0\n"));
        let wiggle = write(dir.path(), "w.txt", "[curve]\nt_range = 0 1\ngamma = sin(t), t^2, t - cos(t) + 1\n");
        let (o, _) = run(&["prolong", "heisenberg:1", "--curve", &wiggle, "--gen", &path]);
        let e = &o.json["end"];
        let mut dev = (f(e, "c") - want_c).abs();
        for v in e["X"].as_array().unwrap().iter().chain(e["A"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap())) {
            dev = dev.max(v.as_f64().unwrap().abs());
        }
        trivial = trivial.max(dev);
    }
    ensure(trivial <= 4.0 * f64::EPSILON, format!("trivial generators drift by {trivial:e}"))?;
    Ok(format!("Y1 endpoint error {err:e}, trivial drift {trivial:e}"))
}

fn rat(rng: &mut ChaCha8Rng, k: i32) -> String {
    format!("({}/{k})", rng.gen_range(-k..=k))
}

/// Two non-polynomial curves from `p` to `q` over `[0, 1]`.
fn curve_pair(rng: &mut ChaCha8Rng) -> (ExprCurve, ExprCurve, Vec<f64>) {
    let p: Vec<String> = (0..3).map(|_| rat(rng, 8)).collect();
    let q: Vec<String> = (0..3).map(|_| rat(rng, 8)).collect();
    let t = ["t".to_string()];
    let mut build = |shape: [&str; 3]| {
        let g: Vec<Expr> = (0..3)
            .map(|i| {
                let s = format!("{} + t*({} - {}) + t*(1 - t)*{}*{}", p[i], q[i], p[i], rat(rng, 4), shape[i]);
                parse_expression(&s, &t).unwrap()
            })
            .collect();
        ExprCurve::new(g, 0.0, 1.0)
    };
    let a = build(["sin(2*t)", "exp(t)", "cos(3*t)"]);
    let b = build(["cos(t)", "sin(3*t)", "exp(-t)"]);
    let start: Vec<f64> = p.iter().map(|s| formats::real(s.trim_matches(|c| c == '(' || c == ')')).unwrap()).collect();
    (a, b, start)
}

fn c6() -> Verdict {
    let mut curv = load("heisenberg:1");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut ratios = Vec::new();
    for _ in 0..5 {
        let (a, b, start) = curve_pair(&mut rng);
        let sp = generator_space(&mut curv, &start, Order::Auto, RankOptions::default()).unwrap();
        let w: Vec<f64> = (0..sp.basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut v = vec![0.0; 4];
        for (bv, c) in sp.basis.iter().zip(&w) {
            for (vi, x) in v.iter_mut().zip(bv.to_vector()) {
                *vi += c * x;
            }
        }
        let g = Generator::from_vector(2, &v, start);
        let dev = |h: f64| {
            let opts = TransportOptions { step: h, horizontal_tol: None };
            killing::path_independence(&curv, &g, &a, &b, opts).unwrap().deviation
        };
        let d = dev(1e-3);
        worst = worst.max(d);
        // the deviation at h = 1e-3 is at rounding level; the rate is read on a coarser pair
        ratios.push(dev(0.02) / dev(0.01));
    }
    ensure(worst < 1e-6, format!("deviation {worst:e}"))?;
    for r in &ratios {
        ensure(*r >= 8.0 && (*r - 16.0).abs() <= 0.3 * 16.0, format!("convergence ratios {ratios:.2?}"))?;
    }
    Ok(format!("max deviation {worst:e}, halving ratios {ratios:.1?}"))
}

fn c7() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let gen = write(dir.path(), "j.txt", "[generator]\nX = 0 0\nA = -1\nc = 0\nat = 0,0,0\n");
    let (out, time) = run(&["reconstruct", "heisenberg:1", "--gen", &gen, "--grid", "x:-1:1:5,y:-1:1:5,z:-1:1:5"]);
    let v = &out.json;
    let samples = v["samples"].as_array().ok_or("no samples")?;
    ensure(samples.len() == 125, format!("{} samples", samples.len()))?;
    let mut err = 0.0f64;
    for s in samples {
        let at: Vec<f64> = s["at"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let (x, y) = (at[0], at[1]);
        let xs: Vec<f64> = s["X"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        // frame components of the horizontal part of -y d/dx + x d/dy are (-y, x)
        err = err.max((xs[0] + y).abs()).max((xs[1] - x).abs());
        err = err.max((f(s, "c") - (x * x + y * y) / 2.0).abs());
    }
    ensure(err < 1e-6, format!("field error {err:e}"))?;
    let cs = checks(v);
    ensure(cs.len() == 3 && cs.iter().all(|c| c.2 && c.1 < 1e-4), format!("first-order residuals {cs:?}"))?;
    ensure(out.code == 0, format!("exit {}", out.code))?;
    let eqs = cs.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok(format!("max field error {err:e}, first-order residual {eqs:e}, {time:.2?}"))
}

const HEIS_FIELDS: [&str; 4] = ["0,0,-1", "1,0,y/2", "0,1,-x/2", "-y,x,0"];

fn c8() -> Verdict {
    let mut worst = 0.0f64;
    for z in HEIS_FIELDS {
        let (out, _) = run(&["verify", "heisenberg:1", &format!("--field={z}"), "--tol", "1e-9"]);
        let cs = checks(&out.json);
        ensure(cs.len() == 9, format!("{z}: {} checks", cs.len()))?;
        ensure(out.code == 0, format!("{z}: {cs:?}"))?;
        worst = cs.iter().map(|c| c.1).fold(worst, f64::max);
    }
    let (out, _) = run(&["verify", "heisenberg:1", "--field", "1,0,0"]);
    let contact = checks(&out.json).first().map_or(0.0, |c| c.1);
    ensure(out.code == 3 && contact >= 0.1, format!("d/dx contact residual {contact}"))?;
    // the su(2) analogues: right-invariant fields and the Reeb field in the chart
    let su2_fields = [
        "0,0,-1",
        "1,0,0",
        "sin(x)*sin(y)/cos(y), cos(x), -sin(x)/cos(y)",
        "-cos(x)*sin(y)/cos(y), sin(x), cos(x)/cos(y)",
    ];
    let mut prop = 0.0f64;
    for z in su2_fields {
        let (out, _) = run(&["verify", "su2:chart", &format!("--field={z}"), "--tol", "1e-8"]);
        let cs = checks(&out.json);
        let c = cs.iter().find(|c| c.0 == "a_derivative_curvature").ok_or("missing check")?;
        ensure(out.code == 0 && c.1 < 1e-8, format!("su2 {z}: {cs:?}"))?;
        prop = prop.max(c.1);
    }
    Ok(format!("Heisenberg residual {worst:e}, d/dx contact {contact}, su2 curvature identity {prop:e}"))
}

fn c9() -> Verdict {
    let mut worst = 0.0f64;
    for z in HEIS_FIELDS {
        let (out, _) = run(&["verify", "heisenberg:1", &format!("--field={z}")]);
        let c = checks(&out.json).into_iter().find(|c| c.0 == "riemannian_killing").ok_or("missing check")?;
        ensure(c.2 && c.1 < 1e-9, format!("{z}: {}", c.1))?;
        worst = worst.max(c.1);
    }
    let (out, _) = run(&["verify", "heisenberg:1", "--field", "1,0,0"]);
    let c = checks(&out.json).into_iter().find(|c| c.0 == "riemannian_killing").ok_or("missing check")?;
    ensure(!c.2, "d/dx passes the extended Killing equation")?;
    Ok(format!("residual {worst:e}, d/dx fails with {}", c.1))
}

fn c10() -> Verdict {
    let (out, time) = run(&["scan", "heisenberg:1", "--grid", "x:-1:1:5,y:-1:1:5,z:-1:1:5"]);
    let v = &out.json;
    ensure(out.code == 0, format!("exit {}", out.code))?;
    ensure(v["points"] == 125 && v["constant_dimension"] == 4, format!("dims {}", v["dims"]))?;
    ensure(
        v["interior_points"] == 27 && v["interior_regular"] == 27,
        format!("interior regular {} of {}", v["interior_regular"], v["interior_points"]),
    )?;
    ensure(v["semicontinuity_violations"] == 0, "semicontinuity violated")?;
    ensure(time < Duration::from_secs(60), format!("runtime {time:?}"))?;
    Ok(format!("dimension 4 at 125 points, 27/27 interior regular, {time:.2?}"))
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => ["x", "y", "z"][rng.gen_range(0..3)].to_string(),
            1 => format!("({})", rng.gen_range(-5..=5)),
            _ => format!("({}/{})", rng.gen_range(1..=7), rng.gen_range(2..=5)),
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 => format!("({a} + {})", random_expr(rng, depth - 1)),
        1 => format!("({a} - {})", random_expr(rng, depth - 1)),
        2 => format!("({a} * {})", random_expr(rng, depth - 1)),
        3 => format!("({a} / (2 + ({})^2))", random_expr(rng, depth - 1)),
        4 => format!("sin({a})"),
        5 => format!("cos({a})"),
        6 => format!("exp(sin({a}))"),
        7 => format!("({a})^{}", rng.gen_range(1..=3)),
        _ => format!("pow(1 + ({a})^2, -1/2)"),
    }
}

fn c11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vars = xyz();
    let (mut d_err, mut rt_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let text = random_expr(&mut rng, 5);
        let e = parse_expression(&text, &vars).map_err(|err| format!("{text}: {err}"))?;
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let var = rng.gen_range(0..3);
        let sym = e.differentiate(var).evaluate(&p).unwrap();
        let h = 1e-5;
        let mut hi = p.clone();
        hi[var] += h;
        let mut lo = p.clone();
        lo[var] -= h;
        let fd = (e.evaluate(&hi).unwrap() - e.evaluate(&lo).unwrap()) / (2.0 * h);
        let val = e.evaluate(&p).unwrap();
        d_err = d_err.max((sym - fd).abs() / 1.0f64.max(sym.abs()).max(val.abs()));
        let back = parse_expression(&e.display(&vars).to_string(), &vars).unwrap();
        rt_err = rt_err.max((back.evaluate(&p).unwrap() - val).abs() / 1.0f64.max(val.abs()));
    }
    ensure(d_err < 1e-6, format!("derivative vs finite difference {d_err:e}"))?;
    ensure(rt_err < 1e-14, format!("round trip {rt_err:e}"))?;
    Ok(format!("1000 expressions: derivative {d_err:e}, round trip {rt_err:e}"))
}

fn main() {
    // cargo passes harness flags such as --nocapture; a name filter that
    // matches nothing here skips the suite
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let criteria: [Criterion; 11] = [
        ("heisenberg flatness", c1),
        ("heisenberg isometry algebra dimension", c2),
        ("su(2) dimension and exact curvature", c3),
        ("geometry identities and fault injection", c4),
        ("transport correctness", c5),
        ("path independence and convergence", c6),
        ("reconstruction of the rotation field", c7),
        ("killing verification suite", c8),
        ("riemannian extension", c9),
        ("regularity scan", c10),
        ("expression layer", c11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(msg) => println!("PASS criterion {:>2}: {name}: {msg} [{:.2?}]", i + 1, t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name}: {msg} [{:.2?}]", i + 1, t.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
