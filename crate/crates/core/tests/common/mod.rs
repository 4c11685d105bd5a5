#![allow(dead_code)]

use srkilling_core::connection::{Connection, Curvature};
use srkilling_core::expr::{parse_expression, Expr, Rational};
use srkilling_core::frame::{ContactStructure, RawStructure};

pub const SU2_E1: &str = "cos(z)/cos(y), sin(z), -sin(y)*cos(z)/cos(y)";
pub const SU2_E2: &str = "-sin(z)/cos(y), cos(z), sin(y)*sin(z)/cos(y)";

pub fn names(n: usize) -> Vec<String> {
    if n == 1 {
        return vec!["x".into(), "y".into(), "z".into()];
    }
    let mut v: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    v.extend((1..=n).map(|i| format!("y{i}")));
    v.push("z".into());
    v
}

pub fn field(s: &str, names: &[String]) -> Vec<Expr> {
    s.split(',').map(|e| parse_expression(e, names).unwrap()).collect()
}

/// Frame `X_i = d/dx_i - y_i/2 d/dz`, `Y_i = d/dy_i + x_i/2 d/dz`, ordered `X1, Y1, X2, Y2, ...`.
pub fn heisenberg_structure(n: usize) -> ContactStructure {
    let names = names(n);
    let dim = 2 * n + 1;
    let mut frame = Vec::new();
    for i in 0..n {
        for (slot, z) in [(i, format!("-{}/2", names[n + i])), (n + i, format!("{}/2", names[i]))] {
            let mut v = vec![Expr::zero(); dim];
            v[slot] = Expr::one();
            v[dim - 1] = parse_expression(&z, &names).unwrap();
            frame.push(v);
        }
    }
    let raw = RawStructure::chart(n, names, frame).unwrap();
    ContactStructure::new(raw, &[vec![0.1; dim]]).unwrap()
}

pub fn curvature(s: ContactStructure) -> Curvature {
    let pts = s.sample_points(&[vec![0.1; s.dim()], vec![-0.3; s.dim()]]);
    Curvature::new(Connection::new(s, &pts, 1e-9).unwrap())
}

pub fn heisenberg(n: usize) -> Curvature {
    curvature(heisenberg_structure(n))
}

pub fn su2() -> Curvature {
    let one = Rational::from_integer(1);
    let raw = RawStructure::lie(1, &[(0, 1, 2, one), (1, 2, 0, one), (0, 2, 1, -one)]).unwrap();
    curvature(ContactStructure::new(raw, &[]).unwrap())
}

pub fn su2_chart() -> Curvature {
    let names = names(1);
    let raw = RawStructure::chart(1, names.clone(), vec![field(SU2_E1, &names), field(SU2_E2, &names)]).unwrap();
    curvature(ContactStructure::new(raw, &[vec![0.1, 0.2, 0.3]]).unwrap())
}
