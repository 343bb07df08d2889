#![allow(dead_code)]

use logit_kalman::linalg::SpdMatrix;
use logit_kalman::loss::{Label, Observation};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `B B^T / d + floor I` from a flat list of `d * d` entries.
pub fn spd_from(d: usize, entries: &[f64], floor: f64) -> SpdMatrix {
    let b = DMatrix::from_row_slice(d, d, entries);
    let m = &b * b.transpose() / d as f64 + DMatrix::identity(d, d) * floor;
    let mut row_major = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            row_major.push(0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    SpdMatrix::from_row_major(d, row_major).unwrap()
}

pub fn to_dense(p: &SpdMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(p.dim(), p.dim(), p.as_row_major())
}

pub fn dense_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// `||a - b||_F / ||b||_F`
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn label(pos: bool) -> Label {
    if pos {
        Label::Pos
    } else {
        Label::Neg
    }
}

pub fn obs(x: &[f64], y: i8) -> Observation {
    Observation::new(x.to_vec(), Label::try_from(y).unwrap()).unwrap()
}

pub fn spd_strategy(max_d: usize) -> impl Strategy<Value = SpdMatrix> {
    (1..=max_d).prop_flat_map(|d| prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |e| spd_from(d, &e, 0.1)))
}

/// `(P, x, w)` with matching dimensions.
pub fn downdate_case(max_d: usize) -> impl Strategy<Value = (SpdMatrix, Vec<f64>, f64)> {
    spd_strategy(max_d).prop_flat_map(|p| {
        let d = p.dim();
        (Just(p), prop::collection::vec(-2.0f64..2.0, d), 0.0f64..5.0)
    })
}
