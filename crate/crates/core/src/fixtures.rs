//! Bundled example models, embedded so tests and the CLI `check` suite can
//! run without external files.

use crate::equivalence::{Atlas, ModelFile};
use crate::model::GeneratingChart;
use crate::scalar::Scalar;

pub const A2_JSON: &str = include_str!("../models/a2.json");
pub const A3_JSON: &str = include_str!("../models/a3.json");
pub const AA_JSON: &str = include_str!("../models/aa.json");
pub const QUADRATIC_JSON: &str = include_str!("../models/quadratic.json");
pub const ATLAS_JSON: &str = include_str!("../models/atlas.json");

/// `(name, json)` pairs of every bundled model.
pub const ALL: [(&str, &str); 5] = [
    ("a2", A2_JSON),
    ("a3", A3_JSON),
    ("aa", AA_JSON),
    ("quadratic", QUADRATIC_JSON),
    ("atlas", ATLAS_JSON),
];

fn build<F: Scalar>(json: &str) -> Atlas<F> {
    ModelFile::from_json(json).expect("bundled model parses").build().expect("bundled model builds")
}

/// Cusp model `g = x1³/3 + x2²/2` on `[−2, 2]²`.
pub fn a2<F: Scalar>() -> Atlas<F> {
    build(A2_JSON)
}

/// Swallowtail-section model `g = x1⁴/4 + x2²/2`.
pub fn a3<F: Scalar>() -> Atlas<F> {
    build(A3_JSON)
}

/// Mixed-partition model `g(x1, p2) = x1³/3 + p2⁴/4`.
pub fn aa<F: Scalar>() -> Atlas<F> {
    build(AA_JSON)
}

/// Strictly convex quadratic `g = ‖x‖²/2` on `[−10, 10]²`.
pub fn quadratic<F: Scalar>() -> Atlas<F> {
    build(QUADRATIC_JSON)
}

/// Three glued copies of the cusp model (translated and dual-translated).
pub fn atlas<F: Scalar>() -> Atlas<F> {
    build(ATLAS_JSON)
}

/// The single chart of a one-chart bundled model.
pub fn only_chart<F: Scalar>(atlas: &Atlas<F>) -> &GeneratingChart {
    assert_eq!(atlas.charts.len(), 1);
    &atlas.charts[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_models_build() {
        for (name, json) in ALL {
            let atlas: Atlas<f64> = build(json);
            assert!(!atlas.charts.is_empty(), "{name}");
            assert_eq!(atlas.n, 2);
        }
    }

    #[test]
    fn atlas_has_triple_overlap() {
        let atlas: Atlas<f64> = atlas();
        assert_eq!(atlas.charts.len(), 3);
        assert!(atlas.transition("alpha", "beta").is_some());
        assert!(atlas.transition("beta", "gamma").is_some());
        assert!(atlas.transition("alpha", "gamma").is_some());
    }

    #[test]
    fn atlas_cocycle_tight() {
        let atlas: Atlas<f64> = atlas();
        let r = atlas.cocycle_residual(64);
        assert!(r <= 1e-9, "cocycle residual {r}");
    }

    #[test]
    fn atlas_round_trip_translation() {
        // alpha -> beta -> alpha is the identity on chart coordinates
        let atlas: Atlas<f64> = atlas();
        let alpha = atlas.chart("alpha").unwrap();
        let u = vec![0.7, -0.9];
        let in_beta = atlas.transition_point(&alpha.point(u.clone()), "beta").unwrap();
        assert!((in_beta.u[0] - 1.2).abs() < 1e-12);
        let back = atlas.transition_point(&in_beta, "alpha").unwrap();
        for i in 0..2 {
            assert!((back.u[i] - u[i]).abs() <= 1e-10);
        }
    }
}
