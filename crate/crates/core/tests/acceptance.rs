//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line with its pinned tolerance. Every random draw is seeded.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasihess::divergence::{
    bregman_specialization, contrast_derivatives, divergence, divergence_chart,
    divergence_invariance_check,
};
use quasihess::equivalence::AffineLegendreMap;
use quasihess::expr::{eval_jet3_fd_oracle, parse, Expression, Var};
use quasihess::fixtures;
use quasihess::frontsampler::{extract_caustics, sample_wavefront};
use quasihess::geodesy::{
    project_onto, pythagoras_check, scan_critical_thetas, CurveKind, Submanifold,
};
use quasihess::linalg::Mat;
use quasihess::model::{
    inverse_gradient_map, legendre_transform_regular, lift, DomainBox, GeneratingChart, Partition,
};
use quasihess::tensors::{
    cubic, cubic_via_frames, frames, frobenius_compatibility_residual, metric, metric_via_pairing,
    wdvv_residual,
};

fn verdict(name: &str, worst: f64, bound: f64) {
    let ok = worst <= bound;
    println!(
        "{name}: {} (worst residual {worst:.3e}, bound {bound:.1e})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name} failed: {worst:.3e} > {bound:.1e}");
}

fn interior(rng: &mut ChaCha8Rng, chart: &GeneratingChart, margin: f64) -> Vec<f64> {
    (0..chart.n())
        .map(|d| {
            let (lo, hi) = (chart.domain.min[d], chart.domain.max[d]);
            let pad = margin * (hi - lo);
            rng.gen_range(lo + pad..hi - pad)
        })
        .collect()
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = (0..2).map(|i| b[i] - a[i]).collect();
    let ap: Vec<f64> = (0..2).map(|i| p[i] - a[i]).collect();
    let denom = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if denom == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / denom).clamp(0.0, 1.0) };
    let dx = p[0] - (a[0] + t * ab[0]);
    let dy = p[1] - (a[1] + t * ab[1]);
    (dx * dx + dy * dy).sqrt()
}

#[test]
fn ac1_a2_dual_potential_wavefront_and_caustic() {
    let start = Instant::now();
    let atlas = fixtures::a2::<f64>();
    let chart = fixtures::only_chart(&atlas);

    let wf = sample_wavefront::<f64>(chart, CurveKind::M, &[201, 201]).unwrap();
    let mut worst = 0.0f64;
    for s in &wf.samples {
        let (p1, p2, zp) = (s.image[0], s.image[1], s.image[2]);
        let sign = if s.u[0] >= 0.0 { 1.0 } else { -1.0 };
        let want = sign * (2.0 / 3.0) * p1.powf(1.5) + 0.5 * p2 * p2;
        worst = worst.max((zp - want).abs());
    }
    assert_eq!(wf.skipped, 0);

    let caustic = extract_caustics::<f64>(chart, CurveKind::M, &[201, 201]).unwrap();
    assert!(!caustic.is_empty(), "m-caustic must be nonempty");
    // Hausdorff distance to the true caustic {p1 = 0, p2 in [-2, 2]}
    let mut hausdorff = 0.0f64;
    for v in caustic.vertices() {
        let clamped = v[1].clamp(-2.0, 2.0);
        hausdorff = hausdorff.max((v[0].powi(2) + (v[1] - clamped).powi(2)).sqrt());
    }
    for i in 0..=400 {
        let target = [0.0, -2.0 + i as f64 * 0.01];
        let mut best = f64::INFINITY;
        for poly in &caustic.polylines {
            for w in poly.windows(2) {
                best = best.min(point_segment_distance(&target, &w[0], &w[1]));
            }
            if poly.len() == 1 {
                let d = ((poly[0][0] - target[0]).powi(2) + (poly[0][1] - target[1]).powi(2)).sqrt();
                best = best.min(d);
            }
        }
        hausdorff = hausdorff.max(best);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "AC1 runtime {elapsed:.2}s exceeds 5s");
    verdict("AC1 A2 dual potential (wavefront defect)", worst, 1e-9);
    verdict("AC1 A2 m-caustic (Hausdorff to p1=0)", hausdorff, 1e-3);
}

#[test]
fn ac2_a3_dual_potential_and_empty_e_caustic() {
    let atlas = fixtures::a3::<f64>();
    let chart = fixtures::only_chart(&atlas);
    let wf = sample_wavefront::<f64>(chart, CurveKind::M, &[201, 201]).unwrap();
    let mut worst = 0.0f64;
    for s in &wf.samples {
        let (p1, p2, zp) = (s.image[0], s.image[1], s.image[2]);
        // p1^{4/3} is even in x1, so no branch sign here
        let want = 0.75 * (p1 * p1).powf(2.0 / 3.0) + 0.5 * p2 * p2;
        worst = worst.max((zp - want).abs());
    }
    let caustic = extract_caustics::<f64>(chart, CurveKind::E, &[201, 201]).unwrap();
    assert!(caustic.is_empty(), "A3 e-caustic must be empty");
    verdict("AC2 A3 dual potential (defect, e-caustic empty)", worst, 1e-9);
}

#[test]
fn ac3_aa_legendre_images_and_caustics() {
    let atlas = fixtures::aa::<f64>();
    let chart = fixtures::only_chart(&atlas);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let u = interior(&mut rng, chart, 0.01);
        let (x1, p2) = (u[0], u[1]);
        let cp = chart.point(u.clone());
        let (x, z) = quasihess::model::e_legendre(&cp).unwrap();
        worst = worst.max((x[0] - x1).abs());
        worst = worst.max((x[1] + p2.powi(3)).abs());
        worst = worst.max((z - (x1.powi(3) / 3.0 - 3.0 * p2.powi(4) / 4.0)).abs());
        let (p, zp) = quasihess::model::m_legendre(&cp).unwrap();
        worst = worst.max((p[0] - x1 * x1).abs());
        worst = worst.max((p[1] - p2).abs());
        worst = worst.max((zp - (2.0 * x1.powi(3) / 3.0 - p2.powi(4) / 4.0)).abs());
    }
    // e-caustic maps to x2 = 0, m-caustic to p1 = 0
    let e_caustic = extract_caustics::<f64>(chart, CurveKind::E, &[201, 201]).unwrap();
    let m_caustic = extract_caustics::<f64>(chart, CurveKind::M, &[201, 201]).unwrap();
    assert!(!e_caustic.is_empty() && !m_caustic.is_empty());
    let mut caustic_worst = 0.0f64;
    for v in e_caustic.vertices() {
        caustic_worst = caustic_worst.max(v[1].abs());
    }
    for v in m_caustic.vertices() {
        caustic_worst = caustic_worst.max(v[0].abs());
    }
    assert!(caustic_worst <= 1e-9, "AA caustic lines off by {caustic_worst:.3e}");
    verdict("AC3 AA Legendre-map closed forms + caustic lines", worst, 1e-12);
}

#[test]
fn ac4_extended_pythagoras() {
    let atlas = fixtures::a2::<f64>();
    let chart = fixtures::only_chart(&atlas);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for case in 0..100 {
        // Q = (u, u^2/2), R = (t, t^2/2), P = (s, -2(s - u) + u^2/2);
        // case 0 pins u = 0 so Q sits on the degeneracy locus.
        let u: f64 = if case == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
        let t: f64 = rng.gen_range(-1.2..1.2);
        let s: f64 = loop {
            let s = rng.gen_range(-1.0..1.0);
            if (-2.0 * (s - u) + u * u / 2.0).abs() < 1.9 {
                break s;
            }
        };
        let q = [u, u * u / 2.0];
        let r = [t, t * t / 2.0];
        let p = [s, -2.0 * (s - u) + u * u / 2.0];
        let rep = pythagoras_check(chart, &p, &q, &r, &[1.0, -2.0], &[2.0, 1.0]).unwrap();
        worst = worst.max(rep.residual.abs());
    }
    verdict("AC4 extended Pythagoras (100 random triangles)", worst, 1e-10);

    let mut proof_worst = 0.0f64;
    for _ in 0..100 {
        let p = interior(&mut rng, chart, 0.2);
        let q = interior(&mut rng, chart, 0.2);
        let r = interior(&mut rng, chart, 0.2);
        let pc = lift(&chart.point(p.clone())).unwrap();
        let qc = lift(&chart.point(q.clone())).unwrap();
        let rc = lift(&chart.point(r.clone())).unwrap();
        let e_dir: Vec<f64> = (0..2).map(|i| pc.x[i] - qc.x[i]).collect();
        let m_dir: Vec<f64> = (0..2).map(|i| rc.p[i] - qc.p[i]).collect();
        let rep = pythagoras_check(chart, &p, &q, &r, &e_dir, &m_dir).unwrap();
        proof_worst = proof_worst.max((rep.residual - rep.proof_identity).abs());
    }
    verdict("AC4 proof identity on non-orthogonal triangles", proof_worst, 1e-12);
}

#[test]
fn ac5_projection_theorem() {
    let a2 = fixtures::a2::<f64>();
    let quad = fixtures::quadratic::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ortho_worst = 0.0f64;
    let mut missed = 0usize;
    for case in 0..50 {
        let chart =
            if case % 2 == 0 { fixtures::only_chart(&a2) } else { fixtures::only_chart(&quad) };
        let scale = if case % 2 == 0 { 1.0 } else { 3.0 };
        let a: f64 = rng.gen_range(-0.3..0.3) * scale;
        let b: f64 = rng.gen_range(0.5..1.0);
        let c: f64 = rng.gen_range(-0.3..0.3) * scale;
        let d: f64 = rng.gen_range(0.3..0.7);
        let e: f64 = rng.gen_range(-0.3..0.3);
        let params = [format!("{a} + {b}*t1"), format!("{c} + {d}*t1 + {e}*t1^2/2")];
        let sources: Vec<&str> = params.iter().map(|s| s.as_str()).collect();
        let sub = Submanifold::parse(
            chart,
            &sources,
            DomainBox { min: vec![-1.5], max: vec![1.5] },
        )
        .unwrap();
        let from = interior(&mut rng, chart, 0.3);
        let p = lift(&chart.point(from)).unwrap();
        let side = if case % 4 < 2 { CurveKind::M } else { CurveKind::E };
        let seeds: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.4 + 0.35 * i as f64]).collect();
        // monotone instances have no interior critical point; the dense scan
        // below confirms none was missed
        let crits = match project_onto(&sub, &p, &seeds, side) {
            Ok(c) => c,
            Err(quasihess::Error::NoConvergence { .. }) => Vec::new(),
            Err(e) => panic!("projection solver failed on case {case}: {e}"),
        };
        for crit in &crits {
            ortho_worst = ortho_worst.max(crit.orthogonality_residual);
        }
        let roots = scan_critical_thetas(&sub, &p, side, 1e-3).unwrap();
        for root in roots {
            if !crits.iter().any(|c| (c.theta[0] - root).abs() < 2e-3) {
                missed += 1;
            }
        }
    }
    assert_eq!(missed, 0, "dense scan found {missed} critical points the solver missed");
    verdict("AC5 projection theorem (orthogonality, no missed roots)", ortho_worst, 1e-6);
}

#[test]
fn ac6_weak_contrast_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut first = 0.0f64;
    let mut second = 0.0f64;
    let mut third = 0.0f64;
    for builder in [fixtures::a2::<f64>, fixtures::a3, fixtures::aa, fixtures::quadratic] {
        let atlas = builder();
        let chart = fixtures::only_chart(&atlas);
        for _ in 0..100 {
            let u = interior(&mut rng, chart, 0.05);
            assert_eq!(divergence_chart(chart, &u, &u).unwrap(), 0.0, "D[-|-] must vanish exactly");
            let k = rng.gen_range(0..2);
            let l = rng.gen_range(0..2);
            let m = rng.gen_range(0..2);
            let cd = contrast_derivatives(chart, &u, k, l, m, 1e-3).unwrap();
            first = first.max(cd.d_k_minus.abs()).max(cd.d_minus_k.abs());
            let cp = chart.point(u.clone());
            let h = metric(&cp).unwrap();
            second = second.max((-cd.d_k_l - h[(k, l)]).abs());
            second = second.max((cd.d_kl_minus - h[(k, l)]).abs());
            let c = cubic(&cp).unwrap();
            third = third.max(((cd.d_kl_m - cd.d_m_kl) - c.get(k, l, m)).abs());
        }
    }
    verdict("AC6 contrast first derivatives", first, 1e-6);
    verdict("AC6 contrast metric identity", second, 1e-5);
    verdict("AC6 contrast cubic identity", third, 1e-4);
}

/// Transformed potential chart under an affine Legendre map on a `J = ∅`
/// chart: `f~(y) = f(A⁻¹(y − b)) + cᵀA⁻¹(y − b) + d`.
fn pushforward_chart(chart: &GeneratingChart, map: &AffineLegendreMap<f64>) -> GeneratingChart {
    let n = chart.n();
    let ainv = map.a.inverse().unwrap();
    let num = |v: f64| Box::new(Expression::Num(v));
    let mut subst: HashMap<Var, Expression> = HashMap::new();
    let mut shifted = Vec::new();
    for j in 0..n {
        shifted.push(Expression::Sub(Box::new(Expression::Var(Var::X(j + 1))), num(map.b[j])));
    }
    for i in 0..n {
        let mut acc = Expression::Num(0.0);
        for j in 0..n {
            let term = Expression::Mul(num(ainv[(i, j)]), Box::new(shifted[j].clone()));
            acc = Expression::Add(Box::new(acc), Box::new(term));
        }
        subst.insert(Var::X(i + 1), acc);
    }
    let mut g = chart.g.substitute(&subst);
    // + cᵀ A⁻¹ (y − b) + d
    for i in 0..n {
        g = Expression::Add(
            Box::new(g),
            Box::new(Expression::Mul(num(map.c[i]), Box::new(subst[&Var::X(i + 1)].clone()))),
        );
    }
    g = Expression::Add(Box::new(g), num(map.d));
    GeneratingChart::new(
        format!("{}-pushed", chart.name),
        Partition::full(n),
        g,
        DomainBox { min: vec![-100.0; n], max: vec![100.0; n] },
    )
    .unwrap()
}

fn random_map(rng: &mut ChaCha8Rng, n: usize) -> AffineLegendreMap<f64> {
    loop {
        let a = Mat::from_fn(n, n, |i, j| {
            (if i == j { 1.0f64 } else { 0.0 }) + rng.gen_range(-0.5..0.5)
        });
        if a.det().abs() < 0.2 {
            continue;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: f64 = rng.gen_range(-1.0..1.0);
        if let Ok(m) = AffineLegendreMap::new(a, b, c, d) {
            return m;
        }
    }
}

#[test]
fn ac7_invariance_under_equivalence() {
    let atlas = fixtures::a2::<f64>();
    let chart = fixtures::only_chart(&atlas);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut d_worst = 0.0f64;
    let mut h_worst = 0.0f64;
    let mut c_worst = 0.0f64;
    let mut pair_worst = 0.0f64;
    for _ in 0..100 {
        let map = random_map(&mut rng, 2);
        let up = interior(&mut rng, chart, 0.2);
        let uq = interior(&mut rng, chart, 0.2);
        let p = lift(&chart.point(up.clone())).unwrap();
        let q = lift(&chart.point(uq.clone())).unwrap();
        let d = divergence(&p, &q).unwrap();
        let r = divergence_invariance_check(&map, &p, &q).unwrap();
        d_worst = d_worst.max(r / (1.0 + d.abs()));

        // h as (0,2)-pullback, C as (0,3)-pullback through the transformed
        // generating function
        let pushed = pushforward_chart(chart, &map);
        let y = map.apply(&p).x;
        let h0 = metric(&chart.point(up.clone())).unwrap();
        let h1 = metric(&pushed.point(y.clone())).unwrap();
        let pulled = map.a.transpose().matmul(&h1).matmul(&map.a);
        h_worst = h_worst.max(h0.sub(&pulled).max_abs() / (1.0 + h0.max_abs()));

        let c0 = cubic(&chart.point(up.clone())).unwrap();
        let c1 = cubic(&pushed.point(y)).unwrap();
        let mut cw = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for e in 0..2 {
                                s += c1.get(a, b, e)
                                    * map.a[(a, i)]
                                    * map.a[(b, j)]
                                    * map.a[(e, k)];
                            }
                        }
                    }
                    cw = cw.max((c0.get(i, j, k) - s).abs());
                }
            }
        }
        c_worst = c_worst.max(cw / (1.0 + c0.max_abs()));

        // tau/omega pairing: (A v)ᵀ (A⁻ᵀ w) = vᵀ w
        let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let av = map.a.matvec(&v);
        let apw = map.a_prime.matvec(&w);
        let before: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let after: f64 = av.iter().zip(&apw).map(|(a, b)| a * b).sum();
        pair_worst = pair_worst.max((before - after).abs());
    }
    verdict("AC7 divergence invariance (relative)", d_worst, 1e-8);
    verdict("AC7 metric pullback invariance (relative)", h_worst, 1e-8);
    verdict("AC7 cubic pullback invariance (relative)", c_worst, 1e-8);
    verdict("AC7 tau/omega pairing preservation", pair_worst, 1e-10);
    let glued = fixtures::atlas::<f64>();
    verdict("AC7 atlas cocycle condition", glued.cocycle_residual(64), 1e-9);
}

#[test]
fn ac8_two_route_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut metric_worst = 0.0f64;
    let mut cubic_worst = 0.0f64;
    let mut jet_worst = 0.0f64;
    for builder in [fixtures::a2::<f64>, fixtures::a3, fixtures::aa, fixtures::quadratic] {
        let atlas = builder();
        let chart = fixtures::only_chart(&atlas);
        for _ in 0..50 {
            let u = interior(&mut rng, chart, 0.05);
            let cp = chart.point(u.clone());
            let direct = metric(&cp).unwrap();
            let paired = metric_via_pairing(&frames(&cp).unwrap());
            metric_worst = metric_worst.max(direct.sub(&paired).max_abs());
            let c = cubic(&cp).unwrap();
            let c2 = cubic_via_frames(&cp, 1e-4).unwrap();
            cubic_worst = cubic_worst.max(c.max_abs_diff(&c2));
            // jets against the FD oracle, per expr-module tolerances
            let exact = chart.g.eval_jet3(chart.bindings(), &u).unwrap();
            let fd = eval_jet3_fd_oracle(&chart.g, chart.bindings(), &u, 1e-3).unwrap();
            for i in 0..2 {
                jet_worst = jet_worst.max((exact.grad(i) - fd.grad(i)).abs() / 1e-6);
                for j in 0..2 {
                    jet_worst = jet_worst.max((exact.h(i, j) - fd.h(i, j)).abs() / 1e-6);
                    for k in 0..2 {
                        jet_worst = jet_worst.max((exact.t(i, j, k) - fd.t(i, j, k)).abs() / 1e-4);
                    }
                }
            }
        }
    }
    verdict("AC8 metric two-route agreement", metric_worst, 1e-12);
    verdict("AC8 cubic two-route agreement", cubic_worst, 1e-5);
    // normalized: 1.0 means exactly at the per-order FD tolerance
    verdict("AC8 jets vs FD oracle (normalized)", jet_worst, 1.0);
}

#[test]
fn ac9_frobenius_and_wdvv() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let separable = GeneratingChart::new(
        "sep",
        Partition::full(2),
        parse("x1^3/3 + x2^4/4 + x2^2/2").unwrap(),
        DomainBox { min: vec![-2.0, -2.0], max: vec![2.0, 2.0] },
    )
    .unwrap();
    let one_d = GeneratingChart::new(
        "1d",
        Partition::full(1),
        parse("exp(x1) + x1^3/5").unwrap(),
        DomainBox { min: vec![-2.0], max: vec![2.0] },
    )
    .unwrap();
    let mut compat_worst = 0.0f64;
    let mut wdvv_worst = 0.0f64;
    for _ in 0..50 {
        // keep clear of the A2-type critical line x1 = 0
        let u = vec![rng.gen_range(0.3..1.8), rng.gen_range(-1.8..1.8)];
        let cp = separable.point(u);
        compat_worst = compat_worst.max(frobenius_compatibility_residual(&cp).unwrap());
        wdvv_worst = wdvv_worst.max(wdvv_residual(&cp).unwrap());
        let cp = one_d.point(vec![rng.gen_range(-1.5..1.5)]);
        compat_worst = compat_worst.max(frobenius_compatibility_residual(&cp).unwrap());
        wdvv_worst = wdvv_worst.max(wdvv_residual(&cp).unwrap());
    }
    verdict("AC9 Frobenius compatibility", compat_worst, 1e-9);
    verdict("AC9 WDVV associativity", wdvv_worst, 1e-10);
}

#[test]
fn ac10_regular_model_recovery() {
    let atlas = fixtures::quadratic::<f64>();
    let chart = fixtures::only_chart(&atlas);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut double_worst = 0.0f64;
    let mut bregman_worst = 0.0f64;
    for _ in 0..100 {
        let x = interior(&mut rng, chart, 0.1);
        let (p, _) = legendre_transform_regular(chart, &x).unwrap();
        let back = inverse_gradient_map(chart, &p, &[0.0, 0.0]).unwrap();
        for i in 0..2 {
            double_worst = double_worst.max((back[i] - x[i]).abs());
        }
        let y = interior(&mut rng, chart, 0.1);
        let d = divergence_chart(chart, &x, &y).unwrap();
        let b = bregman_specialization(chart, &x, &y).unwrap();
        let closed = 0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2));
        bregman_worst = bregman_worst.max((d - closed).abs()).max((b - closed).abs());
    }
    verdict("AC10 double Legendre transform identity", double_worst, 1e-8);
    verdict("AC10 Bregman closed form", bregman_worst, 1e-12);
}
