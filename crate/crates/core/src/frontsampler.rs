//! Wavefront sampling and caustic extraction for low-dimensional models.
//!
//! Wavefronts are sampled in chart coordinates, so multivalued fronts (the
//! branched duals over a caustic) come out faithfully — nothing is ever
//! represented as a height function. Caustics are extracted as the zero set
//! of the relevant frame-matrix determinant via marching squares (n = 2) or
//! edge-crossing point clouds (n = 3), then mapped by the Lagrange map.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::Result;
use crate::geodesy::CurveKind;
use crate::model::{e_legendre, m_legendre, GeneratingChart};
use crate::scalar::Scalar;
use crate::tensors::frames;

/// One wavefront sample: chart coordinates, image coordinates
/// `(x, z)` or `(p, z')`, and the branch flag `sign(det)` of the
/// corresponding frame matrix.
#[derive(Debug, Clone)]
pub struct WavefrontSample<F> {
    pub u: Vec<F>,
    pub image: Vec<F>,
    pub branch: i8,
}

/// Sampled wavefront with a count of grid nodes skipped on domain errors.
#[derive(Debug, Clone)]
pub struct Wavefront<F> {
    pub side: CurveKind,
    pub samples: Vec<WavefrontSample<F>>,
    pub skipped: usize,
}

impl<F: Scalar> Wavefront<F> {
    /// CSV rows `u1,...,un,c1,...,c_{n+1},branch`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let mut first = true;
            for v in s.u.iter().chain(&s.image) {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{:?}", v.to_f64().unwrap_or(f64::NAN));
                first = false;
            }
            let _ = writeln!(out, ",{}", s.branch);
        }
        out
    }
}

fn grid_node<F: Scalar>(chart: &GeneratingChart, grid: &[usize], idx: &[usize]) -> Vec<F> {
    (0..grid.len())
        .map(|d| {
            let lo = chart.domain.min[d];
            let hi = chart.domain.max[d];
            let t = if grid[d] <= 1 { 0.0 } else { idx[d] as f64 / (grid[d] - 1) as f64 };
            F::from_f64_lossy(lo + (hi - lo) * t)
        })
        .collect()
}

fn for_each_node(grid: &[usize], mut f: impl FnMut(&[usize])) {
    let n = grid.len();
    let mut idx = vec![0usize; n];
    loop {
        f(&idx);
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < grid[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                return;
            }
        }
    }
}

fn sample_node<F: Scalar>(
    chart: &GeneratingChart,
    side: CurveKind,
    u: Vec<F>,
) -> Option<WavefrontSample<F>> {
    let cp = chart.point(u.clone());
    let imaged = match side {
        CurveKind::E => e_legendre(&cp),
        CurveKind::M => m_legendre(&cp),
    };
    let (base, height) = imaged.ok()?;
    let branch = match frames(&cp) {
        Ok(fr) => {
            let det = match side {
                CurveKind::E => fr.phi.det(),
                CurveKind::M => fr.phi_prime.det(),
            };
            if det > F::zero() {
                1
            } else if det < F::zero() {
                -1
            } else {
                0
            }
        }
        Err(_) => 0,
    };
    let mut image = base;
    image.push(height);
    Some(WavefrontSample { u, image, branch })
}

/// Worker count for grid sampling: `QUASIHESS_THREADS` (>= 1), default 1,
/// never more than the node count.
fn thread_count(nodes: usize) -> usize {
    std::env::var("QUASIHESS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
        .min(nodes.max(1))
}

/// Evaluate the e- or m-wavefront on a uniform grid over the chart domain.
///
/// Work is split across `QUASIHESS_THREADS` workers (default 1); sample order
/// is the grid order either way.
pub fn sample_wavefront<F: Scalar>(
    chart: &GeneratingChart,
    side: CurveKind,
    grid: &[usize],
) -> Result<Wavefront<F>> {
    assert_eq!(grid.len(), chart.n());
    let mut nodes: Vec<Vec<usize>> = Vec::new();
    for_each_node(grid, |idx| nodes.push(idx.to_vec()));
    let total = nodes.len();
    let threads = thread_count(total);

    let mut samples = Vec::with_capacity(total);
    let mut skipped = 0usize;
    if threads <= 1 {
        for idx in &nodes {
            match sample_node(chart, side, grid_node::<F>(chart, grid, idx)) {
                Some(s) => samples.push(s),
                None => skipped += 1,
            }
        }
    } else {
        let chunk = total.div_ceil(threads);
        let parts: Vec<(Vec<WavefrontSample<F>>, usize)> = std::thread::scope(|scope| {
            let handles: Vec<_> = nodes
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        let mut out = Vec::with_capacity(part.len());
                        let mut miss = 0usize;
                        for idx in part {
                            match sample_node(chart, side, grid_node::<F>(chart, grid, idx)) {
                                Some(s) => out.push(s),
                                None => miss += 1,
                            }
                        }
                        (out, miss)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sampler worker")).collect()
        });
        for (part, miss) in parts {
            samples.extend(part);
            skipped += miss;
        }
    }
    Ok(Wavefront { side, samples, skipped })
}

/// Extracted caustic: polylines in base coordinates for `n = 2`, a point
/// cloud for `n = 3`.
#[derive(Debug, Clone, Default)]
pub struct CausticSet<F> {
    pub polylines: Vec<Vec<Vec<F>>>,
    pub points: Vec<Vec<F>>,
}

impl<F: Scalar> CausticSet<F> {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty() && self.points.is_empty()
    }

    /// All vertices, flattened.
    pub fn vertices(&self) -> Vec<&Vec<F>> {
        self.polylines.iter().flatten().chain(self.points.iter()).collect()
    }
}

fn det_at<F: Scalar>(chart: &GeneratingChart, side: CurveKind, u: &[F]) -> Option<F> {
    let fr = frames(&chart.point(u.to_vec())).ok()?;
    Some(match side {
        CurveKind::E => fr.phi.det(),
        CurveKind::M => fr.phi_prime.det(),
    })
}

fn lagrange_image<F: Scalar>(
    chart: &GeneratingChart,
    side: CurveKind,
    u: &[F],
) -> Option<Vec<F>> {
    let cp = chart.point(u.to_vec());
    match side {
        CurveKind::E => e_legendre(&cp).ok().map(|(x, _)| x),
        CurveKind::M => m_legendre(&cp).ok().map(|(p, _)| p),
    }
}

/// Zero set of the frame determinant, mapped by the Lagrange map.
pub fn extract_caustics<F: Scalar>(
    chart: &GeneratingChart,
    side: CurveKind,
    grid: &[usize],
) -> Result<CausticSet<F>> {
    let n = chart.n();
    assert!((2..=3).contains(&n), "caustic extraction supports n in {{2, 3}}");
    assert_eq!(grid.len(), n);
    // determinant field on the grid
    let mut dets: HashMap<Vec<usize>, Option<F>> = HashMap::new();
    for_each_node(grid, |idx| {
        let u: Vec<F> = grid_node(chart, grid, idx);
        dets.insert(idx.to_vec(), det_at(chart, side, &u));
    });

    if n == 3 {
        // axis-edge zero crossings as a point cloud
        let mut points = Vec::new();
        for_each_node(grid, |idx| {
            let Some(Some(d0)) = dets.get(idx).copied() else { return };
            for axis in 0..3 {
                if idx[axis] + 1 >= grid[axis] {
                    continue;
                }
                let mut jdx = idx.to_vec();
                jdx[axis] += 1;
                let Some(Some(d1)) = dets.get(&jdx).copied() else { continue };
                if d0 == F::zero() || d0 * d1 >= F::zero() {
                    if d0 == F::zero() {
                        if let Some(img) =
                            lagrange_image(chart, side, &grid_node::<F>(chart, grid, idx))
                        {
                            points.push(img);
                        }
                    }
                    continue;
                }
                let t = d0 / (d0 - d1);
                let a: Vec<F> = grid_node(chart, grid, idx);
                let b: Vec<F> = grid_node(chart, grid, &jdx);
                let u: Vec<F> = (0..3).map(|k| a[k] + t * (b[k] - a[k])).collect();
                if let Some(img) = lagrange_image(chart, side, &u) {
                    points.push(img);
                }
            }
        });
        return Ok(CausticSet { polylines: vec![], points });
    }

    // n == 2: marching squares in chart coordinates
    let mut segments: Vec<(Vec<F>, Vec<F>)> = Vec::new();
    for i in 0..grid[0].saturating_sub(1) {
        for j in 0..grid[1].saturating_sub(1) {
            let corners = [[i, j], [i + 1, j], [i + 1, j + 1], [i, j + 1]];
            let vals: Vec<Option<F>> =
                corners.iter().map(|c| dets.get(&c.to_vec()).copied().flatten()).collect();
            if vals.iter().any(|v| v.is_none()) {
                continue;
            }
            let vals: Vec<F> = vals.into_iter().map(|v| v.unwrap()).collect();
            let upos: Vec<Vec<F>> =
                corners.iter().map(|c| grid_node(chart, grid, c)).collect();
            // cell edges as corner index pairs, in cyclic order
            let edges = [(0usize, 1usize), (1, 2), (2, 3), (3, 0)];
            let mut crossings: Vec<Vec<F>> = Vec::new();
            let mut crossing_edges: Vec<usize> = Vec::new();
            for (e, &(a, b)) in edges.iter().enumerate() {
                let (da, db) = (vals[a], vals[b]);
                if da == F::zero() && db == F::zero() {
                    // degenerate edge fully on the zero set: emit it directly
                    segments.push((upos[a].clone(), upos[b].clone()));
                } else if da * db < F::zero() || (da == F::zero() && db != F::zero()) {
                    let t = da / (da - db);
                    let u: Vec<F> =
                        (0..2).map(|k| upos[a][k] + t * (upos[b][k] - upos[a][k])).collect();
                    crossings.push(u);
                    crossing_edges.push(e);
                }
            }
            match crossings.len() {
                2 => segments.push((crossings[0].clone(), crossings[1].clone())),
                4 => {
                    // ambiguous saddle cell: split by the center sign
                    let center = (vals[0] + vals[1] + vals[2] + vals[3])
                        / F::from_f64_lossy(4.0);
                    let pair_with_next = center * vals[0] > F::zero();
                    // crossing_edges is sorted; edges (0,1)+(2,3) or (1,2)+(3,0)
                    if pair_with_next {
                        segments.push((crossings[1].clone(), crossings[2].clone()));
                        segments.push((crossings[3].clone(), crossings[0].clone()));
                    } else {
                        segments.push((crossings[0].clone(), crossings[1].clone()));
                        segments.push((crossings[2].clone(), crossings[3].clone()));
                    }
                }
                _ => {}
            }
        }
    }

    // chain segments into polylines on quantized endpoints
    let key = |u: &[F]| -> (i64, i64) {
        let q = 1e9;
        (
            (u[0].to_f64().unwrap_or(f64::NAN) * q).round() as i64,
            (u[1].to_f64().unwrap_or(f64::NAN) * q).round() as i64,
        )
    };
    let mut adjacency: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (si, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(key(a)).or_default().push(si);
        adjacency.entry(key(b)).or_default().push(si);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines_u: Vec<Vec<Vec<F>>> = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut line = vec![segments[start].0.clone(), segments[start].1.clone()];
        // extend forward then backward
        for dirn in 0..2 {
            loop {
                let end = if dirn == 0 { line.last().unwrap() } else { &line[0] }.clone();
                let Some(neighbors) = adjacency.get(&key(&end)) else { break };
                let Some(&next) = neighbors.iter().find(|&&s| !used[s]) else { break };
                used[next] = true;
                let (a, b) = (&segments[next].0, &segments[next].1);
                let cont = if key(a) == key(&end) { b.clone() } else { a.clone() };
                if dirn == 0 {
                    line.push(cont);
                } else {
                    line.insert(0, cont);
                }
            }
        }
        polylines_u.push(line);
    }

    // map chart-space polylines through the Lagrange map
    let mut polylines = Vec::new();
    for line in polylines_u {
        let mapped: Vec<Vec<F>> = line
            .iter()
            .filter_map(|u| lagrange_image(chart, side, u))
            .collect();
        if mapped.len() >= 2 {
            polylines.push(mapped);
        }
    }
    Ok(CausticSet { polylines, points: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::{DomainBox, Partition};

    fn a2() -> GeneratingChart {
        GeneratingChart::new(
            "a2",
            Partition::full(2),
            parse("x1^3/3 + x2^2/2").unwrap(),
            DomainBox { min: vec![-2.0, -2.0], max: vec![2.0, 2.0] },
        )
        .unwrap()
    }

    fn aa() -> GeneratingChart {
        GeneratingChart::new(
            "aa",
            Partition::new(2, vec![0]).unwrap(),
            parse("x1^3/3 + p2^4/4").unwrap(),
            DomainBox { min: vec![-2.0, -2.0], max: vec![2.0, 2.0] },
        )
        .unwrap()
    }

    #[test]
    fn a2_m_wavefront_closed_form() {
        // z' = ±(2/3) p1^{3/2} + p2^2/2, branch by sign of x1
        let chart = a2();
        let wf = sample_wavefront::<f64>(&chart, CurveKind::M, &[41, 41]).unwrap();
        assert_eq!(wf.skipped, 0);
        let mut worst = 0.0f64;
        for s in &wf.samples {
            let (p1, p2, zp) = (s.image[0], s.image[1], s.image[2]);
            assert!(p1 >= -1e-12, "p1 = x1^2 must be nonnegative");
            let sign = if s.u[0] >= 0.0 { 1.0 } else { -1.0 };
            let want = sign * (2.0 / 3.0) * p1.max(0.0).powf(1.5) + p2 * p2 / 2.0;
            worst = worst.max((zp - want).abs());
        }
        assert!(worst <= 1e-9, "max defect {worst}");
    }

    #[test]
    fn a2_e_wavefront_is_graph() {
        let chart = a2();
        let wf = sample_wavefront::<f64>(&chart, CurveKind::E, &[21, 21]).unwrap();
        for s in &wf.samples {
            let want = s.image[0].powi(3) / 3.0 + s.image[1].powi(2) / 2.0;
            assert!((s.image[2] - want).abs() < 1e-12);
            assert_eq!(s.branch, 1); // det Phi = 1 on a potential chart
        }
    }

    #[test]
    fn a3_m_wavefront_closed_form() {
        let chart = GeneratingChart::new(
            "a3",
            Partition::full(2),
            parse("x1^4/4 + x2^2/2").unwrap(),
            DomainBox { min: vec![-2.0, -2.0], max: vec![2.0, 2.0] },
        )
        .unwrap();
        let wf = sample_wavefront::<f64>(&chart, CurveKind::M, &[41, 41]).unwrap();
        for s in &wf.samples {
            let (p1, p2, zp) = (s.image[0], s.image[1], s.image[2]);
            let want = 0.75 * p1.abs().powf(4.0 / 3.0) + p2 * p2 / 2.0;
            assert!((zp - want).abs() <= 1e-9, "defect {}", (zp - want).abs());
        }
    }

    #[test]
    fn a2_m_caustic_is_p1_axis() {
        let chart = a2();
        let c = extract_caustics::<f64>(&chart, CurveKind::M, &[81, 81]).unwrap();
        assert!(!c.is_empty());
        for v in c.vertices() {
            assert!(v[0].abs() <= 1e-3, "caustic vertex off p1=0: {v:?}");
        }
        // covers the p2 range
        let p2s: Vec<f64> = c.vertices().iter().map(|v| v[1]).collect();
        let (lo, hi) = p2s.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo < -1.9 && hi > 1.9);
    }

    #[test]
    fn a2_e_caustic_empty() {
        let chart = a2();
        let c = extract_caustics::<f64>(&chart, CurveKind::E, &[41, 41]).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn aa_caustics_both_sides() {
        let chart = aa();
        // e-caustic: det Phi = -3 p2^2 zero at p2 = 0, image x2 = -p2^3 = 0
        let e = extract_caustics::<f64>(&chart, CurveKind::E, &[61, 61]).unwrap();
        assert!(!e.is_empty());
        for v in e.vertices() {
            assert!(v[1].abs() <= 1e-3, "e-caustic vertex off x2=0: {v:?}");
        }
        // m-caustic: det PhiPrime = 2 x1 zero at x1 = 0, image p1 = x1^2 = 0
        let m = extract_caustics::<f64>(&chart, CurveKind::M, &[61, 61]).unwrap();
        assert!(!m.is_empty());
        for v in m.vertices() {
            assert!(v[0].abs() <= 1e-3, "m-caustic vertex off p1=0: {v:?}");
        }
    }

    #[test]
    fn csv_shape() {
        let chart = a2();
        let wf = sample_wavefront::<f64>(&chart, CurveKind::M, &[3, 3]).unwrap();
        let csv = wf.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0].split(',').count(), 6); // u1,u2,p1,p2,z',branch
    }

    #[test]
    fn skipped_nodes_counted() {
        let chart = GeneratingChart::new(
            "logchart",
            Partition::full(1),
            parse("x1*log(x1)").unwrap(),
            DomainBox { min: vec![-1.0], max: vec![1.0] },
        )
        .unwrap();
        let wf = sample_wavefront::<f64>(&chart, CurveKind::E, &[21]).unwrap();
        assert!(wf.skipped > 0);
        assert!(!wf.samples.is_empty());
    }
}
