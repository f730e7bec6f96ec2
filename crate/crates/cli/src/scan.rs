//! Grid scans of a zeta function over a rectangle of the complex plane.

use num_complex::Complex64;
use parazeta::cantor_atoms::{CantorParams, SingularityKind};
use parazeta::prescriber::{singularities_in_window, ComplexWindow, PrescribedString, Singularity};
use parazeta::string_core::{StringExpr, WeightedParts};
use parazeta::zeta_eval::{eval_constructed, eval_zeta};
use parazeta::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    Regular,
    SingularityProximal,
    OutsideHalfplane,
}

impl Marker {
    fn name(self) -> &'static str {
        match self {
            Marker::Regular => "regular",
            Marker::SingularityProximal => "singularity-proximal",
            Marker::OutsideHalfplane => "outside-halfplane",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub re: f64,
    pub im: f64,
    pub zeta_re: f64,
    pub zeta_im: f64,
    pub abs: f64,
    pub log_abs: f64,
    pub marker: Marker,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanGrid {
    pub window: ComplexWindow,
    pub resolution: (usize, usize),
    pub cells: Vec<Cell>,
    pub singularities: Vec<Singularity>,
}

pub enum Target<'a> {
    Expr(&'a StringExpr),
    Construction(&'a PrescribedString),
}

fn lattice_points(params: &CantorParams, kind: SingularityKind, w: &ComplexWindow, out: &mut Vec<Singularity>) {
    let lattice = params.lattice(kind);
    if lattice.real_part >= w.re_min && lattice.real_part <= w.re_max {
        out.extend(lattice.points_between(w.im_min, w.im_max).map(|point| Singularity { point, kind, k: None }));
    }
}

/// Singularities of the lattice-type atoms of `e` inside `w`.
///
/// Self-similar strings with unequal ratios have no lattice and are skipped.
fn expr_singularities(e: &StringExpr, w: &ComplexWindow, out: &mut Vec<Singularity>) {
    match e {
        StringExpr::GenCantor(p) => lattice_points(p, SingularityKind::Pole { order: 1 }, w, out),
        StringExpr::InfiniteOrder(p) => lattice_points(p, SingularityKind::Essential, w, out),
        StringExpr::SelfSimilar { ratios } => {
            let r = ratios[0];
            if ratios.iter().all(|&x| x == r) && ratios.len() >= 2 {
                if let Ok(p) = CantorParams::new(ratios.len() as u32, r) {
                    lattice_points(&p, SingularityKind::Pole { order: 1 }, w, out);
                }
            }
        }
        StringExpr::Power { base, n } => match base.as_ref() {
            StringExpr::GenCantor(p) => lattice_points(p, SingularityKind::Pole { order: *n }, w, out),
            other => expr_singularities(other, w, out),
        },
        StringExpr::Scale { inner, .. } => expr_singularities(inner, w, out),
        StringExpr::SeriesLift { inner, .. } => {
            // an entire function of a meromorphic zeta turns its poles into essential singularities
            let mut inner_points = Vec::new();
            expr_singularities(inner, w, &mut inner_points);
            out.extend(inner_points.into_iter().map(|sg| Singularity { kind: SingularityKind::Essential, ..sg }));
        }
        StringExpr::Union { parts } => parts.iter().for_each(|p| expr_singularities(p, w, out)),
        StringExpr::Tensor { factors } => factors.iter().for_each(|p| expr_singularities(p, w, out)),
        StringExpr::WeightedUnion { parts } => match parts {
            WeightedParts::Finite(parts) => parts.iter().for_each(|p| expr_singularities(&p.part, w, out)),
            WeightedParts::Cantor(schedule) => {
                let mut k = 1;
                while schedule.dimension(k) >= w.re_min && schedule.dimension(k) > schedule.d_infinity {
                    lattice_points(&schedule.params(k), SingularityKind::Essential, w, out);
                    k += 1;
                }
            }
        },
        StringExpr::Explicit { .. } => {}
    }
}

/// `i`-th of `n` equispaced points; symmetric windows give exactly negated coordinates.
fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    let last = (n - 1) as f64;
    (lo * (last - i as f64) + hi * i as f64) / last
}

fn dedup(points: &mut Vec<Singularity>) {
    points.sort_by(|a, b| a.point.re.total_cmp(&b.point.re).then(a.point.im.total_cmp(&b.point.im)));
    points.dedup_by(|a, b| a.point == b.point);
}

/// Evaluates on an `n_re x n_im` grid, row-major with `im` ascending.
///
/// A cell is singularity-proximal when a known singularity is nearer to its
/// grid point than to any other, or when evaluation refuses the point.
pub fn scan(target: Target, window: ComplexWindow, n_re: usize, n_im: usize, tol: f64) -> Result<ScanGrid, Error> {
    let mut singularities = match target {
        Target::Construction(p) => singularities_in_window(p, window)?,
        Target::Expr(e) => {
            let mut out = Vec::new();
            expr_singularities(e, &window, &mut out);
            out
        }
    };
    dedup(&mut singularities);
    let h_re = (window.re_max - window.re_min) / (n_re - 1) as f64;
    let h_im = (window.im_max - window.im_min) / (n_im - 1) as f64;
    let mut proximal = vec![false; n_re * n_im];
    for sg in &singularities {
        let i = ((sg.point.re - window.re_min) / h_re).round() as usize;
        let j = ((sg.point.im - window.im_min) / h_im).round() as usize;
        proximal[j.min(n_im - 1) * n_re + i.min(n_re - 1)] = true;
    }
    let eval = |s: Complex64| match target {
        Target::Construction(p) => eval_constructed(p, s, tol),
        Target::Expr(e) => eval_zeta(e, s, tol),
    };
    let cells = (0..n_im)
        .into_par_iter()
        .flat_map_iter(|j| {
            let im = lerp(window.im_min, window.im_max, j, n_im);
            let proximal = &proximal;
            (0..n_re).map(move |i| {
                let re = lerp(window.re_min, window.re_max, i, n_re);
                let s = Complex64::new(re, im);
                let mut marker = if proximal[j * n_re + i] { Marker::SingularityProximal } else { Marker::Regular };
                let value = match eval(s) {
                    Ok(r) => r.value,
                    Err(e) => {
                        match e {
                            Error::SingularityProximity { .. } => marker = Marker::SingularityProximal,
                            Error::OutsideHalfPlane { .. } => marker = Marker::OutsideHalfplane,
                            _ => {}
                        }
                        Complex64::new(f64::NAN, f64::NAN)
                    }
                };
                let abs = value.norm();
                Cell { re, im, zeta_re: value.re, zeta_im: value.im, abs, log_abs: abs.ln(), marker }
            })
        })
        .collect();
    Ok(ScanGrid { window, resolution: (n_re, n_im), cells, singularities })
}

fn kind_name(kind: SingularityKind) -> String {
    match kind {
        SingularityKind::Pole { order } => format!("pole-{order}"),
        SingularityKind::Essential => "essential".into(),
    }
}

impl ScanGrid {
    /// The grid as CSV, followed by a blank line and a `singularities` block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,zeta_re,zeta_im,abs,log_abs,marker\n");
        for c in &self.cells {
            let row = [c.re, c.im, c.zeta_re, c.zeta_im, c.abs, c.log_abs].map(float).join(",");
            out.push_str(&row);
            out.push(',');
            out.push_str(c.marker.name());
            out.push('\n');
        }
        out.push_str("\nsingularities\nre,im,kind,k\n");
        for sg in &self.singularities {
            let k = sg.k.map(|k| k.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{k}\n", float(sg.point.re), float(sg.point.im), kind_name(sg.kind)));
        }
        out
    }
}
