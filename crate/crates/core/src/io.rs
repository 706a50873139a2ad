//! CSV and JSON serialization. Every float is written as `{:.16e}`
//! (17 significant digits), which round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::ContourPdf;
use crate::density::{GriddedPdf1D, GriddedPdf2D};
use crate::error::{Error, Result};
use crate::fields::{CovKernel, FieldEnsemble, KLBasis};
use crate::grid::Grid1D;
use crate::inference::ParamPosterior;
use crate::maxent::MaxEntModel;
use crate::sampling::SampleSet;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row<W: Write>(w: &mut W, cells: impl IntoIterator<Item = String>) -> Result<()> {
    let line: Vec<String> = cells.into_iter().collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

/// Buffered writer for `path`, creating parent directories.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Plain numeric table under a header row.
pub fn write_table<W: Write, R: IntoIterator<Item = f64>>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.into_iter().map(num).collect();
        if cells.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), got: cells.len() });
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize, W: Write>(w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn write_pdf_1d<W: Write>(mut w: W, p: &GriddedPdf1D) -> Result<()> {
    writeln!(w, "x,value")?;
    let g = p.grid();
    for (i, v) in p.values().iter().enumerate() {
        row(&mut w, [num(g.node(i)), num(*v)])?;
    }
    Ok(())
}

/// Read a uniform-grid 1-D pdf written by [`write_pdf_1d`].
pub fn read_pdf_1d<R: Read>(r: R) -> Result<GriddedPdf1D> {
    let mut rd = csv::Reader::from_reader(r);
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        xs.push(parse(rec.get(0))?);
        vs.push(parse(rec.get(1))?);
    }
    if xs.len() < 2 {
        return Err(Error::Parse("need at least two rows".into()));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let grid = Grid1D::new(xs[0] - 0.5 * h, xs[xs.len() - 1] + 0.5 * h, xs.len())?;
    GriddedPdf1D::new(grid, vs)
}

fn parse(s: Option<&str>) -> Result<f64> {
    let s = s.ok_or_else(|| Error::Parse("missing column".into()))?;
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Row-major `x,y,value`.
pub fn write_pdf_2d<W: Write>(mut w: W, p: &GriddedPdf2D) -> Result<()> {
    writeln!(w, "x,y,value")?;
    let g = p.grid();
    for i in 0..g.gx.len() {
        for j in 0..g.gy.len() {
            row(&mut w, [num(g.gx.node(i)), num(g.gy.node(j)), num(p.value(i, j))])?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
}

/// One point per row with columns `z1, ..., zd`.
pub fn write_samples<W: Write>(mut w: W, s: &SampleSet) -> Result<()> {
    row(&mut w, (1..=s.dim()).map(|k| format!("z{k}")))?;
    for p in s.points() {
        row(&mut w, p.iter().map(|v| num(*v)))?;
    }
    Ok(())
}

pub fn sample_meta(s: &SampleSet) -> SampleMeta {
    SampleMeta { dim: s.dim(), n: s.len(), seed: s.seed() }
}

pub fn read_samples<R: Read>(r: R, seed: u64) -> Result<SampleSet> {
    let mut rd = csv::Reader::from_reader(r);
    let dim = rd.headers()?.len();
    let mut data = Vec::new();
    for rec in rd.records() {
        for cell in rec?.iter() {
            data.push(parse(Some(cell))?);
        }
    }
    SampleSet::from_flat(dim, data, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourMeta {
    pub x_l: f64,
    pub eps: f64,
    pub n_segments: usize,
    pub arc_length: f64,
}

pub fn write_contour_pdf<W: Write>(mut w: W, p: &ContourPdf) -> Result<()> {
    writeln!(w, "x_C,value")?;
    for (x, v) in p.arc_nodes().iter().zip(p.values()) {
        row(&mut w, [num(*x), num(v)])?;
    }
    Ok(())
}

pub fn contour_meta(p: &ContourPdf) -> ContourMeta {
    ContourMeta { x_l: p.x_l, eps: p.eps, n_segments: p.n_segments(), arc_length: p.arc_length }
}

pub fn write_maxent<W: Write>(w: W, m: &MaxEntModel) -> Result<()> {
    write_json(w, &m.record())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeta {
    pub map_estimate: (f64, f64),
    pub n_samples: usize,
    pub seed: u64,
}

pub fn write_posterior<W: Write>(mut w: W, p: &ParamPosterior) -> Result<()> {
    writeln!(w, "theta1,theta2,prior,loglik,posterior")?;
    for k in 0..p.grid.len() {
        let (a, b) = p.grid.node(k);
        row(&mut w, [num(a), num(b), num(p.prior[k]), num(p.loglik[k]), num(p.posterior[k])])?;
    }
    Ok(())
}

pub fn posterior_meta(p: &ParamPosterior) -> PosteriorMeta {
    PosteriorMeta { map_estimate: p.map_estimate(), n_samples: p.n_samples, seed: p.seed }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMeta {
    pub n_points: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub mesh: MeshMeta,
    pub kernel: Option<CovKernel>,
    pub seed: u64,
}

/// One row per sample path; the header holds the mesh coordinates.
pub fn write_field<W: Write>(mut w: W, e: &FieldEnsemble) -> Result<()> {
    row(&mut w, e.mesh.points().into_iter().map(num))?;
    for r in e.samples.row_iter() {
        row(&mut w, r.iter().map(|v| num(*v)))?;
    }
    Ok(())
}

pub fn field_meta(e: &FieldEnsemble, kernel: Option<CovKernel>) -> FieldMeta {
    FieldMeta { mesh: MeshMeta { n_points: e.mesh.len(), h: e.mesh.h() }, kernel, seed: e.seed }
}

/// `k,eigval` rows.
pub fn write_eigvals<W: Write>(mut w: W, b: &KLBasis) -> Result<()> {
    writeln!(w, "k,eigval")?;
    for (k, l) in b.eigvals.iter().enumerate() {
        row(&mut w, [(k + 1).to_string(), num(*l)])?;
    }
    Ok(())
}

/// `x,phi1,...,phiM` rows.
pub fn write_eigvecs<W: Write>(mut w: W, b: &KLBasis) -> Result<()> {
    row(&mut w, std::iter::once("x".to_string()).chain((1..=b.n_modes()).map(|k| format!("phi{k}"))))?;
    for i in 0..b.mesh.len() {
        row(&mut w, std::iter::once(num(b.mesh.point(i))).chain(b.eigvecs.row(i).iter().map(|v| num(*v))))?;
    }
    Ok(())
}

/// `Y1,...,YM` rows, one per sample.
pub fn write_scores<W: Write>(mut w: W, b: &KLBasis) -> Result<()> {
    row(&mut w, (1..=b.scores.ncols()).map(|k| format!("Y{k}")))?;
    for r in b.scores.row_iter() {
        row(&mut w, r.iter().map(|v| num(*v)))?;
    }
    Ok(())
}
