//! CSV import and export for panels, fields and spectra.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{DegreeRange, HarmonicIndex, SphereGrid};
use crate::simulate::CoefficientPanel;
use crate::spectral::SpectrumRow;

/// Panel CSV layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PanelLayout {
    /// One row per `(t, n, j)`: header `t,n,j,value`.
    #[default]
    Long,
    /// One row per time: header `t,n1j1,n1j2,...`.
    Wide,
}

impl std::str::FromStr for PanelLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Self::Long),
            "wide" => Ok(Self::Wide),
            other => Err(Error::Parse(format!("unknown panel layout '{other}'"))),
        }
    }
}

fn column_name(idx: HarmonicIndex) -> String {
    format!("n{}j{}", idx.n, idx.j)
}

fn parse_column_name(name: &str) -> Result<HarmonicIndex> {
    let bad = || Error::Parse(format!("bad column name '{name}', expected n<deg>j<order>"));
    let rest = name.strip_prefix('n').ok_or_else(bad)?;
    let (n, j) = rest.split_once('j').ok_or_else(bad)?;
    HarmonicIndex::new(n.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?)
}

pub fn write_panel<W: Write>(panel: &CoefficientPanel, layout: PanelLayout, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let degrees = panel.degrees();
    match layout {
        PanelLayout::Long => {
            w.write_record(["t", "n", "j", "value"]).map_err(csv_err)?;
            for (c, idx) in degrees.indices().enumerate() {
                for (t, v) in panel.column(c).iter().enumerate() {
                    w.write_record([
                        t.to_string(),
                        idx.n.to_string(),
                        idx.j.to_string(),
                        format!("{v:e}"),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        PanelLayout::Wide => {
            let mut header = vec!["t".to_string()];
            header.extend(degrees.indices().map(column_name));
            w.write_record(&header).map_err(csv_err)?;
            for t in 0..panel.len() {
                let mut row = vec![t.to_string()];
                row.extend(panel.data().row(t).iter().map(|v| format!("{v:e}")));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel<R: Read>(input: R, layout: PanelLayout) -> Result<CoefficientPanel> {
    let mut r = csv::Reader::from_reader(input);
    let parse_f = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
    };
    let parse_u = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("not an index: '{s}'")))
    };
    match layout {
        PanelLayout::Long => {
            let mut rows = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(csv_err)?;
                if rec.len() != 4 {
                    return Err(Error::Parse(format!(
                        "expected 4 fields, got {}",
                        rec.len()
                    )));
                }
                let idx = HarmonicIndex::new(parse_u(&rec[1])?, parse_u(&rec[2])?)?;
                rows.push((parse_u(&rec[0])?, idx, parse_f(&rec[3])?));
            }
            if rows.is_empty() {
                return Err(Error::Parse("empty panel".into()));
            }
            let n_min = rows.iter().map(|r| r.1.n).min().expect("nonempty");
            let n_max = rows.iter().map(|r| r.1.n).max().expect("nonempty");
            let t = rows.iter().map(|r| r.0).max().expect("nonempty") + 1;
            let degrees = DegreeRange::new(n_min, n_max)?;
            if rows.len() != t * degrees.dim() {
                return Err(Error::LengthMismatch {
                    expected: t * degrees.dim(),
                    got: rows.len(),
                });
            }
            let mut data = Array2::from_elem((t, degrees.dim()), f64::NAN);
            for (time, idx, v) in rows {
                data[[time, degrees.column(idx)?]] = v;
            }
            CoefficientPanel::new(degrees, data)
        }
        PanelLayout::Wide => {
            let header = r.headers().map_err(csv_err)?.clone();
            let idxs: Vec<HarmonicIndex> = header
                .iter()
                .skip(1)
                .map(parse_column_name)
                .collect::<Result<_>>()?;
            let first = idxs
                .first()
                .ok_or_else(|| Error::Parse("no coefficient columns".into()))?;
            let last = idxs.last().expect("nonempty");
            let degrees = DegreeRange::new(first.n, last.n)?;
            if idxs != degrees.indices().collect::<Vec<_>>() {
                return Err(Error::Parse(
                    "wide columns must list every (n, j) in ascending order".into(),
                ));
            }
            let mut columns = vec![Vec::new(); degrees.dim()];
            for rec in r.records() {
                let rec = rec.map_err(csv_err)?;
                if rec.len() != degrees.dim() + 1 {
                    return Err(Error::LengthMismatch {
                        expected: degrees.dim() + 1,
                        got: rec.len(),
                    });
                }
                for (c, field) in rec.iter().skip(1).enumerate() {
                    columns[c].push(parse_f(field)?);
                }
            }
            CoefficientPanel::from_columns(degrees, columns)
        }
    }
}

pub fn save_panel(panel: &CoefficientPanel, layout: PanelLayout, path: &Path) -> Result<()> {
    write_panel(panel, layout, fs::File::create(path)?)
}

pub fn load_panel(path: &Path, layout: PanelLayout) -> Result<CoefficientPanel> {
    read_panel(fs::File::open(path)?, layout)
}

/// Field CSV with header `theta,phi,value`.
pub fn write_field<W: Write>(grid: &SphereGrid, field: &Array2<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "phi", "value"]).map_err(csv_err)?;
    for (i, theta) in grid.colatitudes().iter().enumerate() {
        for (k, phi) in grid.longitudes().iter().enumerate() {
            w.write_record([
                format!("{theta:e}"),
                format!("{phi:e}"),
                format!("{:e}", field[[i, k]]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Spectrum CSV with header `omega,a_n,a_j,b_n,b_j,re,im`.
pub fn write_spectrum<W: Write>(rows: &[SpectrumRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "a_n", "a_j", "b_n", "b_j", "re", "im"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.omega),
            r.a.n.to_string(),
            r.a.j.to_string(),
            r.b.n.to_string(),
            r.b.j.to_string(),
            format!("{:e}", r.value.re),
            format!("{:e}", r.value.im),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    } else {
        Error::Parse(e.to_string())
    }
}
