//! Trajectory CSV format: one row per grid point, in grid order.
//!
//! Variational problems use the columns `t,x,xnabla,el_residual`; control
//! problems use `t,x,u_rho,p,r1,r2,r3`. Quantities that live on κ-points
//! (difference quotients, ρ-composed controls, residuals) leave their cell
//! empty on the first row; the Euler–Lagrange column is additionally empty
//! on the second row because that residual starts two points in. Extra
//! columns are ignored on input, so a solver-written file can be fed back
//! unchanged.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! reading a written file reproduces every bit.

use std::path::Path;

use varnabla::octrl::{ControlExtremal, ControlProblem};
use varnabla::varsolve::ExtremalSolution;
use varnabla::{GridFunction, KappaGrid, TimeScale};

use crate::Failure;

fn push_cell(row: &mut String, value: Option<f64>) {
    row.push(',');
    if let Some(v) = value {
        row.push_str(&v.to_string());
    }
}

pub fn lagrange_csv(_prob: &varnabla::LagrangeProblem, sol: &ExtremalSolution) -> String {
    let dx = sol.x.nabla_derivative();
    let mut out = String::from("t,x,xnabla,el_residual\n");
    for (i, (&t, &x)) in sol
        .x
        .ts()
        .points()
        .iter()
        .zip(sol.x.values())
        .enumerate()
    {
        let mut row = format!("{t},{x}");
        push_cell(&mut row, (i >= 1).then(|| dx.values()[i - 1]));
        push_cell(&mut row, (i >= 2).then(|| sol.report.el_residuals[i - 2]));
        row.push('\n');
        out.push_str(&row);
    }
    out
}

pub fn control_csv(_prob: &ControlProblem, sol: &ControlExtremal) -> String {
    let mut out = String::from("t,x,u_rho,p,r1,r2,r3\n");
    for (i, &t) in sol.x.ts().points().iter().enumerate() {
        let mut row = format!("{t},{}", sol.x.values()[i]);
        push_cell(&mut row, (i >= 1).then(|| sol.w.values()[i - 1]));
        push_cell(&mut row, Some(sol.p.values()[i]));
        push_cell(&mut row, (i >= 1).then(|| sol.report.r1[i - 1]));
        push_cell(&mut row, (i >= 1).then(|| sol.report.r2[i - 1]));
        push_cell(&mut row, (i >= 1).then(|| sol.report.r3[i - 1]));
        row.push('\n');
        out.push_str(&row);
    }
    out
}

/// Parsed table: named columns of optionally-present floats, row count
/// already checked against the time scale and the `t` column matched
/// exactly against its points.
struct Table {
    columns: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn read(path: &Path, ts: &TimeScale) -> Result<Table, Failure> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();

        let mut cells = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let mut row = Vec::with_capacity(columns.len());
            for j in 0..columns.len() {
                let cell = record.get(j).unwrap_or("");
                if cell.is_empty() {
                    row.push(None);
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        Failure::input(format!(
                            "{}: row {}, column '{}': not a number: '{cell}'",
                            path.display(),
                            i + 2,
                            self_col(&columns, j)
                        ))
                    })?;
                    row.push(Some(v));
                }
            }
            cells.push(row);
        }

        if cells.len() != ts.len() {
            return Err(Failure::input(format!(
                "{}: expected {} rows (one per grid point), found {}",
                path.display(),
                ts.len(),
                cells.len()
            )));
        }

        let table = Table { columns, cells };
        let t_idx = table.require_column(path, "t")?;
        for (i, &point) in ts.points().iter().enumerate() {
            match table.cells[i][t_idx] {
                Some(t) if t == point => {}
                other => {
                    return Err(Failure::input(format!(
                        "{}: row {}: t = {:?} does not match grid point {point}",
                        path.display(),
                        i + 2,
                        other
                    )));
                }
            }
        }
        Ok(table)
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn require_column(&self, path: &Path, name: &str) -> Result<usize, Failure> {
        self.column(name).ok_or_else(|| {
            Failure::input(format!("{}: missing column '{name}'", path.display()))
        })
    }

    /// Column that must hold a value on every row.
    fn full_column(&self, path: &Path, name: &str) -> Result<Vec<f64>, Failure> {
        let idx = self.require_column(path, name)?;
        self.cells
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[idx].ok_or_else(|| {
                    Failure::input(format!(
                        "{}: row {}: column '{name}' is empty",
                        path.display(),
                        i + 2
                    ))
                })
            })
            .collect()
    }

    /// Column that must hold a value on every row but the first (κ-aligned).
    fn kappa_column(&self, path: &Path, name: &str) -> Result<Vec<f64>, Failure> {
        let idx = self.require_column(path, name)?;
        self.cells
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, row)| {
                row[idx].ok_or_else(|| {
                    Failure::input(format!(
                        "{}: row {}: column '{name}' is empty",
                        path.display(),
                        i + 2
                    ))
                })
            })
            .collect()
    }
}

fn self_col(columns: &[String], j: usize) -> &str {
    columns.get(j).map(String::as_str).unwrap_or("?")
}

pub fn read_lagrange(path: &Path, ts: &TimeScale) -> Result<GridFunction, Failure> {
    let table = Table::read(path, ts)?;
    let xs = table.full_column(path, "x")?;
    GridFunction::new(ts.clone(), xs).map_err(|e| Failure::input(e.to_string()))
}

/// Returns `(x, u_rho, p)`; the costate is `None` when the file has no `p`
/// column, which is enough for objective evaluation but not for residual
/// checks.
pub fn read_control(
    path: &Path,
    ts: &TimeScale,
) -> Result<(GridFunction, KappaGrid, Option<GridFunction>), Failure> {
    let table = Table::read(path, ts)?;
    let xs = table.full_column(path, "x")?;
    let ws = table.kappa_column(path, "u_rho")?;
    let x = GridFunction::new(ts.clone(), xs).map_err(|e| Failure::input(e.to_string()))?;
    let w = KappaGrid::new(ts.clone(), ws).map_err(|e| Failure::input(e.to_string()))?;
    let p = match table.column("p") {
        Some(_) => {
            let ps = table.full_column(path, "p")?;
            Some(GridFunction::new(ts.clone(), ps).map_err(|e| Failure::input(e.to_string()))?)
        }
        None => None,
    };
    Ok((x, w, p))
}
