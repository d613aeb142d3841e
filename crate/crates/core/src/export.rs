//! Value-table CSV dumps, winning-region PGM slices and play-trace CSV.
//!
//! All output is integer text in a fixed order, so equal inputs give
//! byte-identical files.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::game::{ModalGame, Value};
use crate::lattice::{ScopeBox, StateVec};
use crate::player::PlayTrace;
use crate::solver::{Solution, ValueTable};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn value_text(v: Value) -> String {
    match v {
        Value::Finite(n) => n.to_string(),
        Value::Top => "TOP".into(),
    }
}

/// Writes `stage, x_1..x_m, value|TOP, u_1..u_d|NONE`, stage-major and
/// row-major over the scope.
pub fn write_values_csv<W: Write>(sol: &Solution, out: W) -> Result<()> {
    let t = sol.table();
    let g = t.game();
    let (m, ud) = (g.dim(), g.controls().dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["stage".to_string()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.push("value".into());
    header.extend((1..=ud).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for k in 1..=t.horizon() {
        for (cell, x) in g.scope().iter().enumerate() {
            let mut rec = vec![k.to_string()];
            rec.extend(x.iter().map(i64::to_string));
            rec.push(value_text(t.value_at(cell, k)));
            match t.argmin_index(cell, k) {
                Some(i) => rec.extend(g.controls().get(i).iter().map(i64::to_string)),
                None => rec.extend(std::iter::repeat_n("NONE".to_string(), ud)),
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a value dump back into a solution of `game` restricted to the
/// dump's scope and horizon.
///
/// Leading stages whose rows equal their successor's are taken as
/// quasi-stationary copies; the returned solution reports the first
/// differing stage as the start of the computed range.
pub fn read_values_csv<R: Read>(game: &ModalGame, input: R) -> Result<Solution> {
    let m = game.dim();
    let ud = game.controls().dim();
    let mut rd = csv::Reader::from_reader(input);
    let mut rows: Vec<(usize, StateVec, Value, Option<StateVec>)> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| Error::Dump(format!("record {}: {what}", line + 1));
        if rec.len() != 2 + m + ud {
            return Err(bad("wrong number of fields"));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|_| bad("expected an integer"));
        let stage = rec[0].parse::<usize>().map_err(|_| bad("bad stage"))?;
        let x = (1..=m).map(|i| int(&rec[i])).collect::<Result<Vec<_>>>()?;
        let value = match &rec[1 + m] {
            "TOP" => Value::Top,
            s => Value::Finite(s.parse().map_err(|_| bad("bad value"))?),
        };
        let u = if rec[2 + m] == *"NONE" {
            None
        } else {
            Some(StateVec::from(
                (2 + m..2 + m + ud)
                    .map(|i| int(&rec[i]))
                    .collect::<Result<Vec<_>>>()?,
            ))
        };
        rows.push((stage, x.into(), value, u));
    }
    let horizon = rows
        .iter()
        .map(|r| r.0)
        .max()
        .ok_or_else(|| Error::Dump("empty dump".into()))?;
    let scope = ScopeBox::bounding(rows.iter().map(|r| &r.1)).expect("non-empty");
    let g = game.with_scope_and_horizon(scope.clone(), horizon)?;
    let cells = scope.cell_count();
    if rows.len() != cells * horizon {
        return Err(Error::Dump(format!(
            "expected {} records for {cells} cells and {horizon} stages, got {}",
            cells * horizon,
            rows.len()
        )));
    }
    let mut values = vec![None; cells * horizon];
    let mut argmin = vec![None; cells * horizon];
    for (stage, x, v, u) in rows {
        if stage == 0 {
            return Err(Error::Dump("stage 0".into()));
        }
        let slot = (stage - 1) * cells + scope.index_of(&x).expect("inside bounding box");
        if values[slot].replace(v).is_some() {
            return Err(Error::Dump(format!("duplicate record for {x} at stage {stage}")));
        }
        argmin[slot] = u;
    }
    let values = values
        .into_iter()
        .map(|v| v.expect("every slot filled"))
        .collect();
    let table = ValueTable::from_parts(g, values, argmin)?;
    let computed_from = infer_computed_from(&table);
    Ok(Solution::from_table(table, None, computed_from))
}

fn infer_computed_from(t: &ValueTable) -> usize {
    let n = t.horizon();
    let same = |a: usize, b: usize| {
        t.row(a) == t.row(b) && (0..t.cell_count()).all(|c| t.argmin_index(c, a) == t.argmin_index(c, b))
    };
    let mut k = 1;
    while k < n && same(k, k + 1) {
        k += 1;
    }
    k
}

/// Writes the stage-`k` winning region projected onto the first two position
/// axes as an ASCII PGM, 0 for losing and 255 for winning, highest row
/// first. One-dimensional positions give a single-row image.
pub fn write_region_pgm<W: Write>(sol: &Solution, k: usize, mut out: W) -> Result<()> {
    let t = sol.table();
    let g = t.game();
    let axes: Vec<usize> = g.position_axes().into_iter().take(2).collect();
    let plane = g.scope().project(&axes);
    let width = plane.extent(0);
    let height = if axes.len() > 1 { plane.extent(1) } else { 1 };
    let mut win = vec![false; width * height];
    for (cell, x) in g.scope().iter().enumerate() {
        if t.value_at(cell, k).is_finite() {
            let col = (x[axes[0]] - plane.lo()[0]) as usize;
            let row = if axes.len() > 1 {
                (plane.hi()[1] - x[axes[1]]) as usize
            } else {
                0
            };
            win[row * width + col] = true;
        }
    }
    writeln!(out, "P2")?;
    writeln!(out, "{width} {height}")?;
    writeln!(out, "255")?;
    for r in 0..height {
        let line: Vec<&str> = win[r * width..(r + 1) * width]
            .iter()
            .map(|&w| if w { "255" } else { "0" })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// One `region_k###.pgm` per stage in `dir`.
pub fn write_region_pgms(sol: &Solution, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for k in 1..=sol.horizon() {
        let path = dir.join(format!("region_k{k:03}.pgm"));
        let mut buf = Vec::new();
        write_region_pgm(sol, k, &mut buf)?;
        fs::write(&path, buf)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes one record per visited state: `step, segment, stage, x.., u..,
/// d.., value, jump, termination`. The final state has empty move and
/// value fields and carries the termination reason.
pub fn write_trace_csv<W: Write>(trace: &PlayTrace, move_dim: usize, out: W) -> Result<()> {
    let m = trace.final_state.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "segment".into(), "stage".into()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend((1..=move_dim).map(|i| format!("u{i}")));
    header.extend((1..=move_dim).map(|i| format!("d{i}")));
    header.extend(["value".into(), "jump".into(), "termination".into()]);
    w.write_record(&header).map_err(csv_err)?;
    let jumps_at = |i: usize| {
        trace
            .jumps
            .iter()
            .filter(|j| j.state == i)
            .map(|j| j.kind.name())
            .collect::<Vec<_>>()
            .join("+")
    };
    for (i, s) in trace.steps.iter().enumerate() {
        let mut rec = vec![i.to_string(), s.segment.to_string(), s.stage.to_string()];
        rec.extend(s.x.iter().map(i64::to_string));
        rec.extend(s.u.iter().map(i64::to_string));
        rec.extend(s.d.iter().map(i64::to_string));
        rec.extend([value_text(s.value), jumps_at(i), String::new()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    let i = trace.steps.len();
    let mut rec = vec![
        i.to_string(),
        trace.final_segment.to_string(),
        trace.final_stage.to_string(),
    ];
    rec.extend(trace.final_state.iter().map(i64::to_string));
    rec.extend(std::iter::repeat_n(String::new(), 2 * move_dim + 1));
    rec.extend([jumps_at(i), trace.termination.name().to_string()]);
    w.write_record(&rec).map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::solver::{ddp_solve, FixpointMode, SolveOptions};

    #[test]
    fn line5_dump_has_one_record_per_cell_and_stage() {
        let sol = ddp_solve(&fixtures::line5(), &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_values_csv(&sol, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 25);
        assert_eq!(lines[0], "stage,x1,value,u1");
        assert_eq!(lines[1], "1,0,4,1");
        assert_eq!(lines[25], "5,4,0,NONE");
        assert!(lines.contains(&"2,0,TOP,NONE"));
    }

    #[test]
    fn dump_reads_back() {
        let g = fixtures::int3();
        let sol = ddp_solve(&g, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_values_csv(&sol, &mut buf).unwrap();
        let back = read_values_csv(&g, buf.as_slice()).unwrap();
        for k in 1..=g.horizon() {
            assert_eq!(back.table().row(k), sol.table().row(k));
            for x in g.scope().iter() {
                assert_eq!(back.table().argmin(&x, k), sol.table().argmin(&x, k));
            }
        }
        let line = fixtures::line5();
        let sol = ddp_solve(&line, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_values_csv(&sol, &mut buf).unwrap();
        assert_eq!(
            read_values_csv(&line, buf.as_slice()).unwrap().stages_computed(),
            1..=5
        );
    }

    #[test]
    fn copied_rows_are_recognised() {
        let g = fixtures::line5();
        let sol = ddp_solve(
            &g,
            &SolveOptions::with_fixpoint(FixpointMode::Approximate([3].into())),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_values_csv(&sol, &mut buf).unwrap();
        let back = read_values_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back.stages_computed(), sol.stages_computed());
    }

    #[test]
    fn malformed_dump_is_rejected() {
        let g = fixtures::line5();
        let text = "stage,x1,value,u1\n1,0,abc,1\n";
        assert!(matches!(
            read_values_csv(&g, text.as_bytes()),
            Err(Error::Dump(_))
        ));
    }

    #[test]
    fn pgm_slices() {
        let sol = ddp_solve(&fixtures::gap9_segment(), &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_region_pgm(&sol, 12, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(&lines[..3], &["P2", "9 5", "255"]);
        assert_eq!(lines[3], "0 0 0 0 0 0 0 0 0");
        assert_eq!(lines[4], "0 0 0 0 0 0 0 255 255");

        let line = ddp_solve(&fixtures::line5(), &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_region_pgm(&line, 2, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "P2\n5 1\n255\n0 255 255 255 255\n"
        );
    }
}
