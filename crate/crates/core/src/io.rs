//! File formats: instance JSON and the CSV outputs.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit for bit.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{ensure_valid, ProjectSpec};
use crate::stage2::IndexTable;
use crate::study::{BenchRow, StudyReport};

/// 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // Not valid JSON, but never produced for valid inputs.
        format!("{x}")
    }
}

/// Comment line recording when a file was written.
pub fn timestamp_line() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# generated at unix time {secs}\n")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    beta: f64,
    projects: Vec<ProjectEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectEntry {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<f64>,
    #[serde(default)]
    c: Option<Vec<f64>>,
    #[serde(default)]
    d: Option<Vec<f64>>,
}

/// Parse and validate an instance file. Missing `c` or `d` mean zero costs.
pub fn read_instance_json(text: &str) -> Result<Vec<ProjectSpec>> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.projects.is_empty() {
        return Err(Error::Format("instance has no projects".into()));
    }
    file.projects
        .into_iter()
        .enumerate()
        .map(|(m, e)| {
            let n = e.r.len();
            let p = Matrix::from_rows(&e.p).map_err(|err| Error::Format(format!("project {}: {err}", m + 1)))?;
            let spec = ProjectSpec::new(
                p,
                e.r,
                e.c.unwrap_or_else(|| vec![0.0; n]),
                e.d.unwrap_or_else(|| vec![0.0; n]),
                file.beta,
            );
            ensure_valid(&spec)?;
            Ok(spec)
        })
        .collect()
}

fn json_array(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", items.join(", "))
}

/// Write projects sharing one discount factor.
pub fn write_instance_json<W: Write>(out: &mut W, specs: &[ProjectSpec]) -> Result<()> {
    let beta = specs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no projects to write".into()))?
        .beta;
    if specs.iter().any(|s| s.beta != beta) {
        return Err(Error::InvalidArgument("projects disagree on the discount factor".into()));
    }
    writeln!(out, "{{")?;
    writeln!(out, "  \"beta\": {},", fmt_f64(beta))?;
    writeln!(out, "  \"projects\": [")?;
    for (m, s) in specs.iter().enumerate() {
        writeln!(out, "    {{")?;
        writeln!(out, "      \"P\": [")?;
        for i in 0..s.n() {
            let sep = if i + 1 < s.n() { "," } else { "" };
            writeln!(out, "        {}{sep}", json_array(s.transition.row(i)))?;
        }
        writeln!(out, "      ],")?;
        writeln!(out, "      \"R\": {},", json_array(&s.reward))?;
        writeln!(out, "      \"c\": {},", json_array(&s.startup_cost))?;
        writeln!(out, "      \"d\": {}", json_array(&s.shutdown_cost))?;
        let sep = if m + 1 < specs.len() { "," } else { "" };
        writeln!(out, "    }}{sep}")?;
    }
    writeln!(out, "  ]")?;
    writeln!(out, "}}")?;
    Ok(())
}

/// `state,nu_cont,nu_switch` with 1-based states; `ops` appends the two
/// operation counters to every row.
pub fn write_index_csv<W: Write>(out: &mut W, table: &IndexTable, ops: bool) -> Result<()> {
    write!(out, "state,nu_cont,nu_switch")?;
    if ops {
        write!(out, ",op_count_stage1,op_count_stage2")?;
    }
    writeln!(out)?;
    for i in 0..table.n() {
        write!(out, "{},{},{}", i + 1, fmt_f64(table.nu_cont[i]), fmt_f64(table.nu_switch[i]))?;
        if ops {
            write!(out, ",{},{}", table.op_count_stage1, table.op_count_stage2)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parse an index CSV back into `(nu_cont, nu_switch)` by state.
pub fn read_index_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Format("empty index file".into()))?;
    if !header.starts_with("state,nu_cont,nu_switch") {
        return Err(Error::Format(format!("unexpected header `{header}`")));
    }
    let mut cont = Vec::new();
    let mut switch = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("line {}: bad number `{s}`", k + 2)));
        if fields.len() < 3 || fields[0] != (k + 1).to_string() {
            return Err(Error::Format(format!("line {}: malformed row `{line}`", k + 2)));
        }
        cont.push(parse(fields[1])?);
        switch.push(parse(fields[2])?);
    }
    Ok((cont, switch))
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// One row per grid cell.
pub fn write_study_cells_csv<W: Write>(out: &mut W, report: &StudyReport) -> Result<()> {
    let axes: Vec<&str> = report.config.grid.axes.iter().map(|a| a.name.as_str()).collect();
    writeln!(
        out,
        "experiment,cell,{},instances,mean_delta,max_delta,mean_rho,rho_undefined,equivalent",
        axes.join(",")
    )?;
    let exp = report.config.experiment.number();
    for c in &report.cells {
        let point: Vec<String> = c.point.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(
            out,
            "{exp},{},{},{},{},{},{},{},{}",
            c.cell + 1,
            point.join(","),
            c.instances,
            fmt_f64(c.mean_delta),
            fmt_f64(c.max_delta),
            opt_f64(c.mean_rho),
            c.rho_undefined,
            c.equivalent
        )?;
    }
    Ok(())
}

/// One row per (cell, instance).
pub fn write_study_rows_csv<W: Write>(out: &mut W, report: &StudyReport) -> Result<()> {
    let axes: Vec<&str> = report.config.grid.axes.iter().map(|a| a.name.as_str()).collect();
    writeln!(
        out,
        "experiment,cell,instance,seed,{},v_opt,v_mpi,v_bench,delta,rho,equivalent",
        axes.join(",")
    )?;
    let exp = report.config.experiment.number();
    for r in &report.rows {
        let point: Vec<String> = r.point.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(
            out,
            "{exp},{},{},{},{},{},{},{},{},{},{}",
            r.cell + 1,
            r.instance + 1,
            r.seed,
            point.join(","),
            fmt_f64(r.v_opt),
            fmt_f64(r.v_mpi),
            fmt_f64(r.v_bench),
            fmt_f64(r.delta),
            opt_f64(r.rho),
            u8::from(r.equivalent)
        )?;
    }
    Ok(())
}

/// Runtime rows; `timing = false` drops the wall-clock columns, leaving a
/// reproducible file.
pub fn write_bench_csv<W: Write>(out: &mut W, rows: &[BenchRow], timing: bool) -> Result<()> {
    write!(out, "n,method")?;
    if timing {
        write!(out, ",seconds_stage1,seconds_stage2,seconds_total")?;
    }
    writeln!(out, ",ops_stage1,ops_stage2,ops_total")?;
    for r in rows {
        write!(out, "{},{}", r.n, r.method.name())?;
        if timing {
            write!(
                out,
                ",{},{},{}",
                fmt_f64(r.seconds_stage1),
                fmt_f64(r.seconds_stage2),
                fmt_f64(r.seconds_total)
            )?;
        }
        writeln!(out, ",{},{},{}", r.ops_stage1, r.ops_stage2, r.ops_total())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_instance, CostModel, InstanceEnsembleConfig};
    use crate::model::three_state_example;
    use crate::stage2::compute_index_table;

    #[test]
    fn instance_roundtrip_is_exact() {
        let mut cfg = InstanceEnsembleConfig::new(2, 5, 7, 1, 0.85);
        cfg.startup = CostModel::Uniform01;
        cfg.shutdown = CostModel::Constant(0.1);
        let specs = generate_instance(&cfg, 0).unwrap();
        let mut buf = Vec::new();
        write_instance_json(&mut buf, &specs).unwrap();
        let back = read_instance_json(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, specs);
    }

    #[test]
    fn missing_costs_default_to_zero() {
        let text = r#"{"beta": 0.5, "projects": [{"P": [[1.0]], "R": [1.0]}]}"#;
        let specs = read_instance_json(text).unwrap();
        assert_eq!(specs[0].startup_cost, vec![0.0]);
    }

    #[test]
    fn invalid_instances_rejected() {
        let bad_rows = r#"{"beta": 0.5, "projects": [{"P": [[0.5]], "R": [1.0]}]}"#;
        assert!(matches!(read_instance_json(bad_rows), Err(Error::InvalidSpec(_))));
        assert!(read_instance_json(r#"{"beta": 0.5, "projects": []}"#).is_err());
        assert!(read_instance_json("{").is_err());
        let extra = r#"{"beta": 0.5, "projects": [{"P": [[1.0]], "R": [1.0], "x": 1}]}"#;
        assert!(read_instance_json(extra).is_err());
    }

    #[test]
    fn index_csv_roundtrip() {
        let mut s = three_state_example();
        s.startup_cost = vec![0.3; 3];
        let t = compute_index_table(&s).unwrap();
        let mut buf = Vec::new();
        write_index_csv(&mut buf, &t, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("state,nu_cont,nu_switch,op_count_stage1,op_count_stage2\n1,"));
        let (cont, switch) = read_index_csv(&text).unwrap();
        assert_eq!(cont, t.nu_cont);
        assert_eq!(switch, t.nu_switch);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
