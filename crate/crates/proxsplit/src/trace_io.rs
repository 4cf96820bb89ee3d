//! CSV serialization of run traces: `#`-prefixed metadata lines, a fixed
//! scalar column schema, and optional full-point columns. All floats are
//! printed with 17 significant digits so files round-trip exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::solver::{IterateRecord, RunTrace, StepsizeRule, StopReason};

/// 17-significant-digit scientific notation: round-trips f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::TraceParse {
        line,
        msg: format!("bad float for {what}: {s:?}"),
    })
}

fn point_cols(prefix: &str, dim: usize) -> String {
    (0..dim)
        .map(|j| format!(",{prefix}_{j}"))
        .collect::<String>()
}

fn point_cells(p: Option<&Point>, dim: usize) -> String {
    match p {
        Some(p) => (0..dim).map(|j| format!(",{}", fmt_f64(p[j]))).collect(),
        None => ",".repeat(dim),
    }
}

pub fn write_trace<W: Write>(out: &mut W, trace: &RunTrace) -> Result<()> {
    let dim = trace.dim;
    writeln!(out, "# schema_version=1")?;
    writeln!(out, "# dim={dim}")?;
    writeln!(out, "# rule={}", trace.rule.name())?;
    writeln!(out, "# stop={}", trace.stop)?;
    writeln!(out, "# stop_iter={}", trace.stop_iter)?;
    writeln!(out, "# stop_tol={}", fmt_f64(trace.stop_tol))?;
    writeln!(out, "# record_every={}", trace.record_every)?;
    writeln!(out, "# final_value={}", fmt_f64(trace.final_value))?;
    writeln!(out, "# best_value={}", fmt_f64(trace.best_value))?;
    writeln!(
        out,
        "# final_x={}",
        (0..dim)
            .map(|j| fmt_f64(trace.final_x[j]))
            .collect::<Vec<_>>()
            .join(",")
    )?;
    writeln!(
        out,
        "k,value,best,ergodic_value,alpha,u_norm,w_norm,step_norm,uw_norm,target{}{}{}{}",
        point_cols("x", dim),
        point_cols("u", dim),
        point_cols("w", dim),
        point_cols("ergodic_x", dim),
    )?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}{}{}{}{}",
            r.k,
            fmt_f64(r.value),
            fmt_f64(r.best_value),
            fmt_f64(r.ergodic_value),
            fmt_f64(r.alpha),
            fmt_f64(r.u_norm),
            fmt_f64(r.w_norm),
            fmt_f64(r.step_norm),
            fmt_f64(r.uw_norm),
            r.target.map(fmt_f64).unwrap_or_default(),
            point_cells(r.x.as_ref(), dim),
            point_cells(r.u.as_ref(), dim),
            point_cells(r.w.as_ref(), dim),
            point_cells(r.ergodic_x.as_ref(), dim),
        )?;
    }
    Ok(())
}

pub fn write_trace_to_path(path: &std::path::Path, trace: &RunTrace) -> Result<()> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn parse_stop(s: &str, line: usize) -> Result<StopReason> {
    Ok(match s {
        "max_iters" => StopReason::MaxIters,
        "step_tol" => StopReason::StepTol,
        "target_reached" => StopReason::TargetReached,
        "stationary_denominator" => StopReason::StationaryDenominator,
        _ => {
            return Err(Error::TraceParse {
                line,
                msg: format!("unknown stop reason {s:?}"),
            })
        }
    })
}

fn parse_point_cells(
    cells: &[&str],
    start: usize,
    dim: usize,
    line: usize,
    what: &str,
) -> Result<Option<Point>> {
    let slice = &cells[start..start + dim];
    if slice.iter().all(|c| c.is_empty()) {
        return Ok(None);
    }
    let coords = slice
        .iter()
        .map(|c| parse_f64(c, line, what))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Some(Point::new(coords)?))
}

/// Reads a trace CSV back. The stepsize rule is not stored in the file
/// (only its name is, as a consistency check) and must come from the
/// experiment config that produced the trace.
pub fn read_trace<R: BufRead>(input: R, rule: StepsizeRule) -> Result<RunTrace> {
    let mut meta: HashMap<String, String> = HashMap::new();
    let mut header: Option<(Vec<String>, usize)> = None;
    let mut records: Vec<IterateRecord> = Vec::new();

    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if header.is_none() {
            let cols: Vec<String> = line.split(',').map(str::to_string).collect();
            if cols.first().map(String::as_str) != Some("k") {
                return Err(Error::TraceParse {
                    line: lineno,
                    msg: "header must start with the k column".into(),
                });
            }
            header = Some((cols, lineno));
            continue;
        }
        let dim: usize = meta
            .get("dim")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::TraceParse {
                line: lineno,
                msg: "missing or bad dim metadata before data rows".into(),
            })?;
        let cells: Vec<&str> = line.split(',').collect();
        let expected = 10 + 4 * dim;
        if cells.len() != expected {
            return Err(Error::TraceParse {
                line: lineno,
                msg: format!("expected {expected} cells, got {}", cells.len()),
            });
        }
        let k: usize = cells[0].parse().map_err(|_| Error::TraceParse {
            line: lineno,
            msg: format!("bad iteration index {:?}", cells[0]),
        })?;
        records.push(IterateRecord {
            k,
            value: parse_f64(cells[1], lineno, "value")?,
            best_value: parse_f64(cells[2], lineno, "best")?,
            ergodic_value: parse_f64(cells[3], lineno, "ergodic_value")?,
            alpha: parse_f64(cells[4], lineno, "alpha")?,
            u_norm: parse_f64(cells[5], lineno, "u_norm")?,
            w_norm: parse_f64(cells[6], lineno, "w_norm")?,
            step_norm: parse_f64(cells[7], lineno, "step_norm")?,
            uw_norm: parse_f64(cells[8], lineno, "uw_norm")?,
            target: if cells[9].is_empty() {
                None
            } else {
                Some(parse_f64(cells[9], lineno, "target")?)
            },
            x: parse_point_cells(&cells, 10, dim, lineno, "x")?,
            u: parse_point_cells(&cells, 10 + dim, dim, lineno, "u")?,
            w: parse_point_cells(&cells, 10 + 2 * dim, dim, lineno, "w")?,
            ergodic_x: parse_point_cells(&cells, 10 + 3 * dim, dim, lineno, "ergodic_x")?,
        });
    }

    let get = |key: &str| -> Result<&String> {
        meta.get(key).ok_or_else(|| Error::TraceParse {
            line: 0,
            msg: format!("missing metadata line '# {key}=...'"),
        })
    };
    let dim: usize = get("dim")?.parse().map_err(|_| Error::TraceParse {
        line: 0,
        msg: "bad dim metadata".into(),
    })?;
    if get("rule")?.as_str() != rule.name() {
        return Err(Error::TraceParse {
            line: 0,
            msg: format!(
                "trace was produced by the {} rule, config says {}",
                get("rule")?,
                rule.name()
            ),
        });
    }
    let final_x = Point::new(
        get("final_x")?
            .split(',')
            .map(|c| parse_f64(c, 0, "final_x"))
            .collect::<Result<Vec<f64>>>()?,
    )?;
    final_x.check_dim(dim, "trace final_x")?;
    Ok(RunTrace {
        dim,
        rule,
        stop_tol: parse_f64(get("stop_tol")?, 0, "stop_tol")?,
        record_every: get("record_every")?.parse().map_err(|_| Error::TraceParse {
            line: 0,
            msg: "bad record_every metadata".into(),
        })?,
        records,
        final_x,
        final_value: parse_f64(get("final_value")?, 0, "final_value")?,
        best_value: parse_f64(get("best_value")?, 0, "best_value")?,
        stop: parse_stop(get("stop")?, 0)?,
        stop_iter: get("stop_iter")?.parse().map_err(|_| Error::TraceParse {
            line: 0,
            msg: "bad stop_iter metadata".into(),
        })?,
    })
}

pub fn read_trace_from_path(path: &std::path::Path, rule: StepsizeRule) -> Result<RunTrace> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file), rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::solver::{run, RunConfig};

    fn sample_trace(record_every: usize) -> (RunTrace, StepsizeRule) {
        let p = gallery::lad_l1_desk(4, 2, 0.5, 1).unwrap();
        let rule = StepsizeRule::Exogenous { scale: 0.5, rate: 0.8 };
        let trace = run(
            p.f.as_ref(),
            p.g.as_ref(),
            &RunConfig {
                x0: Point::from(vec![1.0; p.dim]),
                rule: rule.clone(),
                max_iters: 25,
                stop_tol: 0.0,
                record_every,
            },
        )
        .unwrap();
        (trace, rule)
    }

    fn round_trip(trace: &RunTrace, rule: StepsizeRule) -> RunTrace {
        let mut buf = Vec::new();
        write_trace(&mut buf, trace).unwrap();
        read_trace(std::io::BufReader::new(buf.as_slice()), rule).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for record_every in [1, 5] {
            let (trace, rule) = sample_trace(record_every);
            let back = round_trip(&trace, rule);
            assert_eq!(back.dim, trace.dim);
            assert_eq!(back.stop, trace.stop);
            assert_eq!(back.stop_iter, trace.stop_iter);
            assert_eq!(back.final_x, trace.final_x);
            assert_eq!(back.final_value, trace.final_value);
            assert_eq!(back.best_value, trace.best_value);
            assert_eq!(back.records.len(), trace.records.len());
            for (a, b) in back.records.iter().zip(&trace.records) {
                assert_eq!(a.k, b.k);
                assert_eq!(a.value, b.value);
                assert_eq!(a.alpha, b.alpha);
                assert_eq!(a.uw_norm, b.uw_norm);
                assert_eq!(a.x, b.x);
                assert_eq!(a.u, b.u);
                assert_eq!(a.ergodic_x, b.ergodic_x);
                assert_eq!(a.target, b.target);
            }
        }
    }

    #[test]
    fn writes_are_byte_identical() {
        let (trace, _) = sample_trace(1);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trace(&mut a, &trace).unwrap();
        write_trace(&mut b, &trace).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn header_schema_is_stable() {
        let (trace, _) = sample_trace(1);
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert!(header.starts_with("k,value,best,ergodic_value,alpha,u_norm,w_norm,step_norm"));
    }

    #[test]
    fn rule_name_mismatch_is_rejected() {
        let (trace, _) = sample_trace(1);
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let err = read_trace(
            std::io::BufReader::new(buf.as_slice()),
            StepsizeRule::Constant { alpha: 1.0 },
        )
        .unwrap_err();
        assert!(err.to_string().contains("rule"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "# dim=1\n# rule=constant\nk,value,best,ergodic_value,alpha,u_norm,w_norm,step_norm,uw_norm,target,x_0,u_0,w_0,ergodic_x_0\n0,oops,1,1,1,1,0,0,1,,,,,\n";
        let err = read_trace(
            std::io::BufReader::new(text.as_bytes()),
            StepsizeRule::Constant { alpha: 1.0 },
        )
        .unwrap_err();
        match err {
            Error::TraceParse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other}"),
        }
    }
}
