use serde_json::{Map, Value};

use crate::dynamics::Trajectory;
use crate::matrix::ComplexMatrix;

pub(crate) struct FieldRow {
    pub point: Vec<f64>,
    pub mu: usize,
    pub matrix: ComplexMatrix,
}

/// Shortest round-trip form; exponent notation outside [1e-4, 1e15).
pub(crate) fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("all fields are UTF-8")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().flexible(false).from_writer(Vec::new())
}

pub(crate) fn trajectory(traj: &Trajectory, max_rows: usize) -> String {
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        header.push(format!("re_{i}"));
        header.push(format!("im_{i}"));
    }
    header.push("eta_norm".into());
    let mut w = writer();
    w.write_record(&header).expect("in-memory write");
    let stride = traj.len().div_ceil(max_rows.max(1)).max(1);
    let last = traj.len().saturating_sub(1);
    for k in (0..traj.len()).filter(|k| k % stride == 0 || *k == last) {
        let mut rec = vec![num(traj.times[k])];
        for z in traj.states[k].iter() {
            rec.push(num(z.re));
            rec.push(num(z.im));
        }
        rec.push(num(traj.eta_norms[k]));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

pub(crate) fn gauge_field(rows: &[FieldRow]) -> String {
    let mut w = writer();
    let Some(first) = rows.first() else {
        w.write_record(["mu"]).expect("in-memory write");
        return finish(w);
    };
    let (r, c) = first.matrix.shape();
    let mut header: Vec<String> = (0..first.point.len()).map(|i| format!("lambda_{i}")).collect();
    header.push("mu".into());
    for a in 0..r {
        for b in 0..c {
            header.push(format!("a{a}{b}_re"));
            header.push(format!("a{a}{b}_im"));
        }
    }
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut rec: Vec<String> = row.point.iter().map(|x| num(*x)).collect();
        rec.push(row.mu.to_string());
        for a in 0..r {
            for b in 0..c {
                let z = row.matrix[(a, b)];
                rec.push(num(z.re));
                rec.push(num(z.im));
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::Number(n)) => n.as_f64().map(num).unwrap_or_default(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

pub(crate) fn table(header: &[String], rows: &[Map<String, Value>]) -> String {
    let mut w = writer();
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(header.iter().map(|h| cell(row.get(h))))
            .expect("in-memory write");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -2.5e-9, 1e300, 123.456, 0.0, -1.0 / 3.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e-12), "1e-12");
    }

    #[test]
    fn empty_table_has_header_only() {
        let h = vec!["theta0".to_string(), "status".to_string(), "error".to_string()];
        assert_eq!(table(&h, &[]), "theta0,status,error\n");
    }

    #[test]
    fn text_with_commas_is_quoted() {
        let h = vec!["status".to_string(), "error".to_string()];
        let mut row = Map::new();
        row.insert("status".into(), "error".into());
        row.insert("error".into(), "outside (0, π)".into());
        assert_eq!(table(&h, &[row]), "status,error\nerror,\"outside (0, π)\"\n");
    }
}
